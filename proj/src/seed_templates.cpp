#include <cmath>

#include "graphdiff/builder.hpp"
#include "graphdiff/corpus.hpp"
#include "graphdiff/errors.hpp"
#include "graphdiff/serialize.hpp"

// Curated seed-graph templates. These stand in for a crawled model corpus:
// five structural families (MLP, attention-like matmul chain, embedding plus
// reduction, pooling chain, normalization chain) with seeded size and shape
// knobs so repeated draws produce architecture-distinct graphs.

namespace graphdiff {

int64_t GraphBuilder::input(TensorSpec spec) {
  Node n;
  n.kind = OpKind::Input;
  n.output_specs = {std::move(spec)};
  const int64_t id = g_.add_node(std::move(n));
  g_.inputs().push_back(id);
  return id;
}

int64_t GraphBuilder::constant(Tensor payload) {
  Node n;
  n.kind = OpKind::Constant;
  n.output_specs = {payload.spec()};
  n.payload = std::move(payload);
  return g_.add_node(std::move(n));
}

int64_t GraphBuilder::constant_scalar(DType dtype, double value) {
  return constant(Tensor::full(TensorSpec{{}, dtype, true}, value));
}

int64_t add_inferred_op(Graph& g, OpKind kind, std::vector<NodeInput> inputs, Attrs attrs,
                        int64_t symbolic_guess) {
  Node n;
  n.kind = kind;
  n.attrs = std::move(attrs);
  n.inputs = std::move(inputs);

  std::vector<InferredSpec> ins;
  for (const auto& in : n.inputs) {
    const auto& spec = g.node(in.node).output_specs[static_cast<size_t>(in.slot)];
    ins.push_back(InferredSpec{spec.shape, spec.dtype, spec.contiguous});
  }
  auto result = infer_node_specs(n, ins);
  if (auto* e = std::get_if<ShapeError>(&result))
    throw Error(Errc::InvalidArgument,
                std::string("builder: ") + to_string(kind) + ": expected " + e->expected +
                    ", got " + e->actual);
  for (const auto& inf : std::get<std::vector<InferredSpec>>(result)) {
    TensorSpec spec;
    spec.dtype = inf.dtype;
    spec.contiguous = inf.contiguous;
    spec.shape = inf.shape;
    for (auto& e : spec.shape)
      if (e == kSymbolicExtent) e = symbolic_guess;
    n.output_specs.push_back(std::move(spec));
  }
  return g.add_node(std::move(n));
}

int64_t GraphBuilder::op(OpKind kind, std::vector<NodeInput> inputs, Attrs attrs,
                         int64_t symbolic_guess) {
  return add_inferred_op(g_, kind, std::move(inputs), std::move(attrs), symbolic_guess);
}

int64_t GraphBuilder::output(NodeInput from) {
  Node n;
  n.kind = OpKind::Output;
  n.inputs = {from};
  n.output_specs = {g_.node(from.node).output_specs[static_cast<size_t>(from.slot)]};
  const int64_t id = g_.add_node(std::move(n));
  g_.outputs().push_back(id);
  return id;
}

namespace {

Tensor random_float_tensor(Rng& rng, TensorSpec spec, double lo, double hi) {
  Tensor t(std::move(spec));
  for (int64_t i = 0; i < t.count(); ++i) t.set_f(i, rng.uniform(lo, hi));
  return t;
}

Tensor random_int_tensor(Rng& rng, TensorSpec spec, int64_t lo, int64_t hi) {
  Tensor t(std::move(spec));
  for (int64_t i = 0; i < t.count(); ++i) t.set_i(i, rng.range_i64(lo, hi));
  return t;
}

DType pick_float_dtype(Rng& rng) { return rng.chance(0.3) ? DType::F64 : DType::F32; }

OpKind pick_activation(Rng& rng) {
  static const std::vector<OpKind> acts = {OpKind::Relu, OpKind::HardTanh, OpKind::Sigmoid};
  return acts[static_cast<size_t>(rng.bounded(acts.size()))];
}

Attrs activation_attrs(OpKind k) {
  if (k == OpKind::HardTanh) return Attrs{{"min_val", -1.0}, {"max_val", 1.0}};
  return {};
}

OpKind pick_binary(Rng& rng) {
  static const std::vector<OpKind> ops = {OpKind::Add, OpKind::Sub, OpKind::Mul, OpKind::Div,
                                          OpKind::Remainder};
  return ops[static_cast<size_t>(rng.bounded(ops.size()))];
}

Graph template_mlp(Rng& rng) {
  GraphBuilder b;
  const DType dt = pick_float_dtype(rng);
  const int64_t m = rng.range_i64(2, 4);
  int64_t width = rng.range_i64(2, 5);
  const int depth = static_cast<int>(rng.range_i64(1, 3));

  int64_t x = b.input(TensorSpec{{m, width}, dt, true});
  NodeInput cur{x, 0};
  for (int layer = 0; layer < depth; ++layer) {
    const int64_t next = rng.range_i64(2, 5);
    int64_t w = b.constant(random_float_tensor(rng, TensorSpec{{width, next}, dt, true}, -1, 1));
    int64_t bias = b.constant(random_float_tensor(rng, TensorSpec{{next}, dt, true}, -0.5, 0.5));
    int64_t mm = b.op(OpKind::AddMM, {{bias, 0}, cur, {w, 0}});
    const OpKind act = pick_activation(rng);
    cur = {b.op(act, {{mm, 0}}, activation_attrs(act)), 0};
    width = next;
  }
  if (rng.chance(0.5)) {
    int64_t noise =
        b.constant(random_float_tensor(rng, TensorSpec{{m, width}, dt, true}, 0.5, 1.5));
    cur = {b.op(pick_binary(rng), {cur, {noise, 0}}), 0};
  }
  b.output(cur);
  return b.take();
}

Graph template_attention(Rng& rng) {
  GraphBuilder b;
  const DType dt = pick_float_dtype(rng);
  const int64_t n = rng.range_i64(2, 4);
  const int64_t d = rng.range_i64(2, 4);
  const int heads = static_cast<int>(rng.range_i64(1, 2));

  int64_t q = b.input(TensorSpec{{n, d}, dt, true});
  int64_t k = b.input(TensorSpec{{n, d}, dt, true});
  int64_t v = b.input(TensorSpec{{n, d}, dt, true});

  NodeInput combined{-1, 0};
  for (int h = 0; h < heads; ++h) {
    int64_t kt = b.op(OpKind::Transpose, {{k, 0}}, Attrs{{"dim0", int64_t{0}}, {"dim1", int64_t{1}}});
    int64_t scores = b.op(OpKind::MatMul, {{q, 0}, {kt, 0}});
    int64_t weights = b.op(OpKind::Sigmoid, {{scores, 0}});
    int64_t mixed = b.op(OpKind::MatMul, {{weights, 0}, {v, 0}});
    combined = (h == 0) ? NodeInput{mixed, 0}
                        : NodeInput{b.op(OpKind::Add, {combined, {mixed, 0}}), 0};
  }
  if (rng.chance(0.5)) combined = {b.op(OpKind::Relu, {combined}), 0};
  b.output(combined);
  if (rng.chance(0.3)) b.output({b.op(OpKind::Sum, {combined}), 0});
  return b.take();
}

Graph template_embedding(Rng& rng) {
  GraphBuilder b;
  const DType dt = pick_float_dtype(rng);
  const int64_t rows = rng.range_i64(3, 8);
  const int64_t dim = rng.range_i64(2, 4);
  const DType idx_dt = rng.chance(0.5) ? DType::I64 : DType::I32;

  const int flavor = static_cast<int>(rng.bounded(3));
  NodeInput gathered{-1, 0};
  if (flavor == 0) {
    int64_t weight =
        b.constant(random_float_tensor(rng, TensorSpec{{rows, dim}, dt, true}, -1, 1));
    int64_t indices = b.input(TensorSpec{{rng.range_i64(3, 6)}, idx_dt, true});
    int64_t offsets = b.input(TensorSpec{{rng.range_i64(2, 4)}, idx_dt, true});
    gathered = {b.op(OpKind::EmbeddingBag, {{weight, 0}, {indices, 0}, {offsets, 0}}), 0};
  } else if (flavor == 1) {
    int64_t data = b.constant(random_float_tensor(rng, TensorSpec{{rows, dim}, dt, true}, -1, 1));
    int64_t indices = b.input(TensorSpec{{rng.range_i64(2, 5)}, idx_dt, true});
    gathered = {b.op(OpKind::IndexSelect, {{data, 0}, {indices, 0}}, Attrs{{"dim", int64_t{0}}}), 0};
  } else {
    int64_t data = b.input(TensorSpec{{rows, dim}, dt, true});
    int64_t indices = b.input(TensorSpec{{rng.range_i64(2, 5), dim}, idx_dt, true});
    gathered = {b.op(OpKind::Gather, {{data, 0}, {indices, 0}}, Attrs{{"dim", int64_t{0}}}), 0};
  }

  if (rng.chance(0.4)) {
    gathered = {b.op(OpKind::NonZeroSelect, {gathered}, {}, /*symbolic_guess=*/4), 0};
  }
  static const std::vector<OpKind> reducers = {OpKind::Sum, OpKind::Mean, OpKind::Max,
                                               OpKind::ArgMax};
  OpKind red = reducers[static_cast<size_t>(rng.bounded(reducers.size()))];
  if (red == OpKind::Mean && !is_float_dtype(b.graph().node(gathered.node).output_specs[0].dtype))
    red = OpKind::Sum;
  b.output({b.op(red, {gathered}), 0});
  return b.take();
}

Graph template_pooling(Rng& rng) {
  GraphBuilder b;
  const DType dt = pick_float_dtype(rng);

  if (rng.chance(0.5)) {
    // pool then unpool back into a dense buffer
    const int64_t len = rng.range_i64(6, 12);
    const int64_t kernel = rng.range_i64(2, 3);
    const int64_t stride = rng.range_i64(1, 2);
    int64_t x = b.input(TensorSpec{{len}, dt, true});
    int64_t pool = b.op(OpKind::MaxPool1d, {{x, 0}},
                        Attrs{{"kernel_size", kernel}, {"stride", stride}});
    int64_t up = b.op(OpKind::MaxUnpool2d, {{pool, 0}, {pool, 1}},
                      Attrs{{"out_shape", std::vector<int64_t>{1, len}}});
    int64_t flat = b.op(OpKind::Flatten, {{up, 0}});
    int64_t y = b.op(OpKind::Sub, {{x, 0}, {flat, 0}});
    b.output({y, 0});
  } else {
    // scatter from an index input; duplicate indices are the interesting case
    const int64_t n = rng.range_i64(3, 6);
    const int64_t h = rng.range_i64(2, 3);
    const int64_t w = rng.range_i64(2, 3);
    int64_t data = b.input(TensorSpec{{n}, dt, true});
    int64_t idx = b.input(TensorSpec{{n}, rng.chance(0.5) ? DType::I64 : DType::I32, true});
    int64_t up = b.op(OpKind::MaxUnpool2d, {{data, 0}, {idx, 0}},
                      Attrs{{"out_shape", std::vector<int64_t>{h, w}}});
    NodeInput cur{up, 0};
    if (rng.chance(0.5)) cur = {b.op(OpKind::Relu, {cur}), 0};
    b.output(cur);
  }
  return b.take();
}

Graph template_normalization(Rng& rng) {
  GraphBuilder b;
  const DType dt = pick_float_dtype(rng);
  const int64_t m = rng.range_i64(2, 4);
  const int64_t c = rng.range_i64(2, 5);

  int64_t x = b.input(TensorSpec{{m, c}, dt, true});
  int64_t bn = b.op(OpKind::BatchNorm, {{x, 0}}, Attrs{{"eps", 1e-5}});
  int64_t noise = b.constant(random_float_tensor(rng, TensorSpec{{m, c}, dt, true}, -1, 1));
  int64_t mixed = b.op(pick_binary(rng), {{bn, 0}, {noise, 0}});
  const OpKind act = pick_activation(rng);
  NodeInput cur{b.op(act, {{mixed, 0}}, activation_attrs(act)), 0};

  const int tail = static_cast<int>(rng.bounded(3));
  if (tail == 0) {
    b.output(cur);
    b.output({b.op(OpKind::Mean, {cur}), 0});
  } else if (tail == 1) {
    // integer tail: cast then integer arithmetic
    int64_t as_int = b.op(OpKind::Cast, {cur}, Attrs{{"to", std::string("i64")}});
    int64_t divisor = b.constant(random_int_tensor(rng, TensorSpec{{m, c}, DType::I64, true}, 0, 4));
    int64_t q = b.op(rng.chance(0.5) ? OpKind::Div : OpKind::Remainder,
                     {{as_int, 0}, {divisor, 0}});
    b.output({q, 0});
  } else {
    // data-dependent tail
    int64_t mask = b.op(OpKind::Cast, {cur}, Attrs{{"to", std::string("bool")}});
    int64_t where = b.op(OpKind::Where, {{mask, 0}}, {}, /*symbolic_guess=*/m * c / 2 + 1);
    b.output({b.op(OpKind::Sum, {{where, 0}}), 0});
  }
  return b.take();
}

using TemplateFn = Graph (*)(Rng&);

Graph append_distinct_tail(Graph g, Rng& rng, int extra) {
  // lengthen the final chain to force a distinct architecture
  GraphBuilder b;
  b.graph() = std::move(g);
  Graph& graph = b.graph();
  if (graph.outputs().empty()) return b.take();
  const int64_t out_id = graph.outputs().back();
  const NodeInput src = graph.node(out_id).inputs[0];
  const auto& spec = graph.node(src.node).output_specs[static_cast<size_t>(src.slot)];
  if (!is_float_dtype(spec.dtype)) return b.take();
  graph.outputs().pop_back();
  graph.remove_node(out_id);
  NodeInput cur = src;
  for (int i = 0; i < extra; ++i) cur = {b.op(OpKind::Relu, {cur}), 0};
  b.output(cur);
  (void)rng;
  return b.take();
}

}  // namespace

Corpus generate_seed_corpus(Rng& rng, int count) {
  if (count < 1) throw Error(Errc::InvalidArgument, "count must be >= 1");
  static const std::vector<TemplateFn> templates = {
      template_mlp, template_attention, template_embedding, template_pooling,
      template_normalization};

  Corpus corpus;
  int duplicates = 0;
  while (static_cast<int>(corpus.size()) < count) {
    auto fn = templates[static_cast<size_t>(rng.bounded(templates.size()))];
    Graph g = fn(rng);
    if (duplicates > 0) g = append_distinct_tail(std::move(g), rng, duplicates % 7 + 1);
    if (auto issue = validate(g))
      throw Error(Errc::InvalidArgument,
                  "seed template produced invalid graph: " + issue->detail);
    if (corpus.insert(std::move(g), "seed-template"))
      duplicates = 0;
    else
      ++duplicates;
  }
  return corpus;
}

}  // namespace graphdiff
