#include "graphdiff/graph.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "graphdiff/errors.hpp"

namespace graphdiff {

int64_t Graph::add_node(Node node) {
  if (node.id < 0) node.id = next_id();
  const int64_t id = node.id;
  nodes_[id] = std::move(node);
  return id;
}

size_t Graph::operator_count() const {
  size_t n = 0;
  for (const auto& [id, node] : nodes_)
    if (is_operator(node.kind)) ++n;
  return n;
}

std::map<int64_t, std::vector<std::pair<int64_t, int>>> Graph::consumer_map() const {
  std::map<int64_t, std::vector<std::pair<int64_t, int>>> m;
  for (const auto& [id, node] : nodes_) {
    for (size_t slot = 0; slot < node.inputs.size(); ++slot)
      m[node.inputs[slot].node].emplace_back(id, static_cast<int>(slot));
  }
  return m;
}

const char* to_string(ValidationIssue::Kind k) {
  switch (k) {
    case ValidationIssue::Kind::CycleDetected: return "CycleDetected";
    case ValidationIssue::Kind::DanglingEdge: return "DanglingEdge";
    case ValidationIssue::Kind::SignatureMismatch: return "SignatureMismatch";
  }
  return "?";
}

std::vector<int64_t> topo_order(const Graph& g) {
  std::map<int64_t, int> pending;  // unresolved producer count
  for (const auto& [id, node] : g.nodes()) pending[id] = static_cast<int>(node.inputs.size());

  auto consumers = g.consumer_map();
  std::set<int64_t> ready;
  for (const auto& [id, count] : pending)
    if (count == 0) ready.insert(id);

  std::vector<int64_t> order;
  order.reserve(g.nodes().size());
  while (!ready.empty()) {
    const int64_t id = *ready.begin();
    ready.erase(ready.begin());
    order.push_back(id);
    auto it = consumers.find(id);
    if (it == consumers.end()) continue;
    for (const auto& [consumer, slot] : it->second) {
      (void)slot;
      if (--pending[consumer] == 0) ready.insert(consumer);
    }
  }
  if (order.size() != g.nodes().size())
    throw Error(Errc::CycleDetected, "graph contains a cycle");
  return order;
}

namespace {

std::string shape_str(const std::vector<int64_t>& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    if (shape[i] == kSymbolicExtent)
      os << "?";
    else
      os << shape[i];
  }
  os << "]";
  return os.str();
}

bool extent_compatible(int64_t a, int64_t b) {
  return a == kSymbolicExtent || b == kSymbolicExtent || a == b;
}

int64_t merge_extent(int64_t a, int64_t b) { return a == kSymbolicExtent ? b : a; }

// element count; kSymbolicExtent when any dim is symbolic
int64_t count_of(const std::vector<int64_t>& shape) {
  int64_t n = 1;
  for (int64_t e : shape) {
    if (e == kSymbolicExtent) return kSymbolicExtent;
    n *= e;
  }
  return n;
}

ShapeError err(const Node& n, std::string expected, std::string actual) {
  return ShapeError{n.id, std::move(expected), std::move(actual)};
}

InferredSpec make_spec(std::vector<int64_t> shape, DType dt, bool contiguous = true) {
  return InferredSpec{std::move(shape), dt, contiguous};
}

// Transpose output contiguity, a pure function of the input shape and the
// swapped dims: views are materialized before transposing, so the result is
// contiguous exactly when the swapped strides are still row-major.
bool transpose_contiguous(const std::vector<int64_t>& in_shape, int d0, int d1) {
  auto strides = row_major_strides(in_shape);
  auto out_shape = in_shape;
  std::swap(strides[d0], strides[d1]);
  std::swap(out_shape[d0], out_shape[d1]);
  return strides == row_major_strides(out_shape);
}

}  // namespace

std::variant<std::vector<InferredSpec>, ShapeError> infer_node_specs(
    const Node& node, std::span<const InferredSpec> in) {
  using R = std::variant<std::vector<InferredSpec>, ShapeError>;
  const auto& sig = signature(node.kind);

  auto elementwise = [&](size_t n_inputs) -> R {
    std::vector<int64_t> shape = in[0].shape;
    for (size_t k = 1; k < n_inputs; ++k) {
      if (in[k].shape.size() != shape.size())
        return err(node, shape_str(shape), shape_str(in[k].shape));
      for (size_t d = 0; d < shape.size(); ++d) {
        if (!extent_compatible(shape[d], in[k].shape[d]))
          return err(node, shape_str(shape), shape_str(in[k].shape));
        shape[d] = merge_extent(shape[d], in[k].shape[d]);
      }
    }
    return std::vector<InferredSpec>{make_spec(std::move(shape), in[0].dtype)};
  };

  switch (node.kind) {
    case OpKind::Input:
    case OpKind::Constant:
      // handled by the caller (specs come from outside / payload)
      return std::vector<InferredSpec>{};
    case OpKind::Output:
      return std::vector<InferredSpec>{in[0]};

    case OpKind::Add:
    case OpKind::AddInPlace:
    case OpKind::Sub:
    case OpKind::Mul:
    case OpKind::Div:
    case OpKind::Remainder:
      return elementwise(2);
    case OpKind::AddCdiv:
      return elementwise(3);

    case OpKind::Relu:
    case OpKind::HardTanh:
    case OpKind::Sigmoid:
    case OpKind::BatchNorm:
      return std::vector<InferredSpec>{make_spec(in[0].shape, in[0].dtype)};

    case OpKind::MatMul: {
      if (in[0].shape.size() != 2 || in[1].shape.size() != 2)
        return err(node, "rank-2 operands", shape_str(in[0].shape) + "x" + shape_str(in[1].shape));
      if (!extent_compatible(in[0].shape[1], in[1].shape[0]))
        return err(node, "inner dim " + std::to_string(in[0].shape[1]),
                   std::to_string(in[1].shape[0]));
      return std::vector<InferredSpec>{
          make_spec({in[0].shape[0], in[1].shape[1]}, in[0].dtype)};
    }
    case OpKind::AddMM: {
      // inputs: bias, a, b
      if (in[1].shape.size() != 2 || in[2].shape.size() != 2)
        return err(node, "rank-2 operands", shape_str(in[1].shape) + "x" + shape_str(in[2].shape));
      if (!extent_compatible(in[1].shape[1], in[2].shape[0]))
        return err(node, "inner dim " + std::to_string(in[1].shape[1]),
                   std::to_string(in[2].shape[0]));
      const int64_t m = in[1].shape[0];
      const int64_t n = in[2].shape[1];
      const auto& bias = in[0].shape;
      const bool bias_ok =
          (bias.size() == 1 && extent_compatible(bias[0], n)) ||
          (bias.size() == 2 && extent_compatible(bias[0], m) && extent_compatible(bias[1], n));
      if (!bias_ok)
        return err(node, "bias [" + std::to_string(n) + "] or [" + std::to_string(m) + "," +
                             std::to_string(n) + "]",
                   shape_str(bias));
      return std::vector<InferredSpec>{make_spec({m, n}, in[1].dtype)};
    }

    case OpKind::Reshape: {
      const auto target = attr_ivec(node.attrs, "shape");
      for (int64_t e : target)
        if (e < 0) return err(node, "non-negative target extents", shape_str(target));
      const int64_t in_count = count_of(in[0].shape);
      const int64_t out_count = count_of(target);
      if (in_count != kSymbolicExtent && in_count != out_count)
        return err(node, std::to_string(out_count) + " elements", std::to_string(in_count));
      return std::vector<InferredSpec>{make_spec(target, in[0].dtype)};
    }
    case OpKind::Flatten:
      return std::vector<InferredSpec>{make_spec({count_of(in[0].shape)}, in[0].dtype)};
    case OpKind::Slice: {
      const int64_t dim = attr_i(node.attrs, "dim");
      const int64_t start = attr_i(node.attrs, "start");
      const int64_t end = attr_i(node.attrs, "end");
      if (dim < 0 || dim >= static_cast<int64_t>(in[0].shape.size()))
        return err(node, "dim < rank", std::to_string(dim));
      if (start < 0 || end < start)
        return err(node, "0 <= start <= end", std::to_string(start) + ".." + std::to_string(end));
      const int64_t extent = in[0].shape[static_cast<size_t>(dim)];
      if (extent != kSymbolicExtent && end > extent)
        return err(node, "end <= " + std::to_string(extent), std::to_string(end));
      auto shape = in[0].shape;
      shape[static_cast<size_t>(dim)] = end - start;
      return std::vector<InferredSpec>{make_spec(std::move(shape), in[0].dtype)};
    }
    case OpKind::Pad: {
      const auto before = attr_ivec(node.attrs, "before");
      const auto after = attr_ivec(node.attrs, "after");
      if (before.size() != in[0].shape.size() || after.size() != in[0].shape.size())
        return err(node, "pad widths per dim", shape_str(before) + "/" + shape_str(after));
      for (size_t d = 0; d < before.size(); ++d)
        if (before[d] < 0 || after[d] < 0) return err(node, "non-negative pad widths", "");
      auto shape = in[0].shape;
      for (size_t d = 0; d < shape.size(); ++d)
        if (shape[d] != kSymbolicExtent) shape[d] += before[d] + after[d];
      return std::vector<InferredSpec>{make_spec(std::move(shape), in[0].dtype)};
    }
    case OpKind::Transpose: {
      const int64_t d0 = attr_i(node.attrs, "dim0");
      const int64_t d1 = attr_i(node.attrs, "dim1");
      const int64_t rank = static_cast<int64_t>(in[0].shape.size());
      if (d0 < 0 || d0 >= rank || d1 < 0 || d1 >= rank)
        return err(node, "dims < rank", std::to_string(d0) + "," + std::to_string(d1));
      auto shape = in[0].shape;
      std::swap(shape[static_cast<size_t>(d0)], shape[static_cast<size_t>(d1)]);
      bool contiguous = true;
      if (!in[0].symbolic())
        contiguous = transpose_contiguous(in[0].shape, static_cast<int>(d0), static_cast<int>(d1));
      return std::vector<InferredSpec>{make_spec(std::move(shape), in[0].dtype, contiguous)};
    }
    case OpKind::Cast: {
      const auto to = dtype_from_string(attr_s(node.attrs, "to"));
      if (!to) return err(node, "valid 'to' dtype", attr_s(node.attrs, "to", "<missing>"));
      return std::vector<InferredSpec>{make_spec(in[0].shape, *to)};
    }

    case OpKind::Gather: {
      const int64_t dim = attr_i(node.attrs, "dim");
      const auto& data = in[0].shape;
      const auto& index = in[1].shape;
      if (data.size() != index.size())
        return err(node, "index rank == data rank", shape_str(index));
      if (dim < 0 || dim >= static_cast<int64_t>(data.size()))
        return err(node, "dim < rank", std::to_string(dim));
      for (size_t d = 0; d < data.size(); ++d) {
        if (static_cast<int64_t>(d) == dim) continue;
        if (data[d] != kSymbolicExtent && index[d] != kSymbolicExtent && index[d] > data[d])
          return err(node, "index extent <= data extent at dim " + std::to_string(d),
                     shape_str(index));
      }
      return std::vector<InferredSpec>{make_spec(index, in[0].dtype)};
    }
    case OpKind::IndexSelect: {
      const int64_t dim = attr_i(node.attrs, "dim");
      if (in[1].shape.size() != 1) return err(node, "rank-1 index", shape_str(in[1].shape));
      if (dim < 0 || dim >= static_cast<int64_t>(in[0].shape.size()))
        return err(node, "dim < rank", std::to_string(dim));
      auto shape = in[0].shape;
      shape[static_cast<size_t>(dim)] = in[1].shape[0];
      return std::vector<InferredSpec>{make_spec(std::move(shape), in[0].dtype)};
    }
    case OpKind::EmbeddingBag: {
      if (in[0].shape.size() != 2) return err(node, "rank-2 weight", shape_str(in[0].shape));
      if (in[1].shape.size() != 1) return err(node, "rank-1 indices", shape_str(in[1].shape));
      if (in[2].shape.size() != 1) return err(node, "rank-1 offsets", shape_str(in[2].shape));
      return std::vector<InferredSpec>{make_spec({in[2].shape[0], in[0].shape[1]}, in[0].dtype)};
    }

    case OpKind::Where:
      return std::vector<InferredSpec>{make_spec({kSymbolicExtent}, DType::I64)};
    case OpKind::NonZeroSelect:
      return std::vector<InferredSpec>{make_spec({kSymbolicExtent}, in[0].dtype)};

    case OpKind::Sum:
    case OpKind::Max:
      return std::vector<InferredSpec>{make_spec({}, in[0].dtype)};
    case OpKind::Mean:
      return std::vector<InferredSpec>{make_spec({}, in[0].dtype)};
    case OpKind::ArgMax:
      return std::vector<InferredSpec>{make_spec({}, DType::I64)};

    case OpKind::MaxPool1d: {
      const int64_t k = attr_i(node.attrs, "kernel_size", 1);
      const int64_t s = attr_i(node.attrs, "stride", 1);
      if (in[0].shape.size() != 1) return err(node, "rank-1 input", shape_str(in[0].shape));
      if (k < 1 || s < 1) return err(node, "kernel_size >= 1 and stride >= 1", "");
      const int64_t len = in[0].shape[0];
      int64_t out_len = kSymbolicExtent;
      if (len != kSymbolicExtent) {
        if (len < k) return err(node, "input length >= kernel_size", std::to_string(len));
        out_len = (len - k) / s + 1;
      }
      return std::vector<InferredSpec>{make_spec({out_len}, in[0].dtype),
                                       make_spec({out_len}, DType::I64)};
    }
    case OpKind::MaxUnpool2d: {
      const auto out_shape = attr_ivec(node.attrs, "out_shape");
      if (out_shape.empty()) return err(node, "out_shape attr", "<missing>");
      for (int64_t e : out_shape)
        if (e < 0) return err(node, "non-negative out_shape", shape_str(out_shape));
      if (in[0].shape.size() != in[1].shape.size())
        return err(node, "indices rank == data rank", shape_str(in[1].shape));
      for (size_t d = 0; d < in[0].shape.size(); ++d)
        if (!extent_compatible(in[0].shape[d], in[1].shape[d]))
          return err(node, shape_str(in[0].shape), shape_str(in[1].shape));
      return std::vector<InferredSpec>{make_spec(out_shape, in[0].dtype)};
    }
  }
  (void)sig;
  return err(node, "known operator", "unknown");
}

namespace {

InferredSpec from_tensor_spec(const TensorSpec& s) {
  return InferredSpec{s.shape, s.dtype, s.contiguous};
}

// Validates one node's wiring and dtypes against its signature; returns an
// issue message or empty.
std::string check_signature(const Graph& g, const Node& node) {
  const auto& sig = signature(node.kind);
  if (static_cast<int>(node.inputs.size()) != sig.arity)
    return "arity " + std::to_string(sig.arity) + " expected, got " +
           std::to_string(node.inputs.size());
  if (static_cast<int>(node.output_specs.size()) != sig.num_outputs)
    return "expects " + std::to_string(sig.num_outputs) + " outputs, got " +
           std::to_string(node.output_specs.size());

  std::optional<DType> shared;
  for (size_t i = 0; i < node.inputs.size(); ++i) {
    const auto& producer = g.node(node.inputs[i].node);
    const auto& spec = producer.output_specs[static_cast<size_t>(node.inputs[i].slot)];
    if (!dtype_in_class(spec.dtype, sig.input_classes[i]))
      return "input " + std::to_string(i) + " dtype " + to_string(spec.dtype) + " not allowed";
    const bool counts_for_shared =
        sig.input_classes[i] == DtypeClass::Numeric || sig.input_classes[i] == DtypeClass::Float;
    if (sig.same_dtype_inputs && counts_for_shared) {
      if (shared && *shared != spec.dtype) return "mixed input dtypes";
      shared = spec.dtype;
    }
  }
  for (const auto& spec : node.output_specs) {
    for (int64_t e : spec.shape) {
      if (e < 0) return "negative extent in output spec";
      if (e > kMaxExtent) return "extent exceeds maximum";
    }
    if (spec.element_count() > kDefaultElementCap) return "output spec exceeds element cap";
  }
  if (node.kind == OpKind::Constant) {
    if (!node.payload) return "constant without payload";
    if (!(node.payload->spec().shape == node.output_specs[0].shape &&
          node.payload->spec().dtype == node.output_specs[0].dtype))
      return "constant payload spec differs from output spec";
  }
  return {};
}

}  // namespace

ValidationVerdict validate(const Graph& g) {
  using K = ValidationIssue::Kind;

  // edges reference existing nodes and valid slots
  for (const auto& [id, node] : g.nodes()) {
    for (const auto& in : node.inputs) {
      if (!g.has_node(in.node))
        return ValidationIssue{K::DanglingEdge, id,
                               "input references missing node " + std::to_string(in.node)};
      const auto& producer = g.node(in.node);
      if (in.slot < 0 || in.slot >= static_cast<int>(producer.output_specs.size()))
        return ValidationIssue{K::DanglingEdge, id,
                               "input references invalid slot " + std::to_string(in.slot)};
      if (producer.kind == OpKind::Output)
        return ValidationIssue{K::DanglingEdge, id, "consumes an output node"};
    }
  }
  for (int64_t id : g.inputs())
    if (!g.has_node(id) || g.node(id).kind != OpKind::Input)
      return ValidationIssue{K::DanglingEdge, id, "inputs list references non-input node"};
  for (int64_t id : g.outputs())
    if (!g.has_node(id) || g.node(id).kind != OpKind::Output)
      return ValidationIssue{K::DanglingEdge, id, "outputs list references non-output node"};

  // boundary nodes and the graph's input/output lists must agree one-to-one;
  // an unlisted input node would never receive a tensor
  {
    std::set<int64_t> listed_inputs(g.inputs().begin(), g.inputs().end());
    std::set<int64_t> listed_outputs(g.outputs().begin(), g.outputs().end());
    if (listed_inputs.size() != g.inputs().size())
      return ValidationIssue{K::DanglingEdge, -1, "duplicate entry in inputs list"};
    if (listed_outputs.size() != g.outputs().size())
      return ValidationIssue{K::DanglingEdge, -1, "duplicate entry in outputs list"};
    for (const auto& [id, node] : g.nodes()) {
      if (node.kind == OpKind::Input && !listed_inputs.count(id))
        return ValidationIssue{K::DanglingEdge, id, "input node missing from inputs list"};
      if (node.kind == OpKind::Output && !listed_outputs.count(id))
        return ValidationIssue{K::DanglingEdge, id, "output node missing from outputs list"};
    }
  }

  std::vector<int64_t> order;
  try {
    order = topo_order(g);
  } catch (const Error&) {
    // find a node on a cycle for the report: any node not drained by Kahn
    std::map<int64_t, int> pending;
    for (const auto& [id, node] : g.nodes()) pending[id] = static_cast<int>(node.inputs.size());
    auto consumers = g.consumer_map();
    std::set<int64_t> ready;
    for (const auto& [id, c] : pending)
      if (c == 0) ready.insert(id);
    std::set<int64_t> drained;
    while (!ready.empty()) {
      int64_t id = *ready.begin();
      ready.erase(ready.begin());
      drained.insert(id);
      for (const auto& [consumer, slot] : consumers[id]) {
        (void)slot;
        if (--pending[consumer] == 0) ready.insert(consumer);
      }
    }
    for (const auto& [id, node] : g.nodes())
      if (!drained.count(id))
        return ValidationIssue{K::CycleDetected, id, "node participates in a cycle"};
    return ValidationIssue{K::CycleDetected, -1, "cycle detected"};
  }

  // signatures + recorded specs against shape inference
  std::map<int64_t, std::vector<InferredSpec>> inferred;
  for (int64_t id : order) {
    const Node& node = g.node(id);
    if (auto msg = check_signature(g, node); !msg.empty())
      return ValidationIssue{K::SignatureMismatch, id, msg};

    std::vector<InferredSpec> ins;
    ins.reserve(node.inputs.size());
    for (const auto& in : node.inputs)
      ins.push_back(inferred.at(in.node)[static_cast<size_t>(in.slot)]);

    std::vector<InferredSpec> outs;
    if (node.kind == OpKind::Input || node.kind == OpKind::Constant) {
      outs.push_back(from_tensor_spec(node.output_specs[0]));
    } else {
      auto result = infer_node_specs(node, ins);
      if (auto* e = std::get_if<ShapeError>(&result))
        return ValidationIssue{K::SignatureMismatch, id,
                               "shape: expected " + e->expected + ", got " + e->actual};
      outs = std::move(std::get<std::vector<InferredSpec>>(result));
    }

    // recorded specs must agree with inference wherever inference is concrete
    for (size_t s = 0; s < outs.size(); ++s) {
      const auto& rec = node.output_specs[s];
      const auto& inf = outs[s];
      if (rec.dtype != inf.dtype)
        return ValidationIssue{K::SignatureMismatch, id, "recorded dtype differs from inferred"};
      if (rec.shape.size() != inf.shape.size())
        return ValidationIssue{K::SignatureMismatch, id, "recorded rank differs from inferred"};
      for (size_t d = 0; d < inf.shape.size(); ++d)
        if (inf.shape[d] != kSymbolicExtent && inf.shape[d] != rec.shape[d])
          return ValidationIssue{K::SignatureMismatch, id,
                                 "recorded shape " + shape_str(rec.shape) + " differs from " +
                                     shape_str(inf.shape)};
      if (rec.contiguous != inf.contiguous)
        return ValidationIssue{K::SignatureMismatch, id, "recorded contiguity differs"};
      // replace symbolic dims by recorded extents for downstream checks
      auto concrete = inf;
      for (size_t d = 0; d < concrete.shape.size(); ++d)
        if (concrete.shape[d] == kSymbolicExtent && node.kind != OpKind::Where &&
            node.kind != OpKind::NonZeroSelect)
          concrete.shape[d] = rec.shape[d];
      outs[s] = concrete;
    }
    inferred[id] = std::move(outs);
  }
  return std::nullopt;
}

std::variant<ShapeInference, ShapeError> infer_shapes(const Graph& g,
                                                      std::span<const TensorSpec> input_specs) {
  if (input_specs.size() != g.inputs().size())
    return ShapeError{-1, std::to_string(g.inputs().size()) + " input specs",
                      std::to_string(input_specs.size())};
  std::map<int64_t, size_t> input_pos;
  for (size_t i = 0; i < g.inputs().size(); ++i) input_pos[g.inputs()[i]] = i;

  ShapeInference result;
  for (int64_t id : topo_order(g)) {
    const Node& node = g.node(id);
    std::vector<InferredSpec> outs;
    if (node.kind == OpKind::Input) {
      outs.push_back(from_tensor_spec(input_specs[input_pos.at(id)]));
    } else if (node.kind == OpKind::Constant) {
      outs.push_back(from_tensor_spec(node.output_specs[0]));
    } else {
      std::vector<InferredSpec> ins;
      ins.reserve(node.inputs.size());
      for (const auto& in : node.inputs)
        ins.push_back(result.per_node.at(in.node)[static_cast<size_t>(in.slot)]);
      auto r = infer_node_specs(node, ins);
      if (auto* e = std::get_if<ShapeError>(&r)) return *e;
      outs = std::move(std::get<std::vector<InferredSpec>>(r));
    }
    result.per_node[id] = std::move(outs);
  }
  return result;
}

}  // namespace graphdiff
