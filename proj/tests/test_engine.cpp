#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <set>

#include "graphdiff/builder.hpp"
#include "graphdiff/engine.hpp"
#include "graphdiff/inputgen.hpp"
#include "graphdiff/synth.hpp"
#include "test_util.hpp"

using namespace graphdiff;
using graphdiff::test::make_linear_relu_graph;

namespace {

std::shared_ptr<const Graph> shared(Graph g) {
  return std::make_shared<const Graph>(std::move(g));
}

Tensor filled(TensorSpec spec, double v) { return Tensor::full(std::move(spec), v); }

// single binary op graph over scalars of the given dtype
struct BinOpFixture {
  std::shared_ptr<const Graph> graph;
  int64_t op_id;
  int64_t out;
};

BinOpFixture bin_op(OpKind kind, DType dt) {
  GraphBuilder b;
  int64_t x = b.input(TensorSpec{{}, dt, true});
  int64_t y = b.input(TensorSpec{{}, dt, true});
  int64_t op = b.op(kind, {{x, 0}, {y, 0}});
  int64_t out = b.output({op, 0});
  return {shared(b.take()), op, out};
}

const Tensor& output_of(const ExecutionTrace& t, int64_t node) {
  return t.outcomes.at(node).outputs[0];
}

}  // namespace

TEST_CASE("reference execution of the linear+relu model") {
  // identity weight and zero bias: relu output equals x1+x2 elementwise
  auto fixture = make_linear_relu_graph(DType::F64, true);
  auto g = shared(fixture.graph);
  auto trace = execute_reference(
      g, std::vector<Tensor>{filled(TensorSpec{{2, 2}, DType::F64, true}, 0.5),
                             filled(TensorSpec{{2, 2}, DType::F64, true}, 0.5)});
  const Tensor& out = output_of(trace, fixture.out);
  for (int64_t i = 0; i < 4; ++i) CHECK(out.get_f(i) == 1.0);
}

TEST_CASE("unsupported operator errors and dependents are skipped") {
  auto fixture = make_linear_relu_graph(DType::F64, true);
  auto g = shared(fixture.graph);
  BackendProfile profile = builtin_profile("reference");
  profile.name = "no-relu";
  profile.unsupported_ops.insert(OpKind::Relu);
  auto trace = execute(profile, g,
                       std::vector<Tensor>{filled(TensorSpec{{2, 2}, DType::F64, true}, 0.5),
                                           filled(TensorSpec{{2, 2}, DType::F64, true}, 0.5)});
  const auto& relu = trace.outcomes.at(fixture.relu);
  REQUIRE(relu.status == NodeOutcome::Status::Error);
  CHECK(relu.error->kind == NodeErrorKind::Unsupported);
  CHECK(trace.outcomes.at(fixture.out).status == NodeOutcome::Status::Skipped);
  // upstream nodes still executed
  CHECK(trace.outcomes.at(fixture.addmm).status == NodeOutcome::Status::Ok);
}

TEST_CASE("bounds policy: strict errors, wrap reads modulo the extent") {
  GraphBuilder b;
  int64_t data = b.input(TensorSpec{{4}, DType::F64, true});
  int64_t idx = b.input(TensorSpec{{1}, DType::I64, true});
  int64_t sel = b.op(OpKind::Gather, {{data, 0}, {idx, 0}}, Attrs{{"dim", int64_t{0}}});
  int64_t out = b.output({sel, 0});
  auto g = shared(b.take());

  Tensor data_t{TensorSpec{{4}, DType::F64, true}};
  for (int64_t i = 0; i < 4; ++i) data_t.set_f(i, 10.0 + static_cast<double>(i));
  Tensor idx_t{TensorSpec{{1}, DType::I64, true}};
  idx_t.set_i(0, 7);

  BackendProfile strict = builtin_profile("reference");
  auto strict_trace = execute(strict, g, std::vector<Tensor>{data_t, idx_t});
  REQUIRE(strict_trace.outcomes.at(sel).status == NodeOutcome::Status::Error);
  CHECK(strict_trace.outcomes.at(sel).error->kind == NodeErrorKind::OutOfBounds);

  BackendProfile wrap = builtin_profile("relaxed-a");  // unchecked wrap
  auto wrap_trace = execute(wrap, g, std::vector<Tensor>{data_t, idx_t});
  REQUIRE(wrap_trace.outcomes.at(sel).status == NodeOutcome::Status::Ok);
  CHECK(output_of(wrap_trace, out).get_f(0) == 13.0);  // 7 mod 4 = 3
}

TEST_CASE("integer division by zero follows the profile table") {
  auto fx = bin_op(OpKind::Div, DType::I32);
  Tensor five = Tensor::full_int(TensorSpec{{}, DType::I32, true}, 5);
  Tensor zero = Tensor::full_int(TensorSpec{{}, DType::I32, true}, 0);
  const std::vector<Tensor> inputs = {five, zero};

  auto run = [&](const char* name) {
    return execute(builtin_profile(name), fx.graph, inputs);
  };
  CHECK(output_of(run("reference"), fx.out).get_i(0) == 4294967295LL);
  CHECK(output_of(run("parallel"), fx.out).get_i(0) == 6);  // dividend plus one
  CHECK(output_of(run("relaxed-a"), fx.out).get_i(0) == 0);

  auto err_trace = run("relaxed-b");  // error rule
  REQUIRE(err_trace.outcomes.at(fx.op_id).status == NodeOutcome::Status::Error);
  CHECK(err_trace.outcomes.at(fx.op_id).error->kind == NodeErrorKind::NumericFault);
}

TEST_CASE("integer remainder by zero shares the division-by-zero rule") {
  auto fx = bin_op(OpKind::Remainder, DType::I64);
  Tensor a = Tensor::full_int(TensorSpec{{}, DType::I64, true}, 9);
  Tensor zero = Tensor::full_int(TensorSpec{{}, DType::I64, true}, 0);
  auto trace = execute(builtin_profile("parallel"), fx.graph, std::vector<Tensor>{a, zero});
  CHECK(output_of(trace, fx.out).get_i(0) == 10);
}

TEST_CASE("casting infinity to integer follows the profile table") {
  GraphBuilder b;
  int64_t x = b.input(TensorSpec{{}, DType::F64, true});
  int64_t cast = b.op(OpKind::Cast, {{x, 0}}, Attrs{{"to", std::string("i64")}});
  int64_t out = b.output({cast, 0});
  auto g = shared(b.take());
  Tensor inf{TensorSpec{{}, DType::F64, true}};
  inf.set_f(0, std::numeric_limits<double>::infinity());

  auto ref = execute(builtin_profile("reference"), g, std::vector<Tensor>{inf});
  CHECK(output_of(ref, out).get_i(0) == std::numeric_limits<int64_t>::max());

  auto par = execute(builtin_profile("parallel"), g, std::vector<Tensor>{inf});
  CHECK(output_of(par, out).get_i(0) == -4294967296LL);

  auto rel = execute(builtin_profile("relaxed-a"), g, std::vector<Tensor>{inf});
  CHECK(output_of(rel, out).get_i(0) == 0);
  (void)cast;
}

TEST_CASE("sequential f64 summation cancels exactly") {
  GraphBuilder b;
  int64_t x = b.input(TensorSpec{{3}, DType::F64, true});
  int64_t s = b.op(OpKind::Sum, {{x, 0}});
  int64_t out = b.output({s, 0});
  auto g = shared(b.take());
  Tensor v{TensorSpec{{3}, DType::F64, true}};
  v.set_f(0, 1e16);
  v.set_f(1, 1.0);
  v.set_f(2, -1e16);
  auto trace = execute_reference(g, std::vector<Tensor>{v});
  // left-to-right IEEE: 1e16 + 1.0 ties-to-even back to 1e16 (ulp is 2 above
  // 2^53), so the sequential sum collapses to exactly 0.0
  CHECK(output_of(trace, out).get_f(0) == 0.0);
}

TEST_CASE("relu clamps negatives to zero") {
  GraphBuilder b;
  int64_t x = b.input(TensorSpec{{}, DType::F64, true});
  int64_t r = b.op(OpKind::Relu, {{x, 0}});
  int64_t out = b.output({r, 0});
  auto g = shared(b.take());
  Tensor v{TensorSpec{{}, DType::F64, true}};
  v.set_f(0, -3.0);
  auto trace = execute_reference(g, std::vector<Tensor>{v});
  CHECK(output_of(trace, out).get_f(0) == 0.0);
}

TEST_CASE("sum propagates NaN under the reference profile") {
  GraphBuilder b;
  int64_t x = b.input(TensorSpec{{4}, DType::F64, true});
  int64_t s = b.op(OpKind::Sum, {{x, 0}});
  int64_t out = b.output({s, 0});
  auto g = shared(b.take());
  Tensor v = filled(TensorSpec{{4}, DType::F64, true}, 1.0);
  v.set_f(2, std::numeric_limits<double>::quiet_NaN());
  auto trace = execute_reference(g, std::vector<Tensor>{v});
  CHECK(std::isnan(output_of(trace, out).get_f(0)));
}

TEST_CASE("relu propagates NaN instead of flushing it") {
  GraphBuilder b;
  int64_t x = b.input(TensorSpec{{}, DType::F64, true});
  int64_t out = b.output({b.op(OpKind::Relu, {{x, 0}}), 0});
  auto g = shared(b.take());
  Tensor v{TensorSpec{{}, DType::F64, true}};
  v.set_f(0, std::numeric_limits<double>::quiet_NaN());
  auto trace = execute_reference(g, std::vector<Tensor>{v});
  CHECK(std::isnan(output_of(trace, out).get_f(0)));
}

TEST_CASE("exceptional policy rewrites NaN to zero after a reshape") {
  GraphBuilder b;
  int64_t x = b.input(TensorSpec{{4}, DType::F64, true});
  int64_t r = b.op(OpKind::Reshape, {{x, 0}}, Attrs{{"shape", std::vector<int64_t>{2, 2}}});
  int64_t out = b.output({r, 0});
  auto g = shared(b.take());
  Tensor v = filled(TensorSpec{{4}, DType::F64, true}, 0.5);
  v.set_f(1, std::numeric_limits<double>::quiet_NaN());

  auto ref = execute_reference(g, std::vector<Tensor>{v});
  CHECK(std::isnan(output_of(ref, out).get_f(1)));

  auto rel = execute(builtin_profile("relaxed-a"), g, std::vector<Tensor>{v});
  CHECK(output_of(rel, out).get_f(1) == 0.0);
  CHECK(output_of(rel, out).get_f(0) == 0.5);
}

TEST_CASE("embedding bag offsets: strict errors, lenient clamps the bag range") {
  GraphBuilder b;
  int64_t weight = b.constant(Tensor::full(TensorSpec{{4, 2}, DType::F64, true}, 1.0));
  int64_t indices = b.input(TensorSpec{{3}, DType::I64, true});
  int64_t offsets = b.input(TensorSpec{{2}, DType::I64, true});
  int64_t bag = b.op(OpKind::EmbeddingBag, {{weight, 0}, {indices, 0}, {offsets, 0}});
  int64_t out = b.output({bag, 0});
  auto g = shared(b.take());

  Tensor idx = Tensor::full_int(TensorSpec{{3}, DType::I64, true}, 1);
  Tensor off{TensorSpec{{2}, DType::I64, true}};
  off.set_i(0, 0);
  off.set_i(1, 9);  // beyond the three indices
  const std::vector<Tensor> inputs = {idx, off};

  auto strict = execute_reference(g, inputs);
  REQUIRE(strict.outcomes.at(bag).status == NodeOutcome::Status::Error);
  CHECK(strict.outcomes.at(bag).error->kind == NodeErrorKind::OutOfBounds);

  auto lenient = execute(builtin_profile("relaxed-a"), g, inputs);
  REQUIRE(lenient.outcomes.at(bag).status == NodeOutcome::Status::Ok);
  // first bag covers indices [0, clamp(9)=3): three rows of ones
  CHECK(output_of(lenient, out).get_f(0) == 3.0);
  // second bag is empty after clamping
  CHECK(output_of(lenient, out).get_f(2) == 0.0);
}

TEST_CASE("max and argmax rank NaN above every number") {
  GraphBuilder b;
  int64_t x = b.input(TensorSpec{{3}, DType::F64, true});
  int64_t mx = b.op(OpKind::Max, {{x, 0}});
  int64_t am = b.op(OpKind::ArgMax, {{x, 0}});
  int64_t out_m = b.output({mx, 0});
  int64_t out_a = b.output({am, 0});
  auto g = shared(b.take());
  Tensor v{TensorSpec{{3}, DType::F64, true}};
  v.set_f(0, 1.0);
  v.set_f(1, std::numeric_limits<double>::quiet_NaN());
  v.set_f(2, 5.0);
  auto trace = execute_reference(g, std::vector<Tensor>{v});
  CHECK(std::isnan(output_of(trace, out_m).get_f(0)));
  CHECK(output_of(trace, out_a).get_i(0) == 1);
}

TEST_CASE("exceptional policy: NaN interpolated from flat neighbors") {
  GraphBuilder b;
  int64_t x = b.input(TensorSpec{{4}, DType::F64, true});
  int64_t r = b.op(OpKind::Reshape, {{x, 0}}, Attrs{{"shape", std::vector<int64_t>{4}}});
  int64_t out = b.output({r, 0});
  auto g = shared(b.take());

  BackendProfile interp = builtin_profile("reference");
  interp.name = "interp";
  interp.exceptional_policy[OpKind::Reshape] = ExceptionalRule::NanInterpolate;

  Tensor v{TensorSpec{{4}, DType::F64, true}};
  v.set_f(0, 1.0);
  v.set_f(1, std::numeric_limits<double>::quiet_NaN());
  v.set_f(2, 5.0);
  v.set_f(3, std::numeric_limits<double>::quiet_NaN());  // edge: single neighbor
  auto trace = execute(interp, g, std::vector<Tensor>{v});
  const Tensor& result = output_of(trace, out);
  CHECK(result.get_f(0) == 1.0);
  CHECK(result.get_f(1) == 3.0);  // mean of 1.0 and 5.0
  CHECK(result.get_f(2) == 5.0);
  CHECK(result.get_f(3) == 5.0);  // only the left neighbor exists and is finite
}

TEST_CASE("exceptional policy: Inf and NaN classes swap") {
  GraphBuilder b;
  int64_t x = b.input(TensorSpec{{3}, DType::F64, true});
  int64_t r = b.op(OpKind::Reshape, {{x, 0}}, Attrs{{"shape", std::vector<int64_t>{3}}});
  int64_t out = b.output({r, 0});
  auto g = shared(b.take());

  BackendProfile swapper = builtin_profile("reference");
  swapper.name = "swapper";
  swapper.exceptional_policy[OpKind::Reshape] = ExceptionalRule::InfNanSwap;

  Tensor v{TensorSpec{{3}, DType::F64, true}};
  v.set_f(0, std::numeric_limits<double>::quiet_NaN());
  v.set_f(1, std::numeric_limits<double>::infinity());
  v.set_f(2, 2.5);
  auto trace = execute(swapper, g, std::vector<Tensor>{v});
  const Tensor& result = output_of(trace, out);
  CHECK(std::isinf(result.get_f(0)));
  CHECK(result.get_f(0) > 0);
  CHECK(std::isnan(result.get_f(1)));
  CHECK(result.get_f(2) == 2.5);
}

TEST_CASE("sequential and chunked-tree reductions stay within 1e-10 on well-conditioned data") {
  Rng rng(2718);
  for (int trial = 0; trial < 20; ++trial) {
    const int64_t n = 1 + static_cast<int64_t>(rng.bounded(4096));
    GraphBuilder b;
    int64_t x = b.input(TensorSpec{{n}, DType::F64, true});
    int64_t s = b.op(OpKind::Sum, {{x, 0}});
    int64_t out = b.output({s, 0});
    auto g = shared(b.take());
    Tensor v{TensorSpec{{n}, DType::F64, true}};
    for (int64_t i = 0; i < n; ++i) v.set_f(i, rng.uniform());

    auto seq = execute(builtin_profile("reference"), g, std::vector<Tensor>{v});
    BackendProfile tree = builtin_profile("reference");
    tree.reduction_order = {ReductionOrder::Kind::FixedTreeChunked, 8};
    auto chunked = execute(tree, g, std::vector<Tensor>{v});
    CHECK(std::abs(output_of(seq, out).get_f(0) - output_of(chunked, out).get_f(0)) < 1e-10);
  }
}

namespace {

struct UnpoolFixture {
  std::shared_ptr<const Graph> graph;
  int64_t out;
  std::vector<Tensor> inputs;
};

UnpoolFixture duplicate_index_unpool() {
  GraphBuilder b;
  int64_t data = b.input(TensorSpec{{4}, DType::F64, true});
  int64_t idx = b.input(TensorSpec{{4}, DType::I64, true});
  int64_t up = b.op(OpKind::MaxUnpool2d, {{data, 0}, {idx, 0}},
                    Attrs{{"out_shape", std::vector<int64_t>{2, 2}}});
  int64_t out = b.output({up, 0});
  UnpoolFixture fx;
  fx.graph = shared(b.take());
  fx.out = out;
  Tensor d{TensorSpec{{4}, DType::F64, true}};
  for (int64_t i = 0; i < 4; ++i) d.set_f(i, static_cast<double>(i) + 1.0);
  Tensor ix{TensorSpec{{4}, DType::I64, true}};
  ix.set_i(0, 1);
  ix.set_i(1, 1);  // duplicate target: write order decides
  ix.set_i(2, 2);
  ix.set_i(3, 1);  // triple duplicate
  fx.inputs = {d, ix};
  return fx;
}

}  // namespace

TEST_CASE("scatter with duplicate indices: sequential is last-writer-wins and stable") {
  auto fx = duplicate_index_unpool();
  auto first = execute_reference(fx.graph, fx.inputs);
  CHECK(output_of(first, fx.out).get_f(1) == 4.0);  // position 3 wrote last
  for (int i = 0; i < 100; ++i) {
    auto again = execute_reference(fx.graph, fx.inputs);
    CHECK(again.digest() == first.digest());
  }
}

TEST_CASE("seeded permutation scheduling: same seed same trace, varied seeds vary") {
  auto fx = duplicate_index_unpool();
  BackendProfile perm = builtin_profile("reference");
  perm.reduction_order = {ReductionOrder::Kind::SeededPermutation, 0};

  auto a = execute(perm, fx.graph, fx.inputs, ExecOptions{12345});
  auto b = execute(perm, fx.graph, fx.inputs, ExecOptions{12345});
  CHECK(a.digest() == b.digest());

  std::set<uint64_t> digests;
  for (uint64_t seed = 0; seed < 50; ++seed)
    digests.insert(execute(perm, fx.graph, fx.inputs, ExecOptions{seed}).digest());
  CHECK(digests.size() >= 2);
}

TEST_CASE("enlarging the unsupported set never changes surviving node outcomes") {
  Rng rng(5150);
  Corpus corpus = generate_seed_corpus(rng, 6);
  SynthesisConfig cfg;
  cfg.node_threshold = 25;
  cfg.seed = 77;
  auto g = shared(synthesize(corpus, cfg).graph);
  InputPolicy policy;
  policy.seed = 78;
  auto inputs = generate_inputs(*g, policy);

  BackendProfile base = builtin_profile("reference");
  BackendProfile bigger = base;
  bigger.unsupported_ops.insert(OpKind::Relu);
  bigger.unsupported_ops.insert(OpKind::MatMul);

  auto ta = execute(base, g, inputs);
  auto tb = execute(bigger, g, inputs);
  for (const auto& [id, outcome_b] : tb.outcomes) {
    if (outcome_b.status != NodeOutcome::Status::Ok) continue;
    const auto& outcome_a = ta.outcomes.at(id);
    REQUIRE(outcome_a.status == NodeOutcome::Status::Ok);
    REQUIRE(outcome_a.outputs.size() == outcome_b.outputs.size());
    for (size_t s = 0; s < outcome_b.outputs.size(); ++s)
      CHECK(Tensor::bit_identical(outcome_a.outputs[s], outcome_b.outputs[s]));
  }
}

TEST_CASE("trace json round-trip preserves the digest") {
  auto fixture = make_linear_relu_graph(DType::F32, false);
  auto g = shared(fixture.graph);
  auto trace = execute_reference(
      g, std::vector<Tensor>{filled(TensorSpec{{2, 2}, DType::F32, true}, 0.25),
                             filled(TensorSpec{{2, 2}, DType::F32, true}, 0.75)});
  ExecutionTrace back = trace_from_json(trace_to_json(trace));
  CHECK(back.digest() == trace.digest());
  CHECK(back.backend == trace.backend);
}

TEST_CASE("trace json round-trip preserves error and skipped outcomes") {
  GraphBuilder b;
  int64_t data = b.input(TensorSpec{{3}, DType::F64, true});
  int64_t idx = b.input(TensorSpec{{2}, DType::I64, true});
  int64_t sel = b.op(OpKind::IndexSelect, {{data, 0}, {idx, 0}}, Attrs{{"dim", int64_t{0}}});
  int64_t relu = b.op(OpKind::Relu, {{sel, 0}});
  int64_t out = b.output({relu, 0});
  auto g = shared(b.take());
  Tensor d = filled(TensorSpec{{3}, DType::F64, true}, 1.0);
  Tensor ix{TensorSpec{{2}, DType::I64, true}};
  ix.set_i(0, 0);
  ix.set_i(1, 50);  // out of range under strict bounds
  auto trace = execute_reference(g, std::vector<Tensor>{d, ix});
  REQUIRE(trace.outcomes.at(sel).status == NodeOutcome::Status::Error);
  REQUIRE(trace.outcomes.at(out).status == NodeOutcome::Status::Skipped);

  ExecutionTrace back = trace_from_json(trace_to_json(trace));
  CHECK(back.digest() == trace.digest());
  CHECK(back.outcomes.at(sel).status == NodeOutcome::Status::Error);
  CHECK(back.outcomes.at(sel).error->kind == NodeErrorKind::OutOfBounds);
  CHECK(back.outcomes.at(relu).status == NodeOutcome::Status::Skipped);
}

TEST_CASE("runtime shape mismatch from data-dependent extents is a typed outcome") {
  GraphBuilder b;
  int64_t x = b.input(TensorSpec{{6}, DType::Bool, true});
  // recorded guess says 3 survivors; reshape demands exactly 3
  int64_t w = b.op(OpKind::Where, {{x, 0}}, {}, /*symbolic_guess=*/3);
  int64_t r = b.op(OpKind::Reshape, {{w, 0}}, Attrs{{"shape", std::vector<int64_t>{3}}});
  int64_t out = b.output({r, 0});
  auto g = shared(b.take());
  REQUIRE_FALSE(validate(*g).has_value());

  Tensor mask{TensorSpec{{6}, DType::Bool, true}};
  for (int64_t i = 0; i < 6; ++i) mask.set_i(i, 1);  // six survivors != 3
  auto trace = execute_reference(g, std::vector<Tensor>{mask});
  REQUIRE(trace.outcomes.at(r).status == NodeOutcome::Status::Error);
  CHECK(trace.outcomes.at(r).error->kind == NodeErrorKind::ShapeMismatch);
  CHECK(trace.outcomes.at(out).status == NodeOutcome::Status::Skipped);
}

TEST_CASE("shipped profile files match the builtin definitions") {
  const std::filesystem::path dir = GRAPHDIFF_SOURCE_DIR;
  for (const auto& name : builtin_profile_names()) {
    const auto path = dir / "profiles" / (name + ".json");
    REQUIRE(std::filesystem::exists(path));
    BackendProfile loaded = load_profile(path.string());
    CHECK(profile_to_json(loaded).dump() == profile_to_json(builtin_profile(name)).dump());
  }
}

TEST_CASE("profile json round-trips") {
  for (const auto& name : builtin_profile_names()) {
    BackendProfile p = builtin_profile(name);
    BackendProfile back = profile_from_json(profile_to_json(p));
    CHECK(profile_to_json(back).dump() == profile_to_json(p).dump());
  }
}

TEST_CASE("execution never throws across random graphs, inputs and profiles") {
  Rng rng(8088);
  Corpus corpus = generate_seed_corpus(rng, 8);
  const auto names = builtin_profile_names();
  for (int trial = 0; trial < 100; ++trial) {
    SynthesisConfig cfg;
    cfg.node_threshold = 12;
    cfg.seed = rng.next();
    auto g = shared(synthesize(corpus, cfg).graph);
    InputPolicy policy;
    policy.seed = rng.next();
    auto inputs = generate_inputs(*g, policy);
    BackendProfile profile = builtin_profile(names[trial % names.size()]);
    CHECK_NOTHROW((void)execute(profile, g, inputs, ExecOptions{rng.next()}));
  }
}
