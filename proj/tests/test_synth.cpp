#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "graphdiff/builder.hpp"
#include "graphdiff/engine.hpp"
#include "graphdiff/errors.hpp"
#include "graphdiff/serialize.hpp"
#include "graphdiff/synth.hpp"
#include "test_util.hpp"

using namespace graphdiff;
using graphdiff::test::make_linear_relu_graph;

namespace {

Corpus fixture_corpus() {
  Corpus corpus;
  corpus.insert(make_linear_relu_graph().graph, "fixture");
  return corpus;
}

std::vector<OpKind> plan_kinds(const std::vector<GlueStep>& plan) {
  std::vector<OpKind> kinds;
  for (const auto& s : plan) kinds.push_back(s.kind);
  return kinds;
}

}  // namespace

TEST_CASE("glue: surplus elements flatten, slice, reshape") {
  auto plan = plan_glue(TensorSpec{{2, 3}, DType::F32, true}, TensorSpec{{2, 2}, DType::F32, true});
  CHECK(plan_kinds(plan) ==
        std::vector<OpKind>{OpKind::Flatten, OpKind::Slice, OpKind::Reshape});
  CHECK(attr_i(plan[1].attrs, "start") == 0);
  CHECK(attr_i(plan[1].attrs, "end") == 4);
  CHECK(attr_ivec(plan[2].attrs, "shape") == std::vector<int64_t>{2, 2});
}

TEST_CASE("glue: deficit pads with zeros before reshaping") {
  auto plan = plan_glue(TensorSpec{{2, 2}, DType::F32, true}, TensorSpec{{2, 3}, DType::F32, true});
  CHECK(plan_kinds(plan) == std::vector<OpKind>{OpKind::Flatten, OpKind::Pad, OpKind::Reshape});
  CHECK(attr_ivec(plan[1].attrs, "after") == std::vector<int64_t>{2});
}

TEST_CASE("glue: identical specs need no nodes") {
  CHECK(plan_glue(TensorSpec{{4}, DType::F32, true}, TensorSpec{{4}, DType::F32, true}).empty());
}

TEST_CASE("glue: equal counts reshape only") {
  auto plan = plan_glue(TensorSpec{{2, 3}, DType::F32, true}, TensorSpec{{6}, DType::F32, true});
  CHECK(plan_kinds(plan) == std::vector<OpKind>{OpKind::Reshape});
}

TEST_CASE("glue: dtype mismatch prepends a cast") {
  auto plan = plan_glue(TensorSpec{{4}, DType::F64, true}, TensorSpec{{4}, DType::F32, true});
  REQUIRE(plan.size() == 1);
  CHECK(plan[0].kind == OpKind::Cast);
  CHECK(attr_s(plan[0].attrs, "to") == "f32");
}

TEST_CASE("glue: non-contiguous producer is materialized first") {
  auto plan =
      plan_glue(TensorSpec{{3, 2}, DType::F32, false}, TensorSpec{{6}, DType::F32, true});
  REQUIRE(plan.size() == 2);
  CHECK(plan[0].kind == OpKind::Reshape);  // same-shape materialization
  CHECK(attr_ivec(plan[0].attrs, "shape") == std::vector<int64_t>{3, 2});
  CHECK(plan[1].kind == OpKind::Reshape);
}

TEST_CASE("glue: element cap enforced") {
  CHECK_THROWS_AS((void)plan_glue(TensorSpec{{1000}, DType::F32, true},
                                  TensorSpec{{2000}, DType::F32, true}, 1500),
                  Error);
}

TEST_CASE("glue chain executes to the consumer spec with preserved prefix") {
  // slice path: leading elements survive bitwise
  GraphBuilder b;
  int64_t x = b.input(TensorSpec{{2, 3}, DType::F64, true});
  auto plan = plan_glue(TensorSpec{{2, 3}, DType::F64, true}, TensorSpec{{2, 2}, DType::F64, true});
  NodeInput wired = apply_glue(b.graph(), {x, 0}, plan);
  b.output(wired);
  auto graph = std::make_shared<const Graph>(b.take());
  REQUIRE_FALSE(validate(*graph).has_value());

  Tensor in{TensorSpec{{2, 3}, DType::F64, true}};
  for (int64_t i = 0; i < 6; ++i) in.set_f(i, 0.1 * static_cast<double>(i) + 0.05);
  auto trace = execute_reference(graph, std::vector<Tensor>{in});
  const auto& out = trace.outcomes.at(graph->outputs()[0]).outputs[0];
  CHECK(out.spec().shape == std::vector<int64_t>{2, 2});
  for (int64_t i = 0; i < 4; ++i) CHECK(out.get_f(i) == in.get_f(i));
}

TEST_CASE("synthesis with threshold 1 adopts a single fragment") {
  SynthesisConfig cfg;
  cfg.node_threshold = 1;
  cfg.seed = 5;
  auto result = synthesize(fixture_corpus(), cfg);
  CHECK_FALSE(validate(result.graph).has_value());
  CHECK(result.log.merges.size() == 1);
  CHECK(result.log.merges[0].connections.empty());  // first fragment has nothing to merge into
  CHECK(result.graph.operator_count() >= 1);
  CHECK_FALSE(result.graph.inputs().empty());
  CHECK_FALSE(result.graph.outputs().empty());
}

TEST_CASE("synthesis reaches the threshold within the glue overhead bound") {
  Rng rng(31);
  Corpus corpus = generate_seed_corpus(rng, 8);
  SynthesisConfig cfg;
  cfg.node_threshold = 100;
  cfg.seed = 42;
  auto result = synthesize(corpus, cfg);
  CHECK_FALSE(validate(result.graph).has_value());
  const size_t ops = result.graph.operator_count();
  CHECK(ops >= 100);
  CHECK(ops <= 128);
}

TEST_CASE("synthesis is deterministic down to canonical bytes") {
  Rng rng(32);
  Corpus corpus = generate_seed_corpus(rng, 6);
  SynthesisConfig cfg;
  cfg.node_threshold = 40;
  cfg.seed = 91;
  auto a = synthesize(corpus, cfg);
  auto b = synthesize(corpus, cfg);
  CHECK(canonical_bytes(a.graph) == canonical_bytes(b.graph));
}

TEST_CASE("every merge after the first connects the existing graph to the fragment") {
  Rng rng(33);
  Corpus corpus = generate_seed_corpus(rng, 8);
  SynthesisConfig cfg;
  cfg.node_threshold = 60;
  cfg.seed = 7;
  auto result = synthesize(corpus, cfg);
  REQUIRE(result.log.merges.size() >= 2);
  for (size_t i = 1; i < result.log.merges.size(); ++i)
    CHECK(result.log.merges[i].connections.size() >= 1);
}

TEST_CASE("node count grows strictly across merge iterations") {
  Rng rng(34);
  Corpus corpus = generate_seed_corpus(rng, 6);
  SynthesisConfig cfg;
  cfg.node_threshold = 50;
  cfg.seed = 3;
  auto result = synthesize(corpus, cfg);
  // each merge contributes at least one operator node
  size_t lower_bound = 0;
  for (const auto& m : result.log.merges) {
    CHECK(m.fragment_operators >= 1);
    lower_bound += static_cast<size_t>(m.fragment_operators);
  }
  CHECK(result.graph.operator_count() >= lower_bound);
}

TEST_CASE("synthesized graphs always expose inputs and outputs") {
  Rng rng(35);
  Corpus corpus = generate_seed_corpus(rng, 6);
  for (uint64_t seed = 0; seed < 12; ++seed) {
    SynthesisConfig cfg;
    cfg.node_threshold = 20;
    cfg.seed = seed;
    auto result = synthesize(corpus, cfg);
    CHECK_FALSE(result.graph.inputs().empty());
    CHECK_FALSE(result.graph.outputs().empty());
    CHECK_FALSE(validate(result.graph).has_value());
  }
}

TEST_CASE("every input of a synthesized graph reaches an output") {
  Rng rng(38);
  Corpus corpus = generate_seed_corpus(rng, 6);
  for (uint64_t seed = 0; seed < 12; ++seed) {
    SynthesisConfig cfg;
    cfg.node_threshold = 25;
    cfg.seed = seed;
    Graph g = synthesize(corpus, cfg).graph;
    auto consumers = g.consumer_map();
    for (int64_t input : g.inputs()) {
      std::set<int64_t> seen;
      std::vector<int64_t> stack = {input};
      bool reaches_output = false;
      while (!stack.empty() && !reaches_output) {
        const int64_t id = stack.back();
        stack.pop_back();
        if (!seen.insert(id).second) continue;
        if (g.node(id).kind == OpKind::Output) reaches_output = true;
        auto it = consumers.find(id);
        if (it == consumers.end()) continue;
        for (const auto& [consumer, slot] : it->second) {
          (void)slot;
          stack.push_back(consumer);
        }
      }
      CHECK(reaches_output);
    }
  }
}

TEST_CASE("mutation with p=0 leaves the graph untouched") {
  Rng rng(36);
  Corpus corpus = generate_seed_corpus(rng, 5);
  SynthesisConfig cfg;
  cfg.node_threshold = 30;
  cfg.seed = 4;
  cfg.mutation_probability = 0.0;
  auto a = synthesize(corpus, cfg);
  Rng mrng(1);
  Graph same = mutate(a.graph, MutationTable::standard(), 0.0, mrng);
  CHECK(canonical_bytes(same) == canonical_bytes(a.graph));
}

TEST_CASE("mutation with p=1 rewrites a lone relu into a clamp") {
  GraphBuilder b;
  int64_t x = b.input(TensorSpec{{3}, DType::F32, true});
  int64_t r = b.op(OpKind::Relu, {{x, 0}});
  b.output({r, 0});
  Graph g = b.take();
  Rng rng(2);
  Graph m = mutate(g, MutationTable::standard(), 1.0, rng);
  CHECK(m.node(r).kind == OpKind::HardTanh);
  CHECK(attr_f(m.node(r).attrs, "min_val", -1) == 0.0);
  CHECK_FALSE(validate(m).has_value());
}

TEST_CASE("mutated fraction tracks the probability") {
  GraphBuilder b;
  int64_t x = b.input(TensorSpec{{2}, DType::F32, true});
  NodeInput cur{x, 0};
  std::vector<int64_t> relus;
  for (int i = 0; i < 1000; ++i) {
    cur = {b.op(OpKind::Relu, {cur}), 0};
    relus.push_back(cur.node);
  }
  b.output(cur);
  Graph g = b.take();
  int mutated = 0;
  Rng rng(1234);
  Graph m = mutate(g, MutationTable::standard(), 0.25, rng, &mutated);
  CHECK(mutated >= 200);
  CHECK(mutated <= 300);
  CHECK_FALSE(validate(m).has_value());
}

TEST_CASE("in-place rewrite is skipped when input 0 has other consumers") {
  GraphBuilder b;
  int64_t x = b.input(TensorSpec{{3}, DType::F32, true});
  int64_t y = b.input(TensorSpec{{3}, DType::F32, true});
  int64_t add = b.op(OpKind::Add, {{x, 0}, {y, 0}});
  int64_t also = b.op(OpKind::Sigmoid, {{x, 0}});  // second consumer of x
  b.output({add, 0});
  b.output({also, 0});
  Graph g = b.take();
  const auto rules = MutationTable::standard().applicable(g, add);
  for (const auto* rule : rules) CHECK(std::string(rule->name) != "add->add_inplace");
}

TEST_CASE("add reformulation preserves outputs bitwise") {
  GraphBuilder b;
  int64_t x = b.input(TensorSpec{{4}, DType::F64, true});
  int64_t y = b.input(TensorSpec{{4}, DType::F64, true});
  int64_t add = b.op(OpKind::Add, {{x, 0}, {y, 0}});
  b.output({add, 0});
  Graph original = b.take();

  // force the reformulation rule by applying it directly
  Graph rewritten = original;
  bool applied = false;
  for (const auto& rule : MutationTable::standard().rules()) {
    if (std::string(rule.name) == "add->addcdiv" && rule.can_apply(rewritten, add))
      applied = rule.apply(rewritten, add);
  }
  REQUIRE(applied);
  CHECK(rewritten.node(add).kind == OpKind::AddCdiv);
  CHECK_FALSE(validate(rewritten).has_value());

  Rng rng(77);
  auto og = std::make_shared<const Graph>(original);
  auto rw = std::make_shared<const Graph>(rewritten);
  for (int round = 0; round < 16; ++round) {
    Tensor tx{TensorSpec{{4}, DType::F64, true}};
    Tensor ty{TensorSpec{{4}, DType::F64, true}};
    for (int64_t i = 0; i < 4; ++i) {
      tx.set_f(i, rng.uniform(-10, 10));
      ty.set_f(i, rng.uniform(-10, 10));
    }
    auto ta = execute_reference(og, std::vector<Tensor>{tx, ty});
    auto tb = execute_reference(rw, std::vector<Tensor>{tx, ty});
    const auto& out_a = ta.outcomes.at(original.outputs()[0]).outputs[0];
    const auto& out_b = tb.outcomes.at(rewritten.outputs()[0]).outputs[0];
    CHECK(Tensor::bit_identical(out_a, out_b));
  }
}

TEST_CASE("synthesis against an empty corpus fails") {
  Corpus corpus;
  SynthesisConfig cfg;
  CHECK_THROWS_AS((void)synthesize(corpus, cfg), Error);
}
