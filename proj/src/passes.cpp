#include "graphdiff/passes.hpp"

#include <algorithm>
#include <set>

#include "graphdiff/errors.hpp"
#include "graphdiff/hash.hpp"
#include "graphdiff/serialize.hpp"

namespace graphdiff {

const char* to_string(CompileFailure::Kind k) {
  switch (k) {
    case CompileFailure::Kind::Stalled: return "stalled";
    case CompileFailure::Kind::Unsupported: return "unsupported";
    case CompileFailure::Kind::CompilerBug: return "compiler_bug";
  }
  return "?";
}

namespace {

// rewires every consumer edge (and nothing else) from one producer slot to
// another
int rewire_consumers(Graph& g, NodeInput from, NodeInput to) {
  int changed = 0;
  for (auto& [id, node] : g.nodes_mut()) {
    for (auto& in : node.inputs) {
      if (in == from) {
        in = to;
        ++changed;
      }
    }
  }
  return changed;
}

bool all_inputs_constant(const Graph& g, const Node& node) {
  if (node.inputs.empty()) return false;
  for (const auto& in : node.inputs)
    if (g.node(in.node).kind != OpKind::Constant) return false;
  return true;
}

class ConstantFoldingPass : public GraphPass {
 public:
  std::string name() const override { return "constant_folding"; }
  int run(Graph& g) override {
    static const BackendProfile folding_profile = builtin_profile("reference");
    int changed = 0;
    for (int64_t id : topo_order(g)) {
      Node& node = g.node_mut(id);
      if (!is_operator(node.kind)) continue;
      const auto& sig = signature(node.kind);
      if (sig.data_dependent || sig.num_outputs != 1) continue;
      if (!all_inputs_constant(g, node)) continue;

      std::vector<const Tensor*> inputs;
      for (const auto& in : node.inputs) inputs.push_back(&*g.node(in.node).payload);
      auto result = eval_single_node(folding_profile, node, inputs);
      if (std::holds_alternative<NodeError>(result)) continue;  // leave runtime faults in place
      auto outputs = std::move(std::get<std::vector<Tensor>>(result));
      if (outputs[0].spec().shape != node.output_specs[0].shape) continue;

      node.kind = OpKind::Constant;
      node.inputs.clear();
      node.attrs.clear();
      node.output_specs[0].contiguous = outputs[0].spec().contiguous;
      node.payload = std::move(outputs[0]);
      ++changed;
    }
    return changed;
  }
};

class DeadCodeEliminationPass : public GraphPass {
 public:
  std::string name() const override { return "dead_code_elimination"; }
  int run(Graph& g) override {
    // backward reachability from output nodes; inputs stay (graph interface)
    std::set<int64_t> live;
    std::vector<int64_t> stack(g.outputs().begin(), g.outputs().end());
    while (!stack.empty()) {
      const int64_t id = stack.back();
      stack.pop_back();
      if (!live.insert(id).second) continue;
      for (const auto& in : g.node(id).inputs) stack.push_back(in.node);
    }
    std::vector<int64_t> dead;
    for (const auto& [id, node] : g.nodes())
      if (!live.count(id) && node.kind != OpKind::Input && node.kind != OpKind::Output)
        dead.push_back(id);
    for (int64_t id : dead) g.remove_node(id);
    return static_cast<int>(dead.size());
  }
};

class CommonSubexpressionEliminationPass : public GraphPass {
 public:
  std::string name() const override { return "common_subexpression_elimination"; }
  int run(Graph& g) override {
    int changed = 0;
    std::map<std::string, int64_t> seen;
    std::vector<int64_t> duplicates;
    for (int64_t id : topo_order(g)) {
      const Node& node = g.node(id);
      if (node.kind == OpKind::Input || node.kind == OpKind::Output) continue;
      if (node.kind == OpKind::AddInPlace) continue;  // aliasing is part of its identity

      Fnv1a h;
      h.update(to_string(node.kind));
      h.update(attrs_to_json(node.attrs).dump());
      for (const auto& in : node.inputs) {
        h.update_u64(static_cast<uint64_t>(in.node));
        h.update_u64(static_cast<uint64_t>(in.slot));
      }
      if (node.kind == OpKind::Constant) node.payload->hash_into(h);
      std::string key = hex64(h.digest());

      auto [it, inserted] = seen.emplace(std::move(key), id);
      if (inserted) continue;
      const int64_t rep = it->second;
      for (size_t slot = 0; slot < node.output_specs.size(); ++slot)
        rewire_consumers(g, NodeInput{id, static_cast<int>(slot)},
                         NodeInput{rep, static_cast<int>(slot)});
      duplicates.push_back(id);
      ++changed;
    }
    for (int64_t id : duplicates) g.remove_node(id);
    return changed;
  }
};

bool constant_filled_with(const Graph& g, NodeInput in, double value) {
  const Node& node = g.node(in.node);
  if (node.kind != OpKind::Constant) return false;
  const Tensor& t = *node.payload;
  for (int64_t i = 0; i < t.count(); ++i) {
    if (is_float_dtype(t.dtype())) {
      if (!(t.get_f(i) == value)) return false;
    } else if (t.get_i(i) != static_cast<int64_t>(value)) {
      return false;
    }
  }
  return true;
}

class AlgebraicSimplifyPass : public GraphPass {
 public:
  std::string name() const override { return "algebraic_simplify"; }
  int run(Graph& g) override {
    int changed = 0;
    for (int64_t id : topo_order(g)) {
      const Node& node = g.node(id);
      std::optional<NodeInput> keep;
      if (node.kind == OpKind::Add) {
        if (constant_filled_with(g, node.inputs[1], 0.0)) keep = node.inputs[0];
        else if (constant_filled_with(g, node.inputs[0], 0.0)) keep = node.inputs[1];
      } else if (node.kind == OpKind::Mul) {
        if (constant_filled_with(g, node.inputs[1], 1.0)) keep = node.inputs[0];
        else if (constant_filled_with(g, node.inputs[0], 1.0)) keep = node.inputs[1];
      }
      if (!keep) continue;
      // the surviving operand must already have the node's exact spec
      const auto& kept_spec = g.node(keep->node).output_specs[static_cast<size_t>(keep->slot)];
      if (!(kept_spec == node.output_specs[0])) continue;
      if (rewire_consumers(g, NodeInput{id, 0}, *keep) > 0) ++changed;
    }
    return changed;
  }
};

bool is_zero_floor_clamp(const Node& node) {
  return node.kind == OpKind::HardTanh && attr_f(node.attrs, "min_val", -1.0) == 0.0;
}

class PredicateSimplifyPass : public GraphPass {
 public:
  std::string name() const override { return "predicate_simplify"; }
  int run(Graph& g) override {
    int changed = 0;
    for (int64_t id : topo_order(g)) {
      Node& node = g.node_mut(id);
      if (node.kind == OpKind::Relu) {
        const Node& producer = g.node(node.inputs[0].node);
        if (producer.kind == OpKind::Relu) {
          // relu(relu(x)) == relu(x)
          node.inputs[0] = producer.inputs[0];
          ++changed;
        } else if (is_zero_floor_clamp(producer)) {
          // relu of a zero-floor clamp is the clamp itself
          if (rewire_consumers(g, NodeInput{id, 0}, node.inputs[0]) > 0) ++changed;
        }
      } else if (is_zero_floor_clamp(node)) {
        const Node& producer = g.node(node.inputs[0].node);
        if (producer.kind == OpKind::Relu) {
          // clamp(relu(x), 0, c) == clamp(x, 0, c)
          node.inputs[0] = producer.inputs[0];
          ++changed;
        }
      }
    }
    return changed;
  }
};

}  // namespace

std::shared_ptr<GraphPass> make_pass(const std::string& name) {
  if (name == "constant_folding") return std::make_shared<ConstantFoldingPass>();
  if (name == "dead_code_elimination") return std::make_shared<DeadCodeEliminationPass>();
  if (name == "common_subexpression_elimination")
    return std::make_shared<CommonSubexpressionEliminationPass>();
  if (name == "algebraic_simplify") return std::make_shared<AlgebraicSimplifyPass>();
  if (name == "predicate_simplify") return std::make_shared<PredicateSimplifyPass>();
  throw Error(Errc::InvalidArgument, "unknown pass " + name);
}

PassPipeline PassPipeline::jit() {
  return from_names({"constant_folding", "dead_code_elimination"});
}

PassPipeline PassPipeline::full() {
  return from_names({"constant_folding", "dead_code_elimination",
                     "common_subexpression_elimination", "algebraic_simplify",
                     "predicate_simplify"});
}

PassPipeline PassPipeline::from_names(const std::vector<std::string>& names) {
  PassPipeline p;
  for (const auto& n : names) p.passes.push_back(make_pass(n));
  return p;
}

PassPipeline PassPipeline::from_file(const std::string& path) {
  Json j;
  try {
    j = Json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, path + ": " + e.what());
  }
  PassPipeline p = from_names(j.at("passes").get<std::vector<std::string>>());
  p.max_iterations = j.value("max_iterations", 50);
  return p;
}

std::variant<CompiledGraph, CompileFailure> compile(const PassPipeline& pipeline, const Graph& g,
                                                    const BackendProfile* profile) {
  if (profile) {
    for (const auto& [id, node] : g.nodes())
      if (auto err = static_unsupported(*profile, g, node))
        return CompileFailure{CompileFailure::Kind::Unsupported,
                              "node " + std::to_string(id) + ": " + err->detail,
                              {},
                              {}};
  }

  auto optimized = std::make_shared<Graph>(g);
  std::vector<PassLogEntry> log;
  std::vector<OscillationStep> effects;
  std::map<uint64_t, size_t> seen;  // state hash -> effects count at that state
  seen[content_hash(*optimized)] = 0;

  for (int sweep = 0; sweep < pipeline.max_iterations; ++sweep) {
    int sweep_changes = 0;
    for (const auto& pass : pipeline.passes) {
      const int changed = pass->run(*optimized);
      const uint64_t h = content_hash(*optimized);
      log.push_back(PassLogEntry{sweep, pass->name(), changed, h});
      if (changed == 0) continue;
      sweep_changes += changed;

      if (auto issue = validate(*optimized))
        return CompileFailure{
            CompileFailure::Kind::CompilerBug,
            pass->name() + " produced an invalid graph: " + issue->detail + " (node " +
                std::to_string(issue->node_id) + ")",
            {},
            std::move(log)};

      effects.push_back(OscillationStep{pass->name(), changed});
      auto [it, inserted] = seen.emplace(h, effects.size());
      if (!inserted) {
        // this state was already visited: later rewrites undid earlier ones
        std::vector<OscillationStep> cycle(effects.begin() + static_cast<long>(it->second),
                                           effects.end());
        return CompileFailure{CompileFailure::Kind::Stalled,
                              "pass effects oscillate with cycle length " +
                                  std::to_string(cycle.size()),
                              std::move(cycle), std::move(log)};
      }
    }
    if (sweep_changes == 0)
      return CompiledGraph{std::move(optimized), std::move(log), {}};
  }
  return CompileFailure{CompileFailure::Kind::Stalled,
                        "no fixpoint after " + std::to_string(pipeline.max_iterations) +
                            " sweeps",
                        {},
                        std::move(log)};
}

ExecutionTrace execute_compiled(const PassPipeline& pipeline, const BackendProfile& profile,
                                std::shared_ptr<const Graph> graph,
                                std::span<const Tensor> inputs, const ExecOptions& opts) {
  auto compiled = compile(pipeline, *graph);
  if (auto* failure = std::get_if<CompileFailure>(&compiled))
    throw Error(Errc::InvalidArgument,
                std::string("compilation failed: ") + to_string(failure->kind) + ": " +
                    failure->detail);
  auto& cg = std::get<CompiledGraph>(compiled);
  ExecutionTrace trace = execute(profile, cg.graph, inputs, opts);
  trace.mode = "compiled";
  trace.origin = cg.origin;
  return trace;
}

}  // namespace graphdiff
