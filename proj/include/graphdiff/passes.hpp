#pragma once

#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "graphdiff/engine.hpp"
#include "graphdiff/graph.hpp"

namespace graphdiff {

class GraphPass {
 public:
  virtual ~GraphPass() = default;
  virtual std::string name() const = 0;
  // Rewrites in place; returns the number of nodes changed.
  virtual int run(Graph& g) = 0;
};

// builtin pass names: constant_folding, dead_code_elimination,
// common_subexpression_elimination, algebraic_simplify, predicate_simplify
std::shared_ptr<GraphPass> make_pass(const std::string& name);

struct PassPipeline {
  std::vector<std::shared_ptr<GraphPass>> passes;
  int max_iterations = 50;  // full round-robin sweeps

  static PassPipeline none() { return {}; }
  static PassPipeline jit();   // constant folding + DCE
  static PassPipeline full();  // all builtin passes
  static PassPipeline from_names(const std::vector<std::string>& names);
  static PassPipeline from_file(const std::string& path);
};

struct PassLogEntry {
  int iteration = 0;  // sweep number
  std::string pass;
  int changed = 0;
  uint64_t state_hash = 0;  // canonical graph hash after the pass ran
};

struct OscillationStep {
  std::string pass;
  int changed = 0;
};

struct CompiledGraph {
  std::shared_ptr<const Graph> graph;
  std::vector<PassLogEntry> log;
  // node ids survive every builtin pass unchanged: a folded node keeps its id
  // as a constant and an eliminated node simply disappears, so the mapping
  // back to original ids is the identity on surviving nodes
  std::map<int64_t, int64_t> origin;
};

struct CompileFailure {
  enum class Kind { Stalled, Unsupported, CompilerBug };
  Kind kind = Kind::Stalled;
  std::string detail;
  std::vector<OscillationStep> oscillation;  // Stalled: one full cycle of pass effects
  std::vector<PassLogEntry> log;
};

const char* to_string(CompileFailure::Kind k);

// Applies passes round-robin until a full sweep changes nothing. Detects
// oscillation by state-hash recurrence (a later pass undoing an earlier
// rewrite) and reports it as Stalled with the cycle of pass effects; the
// sweep cap is the fallback. A pass producing an invalid graph is reported
// as CompilerBug, never a crash. When a profile is given, graphs containing
// statically unsupported operators fail with Unsupported before any pass
// runs.
std::variant<CompiledGraph, CompileFailure> compile(const PassPipeline& pipeline, const Graph& g,
                                                    const BackendProfile* profile = nullptr);

// Convenience: compile (no profile gating) then execute the optimized graph.
// Throws Error(InvalidArgument) when compilation fails; callers that need to
// observe compile failures call compile() themselves.
ExecutionTrace execute_compiled(const PassPipeline& pipeline, const BackendProfile& profile,
                                std::shared_ptr<const Graph> graph,
                                std::span<const Tensor> inputs, const ExecOptions& opts = {});

}  // namespace graphdiff
