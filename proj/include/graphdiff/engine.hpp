#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>

#include "graphdiff/graph.hpp"
#include "graphdiff/profile.hpp"
#include "graphdiff/serialize.hpp"

namespace graphdiff {

enum class NodeErrorKind { Unsupported, OutOfBounds, ShapeMismatch, NumericFault };

const char* to_string(NodeErrorKind k);
std::optional<NodeErrorKind> node_error_kind_from_string(std::string_view s);

struct NodeError {
  NodeErrorKind kind;
  std::string detail;
};

struct NodeOutcome {
  enum class Status { Ok, Error, Skipped };
  Status status = Status::Ok;
  std::vector<Tensor> outputs;      // Ok only
  std::optional<NodeError> error;   // Error only
  int64_t time_ns = 0;
};

struct ExecutionTrace {
  std::string backend;
  std::string mode = "eager";
  uint64_t graph_hash = 0;
  uint64_t input_digest = 0;
  uint64_t run_seed = 0;
  std::shared_ptr<const Graph> graph;           // the graph that was executed
  std::map<int64_t, NodeOutcome> outcomes;      // keyed by node id
  std::map<int64_t, int64_t> origin;            // compiled runs: node -> original id

  int64_t origin_of(int64_t id) const {
    auto it = origin.find(id);
    return it == origin.end() ? id : it->second;
  }
  // Content digest over outcomes (timings excluded); replay compares these.
  uint64_t digest() const;
};

struct ExecOptions {
  uint64_t run_seed = 0;  // feeds seeded-permutation scheduling
};

// Evaluates the graph under the profile's semantics, nodes in topological
// order. Never throws for execution failures: unsupported operators, bounds
// violations, runtime shape mismatches and numeric faults are recorded as
// typed per-node outcomes and dependents are marked skipped. Throws only for
// caller errors (input count/spec not matching the graph).
ExecutionTrace execute(const BackendProfile& profile, std::shared_ptr<const Graph> graph,
                       std::span<const Tensor> inputs, const ExecOptions& opts = {});

// execute under the fixed baseline profile
ExecutionTrace execute_reference(std::shared_ptr<const Graph> graph,
                                 std::span<const Tensor> inputs);

// Static supportedness: the part of a profile's behavior decidable from the
// graph alone (operator set, dtype exclusions, contiguity requirements).
// The executor applies exactly this check, so a static scan and the dynamic
// unsupported outcomes agree by construction.
std::optional<NodeError> static_unsupported(const BackendProfile& profile, const Graph& g,
                                            const Node& node);

// Evaluates one node in isolation under a profile (constant folding relies
// on this). Applies the same runtime shape check and exceptional-value policy
// as a full execution would.
std::variant<std::vector<Tensor>, NodeError> eval_single_node(
    const BackendProfile& profile, const Node& node,
    std::span<const Tensor* const> inputs, uint64_t run_seed = 0);

Json trace_to_json(const ExecutionTrace& trace);
ExecutionTrace trace_from_json(const Json& j);

}  // namespace graphdiff
