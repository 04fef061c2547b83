#pragma once

#include <optional>
#include <vector>

#include "graphdiff/corpus.hpp"
#include "graphdiff/graph.hpp"
#include "graphdiff/rng.hpp"

namespace graphdiff {

struct SynthesisConfig {
  int node_threshold = 100;          // T: grow until this many operator nodes
  double mutation_probability = 0.25;
  uint64_t seed = 0;
  int64_t element_cap = kDefaultElementCap;
  int max_subgraph_nodes = 12;
};

// One planned glue step between a producer and a consumer spec.
struct GlueStep {
  OpKind kind;
  Attrs attrs;
};

// Shape/dtype reconciliation chain: optional contiguity materialization and
// cast, then flatten/slice/reshape (surplus) or flatten/pad/reshape (deficit),
// or a bare reshape when element counts already match. Empty when the specs
// are already identical. Throws Error(ElementCapExceeded) when an intermediate
// tensor would exceed element_cap.
std::vector<GlueStep> plan_glue(const TensorSpec& producer, const TensorSpec& consumer,
                                int64_t element_cap = kDefaultElementCap);

// Applies a glue plan inside a graph, returning the NodeInput producing the
// consumer-spec value.
NodeInput apply_glue(Graph& g, NodeInput from, const std::vector<GlueStep>& plan);

struct MergeConnection {
  int64_t from_node = -1;  // producer in G (pre-merge graph output producer)
  int64_t to_node = -1;    // consumer in the incoming fragment (post-remap id)
  int to_slot = 0;
  int glue_nodes = 0;
};

struct MergeRecord {
  int iteration = 0;
  std::string source_arch;
  int fragment_operators = 0;
  std::vector<MergeConnection> connections;  // empty only for the very first fragment
};

struct SynthesisLog {
  std::vector<MergeRecord> merges;
  int mutated_nodes = 0;
  int cap_retries = 0;
  bool finalized_early = false;
};

struct SynthesisResult {
  Graph graph;
  SynthesisLog log;
};

// Variant model generation: iteratively merges sampled connected subgraphs
// into a growing graph until the operator-node threshold is reached, then
// applies the probabilistic operator mutation pass.
SynthesisResult synthesize(const Corpus& corpus, const SynthesisConfig& cfg);

// ---- mutation --------------------------------------------------------------

struct MutationRule {
  OpKind source;
  bool (*can_apply)(const Graph& g, int64_t node_id);
  // Rewrites the node in place (may add helper nodes); returns false when the
  // rule does not apply to this particular node.
  bool (*apply)(Graph& g, int64_t node_id);
  const char* name;
};

class MutationTable {
 public:
  static const MutationTable& standard();
  const std::vector<MutationRule>& rules() const { return rules_; }
  std::vector<const MutationRule*> applicable(const Graph& g, int64_t node_id) const;

 private:
  std::vector<MutationRule> rules_;
};

// Each eligible node is rewritten with probability p using a uniformly chosen
// applicable rule. Output tensor specs of mutated nodes are unchanged.
Graph mutate(const Graph& g, const MutationTable& table, double p, Rng& rng,
             int* mutated_count = nullptr);

}  // namespace graphdiff
