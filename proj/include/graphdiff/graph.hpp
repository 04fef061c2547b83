#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "graphdiff/ops.hpp"
#include "graphdiff/tensor.hpp"

namespace graphdiff {

struct NodeInput {
  int64_t node = -1;
  int slot = 0;
  bool operator==(const NodeInput&) const = default;
};

struct Node {
  int64_t id = -1;
  OpKind kind = OpKind::Input;
  Attrs attrs;
  std::vector<NodeInput> inputs;
  std::vector<TensorSpec> output_specs;
  std::optional<Tensor> payload;  // Constant nodes only
};

class Graph {
 public:
  int64_t add_node(Node node);  // assigns node.id if < 0; returns id
  const Node& node(int64_t id) const { return nodes_.at(id); }
  Node& node_mut(int64_t id) { return nodes_.at(id); }
  bool has_node(int64_t id) const { return nodes_.count(id) != 0; }
  void remove_node(int64_t id) { nodes_.erase(id); }
  int64_t next_id() const { return nodes_.empty() ? 0 : nodes_.rbegin()->first + 1; }

  const std::map<int64_t, Node>& nodes() const { return nodes_; }
  std::map<int64_t, Node>& nodes_mut() { return nodes_; }

  std::vector<int64_t>& inputs() { return inputs_; }
  std::vector<int64_t>& outputs() { return outputs_; }
  const std::vector<int64_t>& inputs() const { return inputs_; }
  const std::vector<int64_t>& outputs() const { return outputs_; }

  size_t operator_count() const;

  // consumers of each node (node -> list of (consumer id, consumer input slot))
  std::map<int64_t, std::vector<std::pair<int64_t, int>>> consumer_map() const;

 private:
  std::map<int64_t, Node> nodes_;
  std::vector<int64_t> inputs_;
  std::vector<int64_t> outputs_;
};

// ---- validation ------------------------------------------------------------

struct ValidationIssue {
  enum class Kind { CycleDetected, DanglingEdge, SignatureMismatch };
  Kind kind;
  int64_t node_id = -1;
  std::string detail;
};

const char* to_string(ValidationIssue::Kind k);

// nullopt == Ok. Ok implies a topological order exists and every node's
// inputs satisfy its registered signature against recorded output specs.
using ValidationVerdict = std::optional<ValidationIssue>;
ValidationVerdict validate(const Graph& g);

// Topological order over all nodes, ties broken by ascending node id.
// Throws Error(CycleDetected) on cyclic graphs.
std::vector<int64_t> topo_order(const Graph& g);

// ---- static shape inference -------------------------------------------------

// Extent value used for runtime-determined dimensions of data-dependent ops.
inline constexpr int64_t kSymbolicExtent = -1;

struct InferredSpec {
  std::vector<int64_t> shape;  // kSymbolicExtent marks a runtime-determined dim
  DType dtype = DType::F32;
  bool contiguous = true;
  bool symbolic() const {
    for (int64_t e : shape)
      if (e == kSymbolicExtent) return true;
    return false;
  }
};

struct ShapeError {
  int64_t node_id = -1;
  std::string expected;
  std::string actual;
};

struct ShapeInference {
  std::map<int64_t, std::vector<InferredSpec>> per_node;
};

// Recomputes every node's output specs from the given graph-input specs.
// A symbolic extent is compatible with any required extent; the check is
// deferred to runtime, where a mismatch surfaces as the shape-mismatch
// failure class.
std::variant<ShapeInference, ShapeError> infer_shapes(const Graph& g,
                                                      std::span<const TensorSpec> input_specs);

// Shape rule for a single node given concrete-or-symbolic input specs.
// Used by both infer_shapes and the executor's runtime checks.
std::variant<std::vector<InferredSpec>, ShapeError> infer_node_specs(
    const Node& node, std::span<const InferredSpec> inputs);

}  // namespace graphdiff
