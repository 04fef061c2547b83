#pragma once

#include <string>

#include "graphdiff/graph.hpp"

namespace graphdiff {

// Adds an operator node with output specs derived from shape inference;
// runtime-determined extents are recorded as symbolic_guess. Throws
// Error(InvalidArgument) when the wiring violates the operator's shape rule.
int64_t add_inferred_op(Graph& g, OpKind kind, std::vector<NodeInput> inputs, Attrs attrs = {},
                        int64_t symbolic_guess = 1);

// Convenience wrapper for constructing valid graphs: operator output specs
// are filled in from shape inference so recorded specs always agree with
// signatures. Data-dependent extents take an explicit recorded guess.
class GraphBuilder {
 public:
  int64_t input(TensorSpec spec);
  int64_t constant(Tensor payload);
  // scalar constant convenience
  int64_t constant_scalar(DType dtype, double value);

  // Adds an operator node; output specs inferred from producers.
  // symbolic_guess replaces any runtime-determined extent in recorded specs.
  int64_t op(OpKind kind, std::vector<NodeInput> inputs, Attrs attrs = {},
             int64_t symbolic_guess = 1);

  // Marks a produced value as a graph output (inserts an Output node).
  int64_t output(NodeInput from);

  Graph& graph() { return g_; }
  Graph take() { return std::move(g_); }

 private:
  Graph g_;
};

}  // namespace graphdiff
