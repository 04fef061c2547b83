#pragma once

#include <filesystem>
#include <set>
#include <vector>

#include "graphdiff/graph.hpp"
#include "graphdiff/rng.hpp"

namespace graphdiff {

struct InputPolicy {
  // floats sampled uniformly from [float_min, float_max)
  double float_min = 0.0;
  double float_max = 1.0;
  // integers feeding index operands, inclusive
  int64_t index_min = 0;
  int64_t index_max = 4;
  // integers not classified as index-feeding, inclusive
  int64_t int_min = 0;
  int64_t int_max = 16;
  uint64_t seed = 0;
};

// Inputs with a path to an index-typed operand slot that crosses only
// shape/layout ops (reshape, flatten, transpose, slice, cast-to-int).
std::set<int64_t> classify_index_inputs(const Graph& g);

// Inputs feeding an embedding-bag offsets slot directly or through
// element-order-preserving shape ops; these get the sorted/starts-at-zero
// constraint applied after sampling.
std::set<int64_t> classify_offsets_inputs(const Graph& g);

// One tensor per graph input, matching its recorded spec. Constraints are
// applied last. Deterministic: equal (graph, policy) gives bitwise-equal
// tensors. Throws Error(UnsatisfiableConstraint) when constraint rules
// conflict for a tensor.
std::vector<Tensor> generate_inputs(const Graph& g, const InputPolicy& policy);

uint64_t input_digest(const std::vector<Tensor>& tensors);

// Input bundle file: magic, JSON header (specs, policy, graph hash), then raw
// little-endian element payload per tensor.
void save_input_bundle(const std::filesystem::path& path, const Graph& g,
                       const InputPolicy& policy, const std::vector<Tensor>& tensors);

struct InputBundle {
  InputPolicy policy;
  uint64_t graph_hash = 0;
  std::vector<Tensor> tensors;
};

InputBundle load_input_bundle(const std::filesystem::path& path);

}  // namespace graphdiff
