#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "graphdiff/dtype.hpp"

namespace graphdiff {

enum class OpKind : uint8_t {
  // graph boundary / payload nodes
  Input,
  Output,
  Constant,
  // elementwise
  Add,
  AddInPlace,
  Sub,
  Mul,
  Div,
  Remainder,
  AddCdiv,
  // activation
  Relu,
  HardTanh,
  Sigmoid,
  // linear
  MatMul,
  AddMM,
  // shape / layout
  Reshape,
  Flatten,
  Slice,
  Pad,
  Transpose,
  Cast,
  // indexing
  Gather,
  IndexSelect,
  EmbeddingBag,
  // data-dependent shape
  Where,
  NonZeroSelect,
  // reduction
  Sum,
  Mean,
  Max,
  ArgMax,
  // normalization
  BatchNorm,
  // pooling
  MaxPool1d,
  MaxUnpool2d,
};

inline constexpr int kNumOpKinds = static_cast<int>(OpKind::MaxUnpool2d) + 1;

inline bool is_operator(OpKind k) {
  return k != OpKind::Input && k != OpKind::Output && k != OpKind::Constant;
}

const char* to_string(OpKind k);
std::optional<OpKind> op_kind_from_string(std::string_view s);

// Attribute values. Vector attrs hold extents or widths; string attrs hold
// dtype tags. std::map keeps keys sorted, which the canonical serialization
// relies on.
using AttrValue = std::variant<int64_t, double, bool, std::vector<int64_t>, std::string>;
using Attrs = std::map<std::string, AttrValue>;

int64_t attr_i(const Attrs& a, const std::string& key, int64_t fallback = 0);
double attr_f(const Attrs& a, const std::string& key, double fallback = 0.0);
std::vector<int64_t> attr_ivec(const Attrs& a, const std::string& key);
std::string attr_s(const Attrs& a, const std::string& key, const std::string& fallback = "");
bool has_attr(const Attrs& a, const std::string& key);

enum class DtypeClass : uint8_t { Any, Float, Int, Index, Numeric, Bool };

bool dtype_in_class(DType t, DtypeClass c);

struct OpSignature {
  int arity = 1;
  int num_outputs = 1;
  std::vector<DtypeClass> input_classes;  // size == arity
  bool same_dtype_inputs = false;         // numeric inputs must share one dtype
  bool data_dependent = false;            // output extent depends on values
  // slots whose tensor is interpreted as indices/offsets (bounds policy target)
  std::vector<int> index_slots;
};

const OpSignature& signature(OpKind k);

// True for kinds that only move or relabel elements; input classification
// walks through these when deciding whether an Input ultimately feeds an
// index operand.
bool is_shape_only(OpKind k);

}  // namespace graphdiff
