#include "graphdiff/ops.hpp"

#include <array>

namespace graphdiff {

namespace {

struct KindName {
  OpKind kind;
  const char* name;
};

constexpr std::array<KindName, kNumOpKinds> kKindNames = {{
    {OpKind::Input, "input"},
    {OpKind::Output, "output"},
    {OpKind::Constant, "constant"},
    {OpKind::Add, "add"},
    {OpKind::AddInPlace, "add_inplace"},
    {OpKind::Sub, "sub"},
    {OpKind::Mul, "mul"},
    {OpKind::Div, "div"},
    {OpKind::Remainder, "remainder"},
    {OpKind::AddCdiv, "addcdiv"},
    {OpKind::Relu, "relu"},
    {OpKind::HardTanh, "hardtanh"},
    {OpKind::Sigmoid, "sigmoid"},
    {OpKind::MatMul, "matmul"},
    {OpKind::AddMM, "addmm"},
    {OpKind::Reshape, "reshape"},
    {OpKind::Flatten, "flatten"},
    {OpKind::Slice, "slice"},
    {OpKind::Pad, "pad"},
    {OpKind::Transpose, "transpose"},
    {OpKind::Cast, "cast"},
    {OpKind::Gather, "gather"},
    {OpKind::IndexSelect, "index_select"},
    {OpKind::EmbeddingBag, "embedding_bag"},
    {OpKind::Where, "where"},
    {OpKind::NonZeroSelect, "nonzero_select"},
    {OpKind::Sum, "sum"},
    {OpKind::Mean, "mean"},
    {OpKind::Max, "max"},
    {OpKind::ArgMax, "argmax"},
    {OpKind::BatchNorm, "batch_norm"},
    {OpKind::MaxPool1d, "max_pool1d"},
    {OpKind::MaxUnpool2d, "max_unpool2d"},
}};

}  // namespace

const char* to_string(OpKind k) {
  for (const auto& kn : kKindNames)
    if (kn.kind == k) return kn.name;
  return "?";
}

std::optional<OpKind> op_kind_from_string(std::string_view s) {
  for (const auto& kn : kKindNames)
    if (s == kn.name) return kn.kind;
  return std::nullopt;
}

int64_t attr_i(const Attrs& a, const std::string& key, int64_t fallback) {
  auto it = a.find(key);
  if (it == a.end()) return fallback;
  if (auto* v = std::get_if<int64_t>(&it->second)) return *v;
  if (auto* v = std::get_if<double>(&it->second)) return static_cast<int64_t>(*v);
  if (auto* v = std::get_if<bool>(&it->second)) return *v ? 1 : 0;
  return fallback;
}

double attr_f(const Attrs& a, const std::string& key, double fallback) {
  auto it = a.find(key);
  if (it == a.end()) return fallback;
  if (auto* v = std::get_if<double>(&it->second)) return *v;
  if (auto* v = std::get_if<int64_t>(&it->second)) return static_cast<double>(*v);
  return fallback;
}

std::vector<int64_t> attr_ivec(const Attrs& a, const std::string& key) {
  auto it = a.find(key);
  if (it == a.end()) return {};
  if (auto* v = std::get_if<std::vector<int64_t>>(&it->second)) return *v;
  return {};
}

std::string attr_s(const Attrs& a, const std::string& key, const std::string& fallback) {
  auto it = a.find(key);
  if (it == a.end()) return fallback;
  if (auto* v = std::get_if<std::string>(&it->second)) return *v;
  return fallback;
}

bool has_attr(const Attrs& a, const std::string& key) { return a.count(key) != 0; }

bool dtype_in_class(DType t, DtypeClass c) {
  switch (c) {
    case DtypeClass::Any: return true;
    case DtypeClass::Float: return is_float_dtype(t);
    case DtypeClass::Int: return is_int_dtype(t);
    case DtypeClass::Index: return is_int_dtype(t);
    case DtypeClass::Numeric: return is_numeric_dtype(t);
    case DtypeClass::Bool: return t == DType::Bool;
  }
  return false;
}

const OpSignature& signature(OpKind k) {
  using C = DtypeClass;
  static const std::map<OpKind, OpSignature> table = [] {
    std::map<OpKind, OpSignature> m;
    auto binary = OpSignature{2, 1, {C::Numeric, C::Numeric}, true, false, {}};
    m[OpKind::Input] = {0, 1, {}, false, false, {}};
    m[OpKind::Output] = {1, 1, {C::Any}, false, false, {}};
    m[OpKind::Constant] = {0, 1, {}, false, false, {}};
    m[OpKind::Add] = binary;
    m[OpKind::AddInPlace] = binary;
    m[OpKind::Sub] = binary;
    m[OpKind::Mul] = binary;
    m[OpKind::Div] = binary;
    m[OpKind::Remainder] = binary;
    m[OpKind::AddCdiv] = {3, 1, {C::Float, C::Float, C::Float}, true, false, {}};
    m[OpKind::Relu] = {1, 1, {C::Float}, false, false, {}};
    m[OpKind::HardTanh] = {1, 1, {C::Float}, false, false, {}};
    m[OpKind::Sigmoid] = {1, 1, {C::Float}, false, false, {}};
    m[OpKind::MatMul] = {2, 1, {C::Float, C::Float}, true, false, {}};
    m[OpKind::AddMM] = {3, 1, {C::Float, C::Float, C::Float}, true, false, {}};
    m[OpKind::Reshape] = {1, 1, {C::Any}, false, false, {}};
    m[OpKind::Flatten] = {1, 1, {C::Any}, false, false, {}};
    m[OpKind::Slice] = {1, 1, {C::Any}, false, false, {}};
    m[OpKind::Pad] = {1, 1, {C::Numeric}, false, false, {}};
    m[OpKind::Transpose] = {1, 1, {C::Any}, false, false, {}};
    m[OpKind::Cast] = {1, 1, {C::Any}, false, false, {}};
    m[OpKind::Gather] = {2, 1, {C::Any, C::Index}, false, false, {1}};
    m[OpKind::IndexSelect] = {2, 1, {C::Any, C::Index}, false, false, {1}};
    m[OpKind::EmbeddingBag] = {3, 1, {C::Float, C::Index, C::Index}, false, false, {1, 2}};
    m[OpKind::Where] = {1, 1, {C::Bool}, false, true, {}};
    m[OpKind::NonZeroSelect] = {1, 1, {C::Numeric}, false, true, {}};
    m[OpKind::Sum] = {1, 1, {C::Numeric}, false, false, {}};
    m[OpKind::Mean] = {1, 1, {C::Float}, false, false, {}};
    m[OpKind::Max] = {1, 1, {C::Numeric}, false, false, {}};
    m[OpKind::ArgMax] = {1, 1, {C::Numeric}, false, false, {}};
    m[OpKind::BatchNorm] = {1, 1, {C::Float}, false, false, {}};
    m[OpKind::MaxPool1d] = {1, 2, {C::Float}, false, false, {}};
    m[OpKind::MaxUnpool2d] = {2, 1, {C::Float, C::Index}, false, false, {1}};
    return m;
  }();
  return table.at(k);
}

bool is_shape_only(OpKind k) {
  switch (k) {
    case OpKind::Reshape:
    case OpKind::Flatten:
    case OpKind::Transpose:
    case OpKind::Slice:
    case OpKind::Cast:
      return true;
    default:
      return false;
  }
}

}  // namespace graphdiff
