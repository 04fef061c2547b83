#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

namespace graphdiff {

enum class DType : uint8_t { F64, F32, I64, I32, Bool };

inline bool is_float_dtype(DType t) { return t == DType::F64 || t == DType::F32; }
inline bool is_int_dtype(DType t) { return t == DType::I64 || t == DType::I32; }
inline bool is_numeric_dtype(DType t) { return t != DType::Bool; }

// Bytes per element in input bundles and other wire formats.
inline size_t dtype_wire_size(DType t) {
  switch (t) {
    case DType::F64: return 8;
    case DType::F32: return 4;
    case DType::I64: return 8;
    case DType::I32: return 4;
    case DType::Bool: return 1;
  }
  return 0;
}

inline const char* to_string(DType t) {
  switch (t) {
    case DType::F64: return "f64";
    case DType::F32: return "f32";
    case DType::I64: return "i64";
    case DType::I32: return "i32";
    case DType::Bool: return "bool";
  }
  return "?";
}

inline std::optional<DType> dtype_from_string(std::string_view s) {
  if (s == "f64") return DType::F64;
  if (s == "f32") return DType::F32;
  if (s == "i64") return DType::I64;
  if (s == "i32") return DType::I32;
  if (s == "bool") return DType::Bool;
  return std::nullopt;
}

}  // namespace graphdiff
