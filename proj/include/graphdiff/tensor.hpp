#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "graphdiff/dtype.hpp"

namespace graphdiff {

inline constexpr int64_t kMaxExtent = (int64_t{1} << 31) - 1;
inline constexpr int64_t kDefaultElementCap = int64_t{1} << 24;

struct TensorSpec {
  std::vector<int64_t> shape;  // non-negative extents; empty == scalar
  DType dtype = DType::F32;
  bool contiguous = true;

  int64_t element_count() const {
    int64_t n = 1;
    for (int64_t e : shape) n *= e;
    return n;
  }
  int rank() const { return static_cast<int>(shape.size()); }

  bool operator==(const TensorSpec&) const = default;
};

std::string to_string(const TensorSpec& spec);

// Row-major strides (in elements) for a given shape.
std::vector<int64_t> row_major_strides(const std::vector<int64_t>& shape);

// Dense tensor. The buffer always holds exactly element_count() elements.
//
// Storage notes:
//  * I32 values live in 64-bit slots; the dtype tag stays I32 and defined
//    arithmetic wraps results to 32 bits, but backend-defined results for
//    undefined operations (e.g. integer division by zero) may legally sit
//    outside the int32 range, exactly as they do on real devices.
//  * Bool is stored as uint8 0/1.
//  * A non-contiguous tensor (a transpose view) keeps the producer's buffer
//    order and carries strides mapping logical row-major indices to storage.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(TensorSpec spec);

  static Tensor zeros(TensorSpec spec) { return Tensor(std::move(spec)); }
  static Tensor full(TensorSpec spec, double value);
  static Tensor full_int(TensorSpec spec, int64_t value);

  const TensorSpec& spec() const { return spec_; }
  DType dtype() const { return spec_.dtype; }
  int64_t count() const { return spec_.element_count(); }
  const std::vector<int64_t>& strides() const { return strides_; }

  // Logical element access: index i enumerates elements in row-major order
  // of spec().shape regardless of the underlying storage layout.
  double get_f(int64_t i) const;
  int64_t get_i(int64_t i) const;
  void set_f(int64_t i, double v);
  void set_i(int64_t i, int64_t v);

  // Storage-order access (valid only when layouts are known to match).
  std::vector<double>& f64() { return std::get<std::vector<double>>(data_); }
  std::vector<float>& f32() { return std::get<std::vector<float>>(data_); }
  std::vector<int64_t>& i64() { return std::get<std::vector<int64_t>>(data_); }
  std::vector<uint8_t>& u8() { return std::get<std::vector<uint8_t>>(data_); }
  const std::vector<double>& f64() const { return std::get<std::vector<double>>(data_); }
  const std::vector<float>& f32() const { return std::get<std::vector<float>>(data_); }
  const std::vector<int64_t>& i64() const { return std::get<std::vector<int64_t>>(data_); }
  const std::vector<uint8_t>& u8() const { return std::get<std::vector<uint8_t>>(data_); }

  // Copy with packed row-major storage.
  Tensor materialized() const;

  // Transpose view: swaps two dims, shares element values (copied buffer,
  // permuted strides). Marks the result non-contiguous when the resulting
  // strides are not row-major.
  Tensor transposed(int dim0, int dim1) const;

  // Bitwise equality of spec and logical element values.
  static bool bit_identical(const Tensor& a, const Tensor& b);

  // Raw little-endian element bytes in logical order, dtype_wire_size each.
  void append_wire_bytes(std::string& out) const;
  void read_wire_bytes(const char* data, size_t n);

  // Stable content digest (spec + logical values at full width).
  void hash_into(class Fnv1a& h) const;

 private:
  int64_t storage_index(int64_t logical) const;

  TensorSpec spec_;
  std::vector<int64_t> strides_;
  std::variant<std::vector<double>, std::vector<float>, std::vector<int64_t>,
               std::vector<uint8_t>>
      data_;
};

}  // namespace graphdiff
