#include "graphdiff/tensor.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <sstream>

#include "graphdiff/errors.hpp"
#include "graphdiff/hash.hpp"

namespace graphdiff {

std::string to_string(const TensorSpec& spec) {
  std::ostringstream os;
  os << to_string(spec.dtype) << "[";
  for (size_t i = 0; i < spec.shape.size(); ++i) {
    if (i) os << ",";
    os << spec.shape[i];
  }
  os << "]";
  if (!spec.contiguous) os << "(nc)";
  return os.str();
}

std::vector<int64_t> row_major_strides(const std::vector<int64_t>& shape) {
  std::vector<int64_t> strides(shape.size());
  int64_t acc = 1;
  for (size_t i = shape.size(); i-- > 0;) {
    strides[i] = acc;
    acc *= shape[i];
  }
  return strides;
}

namespace {

template <typename T>
std::vector<T> make_buffer(int64_t n) {
  return std::vector<T>(static_cast<size_t>(n));
}

}  // namespace

Tensor::Tensor(TensorSpec spec) : spec_(std::move(spec)) {
  strides_ = row_major_strides(spec_.shape);
  const int64_t n = spec_.element_count();
  switch (spec_.dtype) {
    case DType::F64: data_ = make_buffer<double>(n); break;
    case DType::F32: data_ = make_buffer<float>(n); break;
    case DType::I64:
    case DType::I32: data_ = make_buffer<int64_t>(n); break;
    case DType::Bool: data_ = make_buffer<uint8_t>(n); break;
  }
}

Tensor Tensor::full(TensorSpec spec, double value) {
  Tensor t(std::move(spec));
  for (int64_t i = 0; i < t.count(); ++i) t.set_f(i, value);
  return t;
}

Tensor Tensor::full_int(TensorSpec spec, int64_t value) {
  Tensor t(std::move(spec));
  for (int64_t i = 0; i < t.count(); ++i) t.set_i(i, value);
  return t;
}

int64_t Tensor::storage_index(int64_t logical) const {
  if (spec_.contiguous) return logical;
  // decompose row-major logical index, re-linearize through strides
  int64_t idx = 0;
  int64_t rem = logical;
  for (size_t d = spec_.shape.size(); d-- > 0;) {
    const int64_t extent = spec_.shape[d];
    const int64_t coord = rem % extent;
    rem /= extent;
    idx += coord * strides_[d];
  }
  return idx;
}

double Tensor::get_f(int64_t i) const {
  const int64_t s = storage_index(i);
  switch (spec_.dtype) {
    case DType::F64: return f64()[s];
    case DType::F32: return static_cast<double>(f32()[s]);
    case DType::I64:
    case DType::I32: return static_cast<double>(i64()[s]);
    case DType::Bool: return u8()[s] ? 1.0 : 0.0;
  }
  return 0.0;
}

int64_t Tensor::get_i(int64_t i) const {
  const int64_t s = storage_index(i);
  switch (spec_.dtype) {
    case DType::F64: return static_cast<int64_t>(f64()[s]);
    case DType::F32: return static_cast<int64_t>(f32()[s]);
    case DType::I64:
    case DType::I32: return i64()[s];
    case DType::Bool: return u8()[s] ? 1 : 0;
  }
  return 0;
}

void Tensor::set_f(int64_t i, double v) {
  const int64_t s = storage_index(i);
  switch (spec_.dtype) {
    case DType::F64: f64()[s] = v; break;
    case DType::F32: f32()[s] = static_cast<float>(v); break;
    case DType::I64:
    case DType::I32: i64()[s] = static_cast<int64_t>(v); break;
    case DType::Bool: u8()[s] = (v != 0.0) ? 1 : 0; break;
  }
}

void Tensor::set_i(int64_t i, int64_t v) {
  const int64_t s = storage_index(i);
  switch (spec_.dtype) {
    case DType::F64: f64()[s] = static_cast<double>(v); break;
    case DType::F32: f32()[s] = static_cast<float>(v); break;
    case DType::I64:
    case DType::I32: i64()[s] = v; break;
    case DType::Bool: u8()[s] = (v != 0) ? 1 : 0; break;
  }
}

Tensor Tensor::materialized() const {
  if (spec_.contiguous) return *this;
  TensorSpec out_spec = spec_;
  out_spec.contiguous = true;
  Tensor out(out_spec);
  for (int64_t i = 0; i < count(); ++i) {
    if (is_float_dtype(spec_.dtype)) {
      out.set_f(i, get_f(i));
    } else {
      out.set_i(i, get_i(i));
    }
  }
  return out;
}

Tensor Tensor::transposed(int dim0, int dim1) const {
  Tensor out = *this;
  std::swap(out.spec_.shape[dim0], out.spec_.shape[dim1]);
  std::swap(out.strides_[dim0], out.strides_[dim1]);
  out.spec_.contiguous = (out.strides_ == row_major_strides(out.spec_.shape));
  return out;
}

bool Tensor::bit_identical(const Tensor& a, const Tensor& b) {
  if (a.spec_.shape != b.spec_.shape || a.spec_.dtype != b.spec_.dtype) return false;
  for (int64_t i = 0; i < a.count(); ++i) {
    switch (a.spec_.dtype) {
      case DType::F64: {
        auto x = std::bit_cast<uint64_t>(a.get_f(i));
        auto y = std::bit_cast<uint64_t>(b.get_f(i));
        if (x != y) return false;
        break;
      }
      case DType::F32: {
        auto x = std::bit_cast<uint32_t>(static_cast<float>(a.get_f(i)));
        auto y = std::bit_cast<uint32_t>(static_cast<float>(b.get_f(i)));
        if (x != y) return false;
        break;
      }
      default:
        if (a.get_i(i) != b.get_i(i)) return false;
    }
  }
  return true;
}

namespace {

void append_le(std::string& out, uint64_t v, size_t bytes) {
  for (size_t i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

uint64_t read_le(const char* p, size_t bytes) {
  uint64_t v = 0;
  for (size_t i = 0; i < bytes; ++i)
    v |= static_cast<uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return v;
}

}  // namespace

void Tensor::append_wire_bytes(std::string& out) const {
  for (int64_t i = 0; i < count(); ++i) {
    switch (spec_.dtype) {
      case DType::F64: append_le(out, std::bit_cast<uint64_t>(get_f(i)), 8); break;
      case DType::F32:
        append_le(out, std::bit_cast<uint32_t>(static_cast<float>(get_f(i))), 4);
        break;
      case DType::I64: append_le(out, static_cast<uint64_t>(get_i(i)), 8); break;
      case DType::I32: append_le(out, static_cast<uint64_t>(get_i(i)) & 0xffffffffULL, 4); break;
      case DType::Bool: out.push_back(get_i(i) ? 1 : 0); break;
    }
  }
}

void Tensor::read_wire_bytes(const char* data, size_t n) {
  const size_t w = dtype_wire_size(spec_.dtype);
  if (n != w * static_cast<size_t>(count()))
    throw Error(Errc::ParseError, "tensor payload size mismatch");
  for (int64_t i = 0; i < count(); ++i) {
    const char* p = data + static_cast<size_t>(i) * w;
    switch (spec_.dtype) {
      case DType::F64: set_f(i, std::bit_cast<double>(read_le(p, 8))); break;
      case DType::F32:
        set_f(i, std::bit_cast<float>(static_cast<uint32_t>(read_le(p, 4))));
        break;
      case DType::I64: set_i(i, static_cast<int64_t>(read_le(p, 8))); break;
      case DType::I32: set_i(i, static_cast<int32_t>(static_cast<uint32_t>(read_le(p, 4)))); break;
      case DType::Bool: set_i(i, p[0] ? 1 : 0); break;
    }
  }
}

void Tensor::hash_into(Fnv1a& h) const {
  h.update_u64(static_cast<uint64_t>(spec_.dtype));
  h.update_u64(spec_.shape.size());
  for (int64_t e : spec_.shape) h.update_u64(static_cast<uint64_t>(e));
  for (int64_t i = 0; i < count(); ++i) {
    if (is_float_dtype(spec_.dtype)) {
      h.update_u64(std::bit_cast<uint64_t>(get_f(i)));
    } else {
      h.update_u64(static_cast<uint64_t>(get_i(i)));
    }
  }
}

}  // namespace graphdiff
