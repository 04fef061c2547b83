#include "graphdiff/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "graphdiff/errors.hpp"
#include "graphdiff/hash.hpp"
#include "graphdiff/rng.hpp"

namespace graphdiff {

const char* to_string(NodeErrorKind k) {
  switch (k) {
    case NodeErrorKind::Unsupported: return "unsupported";
    case NodeErrorKind::OutOfBounds: return "out_of_bounds";
    case NodeErrorKind::ShapeMismatch: return "shape_mismatch";
    case NodeErrorKind::NumericFault: return "numeric_fault";
  }
  return "?";
}

std::optional<NodeErrorKind> node_error_kind_from_string(std::string_view s) {
  if (s == "unsupported") return NodeErrorKind::Unsupported;
  if (s == "out_of_bounds") return NodeErrorKind::OutOfBounds;
  if (s == "shape_mismatch") return NodeErrorKind::ShapeMismatch;
  if (s == "numeric_fault") return NodeErrorKind::NumericFault;
  return std::nullopt;
}

std::optional<NodeError> static_unsupported(const BackendProfile& profile, const Graph& g,
                                            const Node& node) {
  if (!is_operator(node.kind)) return std::nullopt;
  if (profile.unsupported_ops.count(node.kind))
    return NodeError{NodeErrorKind::Unsupported,
                     std::string(to_string(node.kind)) + " not implemented"};

  auto excluded = profile.unsupported_dtypes.find(node.kind);
  if (excluded != profile.unsupported_dtypes.end()) {
    for (const auto& in : node.inputs) {
      const auto& spec = g.node(in.node).output_specs[static_cast<size_t>(in.slot)];
      if (excluded->second.count(spec.dtype))
        return NodeError{NodeErrorKind::Unsupported,
                         std::string(to_string(node.kind)) + " rejects " +
                             to_string(spec.dtype) + " input"};
    }
    for (const auto& spec : node.output_specs)
      if (excluded->second.count(spec.dtype))
        return NodeError{NodeErrorKind::Unsupported,
                         std::string(to_string(node.kind)) + " rejects " +
                             to_string(spec.dtype) + " output"};
  }

  if (profile.contiguity_required_ops.count(node.kind)) {
    for (const auto& in : node.inputs) {
      const auto& spec = g.node(in.node).output_specs[static_cast<size_t>(in.slot)];
      if (!spec.contiguous)
        return NodeError{NodeErrorKind::Unsupported,
                         std::string(to_string(node.kind)) + " requires contiguous inputs"};
    }
  }
  return std::nullopt;
}

namespace {

struct EvalError {
  NodeErrorKind kind;
  std::string detail;
};

struct EvalContext {
  const BackendProfile& profile;
  uint64_t run_seed = 0;
};

// ---- numeric helpers --------------------------------------------------------

double round_accum(double v, DType accum) {
  return accum == DType::F32 ? static_cast<double>(static_cast<float>(v)) : v;
}

// Reduction of doubles honoring the profile's order and accumulation dtype.
double ordered_sum(const std::vector<double>& values, const EvalContext& ctx, int64_t node_id) {
  const DType accum = ctx.profile.accumulation_dtype;
  auto seq = [&](auto begin, auto end) {
    double acc = 0.0;
    for (auto it = begin; it != end; ++it) acc = round_accum(acc + *it, accum);
    return acc;
  };
  switch (ctx.profile.reduction_order.kind) {
    case ReductionOrder::Kind::Sequential:
      return seq(values.begin(), values.end());
    case ReductionOrder::Kind::FixedTreeChunked: {
      const int64_t chunk = std::max<int64_t>(1, ctx.profile.reduction_order.chunk);
      std::vector<double> partial;
      for (size_t base = 0; base < values.size(); base += static_cast<size_t>(chunk)) {
        const size_t end = std::min(values.size(), base + static_cast<size_t>(chunk));
        partial.push_back(seq(values.begin() + static_cast<long>(base),
                              values.begin() + static_cast<long>(end)));
      }
      if (partial.empty()) return 0.0;
      // fixed pairwise combine tree
      while (partial.size() > 1) {
        std::vector<double> next;
        for (size_t i = 0; i + 1 < partial.size(); i += 2)
          next.push_back(round_accum(partial[i] + partial[i + 1], accum));
        if (partial.size() % 2) next.push_back(partial.back());
        partial = std::move(next);
      }
      return partial[0];
    }
    case ReductionOrder::Kind::SeededPermutation: {
      std::vector<size_t> order(values.size());
      for (size_t i = 0; i < order.size(); ++i) order[i] = i;
      Rng rng(mix_seed(ctx.run_seed, static_cast<uint64_t>(node_id)));
      rng.shuffle(order);
      double acc = 0.0;
      for (size_t i : order) acc = round_accum(acc + values[i], accum);
      return acc;
    }
  }
  return 0.0;
}

int64_t wrap_to_dtype(int64_t v, DType dt) {
  if (dt == DType::I32)
    return static_cast<int64_t>(static_cast<int32_t>(static_cast<uint32_t>(v)));
  return v;
}

int64_t wrap_add(int64_t a, int64_t b) {
  return static_cast<int64_t>(static_cast<uint64_t>(a) + static_cast<uint64_t>(b));
}
int64_t wrap_sub(int64_t a, int64_t b) {
  return static_cast<int64_t>(static_cast<uint64_t>(a) - static_cast<uint64_t>(b));
}
int64_t wrap_mul(int64_t a, int64_t b) {
  return static_cast<int64_t>(static_cast<uint64_t>(a) * static_cast<uint64_t>(b));
}

// trunc division with INT64_MIN/-1 wrapping instead of trapping
int64_t wrap_div(int64_t a, int64_t b) {
  if (a == std::numeric_limits<int64_t>::min() && b == -1) return a;
  return a / b;
}

int64_t python_mod(int64_t a, int64_t b) {
  if (a == std::numeric_limits<int64_t>::min() && b == -1) return 0;
  int64_t r = a % b;
  if (r != 0 && ((r < 0) != (b < 0))) r += b;
  return r;
}

// remainder with the divisor's sign, matching elementwise float remainder
double float_remainder(double a, double b) {
  double r = std::fmod(a, b);
  if (r != 0.0 && !std::isnan(r) && ((r < 0) != (b < 0))) r += b;
  return r;
}

std::optional<int64_t> resolve_index(int64_t idx, int64_t extent, BoundsPolicy policy) {
  if (extent <= 0) return std::nullopt;
  if (idx >= 0 && idx < extent) return idx;
  switch (policy) {
    case BoundsPolicy::Strict: return std::nullopt;
    case BoundsPolicy::UncheckedWrap: {
      int64_t m = idx % extent;
      if (m < 0) m += extent;
      return m;
    }
    case BoundsPolicy::UncheckedClamp: return std::clamp<int64_t>(idx, 0, extent - 1);
  }
  return std::nullopt;
}

// ---- exceptional-value output transforms -------------------------------------

void apply_exceptional(ExceptionalRule rule, Tensor& t) {
  if (rule == ExceptionalRule::Propagate || !is_float_dtype(t.dtype())) return;
  const int64_t n = t.count();
  switch (rule) {
    case ExceptionalRule::NanToZero:
      for (int64_t i = 0; i < n; ++i)
        if (std::isnan(t.get_f(i))) t.set_f(i, 0.0);
      break;
    case ExceptionalRule::NanInterpolate: {
      // replace each NaN with the mean of its non-NaN flat neighbors; edge
      // elements use the single neighbor; isolated NaNs become 0
      std::vector<double> snapshot(static_cast<size_t>(n));
      for (int64_t i = 0; i < n; ++i) snapshot[static_cast<size_t>(i)] = t.get_f(i);
      for (int64_t i = 0; i < n; ++i) {
        if (!std::isnan(snapshot[static_cast<size_t>(i)])) continue;
        double sum = 0.0;
        int found = 0;
        if (i > 0 && !std::isnan(snapshot[static_cast<size_t>(i - 1)])) {
          sum += snapshot[static_cast<size_t>(i - 1)];
          ++found;
        }
        if (i + 1 < n && !std::isnan(snapshot[static_cast<size_t>(i + 1)])) {
          sum += snapshot[static_cast<size_t>(i + 1)];
          ++found;
        }
        t.set_f(i, found ? sum / found : 0.0);
      }
      break;
    }
    case ExceptionalRule::InfNanSwap:
      for (int64_t i = 0; i < n; ++i) {
        const double v = t.get_f(i);
        if (std::isnan(v))
          t.set_f(i, std::numeric_limits<double>::infinity());
        else if (std::isinf(v))
          t.set_f(i, std::numeric_limits<double>::quiet_NaN());
      }
      break;
    case ExceptionalRule::Propagate: break;
  }
}

// ---- per-node evaluation ------------------------------------------------------

using Inputs = std::vector<const Tensor*>;
using EvalResult = std::variant<std::vector<Tensor>, EvalError>;

EvalResult fail(NodeErrorKind kind, std::string detail) {
  return EvalError{kind, std::move(detail)};
}

Tensor out_like(const Node& node, size_t slot, std::vector<int64_t> shape) {
  TensorSpec spec;
  spec.shape = std::move(shape);
  spec.dtype = node.output_specs[slot].dtype;
  spec.contiguous = true;
  return Tensor(spec);
}

EvalResult eval_elementwise(const EvalContext& ctx, const Node& node, const Inputs& in) {
  const Tensor& a = *in[0];
  const Tensor& b = *in[1];
  Tensor out = out_like(node, 0, a.spec().shape);
  const int64_t n = out.count();
  const bool floats = is_float_dtype(out.dtype());

  for (int64_t i = 0; i < n; ++i) {
    if (floats) {
      const double x = a.get_f(i);
      const double y = b.get_f(i);
      double r = 0;
      switch (node.kind) {
        case OpKind::Add:
        case OpKind::AddInPlace: r = x + y; break;
        case OpKind::Sub: r = x - y; break;
        case OpKind::Mul: r = x * y; break;
        case OpKind::Div: r = x / y; break;
        case OpKind::Remainder: r = float_remainder(x, y); break;
        default: return fail(NodeErrorKind::NumericFault, "bad elementwise kind");
      }
      out.set_f(i, r);
    } else {
      const int64_t x = a.get_i(i);
      const int64_t y = b.get_i(i);
      int64_t r = 0;
      switch (node.kind) {
        case OpKind::Add:
        case OpKind::AddInPlace: r = wrap_add(x, y); break;
        case OpKind::Sub: r = wrap_sub(x, y); break;
        case OpKind::Mul: r = wrap_mul(x, y); break;
        case OpKind::Div:
        case OpKind::Remainder: {
          if (y == 0) {
            const auto& rule = ctx.profile.int_div_by_zero;
            switch (rule.kind) {
              case IntDivByZeroRule::Kind::Value: r = rule.value; break;
              case IntDivByZeroRule::Kind::DividendPlusOne: r = wrap_add(x, 1); break;
              case IntDivByZeroRule::Kind::Error:
                return fail(NodeErrorKind::NumericFault,
                            "integer division by zero at element " + std::to_string(i));
            }
            // backend-defined result is written verbatim, outside the dtype
            // range if the platform does so
            out.set_i(i, r);
            continue;
          }
          r = node.kind == OpKind::Div ? wrap_div(x, y) : python_mod(x, y);
          break;
        }
        default: return fail(NodeErrorKind::NumericFault, "bad elementwise kind");
      }
      out.set_i(i, wrap_to_dtype(r, out.dtype()));
    }
  }
  return std::vector<Tensor>{std::move(out)};
}

EvalResult eval_addcdiv(const Node& node, const Inputs& in) {
  const double scale = attr_f(node.attrs, "value", 1.0);
  Tensor out = out_like(node, 0, in[0]->spec().shape);
  for (int64_t i = 0; i < out.count(); ++i)
    out.set_f(i, in[0]->get_f(i) + scale * (in[1]->get_f(i) / in[2]->get_f(i)));
  return std::vector<Tensor>{std::move(out)};
}

EvalResult eval_activation(const Node& node, const Inputs& in) {
  Tensor out = out_like(node, 0, in[0]->spec().shape);
  const double min_val = attr_f(node.attrs, "min_val", -1.0);
  const double max_val = attr_f(node.attrs, "max_val", 1.0);
  for (int64_t i = 0; i < out.count(); ++i) {
    const double x = in[0]->get_f(i);
    double r = x;
    switch (node.kind) {
      case OpKind::Relu: r = std::isnan(x) ? x : (x > 0 ? x : 0.0); break;
      case OpKind::HardTanh:
        r = std::isnan(x) ? x : std::min(std::max(x, min_val), max_val);
        break;
      case OpKind::Sigmoid: r = 1.0 / (1.0 + std::exp(-x)); break;
      default: break;
    }
    out.set_f(i, r);
  }
  return std::vector<Tensor>{std::move(out)};
}

EvalResult eval_matmul(const EvalContext& ctx, const Node& node, const Inputs& in) {
  const bool addmm = node.kind == OpKind::AddMM;
  const Tensor& a = addmm ? *in[1] : *in[0];
  const Tensor& b = addmm ? *in[2] : *in[1];
  const Tensor* bias = addmm ? in[0] : nullptr;
  const int64_t m = a.spec().shape[0];
  const int64_t k = a.spec().shape[1];
  const int64_t n = b.spec().shape[1];
  const DType accum = ctx.profile.accumulation_dtype;

  Tensor out = out_like(node, 0, {m, n});
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int64_t t = 0; t < k; ++t)
        acc = round_accum(acc + a.get_f(i * k + t) * b.get_f(t * n + j), accum);
      if (bias) {
        const double bv = bias->spec().rank() == 1 ? bias->get_f(j) : bias->get_f(i * n + j);
        acc = round_accum(acc + bv, accum);
      }
      out.set_f(i * n + j, acc);
    }
  }
  return std::vector<Tensor>{std::move(out)};
}

EvalResult eval_shape_op(const Node& node, const Inputs& in) {
  const Tensor& x = *in[0];
  switch (node.kind) {
    case OpKind::Reshape: {
      const auto target = attr_ivec(node.attrs, "shape");
      Tensor out = out_like(node, 0, target);
      for (int64_t i = 0; i < out.count(); ++i) {
        if (is_float_dtype(x.dtype())) out.set_f(i, x.get_f(i));
        else out.set_i(i, x.get_i(i));
      }
      return std::vector<Tensor>{std::move(out)};
    }
    case OpKind::Flatten: {
      Tensor out = out_like(node, 0, {x.count()});
      for (int64_t i = 0; i < out.count(); ++i) {
        if (is_float_dtype(x.dtype())) out.set_f(i, x.get_f(i));
        else out.set_i(i, x.get_i(i));
      }
      return std::vector<Tensor>{std::move(out)};
    }
    case OpKind::Slice: {
      const int64_t dim = attr_i(node.attrs, "dim");
      const int64_t start = attr_i(node.attrs, "start");
      const int64_t end = attr_i(node.attrs, "end");
      auto shape = x.spec().shape;
      shape[static_cast<size_t>(dim)] = end - start;
      Tensor out = out_like(node, 0, shape);
      const auto out_strides = row_major_strides(shape);
      for (int64_t i = 0; i < out.count(); ++i) {
        // shift the sliced coordinate, read through logical indexing
        int64_t rem = i;
        int64_t src = 0;
        for (size_t d = 0; d < shape.size(); ++d) {
          int64_t coord = rem / out_strides[d];
          rem %= out_strides[d];
          if (static_cast<int64_t>(d) == dim) coord += start;
          src = src * x.spec().shape[d] + coord;
        }
        if (is_float_dtype(x.dtype())) out.set_f(i, x.get_f(src));
        else out.set_i(i, x.get_i(src));
      }
      return std::vector<Tensor>{std::move(out)};
    }
    case OpKind::Pad: {
      const auto before = attr_ivec(node.attrs, "before");
      const auto after = attr_ivec(node.attrs, "after");
      const double value = attr_f(node.attrs, "value", 0.0);
      auto shape = x.spec().shape;
      for (size_t d = 0; d < shape.size(); ++d) shape[d] += before[d] + after[d];
      Tensor out = is_float_dtype(x.dtype())
                       ? Tensor::full(TensorSpec{shape, x.dtype(), true}, value)
                       : Tensor::full_int(TensorSpec{shape, x.dtype(), true},
                                          static_cast<int64_t>(value));
      const auto out_strides = row_major_strides(shape);
      const auto in_strides = row_major_strides(x.spec().shape);
      for (int64_t i = 0; i < x.count(); ++i) {
        int64_t rem = i;
        int64_t dst = 0;
        for (size_t d = 0; d < shape.size(); ++d) {
          const int64_t coord = rem / in_strides[d] + before[d];
          rem %= in_strides[d];
          dst += coord * out_strides[d];
        }
        if (is_float_dtype(x.dtype())) out.set_f(dst, x.get_f(i));
        else out.set_i(dst, x.get_i(i));
      }
      return std::vector<Tensor>{std::move(out)};
    }
    case OpKind::Transpose: {
      const int dim0 = static_cast<int>(attr_i(node.attrs, "dim0"));
      const int dim1 = static_cast<int>(attr_i(node.attrs, "dim1"));
      Tensor base = x.spec().contiguous ? x : x.materialized();
      return std::vector<Tensor>{base.transposed(dim0, dim1)};
    }
    default: break;
  }
  return fail(NodeErrorKind::NumericFault, "bad shape op");
}

EvalResult eval_cast(const EvalContext& ctx, const Node& node, const Inputs& in) {
  const Tensor& x = *in[0];
  const DType to = node.output_specs[0].dtype;
  Tensor out = out_like(node, 0, x.spec().shape);

  for (int64_t i = 0; i < out.count(); ++i) {
    if (is_float_dtype(to)) {
      out.set_f(i, is_float_dtype(x.dtype()) ? x.get_f(i)
                                             : static_cast<double>(x.get_i(i)));
      continue;
    }
    if (to == DType::Bool) {
      const bool truthy = is_float_dtype(x.dtype()) ? (x.get_f(i) != 0.0) : (x.get_i(i) != 0);
      out.set_i(i, truthy ? 1 : 0);
      continue;
    }
    // integer target
    if (!is_float_dtype(x.dtype())) {
      out.set_i(i, wrap_to_dtype(x.get_i(i), to));
      continue;
    }
    const double v = x.get_f(i);
    if (std::isnan(v)) {
      out.set_i(i, 0);
      continue;
    }
    const int64_t int_max =
        to == DType::I32 ? std::numeric_limits<int32_t>::max() : std::numeric_limits<int64_t>::max();
    const int64_t int_min =
        to == DType::I32 ? std::numeric_limits<int32_t>::min() : std::numeric_limits<int64_t>::min();
    if (std::isinf(v)) {
      const auto& rule = ctx.profile.inf_to_int_cast;
      switch (rule.kind) {
        case InfToIntCastRule::Kind::Saturate: out.set_i(i, v > 0 ? int_max : int_min); break;
        case InfToIntCastRule::Kind::Value: out.set_i(i, rule.value); break;
        case InfToIntCastRule::Kind::Error:
          return fail(NodeErrorKind::NumericFault,
                      "cast of infinity to integer at element " + std::to_string(i));
      }
      continue;
    }
    // finite: truncate toward zero, saturating at the dtype range
    double t = std::trunc(v);
    if (t >= static_cast<double>(int_max))
      out.set_i(i, int_max);
    else if (t <= static_cast<double>(int_min))
      out.set_i(i, int_min);
    else
      out.set_i(i, static_cast<int64_t>(t));
  }
  return std::vector<Tensor>{std::move(out)};
}

EvalResult eval_gather(const EvalContext& ctx, const Node& node, const Inputs& in) {
  const Tensor& data = *in[0];
  const Tensor& index = *in[1];
  const int64_t dim = attr_i(node.attrs, "dim");

  if (node.kind == OpKind::Gather) {
    Tensor out = out_like(node, 0, index.spec().shape);
    const auto idx_strides = row_major_strides(index.spec().shape);
    const auto& data_shape = data.spec().shape;
    for (int64_t i = 0; i < out.count(); ++i) {
      int64_t rem = i;
      int64_t src = 0;
      for (size_t d = 0; d < data_shape.size(); ++d) {
        int64_t coord = rem / idx_strides[d];
        rem %= idx_strides[d];
        if (static_cast<int64_t>(d) == dim) {
          auto resolved =
              resolve_index(index.get_i(i), data_shape[d], ctx.profile.bounds_policy);
          if (!resolved)
            return fail(NodeErrorKind::OutOfBounds,
                        "index " + std::to_string(index.get_i(i)) + " out of range for extent " +
                            std::to_string(data_shape[d]));
          coord = *resolved;
        }
        src = src * data_shape[d] + coord;
      }
      if (is_float_dtype(data.dtype())) out.set_f(i, data.get_f(src));
      else out.set_i(i, data.get_i(src));
    }
    return std::vector<Tensor>{std::move(out)};
  }

  // IndexSelect
  auto shape = data.spec().shape;
  shape[static_cast<size_t>(dim)] = index.count();
  Tensor out = out_like(node, 0, shape);
  const auto out_strides = row_major_strides(shape);
  const auto& data_shape = data.spec().shape;
  for (int64_t i = 0; i < out.count(); ++i) {
    int64_t rem = i;
    int64_t src = 0;
    for (size_t d = 0; d < shape.size(); ++d) {
      int64_t coord = rem / out_strides[d];
      rem %= out_strides[d];
      if (static_cast<int64_t>(d) == dim) {
        auto resolved =
            resolve_index(index.get_i(coord), data_shape[d], ctx.profile.bounds_policy);
        if (!resolved)
          return fail(NodeErrorKind::OutOfBounds,
                      "index " + std::to_string(index.get_i(coord)) +
                          " out of range for extent " + std::to_string(data_shape[d]));
        coord = *resolved;
      }
      src = src * data_shape[d] + coord;
    }
    if (is_float_dtype(data.dtype())) out.set_f(i, data.get_f(src));
    else out.set_i(i, data.get_i(src));
  }
  return std::vector<Tensor>{std::move(out)};
}

EvalResult eval_embedding_bag(const EvalContext& ctx, const Node& node, const Inputs& in) {
  const Tensor& weight = *in[0];
  const Tensor& indices = *in[1];
  const Tensor& offsets = *in[2];
  const int64_t rows = weight.spec().shape[0];
  const int64_t dim = weight.spec().shape[1];
  const int64_t n_idx = indices.count();
  const int64_t bags = offsets.count();
  const DType accum = ctx.profile.accumulation_dtype;

  Tensor out = out_like(node, 0, {bags, dim});
  for (int64_t b = 0; b < bags; ++b) {
    int64_t start = offsets.get_i(b);
    int64_t end = (b + 1 < bags) ? offsets.get_i(b + 1) : n_idx;
    if (start < 0 || start > n_idx || end < start || end > n_idx) {
      if (ctx.profile.bounds_policy == BoundsPolicy::Strict)
        return fail(NodeErrorKind::OutOfBounds,
                    "bag " + std::to_string(b) + " offsets [" + std::to_string(start) + "," +
                        std::to_string(end) + ") outside 0.." + std::to_string(n_idx));
      start = std::clamp<int64_t>(start, 0, n_idx);
      end = std::clamp<int64_t>(end, start, n_idx);
    }
    for (int64_t j = 0; j < dim; ++j) {
      double acc = 0.0;
      for (int64_t t = start; t < end; ++t) {
        auto row = resolve_index(indices.get_i(t), rows, ctx.profile.bounds_policy);
        if (!row)
          return fail(NodeErrorKind::OutOfBounds,
                      "embedding index " + std::to_string(indices.get_i(t)) +
                          " out of range for " + std::to_string(rows) + " rows");
        acc = round_accum(acc + weight.get_f(*row * dim + j), accum);
      }
      out.set_f(b * dim + j, acc);
    }
  }
  return std::vector<Tensor>{std::move(out)};
}

EvalResult eval_data_dependent(const Node& node, const Inputs& in) {
  const Tensor& x = *in[0];
  if (node.kind == OpKind::Where) {
    std::vector<int64_t> hits;
    for (int64_t i = 0; i < x.count(); ++i)
      if (x.get_i(i) != 0) hits.push_back(i);
    Tensor out = out_like(node, 0, {static_cast<int64_t>(hits.size())});
    for (size_t i = 0; i < hits.size(); ++i) out.set_i(static_cast<int64_t>(i), hits[i]);
    return std::vector<Tensor>{std::move(out)};
  }
  // NonZeroSelect: keep elements that compare unequal to zero (NaN included)
  std::vector<int64_t> keep;
  for (int64_t i = 0; i < x.count(); ++i) {
    const bool nonzero =
        is_float_dtype(x.dtype()) ? !(x.get_f(i) == 0.0) : (x.get_i(i) != 0);
    if (nonzero) keep.push_back(i);
  }
  Tensor out = out_like(node, 0, {static_cast<int64_t>(keep.size())});
  for (size_t i = 0; i < keep.size(); ++i) {
    if (is_float_dtype(x.dtype()))
      out.set_f(static_cast<int64_t>(i), x.get_f(keep[i]));
    else
      out.set_i(static_cast<int64_t>(i), x.get_i(keep[i]));
  }
  return std::vector<Tensor>{std::move(out)};
}

EvalResult eval_reduction(const EvalContext& ctx, const Node& node, const Inputs& in) {
  const Tensor& x = *in[0];
  const int64_t n = x.count();

  if (node.kind == OpKind::Sum || node.kind == OpKind::Mean) {
    Tensor out = out_like(node, 0, {});
    if (is_float_dtype(x.dtype())) {
      std::vector<double> values(static_cast<size_t>(n));
      for (int64_t i = 0; i < n; ++i) values[static_cast<size_t>(i)] = x.get_f(i);
      double s = ordered_sum(values, ctx, node.id);
      if (node.kind == OpKind::Mean) s /= static_cast<double>(n);
      out.set_f(0, s);
    } else {
      // integer addition is associative; order cannot matter
      int64_t acc = 0;
      for (int64_t i = 0; i < n; ++i) acc = wrap_add(acc, x.get_i(i));
      out.set_i(0, wrap_to_dtype(acc, out.dtype()));
    }
    return std::vector<Tensor>{std::move(out)};
  }

  if (n == 0)
    return fail(NodeErrorKind::NumericFault,
                std::string(to_string(node.kind)) + " over empty tensor");

  if (node.kind == OpKind::Max) {
    Tensor out = out_like(node, 0, {});
    if (is_float_dtype(x.dtype())) {
      double best = x.get_f(0);
      for (int64_t i = 1; i < n; ++i) {
        const double v = x.get_f(i);
        if (std::isnan(best)) break;
        if (std::isnan(v) || v > best) best = v;
      }
      out.set_f(0, best);
    } else {
      int64_t best = x.get_i(0);
      for (int64_t i = 1; i < n; ++i) best = std::max(best, x.get_i(i));
      out.set_i(0, best);
    }
    return std::vector<Tensor>{std::move(out)};
  }

  // ArgMax: first maximal element; NaN ranks above everything
  Tensor out = out_like(node, 0, {});
  int64_t best_idx = 0;
  if (is_float_dtype(x.dtype())) {
    double best = x.get_f(0);
    for (int64_t i = 1; i < n; ++i) {
      const double v = x.get_f(i);
      if (std::isnan(best)) break;
      if (std::isnan(v) || v > best) {
        best = v;
        best_idx = i;
      }
    }
  } else {
    int64_t best = x.get_i(0);
    for (int64_t i = 1; i < n; ++i)
      if (x.get_i(i) > best) {
        best = x.get_i(i);
        best_idx = i;
      }
  }
  out.set_i(0, best_idx);
  return std::vector<Tensor>{std::move(out)};
}

EvalResult eval_batch_norm(const EvalContext& ctx, const Node& node, const Inputs& in) {
  const Tensor& x = *in[0];
  const double eps = attr_f(node.attrs, "eps", 1e-5);
  const int64_t n = x.count();
  const DType accum = ctx.profile.accumulation_dtype;

  double sum = 0.0;
  for (int64_t i = 0; i < n; ++i) sum = round_accum(sum + x.get_f(i), accum);
  const double mean = n ? sum / static_cast<double>(n) : 0.0;
  double var_sum = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const double d = x.get_f(i) - mean;
    var_sum = round_accum(var_sum + d * d, accum);
  }
  const double var = n ? var_sum / static_cast<double>(n) : 0.0;
  const double denom = std::sqrt(var + eps);

  Tensor out = out_like(node, 0, x.spec().shape);
  for (int64_t i = 0; i < n; ++i) out.set_f(i, (x.get_f(i) - mean) / denom);
  return std::vector<Tensor>{std::move(out)};
}

EvalResult eval_max_pool1d(const Node& node, const Inputs& in) {
  const Tensor& x = *in[0];
  const int64_t k = attr_i(node.attrs, "kernel_size", 1);
  const int64_t s = attr_i(node.attrs, "stride", 1);
  const int64_t len = x.count();
  const int64_t out_len = (len - k) / s + 1;

  Tensor values = out_like(node, 0, {out_len});
  Tensor indices = out_like(node, 1, {out_len});
  for (int64_t o = 0; o < out_len; ++o) {
    const int64_t base = o * s;
    double best = x.get_f(base);
    int64_t best_idx = base;
    for (int64_t t = 1; t < k; ++t) {
      const double v = x.get_f(base + t);
      if (std::isnan(best)) break;
      if (std::isnan(v) || v > best) {
        best = v;
        best_idx = base + t;
      }
    }
    values.set_f(o, best);
    indices.set_i(o, best_idx);
  }
  return std::vector<Tensor>{std::move(values), std::move(indices)};
}

EvalResult eval_max_unpool(const EvalContext& ctx, const Node& node, const Inputs& in) {
  const Tensor& data = *in[0];
  const Tensor& indices = *in[1];
  const auto out_shape = attr_ivec(node.attrs, "out_shape");
  Tensor out = out_like(node, 0, out_shape);
  const int64_t total = out.count();
  const int64_t n = data.count();

  // write order is the scheduling knob: duplicate indices make the last
  // writer observable
  std::vector<int64_t> order(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
  if (ctx.profile.reduction_order.kind == ReductionOrder::Kind::SeededPermutation) {
    Rng rng(mix_seed(ctx.run_seed, static_cast<uint64_t>(node.id)));
    rng.shuffle(order);
  }
  for (int64_t p : order) {
    auto dst = resolve_index(indices.get_i(p), total, ctx.profile.bounds_policy);
    if (!dst)
      return fail(NodeErrorKind::OutOfBounds,
                  "unpool index " + std::to_string(indices.get_i(p)) +
                      " out of range for " + std::to_string(total) + " elements");
    out.set_f(*dst, data.get_f(p));
  }
  return std::vector<Tensor>{std::move(out)};
}

EvalResult eval_node(const EvalContext& ctx, const Node& node, const Inputs& in) {
  switch (node.kind) {
    case OpKind::Add:
    case OpKind::AddInPlace:
    case OpKind::Sub:
    case OpKind::Mul:
    case OpKind::Div:
    case OpKind::Remainder:
      return eval_elementwise(ctx, node, in);
    case OpKind::AddCdiv: return eval_addcdiv(node, in);
    case OpKind::Relu:
    case OpKind::HardTanh:
    case OpKind::Sigmoid:
      return eval_activation(node, in);
    case OpKind::MatMul:
    case OpKind::AddMM:
      return eval_matmul(ctx, node, in);
    case OpKind::Reshape:
    case OpKind::Flatten:
    case OpKind::Slice:
    case OpKind::Pad:
    case OpKind::Transpose:
      return eval_shape_op(node, in);
    case OpKind::Cast: return eval_cast(ctx, node, in);
    case OpKind::Gather:
    case OpKind::IndexSelect:
      return eval_gather(ctx, node, in);
    case OpKind::EmbeddingBag: return eval_embedding_bag(ctx, node, in);
    case OpKind::Where:
    case OpKind::NonZeroSelect:
      return eval_data_dependent(node, in);
    case OpKind::Sum:
    case OpKind::Mean:
    case OpKind::Max:
    case OpKind::ArgMax:
      return eval_reduction(ctx, node, in);
    case OpKind::BatchNorm: return eval_batch_norm(ctx, node, in);
    case OpKind::MaxPool1d: return eval_max_pool1d(node, in);
    case OpKind::MaxUnpool2d: return eval_max_unpool(ctx, node, in);
    default:
      return fail(NodeErrorKind::NumericFault, "unexpected node kind in eval");
  }
}

}  // namespace

ExecutionTrace execute(const BackendProfile& profile, std::shared_ptr<const Graph> graph,
                       std::span<const Tensor> inputs, const ExecOptions& opts) {
  const Graph& g = *graph;
  if (inputs.size() != g.inputs().size())
    throw Error(Errc::InvalidArgument,
                "expected " + std::to_string(g.inputs().size()) + " inputs, got " +
                    std::to_string(inputs.size()));
  for (size_t i = 0; i < inputs.size(); ++i) {
    const auto& expected = g.node(g.inputs()[i]).output_specs[0];
    if (inputs[i].spec().shape != expected.shape || inputs[i].spec().dtype != expected.dtype)
      throw Error(Errc::InvalidArgument,
                  "input " + std::to_string(i) + " spec " + to_string(inputs[i].spec()) +
                      " does not match " + to_string(expected));
  }

  ExecutionTrace trace;
  trace.backend = profile.name;
  trace.graph_hash = content_hash(g);
  trace.input_digest = [&] {
    Fnv1a h;
    h.update_u64(inputs.size());
    for (const auto& t : inputs) t.hash_into(h);
    return h.digest();
  }();
  trace.run_seed = opts.run_seed;
  trace.graph = graph;

  EvalContext ctx{profile, opts.run_seed};
  std::map<int64_t, size_t> input_pos;
  for (size_t i = 0; i < g.inputs().size(); ++i) input_pos[g.inputs()[i]] = i;

  for (int64_t id : topo_order(g)) {
    const Node& node = g.node(id);
    NodeOutcome outcome;
    const auto t0 = std::chrono::steady_clock::now();

    // supportedness is a static property; it is reported even when producers
    // already failed
    if (auto unsupported = static_unsupported(profile, g, node)) {
      outcome.status = NodeOutcome::Status::Error;
      outcome.error = *unsupported;
    } else {
      bool blocked = false;
      Inputs in;
      in.reserve(node.inputs.size());
      for (const auto& edge : node.inputs) {
        const auto& producer = trace.outcomes.at(edge.node);
        if (producer.status != NodeOutcome::Status::Ok) {
          blocked = true;
          break;
        }
        in.push_back(&producer.outputs[static_cast<size_t>(edge.slot)]);
      }

      if (blocked) {
        outcome.status = NodeOutcome::Status::Skipped;
      } else if (node.kind == OpKind::Input) {
        outcome.outputs = {inputs[input_pos.at(id)]};
      } else if (node.kind == OpKind::Constant) {
        outcome.outputs = {*node.payload};
      } else if (node.kind == OpKind::Output) {
        outcome.outputs = {*in[0]};  // snapshot at production time
      } else {
        // runtime shape check against the signature, using actual extents
        std::vector<InferredSpec> actual;
        actual.reserve(in.size());
        for (const Tensor* t : in)
          actual.push_back(InferredSpec{t->spec().shape, t->spec().dtype, t->spec().contiguous});
        auto shape_check = infer_node_specs(node, actual);
        if (auto* serr = std::get_if<ShapeError>(&shape_check)) {
          outcome.status = NodeOutcome::Status::Error;
          outcome.error = NodeError{NodeErrorKind::ShapeMismatch,
                                    "expected " + serr->expected + ", got " + serr->actual};
        } else {
          EvalResult result = [&]() -> EvalResult {
            try {
              return eval_node(ctx, node, in);
            } catch (const std::exception& e) {
              return EvalError{NodeErrorKind::NumericFault,
                               std::string("unexpected: ") + e.what()};
            }
          }();
          if (auto* err = std::get_if<EvalError>(&result)) {
            outcome.status = NodeOutcome::Status::Error;
            outcome.error = NodeError{err->kind, err->detail};
          } else {
            outcome.outputs = std::move(std::get<std::vector<Tensor>>(result));
            const auto rule = profile.exceptional_for(node.kind);
            for (auto& t : outcome.outputs) apply_exceptional(rule, t);
          }
        }
      }
    }

    outcome.time_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
    trace.outcomes.emplace(id, std::move(outcome));
  }
  return trace;
}

ExecutionTrace execute_reference(std::shared_ptr<const Graph> graph,
                                 std::span<const Tensor> inputs) {
  static const BackendProfile reference = builtin_profile("reference");
  return execute(reference, std::move(graph), inputs);
}

std::variant<std::vector<Tensor>, NodeError> eval_single_node(
    const BackendProfile& profile, const Node& node,
    std::span<const Tensor* const> inputs, uint64_t run_seed) {
  std::vector<InferredSpec> actual;
  actual.reserve(inputs.size());
  for (const Tensor* t : inputs)
    actual.push_back(InferredSpec{t->spec().shape, t->spec().dtype, t->spec().contiguous});
  auto shape_check = infer_node_specs(node, actual);
  if (auto* serr = std::get_if<ShapeError>(&shape_check))
    return NodeError{NodeErrorKind::ShapeMismatch,
                     "expected " + serr->expected + ", got " + serr->actual};

  EvalContext ctx{profile, run_seed};
  Inputs in(inputs.begin(), inputs.end());
  EvalResult result = [&]() -> EvalResult {
    try {
      return eval_node(ctx, node, in);
    } catch (const std::exception& e) {
      return EvalError{NodeErrorKind::NumericFault, std::string("unexpected: ") + e.what()};
    }
  }();
  if (auto* err = std::get_if<EvalError>(&result)) return NodeError{err->kind, err->detail};
  auto outputs = std::move(std::get<std::vector<Tensor>>(result));
  const auto rule = profile.exceptional_for(node.kind);
  for (auto& t : outputs) apply_exceptional(rule, t);
  return outputs;
}

uint64_t ExecutionTrace::digest() const {
  Fnv1a h;
  h.update_u64(graph_hash);
  h.update_u64(input_digest);
  h.update_u64(run_seed);
  for (const auto& [id, outcome] : outcomes) {
    h.update_u64(static_cast<uint64_t>(id));
    h.update_u64(static_cast<uint64_t>(outcome.status));
    if (outcome.error) {
      h.update_u64(static_cast<uint64_t>(outcome.error->kind));
      h.update(outcome.error->detail);
    }
    for (const auto& t : outcome.outputs) t.hash_into(h);
  }
  return h.digest();
}

Json trace_to_json(const ExecutionTrace& trace) {
  Json j;
  j["schema"] = 1;
  j["backend"] = trace.backend;
  j["mode"] = trace.mode;
  j["graph_hash"] = hex64(trace.graph_hash);
  j["input_digest"] = hex64(trace.input_digest);
  j["run_seed"] = trace.run_seed;
  j["graph"] = graph_to_json(*trace.graph);
  if (!trace.origin.empty()) {
    Json origin = Json::object();
    for (const auto& [from, to] : trace.origin) origin[std::to_string(from)] = to;
    j["origin"] = origin;
  }
  Json nodes = Json::array();
  for (const auto& [id, outcome] : trace.outcomes) {
    Json n;
    n["id"] = id;
    switch (outcome.status) {
      case NodeOutcome::Status::Ok: {
        n["status"] = "ok";
        Json outs = Json::array();
        for (const auto& t : outcome.outputs) {
          Json o;
          o["spec"] = spec_to_json(t.spec());
          o["data"] = tensor_data_to_json(t);
          outs.push_back(std::move(o));
        }
        n["outputs"] = outs;
        break;
      }
      case NodeOutcome::Status::Error:
        n["status"] = "error";
        n["error"] = Json{{"kind", to_string(outcome.error->kind)},
                          {"detail", outcome.error->detail}};
        break;
      case NodeOutcome::Status::Skipped: n["status"] = "skipped"; break;
    }
    n["time_ns"] = outcome.time_ns;
    nodes.push_back(std::move(n));
  }
  j["nodes"] = nodes;
  return j;
}

ExecutionTrace trace_from_json(const Json& j) {
  ExecutionTrace trace;
  trace.backend = j.at("backend").get<std::string>();
  trace.mode = j.value("mode", std::string("eager"));
  trace.graph_hash = std::stoull(j.at("graph_hash").get<std::string>(), nullptr, 16);
  trace.input_digest = std::stoull(j.at("input_digest").get<std::string>(), nullptr, 16);
  trace.run_seed = j.value("run_seed", uint64_t{0});
  trace.graph = std::make_shared<Graph>(graph_from_json(j.at("graph")));
  if (j.contains("origin"))
    for (const auto& [key, v] : j.at("origin").items())
      trace.origin[std::stoll(key)] = v.get<int64_t>();
  for (const auto& n : j.at("nodes")) {
    NodeOutcome outcome;
    const std::string status = n.at("status").get<std::string>();
    if (status == "ok") {
      for (const auto& o : n.value("outputs", Json::array())) {
        TensorSpec spec = spec_from_json(o.at("spec"));
        outcome.outputs.push_back(tensor_from_json(spec, o.at("data")));
      }
    } else if (status == "error") {
      outcome.status = NodeOutcome::Status::Error;
      auto kind = node_error_kind_from_string(n.at("error").at("kind").get<std::string>());
      if (!kind) throw Error(Errc::ParseError, "unknown node error kind");
      outcome.error = NodeError{*kind, n.at("error").value("detail", std::string())};
    } else if (status == "skipped") {
      outcome.status = NodeOutcome::Status::Skipped;
    } else {
      throw Error(Errc::ParseError, "unknown node status " + status);
    }
    outcome.time_ns = n.value("time_ns", int64_t{0});
    trace.outcomes.emplace(n.at("id").get<int64_t>(), std::move(outcome));
  }
  return trace;
}

}  // namespace graphdiff
