#include "graphdiff/profile.hpp"

#include <filesystem>

#include "graphdiff/errors.hpp"
#include "graphdiff/serialize.hpp"

namespace graphdiff {

namespace {

const char* bounds_name(BoundsPolicy p) {
  switch (p) {
    case BoundsPolicy::Strict: return "strict";
    case BoundsPolicy::UncheckedWrap: return "unchecked_wrap";
    case BoundsPolicy::UncheckedClamp: return "unchecked_clamp";
  }
  return "?";
}

BoundsPolicy bounds_from(const std::string& s) {
  if (s == "strict") return BoundsPolicy::Strict;
  if (s == "unchecked_wrap") return BoundsPolicy::UncheckedWrap;
  if (s == "unchecked_clamp") return BoundsPolicy::UncheckedClamp;
  throw Error(Errc::ParseError, "unknown bounds policy " + s);
}

const char* exceptional_name(ExceptionalRule r) {
  switch (r) {
    case ExceptionalRule::Propagate: return "propagate";
    case ExceptionalRule::NanToZero: return "nan_to_zero";
    case ExceptionalRule::NanInterpolate: return "nan_interpolate";
    case ExceptionalRule::InfNanSwap: return "inf_nan_swap";
  }
  return "?";
}

ExceptionalRule exceptional_from(const std::string& s) {
  if (s == "propagate") return ExceptionalRule::Propagate;
  if (s == "nan_to_zero") return ExceptionalRule::NanToZero;
  if (s == "nan_interpolate") return ExceptionalRule::NanInterpolate;
  if (s == "inf_nan_swap") return ExceptionalRule::InfNanSwap;
  throw Error(Errc::ParseError, "unknown exceptional rule " + s);
}

OpKind kind_from(const std::string& s) {
  auto k = op_kind_from_string(s);
  if (!k) throw Error(Errc::ParseError, "unknown operator " + s);
  return *k;
}

DType dtype_from(const std::string& s) {
  auto d = dtype_from_string(s);
  if (!d) throw Error(Errc::ParseError, "unknown dtype " + s);
  return *d;
}

}  // namespace

nlohmann::ordered_json profile_to_json(const BackendProfile& p) {
  Json j;
  j["schema"] = 1;
  j["name"] = p.name;

  Json unsup = Json::array();
  for (OpKind k : p.unsupported_ops) unsup.push_back(to_string(k));
  j["unsupported_ops"] = unsup;

  Json dt = Json::object();
  for (const auto& [k, set] : p.unsupported_dtypes) {
    Json arr = Json::array();
    for (DType d : set) arr.push_back(to_string(d));
    dt[to_string(k)] = arr;
  }
  j["unsupported_dtypes"] = dt;

  j["bounds_policy"] = bounds_name(p.bounds_policy);

  Json ex = Json::object();
  for (const auto& [k, rule] : p.exceptional_policy) ex[to_string(k)] = exceptional_name(rule);
  j["exceptional_policy"] = ex;

  Json div0;
  switch (p.int_div_by_zero.kind) {
    case IntDivByZeroRule::Kind::Value:
      div0["rule"] = "value";
      div0["value"] = p.int_div_by_zero.value;
      break;
    case IntDivByZeroRule::Kind::DividendPlusOne: div0["rule"] = "dividend_plus_one"; break;
    case IntDivByZeroRule::Kind::Error: div0["rule"] = "error"; break;
  }
  j["int_div_by_zero"] = div0;

  Json cast;
  switch (p.inf_to_int_cast.kind) {
    case InfToIntCastRule::Kind::Saturate: cast["rule"] = "saturate"; break;
    case InfToIntCastRule::Kind::Value:
      cast["rule"] = "value";
      cast["value"] = p.inf_to_int_cast.value;
      break;
    case InfToIntCastRule::Kind::Error: cast["rule"] = "error"; break;
  }
  j["float_inf_to_int_cast"] = cast;

  Json red;
  switch (p.reduction_order.kind) {
    case ReductionOrder::Kind::Sequential: red["kind"] = "sequential"; break;
    case ReductionOrder::Kind::FixedTreeChunked:
      red["kind"] = "fixed_tree_chunked";
      red["chunk"] = p.reduction_order.chunk;
      break;
    case ReductionOrder::Kind::SeededPermutation: red["kind"] = "seeded_permutation"; break;
  }
  j["reduction_order"] = red;

  j["accumulation_dtype"] = to_string(p.accumulation_dtype);

  Json contig = Json::array();
  for (OpKind k : p.contiguity_required_ops) contig.push_back(to_string(k));
  j["contiguity_required_ops"] = contig;
  return j;
}

BackendProfile profile_from_json(const nlohmann::ordered_json& j) {
  BackendProfile p;
  p.name = j.at("name").get<std::string>();
  for (const auto& s : j.value("unsupported_ops", Json::array()))
    p.unsupported_ops.insert(kind_from(s.get<std::string>()));
  if (j.contains("unsupported_dtypes"))
    for (const auto& [key, arr] : j.at("unsupported_dtypes").items()) {
      std::set<DType> set;
      for (const auto& d : arr) set.insert(dtype_from(d.get<std::string>()));
      p.unsupported_dtypes[kind_from(key)] = std::move(set);
    }
  p.bounds_policy = bounds_from(j.value("bounds_policy", std::string("strict")));
  if (j.contains("exceptional_policy"))
    for (const auto& [key, v] : j.at("exceptional_policy").items())
      p.exceptional_policy[kind_from(key)] = exceptional_from(v.get<std::string>());

  if (j.contains("int_div_by_zero")) {
    const auto& d = j.at("int_div_by_zero");
    const std::string rule = d.at("rule").get<std::string>();
    if (rule == "value")
      p.int_div_by_zero = {IntDivByZeroRule::Kind::Value, d.at("value").get<int64_t>()};
    else if (rule == "dividend_plus_one")
      p.int_div_by_zero = {IntDivByZeroRule::Kind::DividendPlusOne, 0};
    else if (rule == "error")
      p.int_div_by_zero = {IntDivByZeroRule::Kind::Error, 0};
    else
      throw Error(Errc::ParseError, "unknown int_div_by_zero rule " + rule);
  }
  if (j.contains("float_inf_to_int_cast")) {
    const auto& d = j.at("float_inf_to_int_cast");
    const std::string rule = d.at("rule").get<std::string>();
    if (rule == "saturate")
      p.inf_to_int_cast = {InfToIntCastRule::Kind::Saturate, 0};
    else if (rule == "value")
      p.inf_to_int_cast = {InfToIntCastRule::Kind::Value, d.at("value").get<int64_t>()};
    else if (rule == "error")
      p.inf_to_int_cast = {InfToIntCastRule::Kind::Error, 0};
    else
      throw Error(Errc::ParseError, "unknown float_inf_to_int_cast rule " + rule);
  }
  if (j.contains("reduction_order")) {
    const auto& r = j.at("reduction_order");
    const std::string kind = r.at("kind").get<std::string>();
    if (kind == "sequential")
      p.reduction_order.kind = ReductionOrder::Kind::Sequential;
    else if (kind == "fixed_tree_chunked") {
      p.reduction_order.kind = ReductionOrder::Kind::FixedTreeChunked;
      p.reduction_order.chunk = r.value("chunk", int64_t{8});
    } else if (kind == "seeded_permutation")
      p.reduction_order.kind = ReductionOrder::Kind::SeededPermutation;
    else
      throw Error(Errc::ParseError, "unknown reduction order " + kind);
  }
  p.accumulation_dtype = dtype_from(j.value("accumulation_dtype", std::string("f64")));
  for (const auto& s : j.value("contiguity_required_ops", Json::array()))
    p.contiguity_required_ops.insert(kind_from(s.get<std::string>()));
  return p;
}

std::vector<std::string> builtin_profile_names() {
  return {"reference", "parallel", "relaxed-a", "relaxed-b"};
}

BackendProfile builtin_profile(const std::string& name) {
  BackendProfile p;
  p.name = name;
  if (name == "reference") {
    // baseline: sequential f64 accumulation, strict bounds, full IEEE
    // propagation, no unsupported operators; defined results for undefined
    // arithmetic rather than errors
    p.int_div_by_zero = {IntDivByZeroRule::Kind::Value, 4294967295LL};
    p.inf_to_int_cast = {InfToIntCastRule::Kind::Saturate, 0};
    return p;
  }
  if (name == "parallel") {
    // scheduling/precision divergence: chunked tree reductions with f32
    // accumulation and shifted undefined-arithmetic results
    p.reduction_order = {ReductionOrder::Kind::FixedTreeChunked, 8};
    p.accumulation_dtype = DType::F32;
    p.int_div_by_zero = {IntDivByZeroRule::Kind::DividendPlusOne, 0};
    p.inf_to_int_cast = {InfToIntCastRule::Kind::Value, -4294967296LL};
    return p;
  }
  if (name == "relaxed-a") {
    // lenient bounds and exceptional-value rewriting
    p.bounds_policy = BoundsPolicy::UncheckedWrap;
    p.exceptional_policy[OpKind::Reshape] = ExceptionalRule::NanToZero;
    p.exceptional_policy[OpKind::BatchNorm] = ExceptionalRule::NanInterpolate;
    p.exceptional_policy[OpKind::Remainder] = ExceptionalRule::InfNanSwap;
    p.int_div_by_zero = {IntDivByZeroRule::Kind::Value, 0};
    p.inf_to_int_cast = {InfToIntCastRule::Kind::Value, 0};
    return p;
  }
  if (name == "relaxed-b") {
    // trimmed operator surface: embedding/fused-update/scatter analogs
    // missing, 64-bit floats rejected by compute ops, 64-bit index tensors
    // rejected by gather-style ops, contiguity demanded by the dense kernels
    p.unsupported_ops = {OpKind::EmbeddingBag, OpKind::AddCdiv, OpKind::MaxUnpool2d};
    static const OpKind f64_rejecting[] = {
        OpKind::Add,     OpKind::AddInPlace, OpKind::Sub,       OpKind::Mul,
        OpKind::Div,     OpKind::Remainder,  OpKind::Relu,      OpKind::HardTanh,
        OpKind::Sigmoid, OpKind::MatMul,     OpKind::AddMM,     OpKind::Sum,
        OpKind::Mean,    OpKind::Max,        OpKind::BatchNorm, OpKind::MaxPool1d,
    };
    for (OpKind k : f64_rejecting) p.unsupported_dtypes[k].insert(DType::F64);
    p.unsupported_dtypes[OpKind::Gather].insert(DType::I64);
    p.unsupported_dtypes[OpKind::IndexSelect].insert(DType::I64);
    p.contiguity_required_ops = {OpKind::MatMul, OpKind::AddMM, OpKind::BatchNorm};
    p.accumulation_dtype = DType::F32;
    p.int_div_by_zero = {IntDivByZeroRule::Kind::Error, 0};
    p.inf_to_int_cast = {InfToIntCastRule::Kind::Saturate, 0};
    return p;
  }
  throw Error(Errc::InvalidArgument, "unknown builtin profile " + name);
}

BackendProfile load_profile(const std::string& name_or_path) {
  for (const auto& n : builtin_profile_names())
    if (n == name_or_path) return builtin_profile(n);
  if (!std::filesystem::exists(name_or_path))
    throw Error(Errc::InvalidArgument,
                "no builtin profile or file named '" + name_or_path + "'");
  try {
    return profile_from_json(Json::parse(read_file(name_or_path)));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, name_or_path + ": " + e.what());
  }
}

void save_profile(const BackendProfile& p, const std::filesystem::path& path) {
  write_file(path, profile_to_json(p).dump(2) + "\n");
}

}  // namespace graphdiff
