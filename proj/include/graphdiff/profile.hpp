#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "graphdiff/ops.hpp"
#include "json.hpp"

namespace graphdiff {

enum class BoundsPolicy { Strict, UncheckedWrap, UncheckedClamp };

enum class ExceptionalRule { Propagate, NanToZero, NanInterpolate, InfNanSwap };

struct IntDivByZeroRule {
  enum class Kind { Value, DividendPlusOne, Error };
  Kind kind = Kind::Value;
  int64_t value = 0;
};

struct InfToIntCastRule {
  enum class Kind { Saturate, Value, Error };
  Kind kind = Kind::Saturate;
  int64_t value = 0;
};

struct ReductionOrder {
  enum class Kind { Sequential, FixedTreeChunked, SeededPermutation };
  Kind kind = Kind::Sequential;
  int64_t chunk = 8;  // FixedTreeChunked only
};

// Declarative description of one execution platform's divergence behaviors.
// Profiles are data: a platform is modeled entirely by this record, never by
// engine code branches keyed on a name.
struct BackendProfile {
  std::string name;
  std::set<OpKind> unsupported_ops;
  std::map<OpKind, std::set<DType>> unsupported_dtypes;  // rejected per op
  BoundsPolicy bounds_policy = BoundsPolicy::Strict;
  std::map<OpKind, ExceptionalRule> exceptional_policy;  // absent == Propagate
  IntDivByZeroRule int_div_by_zero;
  InfToIntCastRule inf_to_int_cast;
  ReductionOrder reduction_order;
  DType accumulation_dtype = DType::F64;
  std::set<OpKind> contiguity_required_ops;

  ExceptionalRule exceptional_for(OpKind k) const {
    auto it = exceptional_policy.find(k);
    return it == exceptional_policy.end() ? ExceptionalRule::Propagate : it->second;
  }
};

nlohmann::ordered_json profile_to_json(const BackendProfile& p);
BackendProfile profile_from_json(const nlohmann::ordered_json& j);

std::vector<std::string> builtin_profile_names();
BackendProfile builtin_profile(const std::string& name);

// Accepts a builtin name or a JSON file path.
BackendProfile load_profile(const std::string& name_or_path);

void save_profile(const BackendProfile& p, const std::filesystem::path& path);

}  // namespace graphdiff
