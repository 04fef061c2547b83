#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "graphdiff/engine.hpp"

namespace graphdiff {

struct ToleranceConfig {
  double atol = 5e-4;
  double rtol = 1e-4;
};

// Elementwise verdict for one tensor pair. b is the reference operand: the
// bound is atol + rtol*|b|, which is asymmetric. Exceptional equality first:
// NaN==NaN, +Inf==+Inf, -Inf==-Inf; a class mismatch is divergent. Integral
// dtypes compare exactly.
struct CompareResult {
  enum class Kind { Equivalent, Divergent, ShapeMismatch };
  Kind kind = Kind::Equivalent;
  // Divergent only: first offending flat index and its diff/bound
  int64_t index = -1;
  double abs_diff = 0.0;
  double bound = 0.0;
  bool class_mismatch = false;  // NaN/Inf class disagreement at index
};

CompareResult compare_tensors(const Tensor& a, const Tensor& b, const ToleranceConfig& tol);

// Mean absolute distance between two tensors of equal spec. Pairs whose
// exceptional class matches contribute 0; mismatched classes contribute
// infinity.
double mean_absolute_distance(const Tensor& a, const Tensor& b);

enum class DivergenceClass { Numeric, ExceptionalClass, Shape, FailureKind };
const char* to_string(DivergenceClass c);

struct OutputVerdict {
  enum class Kind { Equivalent, Divergent, IncomparableFailure };
  Kind kind = Kind::Equivalent;
  int64_t output_node = -1;
  // IncomparableFailure: what each side did at the first mismatched node
  std::string failure_a;  // "ok" or a node error kind
  std::string failure_b;
  int64_t failure_node = -1;
};

struct MadStep {
  int64_t node = -1;
  OpKind kind = OpKind::Constant;
  double mad = 0.0;
  double rate = 0.0;  // relative first difference along the chain
};

struct DivergenceReport {
  uint64_t graph_hash = 0;
  std::string backend_a, backend_b;
  std::string mode_a, mode_b;
  std::vector<OutputVerdict> verdicts;
  std::optional<int64_t> culprit;  // first divergent node, topo order
  OpKind culprit_kind = OpKind::Constant;
  DivergenceClass divergence_class = DivergenceClass::Numeric;
  double culprit_mad = 0.0;
  std::vector<MadStep> mad_chain;  // culprit .. divergent output producer
  std::pair<std::string, std::string> cluster_key;  // (operator, class)
  int64_t time_a_ns = 0;  // summed per-node wall time of each trace
  int64_t time_b_ns = 0;

  bool divergent() const { return culprit.has_value(); }
};

// Compares two traces for the same graph and inputs: per-output verdicts,
// first-divergence localization, MAD chain and cluster key. trace_b is the
// reference side of the tolerance formula. Compiled traces are aligned to
// original node ids through their origin map.
DivergenceReport diff_traces(const ExecutionTrace& a, const ExecutionTrace& b,
                             const ToleranceConfig& tol);

Json report_to_json(const DivergenceReport& r);

// Culprit localization only. Throws Error(NoDivergence) when the traces are
// equivalent under the tolerance (calling this without a detected divergence
// is a caller bug).
struct Localization {
  int64_t culprit = -1;
  OpKind culprit_kind = OpKind::Constant;
  DivergenceClass divergence_class = DivergenceClass::Numeric;
  std::vector<MadStep> mad_chain;
};
Localization localize(const ExecutionTrace& a, const ExecutionTrace& b,
                      const ToleranceConfig& tol);

struct Cluster {
  std::pair<std::string, std::string> key;
  int count = 0;
  DivergenceReport representative;  // maximal culprit MAD
};

// Deterministic: ordered by count descending, then key.
std::vector<Cluster> cluster_reports(std::span<const DivergenceReport> reports);

// ---- campaign tabulations ----------------------------------------------------

// Lightweight per-trace statistics retained when full traces are not.
struct TraceStats {
  std::string backend;
  std::string mode;
  std::map<std::string, int> failures_by_kind;  // node error kind -> count
  std::optional<std::string> compile_failure;   // compile failure kind if any
};

struct PairStats {
  int equivalent = 0;
  int divergent = 0;
  int failure_divergent = 0;
  int comparable() const { return equivalent + divergent; }
  double agreement() const {
    return comparable() ? static_cast<double>(equivalent) / comparable() : 1.0;
  }
};

struct CampaignSummary {
  int variants = 0;
  // key: "backend/mode"
  std::map<std::string, std::map<std::string, int>> failures;       // execution failures
  std::map<std::string, std::map<std::string, int>> compile_fails;  // by compile failure kind
  std::map<std::pair<std::string, std::string>, PairStats> pairs;
  std::vector<Cluster> clusters;

  Json to_json() const;
  std::string to_text() const;
};

CampaignSummary summarize_campaign(std::span<const DivergenceReport> reports,
                                   std::span<const TraceStats> traces);

}  // namespace graphdiff
