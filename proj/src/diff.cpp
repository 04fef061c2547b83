#include "graphdiff/diff.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "graphdiff/errors.hpp"
#include "graphdiff/hash.hpp"

namespace graphdiff {

namespace {

enum class FpClass { Finite, NaN, PosInf, NegInf };

FpClass classify(double v) {
  if (std::isnan(v)) return FpClass::NaN;
  if (std::isinf(v)) return v > 0 ? FpClass::PosInf : FpClass::NegInf;
  return FpClass::Finite;
}

}  // namespace

CompareResult compare_tensors(const Tensor& a, const Tensor& b, const ToleranceConfig& tol) {
  if (a.spec().shape != b.spec().shape || a.spec().dtype != b.spec().dtype)
    return CompareResult{CompareResult::Kind::ShapeMismatch, -1, 0, 0, false};

  const int64_t n = a.count();
  if (is_float_dtype(a.dtype())) {
    for (int64_t i = 0; i < n; ++i) {
      const double x = a.get_f(i);
      const double y = b.get_f(i);
      const FpClass cx = classify(x);
      const FpClass cy = classify(y);
      if (cx != cy || cx != FpClass::Finite) {
        if (cx == cy) continue;  // matching exceptional class
        return CompareResult{CompareResult::Kind::Divergent, i, std::abs(x - y),
                             tol.atol + tol.rtol * std::abs(y), true};
      }
      const double diff = std::abs(x - y);
      const double bound = tol.atol + tol.rtol * std::abs(y);
      if (diff > bound) return CompareResult{CompareResult::Kind::Divergent, i, diff, bound, false};
    }
  } else {
    for (int64_t i = 0; i < n; ++i) {
      if (a.get_i(i) != b.get_i(i))
        return CompareResult{CompareResult::Kind::Divergent, i,
                             std::abs(static_cast<double>(a.get_i(i)) -
                                      static_cast<double>(b.get_i(i))),
                             0.0, false};
    }
  }
  return CompareResult{};
}

double mean_absolute_distance(const Tensor& a, const Tensor& b) {
  const int64_t n = a.count();
  if (n == 0) return 0.0;
  double sum = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    if (is_float_dtype(a.dtype())) {
      const double x = a.get_f(i);
      const double y = b.get_f(i);
      const FpClass cx = classify(x);
      const FpClass cy = classify(y);
      if (cx != FpClass::Finite || cy != FpClass::Finite) {
        if (cx != cy) return std::numeric_limits<double>::infinity();
        continue;  // matched exceptional class contributes nothing
      }
      sum += std::abs(x - y);
    } else {
      sum += std::abs(static_cast<double>(a.get_i(i)) - static_cast<double>(b.get_i(i)));
    }
  }
  return sum / static_cast<double>(n);
}

const char* to_string(DivergenceClass c) {
  switch (c) {
    case DivergenceClass::Numeric: return "numeric";
    case DivergenceClass::ExceptionalClass: return "exceptional_class";
    case DivergenceClass::Shape: return "shape";
    case DivergenceClass::FailureKind: return "failure_kind";
  }
  return "?";
}

namespace {

constexpr double kRateEpsilon = 1e-12;

using AlignedOutcomes = std::map<int64_t, const NodeOutcome*>;

AlignedOutcomes align(const ExecutionTrace& t) {
  AlignedOutcomes m;
  for (const auto& [id, outcome] : t.outcomes) m[t.origin_of(id)] = &outcome;
  return m;
}

std::set<int64_t> ancestors_of(const Graph& g, int64_t root) {
  std::set<int64_t> seen;
  std::vector<int64_t> stack = {root};
  while (!stack.empty()) {
    const int64_t id = stack.back();
    stack.pop_back();
    if (!seen.insert(id).second) continue;
    for (const auto& in : g.node(id).inputs) stack.push_back(in.node);
  }
  return seen;
}

// first node (topo order) within scope whose aligned outcome is an error
std::optional<std::pair<int64_t, NodeErrorKind>> first_error(
    const std::vector<int64_t>& order, const std::set<int64_t>& scope,
    const AlignedOutcomes& outcomes) {
  for (int64_t id : order) {
    if (!scope.count(id)) continue;
    auto it = outcomes.find(id);
    if (it == outcomes.end()) continue;
    if (it->second->status == NodeOutcome::Status::Error)
      return std::make_pair(id, it->second->error->kind);
  }
  return std::nullopt;
}

bool outputs_comparable(const NodeOutcome* a, const NodeOutcome* b) {
  return a && b && a->status == NodeOutcome::Status::Ok &&
         b->status == NodeOutcome::Status::Ok;
}

}  // namespace

DivergenceReport diff_traces(const ExecutionTrace& a, const ExecutionTrace& b,
                             const ToleranceConfig& tol) {
  DivergenceReport report;
  report.backend_a = a.backend;
  report.backend_b = b.backend;
  report.mode_a = a.mode;
  report.mode_b = b.mode;

  // topology and graph identity come from an eager-side trace when available;
  // a compiled trace carries the optimized graph, whose hash differs
  const bool a_side = a.mode == "eager" || !b.graph;
  const Graph& g = a_side ? *a.graph : *b.graph;
  report.graph_hash = a_side ? a.graph_hash : b.graph_hash;
  for (const auto& [id, outcome] : a.outcomes) report.time_a_ns += outcome.time_ns;
  for (const auto& [id, outcome] : b.outcomes) report.time_b_ns += outcome.time_ns;

  const auto order = topo_order(g);
  const auto oa = align(a);
  const auto ob = align(b);

  std::vector<int64_t> divergent_outputs;
  std::optional<std::pair<int64_t, std::pair<std::string, std::string>>> first_failure;

  for (int64_t out_id : g.outputs()) {
    OutputVerdict verdict;
    verdict.output_node = out_id;
    auto ita = oa.find(out_id);
    auto itb = ob.find(out_id);
    const NodeOutcome* na = ita == oa.end() ? nullptr : ita->second;
    const NodeOutcome* nb = itb == ob.end() ? nullptr : itb->second;

    if (outputs_comparable(na, nb)) {
      auto cmp = compare_tensors(na->outputs[0], nb->outputs[0], tol);
      if (cmp.kind == CompareResult::Kind::Equivalent) {
        verdict.kind = OutputVerdict::Kind::Equivalent;
      } else {
        verdict.kind = OutputVerdict::Kind::Divergent;
        divergent_outputs.push_back(out_id);
      }
    } else {
      const auto scope = ancestors_of(g, out_id);
      auto ea = first_error(order, scope, oa);
      auto eb = first_error(order, scope, ob);
      if (ea && eb && ea->first == eb->first && ea->second == eb->second) {
        // both sides failed identically; the pair agrees
        verdict.kind = OutputVerdict::Kind::Equivalent;
      } else {
        verdict.kind = OutputVerdict::Kind::IncomparableFailure;
        verdict.failure_a = ea ? to_string(ea->second) : "ok";
        verdict.failure_b = eb ? to_string(eb->second) : "ok";
        verdict.failure_node = ea && eb ? std::min(ea->first, eb->first)
                                        : (ea ? ea->first : eb ? eb->first : out_id);
        if (!first_failure || verdict.failure_node < first_failure->first)
          first_failure = {verdict.failure_node, {verdict.failure_a, verdict.failure_b}};
      }
    }
    report.verdicts.push_back(std::move(verdict));
  }

  // ---- numeric localization over ancestors of divergent outputs
  if (!divergent_outputs.empty()) {
    std::set<int64_t> scope;
    for (int64_t out : divergent_outputs) {
      auto anc = ancestors_of(g, out);
      scope.insert(anc.begin(), anc.end());
    }
    for (int64_t id : order) {
      if (!scope.count(id)) continue;
      const Node& node = g.node(id);
      if (node.kind == OpKind::Output) continue;
      auto ita = oa.find(id);
      auto itb = ob.find(id);
      if (ita == oa.end() || itb == ob.end()) continue;
      if (!outputs_comparable(ita->second, itb->second)) continue;

      bool node_divergent = false;
      bool class_mismatch = false;
      bool shape_mismatch = false;
      for (size_t s = 0; s < ita->second->outputs.size() && s < itb->second->outputs.size();
           ++s) {
        auto cmp = compare_tensors(ita->second->outputs[s], itb->second->outputs[s], tol);
        if (cmp.kind == CompareResult::Kind::ShapeMismatch) {
          node_divergent = true;
          shape_mismatch = true;
        } else if (cmp.kind == CompareResult::Kind::Divergent) {
          node_divergent = true;
          class_mismatch = class_mismatch || cmp.class_mismatch;
        }
      }
      if (!node_divergent) continue;

      report.culprit = id;
      report.culprit_kind = node.kind;
      report.divergence_class = shape_mismatch  ? DivergenceClass::Shape
                                : class_mismatch ? DivergenceClass::ExceptionalClass
                                                 : DivergenceClass::Numeric;
      break;
    }

    // MAD chain from the culprit to the first divergent output it feeds
    if (report.culprit) {
      const int64_t target = [&]() -> int64_t {
        for (int64_t out : g.outputs()) {
          if (std::find(divergent_outputs.begin(), divergent_outputs.end(), out) ==
              divergent_outputs.end())
            continue;
          auto anc = ancestors_of(g, out);
          if (anc.count(*report.culprit)) return out;
        }
        return divergent_outputs.front();
      }();
      const auto target_ancestors = ancestors_of(g, target);
      auto consumers = g.consumer_map();

      auto mad_of = [&](int64_t id) -> double {
        const auto& ta = *oa.at(id);
        const auto& tb = *ob.at(id);
        if (ta.outputs.empty() || tb.outputs.empty()) return 0.0;
        if (ta.outputs[0].spec().shape != tb.outputs[0].spec().shape)
          return std::numeric_limits<double>::infinity();
        return mean_absolute_distance(ta.outputs[0], tb.outputs[0]);
      };

      int64_t cur = *report.culprit;
      double prev_mad = 0.0;
      while (true) {
        const double mad = mad_of(cur);
        MadStep step;
        step.node = cur;
        step.kind = g.node(cur).kind;
        step.mad = mad;
        // relative first difference; exceptional-class distances saturate at
        // infinity, so an inf-to-inf step carries no additional growth
        if (!std::isfinite(mad))
          step.rate = std::isfinite(prev_mad) ? std::numeric_limits<double>::infinity() : 0.0;
        else
          step.rate = (mad - prev_mad) / std::max(prev_mad, kRateEpsilon);
        report.mad_chain.push_back(step);
        prev_mad = mad;

        if (cur == target) break;
        // smallest-id consumer on a path to the target that both traces
        // actually evaluated (a pass may have eliminated nodes on one side)
        int64_t next = -1;
        auto it = consumers.find(cur);
        if (it != consumers.end()) {
          for (const auto& [consumer, slot] : it->second) {
            (void)slot;
            if (!target_ancestors.count(consumer) && consumer != target) continue;
            if (g.node(consumer).kind != OpKind::Output) {
              auto ca = oa.find(consumer);
              auto cb = ob.find(consumer);
              if (ca == oa.end() || cb == ob.end() ||
                  !outputs_comparable(ca->second, cb->second))
                continue;
            }
            if (next < 0 || consumer < next) next = consumer;
          }
        }
        if (next < 0) break;
        if (g.node(next).kind == OpKind::Output) break;  // producer view ends here
        cur = next;
      }
      report.culprit_mad = report.mad_chain.front().mad;

      const auto max_rate =
          std::max_element(report.mad_chain.begin(), report.mad_chain.end(),
                           [](const MadStep& x, const MadStep& y) { return x.rate < y.rate; });
      report.cluster_key = {to_string(max_rate->kind), to_string(report.divergence_class)};
    }
  }

  // failure divergence: first-class result when no numeric culprit exists
  if (!report.culprit && first_failure) {
    report.culprit = first_failure->first;
    report.culprit_kind = g.has_node(first_failure->first)
                              ? g.node(first_failure->first).kind
                              : OpKind::Constant;
    report.divergence_class = DivergenceClass::FailureKind;
    report.culprit_mad = 0.0;
    report.cluster_key = {to_string(report.culprit_kind), to_string(report.divergence_class)};
  }

  return report;
}

Localization localize(const ExecutionTrace& a, const ExecutionTrace& b,
                      const ToleranceConfig& tol) {
  DivergenceReport report = diff_traces(a, b, tol);
  if (!report.divergent())
    throw Error(Errc::NoDivergence, "traces are equivalent under the tolerance");
  return Localization{*report.culprit, report.culprit_kind, report.divergence_class,
                      report.mad_chain};
}

Json report_to_json(const DivergenceReport& r) {
  Json j;
  j["graph_hash"] = hex64(r.graph_hash);
  j["backend_a"] = r.backend_a;
  j["backend_b"] = r.backend_b;
  j["mode_a"] = r.mode_a;
  j["mode_b"] = r.mode_b;
  Json verdicts = Json::array();
  for (const auto& v : r.verdicts) {
    Json vj;
    vj["output_node"] = v.output_node;
    vj["verdict"] = v.kind == OutputVerdict::Kind::Equivalent     ? "equivalent"
                    : v.kind == OutputVerdict::Kind::Divergent    ? "divergent"
                                                                  : "incomparable_failure";
    if (v.kind == OutputVerdict::Kind::IncomparableFailure) {
      vj["failure_a"] = v.failure_a;
      vj["failure_b"] = v.failure_b;
      vj["failure_node"] = v.failure_node;
    }
    verdicts.push_back(std::move(vj));
  }
  j["verdicts"] = verdicts;
  j["timings"] = Json{{"a_ns", r.time_a_ns}, {"b_ns", r.time_b_ns}};
  if (r.culprit) {
    j["culprit"] = *r.culprit;
    j["culprit_kind"] = to_string(r.culprit_kind);
    j["divergence_class"] = to_string(r.divergence_class);
    j["culprit_mad"] = std::isfinite(r.culprit_mad) ? Json(r.culprit_mad) : Json("inf");
    Json chain = Json::array();
    for (const auto& s : r.mad_chain) {
      Json sj;
      sj["node"] = s.node;
      sj["kind"] = to_string(s.kind);
      sj["mad"] = std::isfinite(s.mad) ? Json(s.mad) : Json("inf");
      sj["rate"] = std::isfinite(s.rate) ? Json(s.rate) : Json("inf");
      chain.push_back(std::move(sj));
    }
    j["mad_chain"] = chain;
    j["cluster_key"] = Json::array({r.cluster_key.first, r.cluster_key.second});
  }
  return j;
}

std::vector<Cluster> cluster_reports(std::span<const DivergenceReport> reports) {
  std::map<std::pair<std::string, std::string>, Cluster> grouped;
  for (const auto& r : reports) {
    if (!r.divergent()) continue;
    auto& c = grouped[r.cluster_key];
    if (c.count == 0) {
      c.key = r.cluster_key;
      c.representative = r;
    } else {
      const bool better = r.culprit_mad > c.representative.culprit_mad ||
                          (r.culprit_mad == c.representative.culprit_mad &&
                           r.graph_hash < c.representative.graph_hash);
      if (better) c.representative = r;
    }
    ++c.count;
  }
  std::vector<Cluster> out;
  out.reserve(grouped.size());
  for (auto& [key, c] : grouped) out.push_back(std::move(c));
  std::sort(out.begin(), out.end(), [](const Cluster& x, const Cluster& y) {
    if (x.count != y.count) return x.count > y.count;
    return x.key < y.key;
  });
  return out;
}

CampaignSummary summarize_campaign(std::span<const DivergenceReport> reports,
                                   std::span<const TraceStats> traces) {
  CampaignSummary s;
  for (const auto& t : traces) {
    const std::string key = t.backend + "/" + t.mode;
    if (t.compile_failure) {
      ++s.compile_fails[key][*t.compile_failure];
      continue;
    }
    for (const auto& [kind, count] : t.failures_by_kind) s.failures[key][kind] += count;
  }
  for (const auto& r : reports) {
    const auto key = std::make_pair(r.backend_a + "/" + r.mode_a, r.backend_b + "/" + r.mode_b);
    bool any_failure = false;
    bool any_divergent = false;
    for (const auto& v : r.verdicts) {
      any_failure |= v.kind == OutputVerdict::Kind::IncomparableFailure;
      any_divergent |= v.kind == OutputVerdict::Kind::Divergent;
    }
    auto& p = s.pairs[key];
    if (any_failure)
      ++p.failure_divergent;
    else if (any_divergent)
      ++p.divergent;
    else
      ++p.equivalent;
  }
  s.clusters = cluster_reports(reports);
  return s;
}

Json CampaignSummary::to_json() const {
  Json j;
  j["variants"] = variants;
  Json fj = Json::object();
  for (const auto& [backend, kinds] : failures) {
    Json kj = Json::object();
    for (const auto& [kind, count] : kinds) kj[kind] = count;
    fj[backend] = kj;
  }
  j["failures"] = fj;
  Json cj = Json::object();
  for (const auto& [backend, kinds] : compile_fails) {
    Json kj = Json::object();
    for (const auto& [kind, count] : kinds) kj[kind] = count;
    cj[backend] = kj;
  }
  j["compile_failures"] = cj;
  Json pj = Json::array();
  for (const auto& [key, stats] : pairs) {
    Json e;
    e["a"] = key.first;
    e["b"] = key.second;
    e["equivalent"] = stats.equivalent;
    e["divergent"] = stats.divergent;
    e["failure_divergent"] = stats.failure_divergent;
    e["agreement"] = stats.agreement();
    pj.push_back(std::move(e));
  }
  j["pairs"] = pj;
  Json clj = Json::array();
  for (const auto& c : clusters) {
    Json e;
    e["operator"] = c.key.first;
    e["class"] = c.key.second;
    e["count"] = c.count;
    Json rep = report_to_json(c.representative);
    rep.erase("timings");  // keep the summary wall-clock independent
    e["representative"] = std::move(rep);
    clj.push_back(std::move(e));
  }
  j["clusters"] = clj;
  return j;
}

std::string CampaignSummary::to_text() const {
  std::ostringstream os;
  os << "campaign summary: " << variants << " variants\n";
  os << "\nexecution failures by backend:\n";
  if (failures.empty()) os << "  (none)\n";
  for (const auto& [backend, kinds] : failures) {
    os << "  " << backend << ":";
    for (const auto& [kind, count] : kinds) os << " " << kind << "=" << count;
    os << "\n";
  }
  if (!compile_fails.empty()) {
    os << "\ncompilation failures:\n";
    for (const auto& [backend, kinds] : compile_fails) {
      os << "  " << backend << ":";
      for (const auto& [kind, count] : kinds) os << " " << kind << "=" << count;
      os << "\n";
    }
  }
  os << "\npairwise agreement (vs reference):\n";
  for (const auto& [key, stats] : pairs) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.1f%%", 100.0 * stats.agreement());
    os << "  " << key.first << " vs " << key.second << ": agreement " << buf << " ("
       << stats.equivalent << "/" << stats.comparable() << ")"
       << ", divergent " << stats.divergent << ", failure-divergent " << stats.failure_divergent
       << "\n";
  }
  if (!clusters.empty()) {
    os << "\ntop divergence clusters:\n";
    int rank = 1;
    for (const auto& c : clusters) {
      os << "  " << rank++ << ". (" << c.key.first << ", " << c.key.second
         << "): " << c.count << " reports, representative graph " << hex64(c.representative.graph_hash)
         << "\n";
      if (rank > 10) break;
    }
  }
  return os.str();
}

}  // namespace graphdiff
