#include "graphdiff/campaign.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "graphdiff/errors.hpp"
#include "graphdiff/hash.hpp"
#include "graphdiff/passes.hpp"
#include "graphdiff/serialize.hpp"

namespace graphdiff {

namespace {

// ---- flat key-value config parsing -------------------------------------------

std::string strip(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> parse_string_list(const std::string& raw) {
  std::vector<std::string> out;
  std::string inner = strip(raw);
  if (inner.size() < 2 || inner.front() != '[' || inner.back() != ']')
    throw Error(Errc::ParseError, "expected a [list]: " + raw);
  inner = inner.substr(1, inner.size() - 2);
  std::string item;
  std::istringstream ss(inner);
  while (std::getline(ss, item, ',')) {
    item = strip(item);
    if (item.empty()) continue;
    if (item.size() >= 2 && item.front() == '"' && item.back() == '"')
      item = item.substr(1, item.size() - 2);
    out.push_back(item);
  }
  return out;
}

std::map<std::string, std::string> parse_flat_config(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    // comments start at '#' outside quotes
    bool quoted = false;
    for (size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) {
        line = line.substr(0, i);
        break;
      }
    }
    line = strip(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(Errc::ParseError, "config line " + std::to_string(lineno) + ": expected key = value");
    kv[strip(line.substr(0, eq))] = strip(line.substr(eq + 1));
  }
  return kv;
}

std::string unquote(const std::string& s) {
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') return s.substr(1, s.size() - 2);
  return s;
}

}  // namespace

CampaignConfig CampaignConfig::from_file(const std::filesystem::path& path) {
  auto kv = parse_flat_config(read_file(path));
  CampaignConfig cfg;
  auto get = [&](const char* key) -> std::optional<std::string> {
    auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    return it->second;
  };
  if (auto v = get("corpus_dir")) cfg.corpus_dir = unquote(*v);
  if (auto v = get("out_dir")) cfg.out_dir = unquote(*v);
  if (auto v = get("backends")) cfg.backends = parse_string_list(*v);
  if (auto v = get("modes")) cfg.modes = parse_string_list(*v);
  if (auto v = get("variants")) cfg.variants = std::stoi(*v);
  if (auto v = get("threshold")) cfg.synth.node_threshold = std::stoi(*v);
  if (auto v = get("mutation_prob")) cfg.synth.mutation_probability = std::stod(*v);
  if (auto v = get("element_cap")) cfg.synth.element_cap = std::stoll(*v);
  if (auto v = get("max_subgraph_nodes")) cfg.synth.max_subgraph_nodes = std::stoi(*v);
  if (auto v = get("master_seed")) cfg.master_seed = std::stoull(*v);
  if (auto v = get("float_min")) cfg.inputs.float_min = std::stod(*v);
  if (auto v = get("float_max")) cfg.inputs.float_max = std::stod(*v);
  if (auto v = get("index_min")) cfg.inputs.index_min = std::stoll(*v);
  if (auto v = get("index_max")) cfg.inputs.index_max = std::stoll(*v);
  if (auto v = get("int_min")) cfg.inputs.int_min = std::stoll(*v);
  if (auto v = get("int_max")) cfg.inputs.int_max = std::stoll(*v);
  if (auto v = get("atol")) cfg.tol.atol = std::stod(*v);
  if (auto v = get("rtol")) cfg.tol.rtol = std::stod(*v);
  if (auto v = get("workers")) cfg.workers = std::stoi(*v);
  if (auto v = get("all_pairs")) cfg.all_pairs = (*v == "true");
  if (auto v = get("store_full_traces")) cfg.store_full_traces = (*v == "true");
  return cfg;
}

namespace {

struct Combo {
  std::string backend;
  std::string mode;
  std::string key() const { return backend + "/" + mode; }
};

PassPipeline pipeline_for_mode(const std::string& mode) {
  if (mode == "eager") return PassPipeline::none();
  if (mode == "jit-pipeline") return PassPipeline::jit();
  if (mode == "full-pipeline") return PassPipeline::full();
  throw Error(Errc::InvalidArgument, "unknown mode " + mode);
}

struct RunOutcome {
  Combo combo;
  uint64_t run_seed = 0;
  std::optional<std::string> compile_failure;
  uint64_t digest = 0;
  std::map<std::string, int> failures_by_kind;
  std::shared_ptr<ExecutionTrace> trace;  // held only while the variant is processed
};

struct VariantRecord {
  int variant = 0;
  uint64_t seed = 0;
  std::string graph_file;
  uint64_t graph_hash = 0;
  std::string input_file;
  uint64_t input_digest = 0;
  std::vector<RunOutcome> runs;
  std::vector<DivergenceReport> reports;
  std::optional<std::string> harness_fault;
};

Json record_to_json(const VariantRecord& rec) {
  Json j;
  j["variant"] = rec.variant;
  if (rec.harness_fault) {
    j["harness_fault"] = *rec.harness_fault;
    return j;
  }
  j["seed"] = rec.seed;
  j["graph"] = rec.graph_file;
  j["graph_hash"] = hex64(rec.graph_hash);
  j["inputs"] = rec.input_file;
  j["input_digest"] = hex64(rec.input_digest);
  Json runs = Json::array();
  for (const auto& r : rec.runs) {
    Json rj;
    rj["backend"] = r.combo.backend;
    rj["mode"] = r.combo.mode;
    rj["run_seed"] = r.run_seed;
    if (r.compile_failure) {
      rj["compile_failure"] = *r.compile_failure;
    } else {
      rj["digest"] = hex64(r.digest);
      Json fj = Json::object();
      for (const auto& [kind, count] : r.failures_by_kind) fj[kind] = count;
      rj["failures"] = fj;
    }
    runs.push_back(std::move(rj));
  }
  j["runs"] = runs;
  j["report_count"] = rec.reports.size();
  return j;
}

std::map<std::string, int> tally_failures(const ExecutionTrace& t) {
  std::map<std::string, int> out;
  for (const auto& [id, outcome] : t.outcomes)
    if (outcome.status == NodeOutcome::Status::Error)
      ++out[to_string(outcome.error->kind)];
  return out;
}

// Executes one (backend, mode) combination for a prepared variant.
RunOutcome run_combo(const Combo& combo, const BackendProfile& profile,
                     std::shared_ptr<const Graph> graph, std::span<const Tensor> inputs,
                     uint64_t run_seed) {
  RunOutcome out;
  out.combo = combo;
  out.run_seed = run_seed;
  if (combo.mode == "eager") {
    out.trace = std::make_shared<ExecutionTrace>(
        execute(profile, graph, inputs, ExecOptions{run_seed}));
  } else {
    // only the full pipeline models vendor-style compilation, which rejects
    // graphs containing unsupported operators before optimizing
    const BackendProfile* gate = combo.mode == "full-pipeline" ? &profile : nullptr;
    auto compiled = compile(pipeline_for_mode(combo.mode), *graph, gate);
    if (auto* failure = std::get_if<CompileFailure>(&compiled)) {
      out.compile_failure = to_string(failure->kind);
      return out;
    }
    auto& cg = std::get<CompiledGraph>(compiled);
    out.trace = std::make_shared<ExecutionTrace>(
        execute(profile, cg.graph, inputs, ExecOptions{run_seed}));
    out.trace->mode = combo.mode;
    out.trace->origin = cg.origin;
  }
  out.digest = out.trace->digest();
  out.failures_by_kind = tally_failures(*out.trace);
  return out;
}

uint64_t combo_seed(uint64_t variant_seed, size_t combo_index) {
  return mix_seed(variant_seed, 1000 + combo_index);
}

std::string variant_graph_file(int variant) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "graphs/variant_%06d.json", variant);
  return buf;
}

std::string variant_input_file(int variant) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "inputs/variant_%06d.bin", variant);
  return buf;
}

VariantRecord process_variant(int variant, const CampaignConfig& cfg, const Corpus& corpus,
                              const std::vector<Combo>& combos,
                              const std::map<std::string, BackendProfile>& profiles,
                              size_t baseline_index) {
  VariantRecord rec;
  rec.variant = variant;
  rec.seed = mix_seed(cfg.master_seed, static_cast<uint64_t>(variant));

  SynthesisConfig synth_cfg = cfg.synth;
  synth_cfg.seed = rec.seed;
  SynthesisResult sr = synthesize(corpus, synth_cfg);
  auto graph = std::make_shared<const Graph>(std::move(sr.graph));
  rec.graph_hash = content_hash(*graph);
  rec.graph_file = variant_graph_file(variant);
  save_graph_file(*graph, cfg.out_dir / rec.graph_file);

  InputPolicy policy = cfg.inputs;
  policy.seed = mix_seed(rec.seed, 1);
  auto inputs = generate_inputs(*graph, policy);
  rec.input_digest = input_digest(inputs);
  rec.input_file = variant_input_file(variant);
  save_input_bundle(cfg.out_dir / rec.input_file, *graph, policy, inputs);

  for (size_t c = 0; c < combos.size(); ++c) {
    rec.runs.push_back(run_combo(combos[c], profiles.at(combos[c].backend), graph, inputs,
                                 combo_seed(rec.seed, c)));
    if (cfg.store_full_traces && rec.runs.back().trace) {
      char buf[80];
      std::snprintf(buf, sizeof buf, "traces/variant_%06d_%s_%s.json", variant,
                    combos[c].backend.c_str(), combos[c].mode.c_str());
      write_file(cfg.out_dir / buf, trace_to_json(*rec.runs.back().trace).dump() + "\n");
    }
  }

  // plan (subject, base) diffs: every combination against the baseline, plus
  // compiled-vs-eager on the same backend; all_pairs covers every pair once
  std::set<std::pair<size_t, size_t>> planned;
  if (cfg.all_pairs) {
    for (size_t i = 0; i < rec.runs.size(); ++i)
      for (size_t j = i + 1; j < rec.runs.size(); ++j) planned.insert({j, i});
  } else {
    for (size_t i = 0; i < rec.runs.size(); ++i)
      if (i != baseline_index) planned.insert({i, baseline_index});
    for (size_t i = 0; i < rec.runs.size(); ++i) {
      if (rec.runs[i].combo.mode == "eager") continue;
      for (size_t j = 0; j < rec.runs.size(); ++j)
        if (rec.runs[j].combo.backend == rec.runs[i].combo.backend &&
            rec.runs[j].combo.mode == "eager" && i != j)
          planned.insert({i, j});
    }
  }
  for (const auto& [subject, base] : planned) {
    if (!rec.runs[subject].trace || !rec.runs[base].trace) continue;  // compile failure
    rec.reports.push_back(diff_traces(*rec.runs[subject].trace, *rec.runs[base].trace, cfg.tol));
  }

  for (auto& r : rec.runs) r.trace.reset();  // digests and tallies are retained
  return rec;
}

std::vector<TraceStats> stats_of(const VariantRecord& rec) {
  std::vector<TraceStats> out;
  for (const auto& r : rec.runs) {
    TraceStats s;
    s.backend = r.combo.backend;
    s.mode = r.combo.mode;
    s.failures_by_kind = r.failures_by_kind;
    s.compile_failure = r.compile_failure;
    out.push_back(std::move(s));
  }
  return out;
}

uint64_t ledger_digest_of(const std::vector<VariantRecord>& records) {
  std::vector<const VariantRecord*> sorted;
  sorted.reserve(records.size());
  for (const auto& r : records) sorted.push_back(&r);
  std::sort(sorted.begin(), sorted.end(),
            [](const VariantRecord* a, const VariantRecord* b) { return a->variant < b->variant; });
  Fnv1a h;
  for (const VariantRecord* r : sorted) {
    h.update_u64(static_cast<uint64_t>(r->variant));
    h.update_u64(r->graph_hash);
    h.update_u64(r->input_digest);
    for (const auto& run : r->runs) {
      h.update(run.combo.key());
      h.update_u64(run.compile_failure ? fnv1a(*run.compile_failure) : run.digest);
    }
  }
  return h.digest();
}

struct LedgerData {
  std::vector<VariantRecord> records;
  std::vector<DivergenceReport> reports;  // parsed back only partially (tabulation fields)
};

// reconstructs tabulation-relevant report fields from reports.jsonl
DivergenceReport report_from_json_line(const Json& j) {
  DivergenceReport r;
  r.graph_hash = std::stoull(j.at("graph_hash").get<std::string>(), nullptr, 16);
  r.backend_a = j.at("backend_a").get<std::string>();
  r.backend_b = j.at("backend_b").get<std::string>();
  r.mode_a = j.value("mode_a", std::string("eager"));
  r.mode_b = j.value("mode_b", std::string("eager"));
  for (const auto& vj : j.value("verdicts", Json::array())) {
    OutputVerdict v;
    const std::string kind = vj.at("verdict").get<std::string>();
    v.kind = kind == "equivalent"  ? OutputVerdict::Kind::Equivalent
             : kind == "divergent" ? OutputVerdict::Kind::Divergent
                                   : OutputVerdict::Kind::IncomparableFailure;
    v.output_node = vj.value("output_node", int64_t{-1});
    r.verdicts.push_back(v);
  }
  if (j.contains("culprit")) {
    r.culprit = j.at("culprit").get<int64_t>();
    if (auto k = op_kind_from_string(j.value("culprit_kind", std::string())))
      r.culprit_kind = *k;
    const std::string cls = j.value("divergence_class", std::string("numeric"));
    r.divergence_class = cls == "numeric"             ? DivergenceClass::Numeric
                         : cls == "exceptional_class" ? DivergenceClass::ExceptionalClass
                         : cls == "shape"             ? DivergenceClass::Shape
                                                      : DivergenceClass::FailureKind;
    if (j.contains("culprit_mad")) {
      const auto& m = j.at("culprit_mad");
      r.culprit_mad = m.is_string() ? std::numeric_limits<double>::infinity() : m.get<double>();
    }
    for (const auto& sj : j.value("mad_chain", Json::array())) {
      MadStep step;
      step.node = sj.value("node", int64_t{-1});
      if (auto k = op_kind_from_string(sj.value("kind", std::string()))) step.kind = *k;
      const auto& mad = sj.at("mad");
      step.mad = mad.is_string() ? std::numeric_limits<double>::infinity() : mad.get<double>();
      const auto& rate = sj.at("rate");
      step.rate = rate.is_string() ? std::numeric_limits<double>::infinity() : rate.get<double>();
      r.mad_chain.push_back(step);
    }
    if (j.contains("cluster_key"))
      r.cluster_key = {j.at("cluster_key")[0].get<std::string>(),
                       j.at("cluster_key")[1].get<std::string>()};
  }
  return r;
}

VariantRecord record_from_json(const Json& j) {
  VariantRecord rec;
  rec.variant = j.at("variant").get<int>();
  if (j.contains("harness_fault")) {
    rec.harness_fault = j.at("harness_fault").get<std::string>();
    return rec;
  }
  rec.seed = j.at("seed").get<uint64_t>();
  rec.graph_file = j.at("graph").get<std::string>();
  rec.graph_hash = std::stoull(j.at("graph_hash").get<std::string>(), nullptr, 16);
  rec.input_file = j.at("inputs").get<std::string>();
  rec.input_digest = std::stoull(j.at("input_digest").get<std::string>(), nullptr, 16);
  for (const auto& rj : j.value("runs", Json::array())) {
    RunOutcome r;
    r.combo.backend = rj.at("backend").get<std::string>();
    r.combo.mode = rj.at("mode").get<std::string>();
    r.run_seed = rj.value("run_seed", uint64_t{0});
    if (rj.contains("compile_failure")) {
      r.compile_failure = rj.at("compile_failure").get<std::string>();
    } else {
      r.digest = std::stoull(rj.at("digest").get<std::string>(), nullptr, 16);
      const Json failures = rj.value("failures", Json::object());
      for (const auto& [kind, count] : failures.items())
        r.failures_by_kind[kind] = count.get<int>();
    }
    rec.runs.push_back(std::move(r));
  }
  return rec;
}

LedgerData load_ledger(const std::filesystem::path& dir) {
  LedgerData data;
  const auto ledger_path = dir / "ledger.jsonl";
  if (std::filesystem::exists(ledger_path)) {
    std::istringstream ss(read_file(ledger_path));
    std::string line;
    while (std::getline(ss, line)) {
      if (strip(line).empty()) continue;
      data.records.push_back(record_from_json(Json::parse(line)));
    }
  }
  const auto reports_path = dir / "reports.jsonl";
  if (std::filesystem::exists(reports_path)) {
    std::istringstream ss(read_file(reports_path));
    std::string line;
    while (std::getline(ss, line)) {
      if (strip(line).empty()) continue;
      data.reports.push_back(report_from_json_line(Json::parse(line)));
    }
  }
  return data;
}

}  // namespace

CampaignResult run_campaign(const CampaignConfig& cfg) {
  if (cfg.variants < 1) throw Error(Errc::InvalidArgument, "variants must be >= 1");
  if (cfg.backends.empty() || cfg.modes.empty())
    throw Error(Errc::InvalidArgument, "need at least one backend and one mode");

  std::vector<Combo> combos;
  for (const auto& b : cfg.backends)
    for (const auto& m : cfg.modes) combos.push_back(Combo{b, m});
  if (combos.size() < 2)
    throw Error(Errc::InvalidArgument, "need at least two (backend, mode) combinations");

  std::map<std::string, BackendProfile> profiles;
  for (const auto& b : cfg.backends) profiles.emplace(b, load_profile(b));
  for (const auto& m : cfg.modes) (void)pipeline_for_mode(m);  // validate names

  // baseline combination: (reference, eager) when configured, first combo
  // otherwise
  size_t baseline_index = 0;
  for (size_t i = 0; i < combos.size(); ++i)
    if (combos[i].backend == "reference" && combos[i].mode == "eager") baseline_index = i;

  Corpus corpus = load_corpus(cfg.corpus_dir);
  if (corpus.empty()) throw Error(Errc::EmptyCorpus, "corpus dir has no graphs");

  std::filesystem::create_directories(cfg.out_dir);
  // resolved config for replay
  {
    Json j;
    j["corpus_dir"] = cfg.corpus_dir.string();
    j["backends"] = cfg.backends;
    j["modes"] = cfg.modes;
    j["variants"] = cfg.variants;
    j["threshold"] = cfg.synth.node_threshold;
    j["mutation_prob"] = cfg.synth.mutation_probability;
    j["element_cap"] = cfg.synth.element_cap;
    j["max_subgraph_nodes"] = cfg.synth.max_subgraph_nodes;
    j["master_seed"] = cfg.master_seed;
    j["float_min"] = cfg.inputs.float_min;
    j["float_max"] = cfg.inputs.float_max;
    j["index_min"] = cfg.inputs.index_min;
    j["index_max"] = cfg.inputs.index_max;
    j["int_min"] = cfg.inputs.int_min;
    j["int_max"] = cfg.inputs.int_max;
    j["atol"] = cfg.tol.atol;
    j["rtol"] = cfg.tol.rtol;
    j["all_pairs"] = cfg.all_pairs;
    write_file(cfg.out_dir / "config.json", j.dump(2) + "\n");
  }

  LedgerData prior = load_ledger(cfg.out_dir);
  std::set<int> done;
  for (const auto& r : prior.records) done.insert(r.variant);

  std::vector<VariantRecord> records = std::move(prior.records);
  std::vector<DivergenceReport> reports = std::move(prior.reports);

  std::ofstream ledger_out(cfg.out_dir / "ledger.jsonl", std::ios::app);
  std::ofstream reports_out(cfg.out_dir / "reports.jsonl", std::ios::app);
  if (!ledger_out || !reports_out) throw Error(Errc::IoError, "cannot open ledger for append");

  std::mutex sink_mutex;
  std::atomic<int> next_variant{0};
  const int workers = cfg.workers > 0
                          ? cfg.workers
                          : std::max(1u, std::thread::hardware_concurrency());

  auto worker = [&] {
    for (;;) {
      const int v = next_variant.fetch_add(1);
      if (v >= cfg.variants) return;
      {
        std::lock_guard<std::mutex> lock(sink_mutex);
        if (done.count(v)) continue;
      }
      VariantRecord rec;
      try {
        rec = process_variant(v, cfg, corpus, combos, profiles, baseline_index);
      } catch (const std::exception& e) {
        rec = VariantRecord{};
        rec.variant = v;
        rec.harness_fault = e.what();
      }
      std::lock_guard<std::mutex> lock(sink_mutex);
      ledger_out << record_to_json(rec).dump() << "\n";
      ledger_out.flush();
      for (const auto& rep : rec.reports) {
        Json rj = report_to_json(rep);
        rj["variant"] = rec.variant;
        reports_out << rj.dump() << "\n";
        reports.push_back(rep);
      }
      reports_out.flush();
      records.push_back(std::move(rec));
    }
  };

  std::vector<std::thread> pool;
  for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  std::vector<TraceStats> all_stats;
  for (const auto& rec : records) {
    auto s = stats_of(rec);
    all_stats.insert(all_stats.end(), s.begin(), s.end());
  }

  CampaignResult result;
  result.summary = summarize_campaign(reports, all_stats);
  result.summary.variants = static_cast<int>(records.size());
  result.ledger_dir = cfg.out_dir;
  result.completed = static_cast<int>(records.size());
  result.resumed = static_cast<int>(done.size());
  result.ledger_digest = ledger_digest_of(records);

  write_file(cfg.out_dir / "summary.json", result.summary.to_json().dump(2) + "\n");
  write_file(cfg.out_dir / "summary.txt", result.summary.to_text());
  return result;
}

ExecutionTrace replay(const std::filesystem::path& ledger_dir, int variant,
                      const std::string& backend, const std::string& mode) {
  Json config;
  try {
    config = Json::parse(read_file(ledger_dir / "config.json"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, std::string("config.json: ") + e.what());
  }

  LedgerData data = load_ledger(ledger_dir);
  const VariantRecord* rec = nullptr;
  for (const auto& r : data.records)
    if (r.variant == variant) rec = &r;
  if (!rec) throw Error(Errc::InvalidArgument, "variant not present in ledger");
  if (rec->harness_fault)
    throw Error(Errc::InvalidArgument, "variant recorded a harness fault, nothing to replay");

  const RunOutcome* run = nullptr;
  size_t combo_index = 0;
  for (size_t i = 0; i < rec->runs.size(); ++i)
    if (rec->runs[i].combo.backend == backend && rec->runs[i].combo.mode == mode) {
      run = &rec->runs[i];
      combo_index = i;
    }
  if (!run) throw Error(Errc::InvalidArgument, "no such (backend, mode) run in ledger");
  if (run->compile_failure)
    throw Error(Errc::InvalidArgument, "run failed to compile (" + *run->compile_failure +
                                           "), nothing to replay");

  Corpus corpus = load_corpus(config.at("corpus_dir").get<std::string>());
  SynthesisConfig synth_cfg;
  synth_cfg.node_threshold = config.at("threshold").get<int>();
  synth_cfg.mutation_probability = config.at("mutation_prob").get<double>();
  synth_cfg.element_cap = config.at("element_cap").get<int64_t>();
  synth_cfg.max_subgraph_nodes = config.at("max_subgraph_nodes").get<int>();
  synth_cfg.seed = rec->seed;
  SynthesisResult sr = synthesize(corpus, synth_cfg);
  auto graph = std::make_shared<const Graph>(std::move(sr.graph));
  if (content_hash(*graph) != rec->graph_hash)
    throw Error(Errc::DigestMismatch, "regenerated graph differs from ledgered graph");

  InputPolicy policy;
  policy.float_min = config.at("float_min").get<double>();
  policy.float_max = config.at("float_max").get<double>();
  policy.index_min = config.at("index_min").get<int64_t>();
  policy.index_max = config.at("index_max").get<int64_t>();
  policy.int_min = config.at("int_min").get<int64_t>();
  policy.int_max = config.at("int_max").get<int64_t>();
  policy.seed = mix_seed(rec->seed, 1);
  auto inputs = generate_inputs(*graph, policy);
  if (input_digest(inputs) != rec->input_digest)
    throw Error(Errc::DigestMismatch, "regenerated inputs differ from ledgered inputs");

  BackendProfile profile = load_profile(backend);
  RunOutcome out = run_combo(Combo{backend, mode}, profile, graph, inputs,
                             combo_seed(rec->seed, combo_index));
  if (!out.trace) throw Error(Errc::DigestMismatch, "replay failed to compile");
  if (out.digest != run->digest)
    throw Error(Errc::DigestMismatch,
                "trace digest " + hex64(out.digest) + " != ledgered " + hex64(run->digest));
  return *out.trace;
}

namespace {

CampaignSummary summary_from_ledger(const std::filesystem::path& ledger_dir) {
  LedgerData data = load_ledger(ledger_dir);
  if (data.records.empty()) throw Error(Errc::InvalidArgument, "ledger is empty");
  std::vector<TraceStats> stats;
  for (const auto& rec : data.records) {
    auto s = stats_of(rec);
    stats.insert(stats.end(), s.begin(), s.end());
  }
  CampaignSummary summary = summarize_campaign(data.reports, stats);
  summary.variants = static_cast<int>(data.records.size());
  return summary;
}

}  // namespace

std::string report_text(const std::filesystem::path& ledger_dir) {
  CampaignSummary summary = summary_from_ledger(ledger_dir);
  std::ostringstream os;
  os << summary.to_text();
  if (!summary.clusters.empty()) {
    os << "\nreplay commands for cluster representatives:\n";
    // map representative graph hashes back to variants
    LedgerData data = load_ledger(ledger_dir);
    int rank = 1;
    for (const auto& c : summary.clusters) {
      for (const auto& rec : data.records) {
        if (rec.graph_hash != c.representative.graph_hash) continue;
        os << "  " << rank << ". graphdiff replay --ledger " << ledger_dir.string()
           << " --variant " << rec.variant << " --backend " << c.representative.backend_a
           << " --mode " << c.representative.mode_a << "\n";
        break;
      }
      ++rank;
      if (rank > 10) break;
    }
  }
  return os.str();
}

Json report_json(const std::filesystem::path& ledger_dir) {
  return summary_from_ledger(ledger_dir).to_json();
}

}  // namespace graphdiff
