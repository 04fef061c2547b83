#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <fstream>

#include "graphdiff/campaign.hpp"
#include "graphdiff/errors.hpp"
#include "graphdiff/serialize.hpp"
#include "test_util.hpp"

using namespace graphdiff;
using graphdiff::test::TempDir;

namespace {

CampaignConfig small_campaign(const TempDir& dir, int variants, uint64_t seed) {
  CampaignConfig cfg;
  cfg.corpus_dir = dir.path / "corpus";
  cfg.out_dir = dir.path / "out";
  cfg.backends = {"reference", "relaxed-a"};
  cfg.modes = {"eager"};
  cfg.variants = variants;
  cfg.synth.node_threshold = 15;
  cfg.master_seed = seed;
  cfg.workers = 2;
  if (!std::filesystem::exists(cfg.corpus_dir)) {
    Rng rng(seed + 1);
    save_corpus(generate_seed_corpus(rng, 6), cfg.corpus_dir);
  }
  return cfg;
}

int count_lines(const std::filesystem::path& p) {
  if (!std::filesystem::exists(p)) return 0;
  std::ifstream f(p);
  std::string line;
  int n = 0;
  while (std::getline(f, line))
    if (!line.empty()) ++n;
  return n;
}

}  // namespace

TEST_CASE("single-variant campaign writes one record, two traces, one report") {
  TempDir dir("camp_single");
  CampaignConfig cfg = small_campaign(dir, 1, 5);
  auto result = run_campaign(cfg);
  CHECK(result.completed == 1);
  CHECK(count_lines(cfg.out_dir / "ledger.jsonl") == 1);
  CHECK(count_lines(cfg.out_dir / "reports.jsonl") == 1);

  Json record = Json::parse(read_file(cfg.out_dir / "ledger.jsonl"));
  CHECK(record.at("runs").size() == 2);
  CHECK(std::filesystem::exists(cfg.out_dir / record.at("graph").get<std::string>()));
  CHECK(std::filesystem::exists(cfg.out_dir / record.at("inputs").get<std::string>()));
}

TEST_CASE("same master seed reproduces summaries and ledger digests") {
  TempDir dir("camp_repro");
  CampaignConfig a = small_campaign(dir, 8, 42);
  a.out_dir = dir.path / "out_a";
  CampaignConfig b = small_campaign(dir, 8, 42);
  b.out_dir = dir.path / "out_b";
  auto ra = run_campaign(a);
  auto rb = run_campaign(b);
  CHECK(ra.ledger_digest == rb.ledger_digest);
  CHECK(ra.summary.to_json().dump() == rb.summary.to_json().dump());
}

TEST_CASE("campaigns resume from the ledger without rewriting records") {
  TempDir dir("camp_resume");
  CampaignConfig first = small_campaign(dir, 3, 9);
  run_campaign(first);
  const std::string ledger_before = read_file(first.out_dir / "ledger.jsonl");

  CampaignConfig more = small_campaign(dir, 6, 9);
  auto result = run_campaign(more);
  CHECK(result.completed == 6);
  CHECK(result.resumed == 3);
  const std::string ledger_after = read_file(more.out_dir / "ledger.jsonl");
  // append-only: the first three records are untouched
  CHECK(ledger_after.substr(0, ledger_before.size()) == ledger_before);
  CHECK(count_lines(more.out_dir / "ledger.jsonl") == 6);

  // a resumed campaign tabulates exactly like an uninterrupted one
  CampaignConfig fresh = small_campaign(dir, 6, 9);
  fresh.out_dir = dir.path / "out_fresh";
  auto uninterrupted = run_campaign(fresh);
  CHECK(result.ledger_digest == uninterrupted.ledger_digest);
  CHECK(result.summary.to_json().dump() == uninterrupted.summary.to_json().dump());
}

TEST_CASE("parallel and serial execution produce the same ledger digest") {
  TempDir dir("camp_par");
  CampaignConfig serial = small_campaign(dir, 6, 13);
  serial.out_dir = dir.path / "out_serial";
  serial.workers = 1;
  CampaignConfig parallel = small_campaign(dir, 6, 13);
  parallel.out_dir = dir.path / "out_parallel";
  parallel.workers = 4;
  CHECK(run_campaign(serial).ledger_digest == run_campaign(parallel).ledger_digest);
}

TEST_CASE("replay digest-matches ledgered runs and rejects unknown ones") {
  TempDir dir("camp_replay");
  CampaignConfig cfg = small_campaign(dir, 4, 21);
  run_campaign(cfg);
  auto trace = replay(cfg.out_dir, 2, "relaxed-a", "eager");
  CHECK(trace.backend == "relaxed-a");
  CHECK_THROWS_AS((void)replay(cfg.out_dir, 2, "relaxed-a", "full-pipeline"), Error);
  CHECK_THROWS_AS((void)replay(cfg.out_dir, 99, "relaxed-a", "eager"), Error);
}

TEST_CASE("replay detects ledger corruption loudly") {
  TempDir dir("camp_corrupt");
  CampaignConfig cfg = small_campaign(dir, 2, 33);
  run_campaign(cfg);
  // flip a digest in the ledger
  std::string text = read_file(cfg.out_dir / "ledger.jsonl");
  std::istringstream ss(text);
  std::string line, rewritten;
  while (std::getline(ss, line)) {
    if (line.empty()) continue;
    Json j = Json::parse(line);
    if (j.at("variant").get<int>() == 1)
      j.at("runs")[0]["digest"] = "00000000deadbeef";
    rewritten += j.dump() + "\n";
  }
  write_file(cfg.out_dir / "ledger.jsonl", rewritten);

  try {
    (void)replay(cfg.out_dir, 1, "reference", "eager");
    FAIL("expected DigestMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::DigestMismatch);
  }
}

TEST_CASE("report text summarizes agreement per pair") {
  TempDir dir("camp_report");
  CampaignConfig cfg = small_campaign(dir, 4, 55);
  run_campaign(cfg);
  const std::string text = report_text(cfg.out_dir);
  CHECK(text.find("pairwise agreement") != std::string::npos);
  CHECK(text.find("relaxed-a/eager vs reference/eager") != std::string::npos);
  Json j = report_json(cfg.out_dir);
  CHECK(j.at("variants").get<int>() == 4);
}

TEST_CASE("config file parsing covers strings, numbers, lists and comments") {
  TempDir dir("camp_cfg");
  write_file(dir.path / "c.toml",
             "# a campaign\n"
             "corpus_dir = \"seeds\"   # trailing comment\n"
             "out_dir = \"results\"\n"
             "backends = [\"reference\", \"parallel\"]\n"
             "modes = [\"eager\", \"jit-pipeline\"]\n"
             "variants = 12\n"
             "threshold = 33\n"
             "mutation_prob = 0.5\n"
             "master_seed = 99\n"
             "atol = 1e-3\n"
             "workers = 3\n"
             "all_pairs = true\n");
  CampaignConfig cfg = CampaignConfig::from_file(dir.path / "c.toml");
  CHECK(cfg.corpus_dir == "seeds");
  CHECK(cfg.backends == std::vector<std::string>{"reference", "parallel"});
  CHECK(cfg.modes == std::vector<std::string>{"eager", "jit-pipeline"});
  CHECK(cfg.variants == 12);
  CHECK(cfg.synth.node_threshold == 33);
  CHECK(cfg.synth.mutation_probability == 0.5);
  CHECK(cfg.master_seed == 99);
  CHECK(cfg.tol.atol == 1e-3);
  CHECK(cfg.workers == 3);
  CHECK(cfg.all_pairs);
}

TEST_CASE("campaign validates its configuration") {
  TempDir dir("camp_bad");
  CampaignConfig cfg = small_campaign(dir, 1, 1);
  cfg.backends = {"reference"};
  cfg.modes = {"eager"};  // single combination: nothing to diff
  CHECK_THROWS_AS((void)run_campaign(cfg), Error);

  CampaignConfig cfg2 = small_campaign(dir, 0, 1);
  CHECK_THROWS_AS((void)run_campaign(cfg2), Error);
}

TEST_CASE("compilation failures are tabulated per backend and mode") {
  TempDir dir("camp_compilefail");
  CampaignConfig cfg = small_campaign(dir, 6, 77);
  cfg.backends = {"reference", "relaxed-b"};
  cfg.modes = {"eager", "full-pipeline"};
  auto result = run_campaign(cfg);
  // relaxed-b rejects whole graphs at compile time when they contain
  // operators it does not implement
  auto it = result.summary.compile_fails.find("relaxed-b/full-pipeline");
  REQUIRE(it != result.summary.compile_fails.end());
  CHECK(it->second.at("unsupported") >= 1);
  const std::string text = result.summary.to_text();
  CHECK(text.find("compilation failures") != std::string::npos);
}

TEST_CASE("all-pairs diffing and full-trace retention flags") {
  TempDir dir("camp_flags");
  CampaignConfig cfg = small_campaign(dir, 2, 31);
  cfg.backends = {"reference", "parallel", "relaxed-a"};
  cfg.all_pairs = true;
  cfg.store_full_traces = true;
  run_campaign(cfg);
  // three combinations give three unordered pairs per variant
  CHECK(count_lines(cfg.out_dir / "reports.jsonl") == 2 * 3);
  int trace_files = 0;
  for (const auto& de : std::filesystem::directory_iterator(cfg.out_dir / "traces"))
    if (de.path().extension() == ".json") ++trace_files;
  CHECK(trace_files == 2 * 3);
}

TEST_CASE("per-variant faults are recorded as harness faults, not aborts") {
  TempDir dir("camp_fault");
  // a corpus whose only entry routes an offsets operand through a slice:
  // input generation refuses it, so every variant faults
  GraphBuilder b;
  int64_t weight = b.constant(Tensor::full(TensorSpec{{5, 2}, DType::F32, true}, 0.5));
  int64_t indices = b.input(TensorSpec{{6}, DType::I64, true});
  int64_t raw = b.input(TensorSpec{{6}, DType::I64, true});
  int64_t sliced = b.op(OpKind::Slice, {{raw, 0}},
                        Attrs{{"dim", int64_t{0}}, {"start", int64_t{2}}, {"end", int64_t{5}}});
  b.output({b.op(OpKind::EmbeddingBag, {{weight, 0}, {indices, 0}, {sliced, 0}}), 0});
  Corpus corpus;
  corpus.insert(b.take(), "fault-fixture");
  save_corpus(corpus, dir.path / "corpus");

  CampaignConfig cfg;
  cfg.corpus_dir = dir.path / "corpus";
  cfg.out_dir = dir.path / "out";
  cfg.backends = {"reference", "relaxed-a"};
  cfg.modes = {"eager"};
  cfg.variants = 3;
  cfg.synth.node_threshold = 2;
  cfg.master_seed = 1;
  auto result = run_campaign(cfg);  // must not throw
  CHECK(result.completed == 3);
  int faults = 0;
  std::istringstream ss(read_file(cfg.out_dir / "ledger.jsonl"));
  std::string line;
  while (std::getline(ss, line))
    if (line.find("harness_fault") != std::string::npos) ++faults;
  CHECK(faults >= 1);
}

TEST_CASE("numeric divergence flows through campaign tabulation and clustering") {
  TempDir dir("camp_numeric");
  // corpus of one graph whose integer division hits zero: the baseline and
  // the lenient profile pin different defined results, so outputs differ
  // numerically without any failure
  GraphBuilder b;
  int64_t x = b.input(TensorSpec{{2, 2}, DType::F32, true});
  int64_t as_int = b.op(OpKind::Cast, {{x, 0}}, Attrs{{"to", std::string("i64")}});
  Tensor divisor{TensorSpec{{2, 2}, DType::I64, true}};
  divisor.set_i(0, 1);
  divisor.set_i(1, 0);  // the undefined lane
  divisor.set_i(2, 2);
  divisor.set_i(3, 1);
  int64_t c = b.constant(std::move(divisor));
  int64_t q = b.op(OpKind::Div, {{as_int, 0}, {c, 0}});
  b.output({q, 0});
  Corpus corpus;
  corpus.insert(b.take(), "div-zero-fixture");
  save_corpus(corpus, dir.path / "corpus");

  CampaignConfig cfg;
  cfg.corpus_dir = dir.path / "corpus";
  cfg.out_dir = dir.path / "out";
  cfg.backends = {"reference", "relaxed-a"};
  cfg.modes = {"eager"};
  cfg.variants = 4;
  cfg.synth.node_threshold = 3;
  cfg.synth.mutation_probability = 0.0;
  cfg.master_seed = 3;
  auto result = run_campaign(cfg);

  const auto key = std::make_pair(std::string("relaxed-a/eager"), std::string("reference/eager"));
  REQUIRE(result.summary.pairs.count(key) == 1);
  CHECK(result.summary.pairs.at(key).divergent >= 1);
  REQUIRE_FALSE(result.summary.clusters.empty());
  CHECK(result.summary.clusters[0].key.first == "div");
  CHECK(result.summary.clusters[0].key.second == "numeric");
}

TEST_CASE("summary text renders stalled-compilation rows") {
  std::vector<TraceStats> stats;
  TraceStats s;
  s.backend = "reference";
  s.mode = "jit-pipeline";
  s.compile_failure = "stalled";
  stats.push_back(s);
  auto summary = summarize_campaign(std::vector<DivergenceReport>{}, stats);
  const std::string text = summary.to_text();
  CHECK(text.find("stalled=1") != std::string::npos);
}

TEST_CASE("verdicts are derived from traces, not stored as truth") {
  // the same ledgered run diffs differently under a different tolerance
  TempDir dir("camp_tol");
  CampaignConfig cfg = small_campaign(dir, 1, 7);
  cfg.backends = {"reference", "parallel"};
  run_campaign(cfg);
  auto ref = replay(cfg.out_dir, 0, "reference", "eager");
  auto par = replay(cfg.out_dir, 0, "parallel", "eager");

  auto loose = diff_traces(par, ref, ToleranceConfig{1e3, 1e3});
  CHECK_FALSE(loose.divergent());
  auto strict = diff_traces(par, ref, ToleranceConfig{0.0, 0.0});
  // with zero tolerance any accumulation-dtype difference shows up; the
  // verdict may flip, and at minimum the equivalent verdict stays derivable
  CHECK(strict.verdicts.size() == loose.verdicts.size());
}
