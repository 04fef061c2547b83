#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "graphdiff/diff.hpp"
#include "graphdiff/inputgen.hpp"
#include "graphdiff/synth.hpp"

namespace graphdiff {

struct CampaignConfig {
  std::filesystem::path corpus_dir;
  std::filesystem::path out_dir;
  std::vector<std::string> backends = {"reference", "relaxed-a"};
  // eager | jit-pipeline | full-pipeline
  std::vector<std::string> modes = {"eager"};
  int variants = 100;
  SynthesisConfig synth;   // per-variant seeds are derived from master_seed
  InputPolicy inputs;
  ToleranceConfig tol;
  int workers = 0;  // 0 = hardware concurrency
  uint64_t master_seed = 0;
  bool all_pairs = false;          // diff every combination pair, not just vs baseline
  bool store_full_traces = false;  // write trace json per (variant, backend, mode)

  // flat key-value document; see docs/README for the key list
  static CampaignConfig from_file(const std::filesystem::path& path);
};

struct CampaignResult {
  CampaignSummary summary;
  std::filesystem::path ledger_dir;
  int completed = 0;
  int resumed = 0;  // records found from a previous run
  uint64_t ledger_digest = 0;
};

// Runs the full pipeline per variant: synthesize with a derived seed,
// generate inputs, execute on every (backend, mode), diff against the
// (reference, eager) combination, append ledger records. Per-variant
// failures are data; only I/O and config errors abort. Interrupted campaigns
// resume from the ledger.
CampaignResult run_campaign(const CampaignConfig& cfg);

// Regenerates graph+inputs from the ledgered seeds and re-executes one
// combination. Throws Error(DigestMismatch) when the trace digest differs
// from the ledgered value.
ExecutionTrace replay(const std::filesystem::path& ledger_dir, int variant,
                      const std::string& backend, const std::string& mode);

// Human-readable report plus machine-readable JSON for a finished campaign.
std::string report_text(const std::filesystem::path& ledger_dir);
Json report_json(const std::filesystem::path& ledger_dir);

}  // namespace graphdiff
