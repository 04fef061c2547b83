// graphdiff: differential testing harness for tensor computation graphs.
//
// Subcommands: seed, synth, run, diff, campaign, report, replay.

#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"

#include "graphdiff/campaign.hpp"
#include "graphdiff/engine.hpp"
#include "graphdiff/errors.hpp"
#include "graphdiff/hash.hpp"
#include "graphdiff/passes.hpp"
#include "graphdiff/serialize.hpp"

namespace fs = std::filesystem;
using namespace graphdiff;

namespace {

ToleranceConfig parse_tol(const std::string& spec) {
  ToleranceConfig tol;
  std::istringstream ss(spec);
  std::string part;
  while (std::getline(ss, part, ',')) {
    const auto eq = part.find('=');
    if (eq == std::string::npos)
      throw Error(Errc::InvalidArgument, "tolerance spec must be atol=X,rtol=Y");
    const std::string key = part.substr(0, eq);
    const double value = std::stod(part.substr(eq + 1));
    if (key == "atol")
      tol.atol = value;
    else if (key == "rtol")
      tol.rtol = value;
    else
      throw Error(Errc::InvalidArgument, "unknown tolerance key " + key);
  }
  return tol;
}

void emit(const std::string& text, const std::string& out_file) {
  if (out_file.empty())
    std::cout << text;
  else
    write_file(out_file, text);
}

int cmd_seed(const std::string& out_dir, int count, uint64_t seed) {
  Rng rng(seed);
  Corpus corpus = generate_seed_corpus(rng, count);
  save_corpus(corpus, out_dir);
  std::cout << "wrote " << corpus.size() << " seed graphs to " << out_dir << "\n";
  return 0;
}

int cmd_synth(const std::string& corpus_dir, const std::string& out_dir, int count, int threshold,
              double mutation_prob, uint64_t seed, int64_t element_cap, int max_subgraph) {
  Corpus corpus = load_corpus(corpus_dir);
  fs::create_directories(out_dir);
  Json manifest;
  manifest["schema"] = 1;
  manifest["corpus"] = corpus_dir;
  manifest["count"] = count;
  manifest["threshold"] = threshold;
  manifest["mutation_prob"] = mutation_prob;
  manifest["seed"] = seed;
  Json variants = Json::array();
  for (int i = 0; i < count; ++i) {
    SynthesisConfig cfg;
    cfg.node_threshold = threshold;
    cfg.mutation_probability = mutation_prob;
    cfg.seed = mix_seed(seed, static_cast<uint64_t>(i));
    cfg.element_cap = element_cap;
    cfg.max_subgraph_nodes = max_subgraph;
    SynthesisResult result = synthesize(corpus, cfg);
    char name[32];
    std::snprintf(name, sizeof name, "variant_%06d.json", i);
    save_graph_file(result.graph, fs::path(out_dir) / name);
    Json v;
    v["file"] = name;
    v["seed"] = cfg.seed;
    v["graph_hash"] = hex64(content_hash(result.graph));
    v["operators"] = result.graph.operator_count();
    v["merges"] = result.log.merges.size();
    v["mutated_nodes"] = result.log.mutated_nodes;
    variants.push_back(std::move(v));
  }
  manifest["variants"] = std::move(variants);
  write_file(fs::path(out_dir) / "synth.manifest.json", manifest.dump(2) + "\n");
  std::cout << "wrote " << count << " variants to " << out_dir << "\n";
  return 0;
}

int cmd_run(const std::string& graph_file, const std::string& inputs_file, uint64_t input_seed,
            const std::string& backend, const std::string& mode, const std::string& pipeline_spec,
            uint64_t run_seed, const std::string& out_file, const std::string& save_inputs) {
  auto graph = std::make_shared<const Graph>(load_graph_file(graph_file));
  if (auto issue = validate(*graph)) {
    std::cerr << "graph invalid: " << to_string(issue->kind) << " at node " << issue->node_id
              << ": " << issue->detail << "\n";
    return 1;
  }
  BackendProfile profile = load_profile(backend);

  std::vector<Tensor> inputs;
  if (!inputs_file.empty()) {
    InputBundle bundle = load_input_bundle(inputs_file);
    inputs = std::move(bundle.tensors);
  } else {
    InputPolicy policy;
    policy.seed = input_seed;
    inputs = generate_inputs(*graph, policy);
    if (!save_inputs.empty()) save_input_bundle(save_inputs, *graph, policy, inputs);
  }

  ExecutionTrace trace;
  if (mode == "eager") {
    trace = execute(profile, graph, inputs, ExecOptions{run_seed});
  } else if (mode == "compiled") {
    PassPipeline pipeline =
        pipeline_spec == "default" ? PassPipeline::full() : PassPipeline::from_file(pipeline_spec);
    auto compiled = compile(pipeline, *graph, &profile);
    if (auto* failure = std::get_if<CompileFailure>(&compiled)) {
      Json j;
      j["compile_failure"] = to_string(failure->kind);
      j["detail"] = failure->detail;
      emit(j.dump(2) + "\n", out_file);
      return 0;
    }
    auto& cg = std::get<CompiledGraph>(compiled);
    trace = execute(profile, cg.graph, inputs, ExecOptions{run_seed});
    trace.mode = "compiled";
    trace.origin = cg.origin;
  } else {
    std::cerr << "mode must be eager or compiled\n";
    return 1;
  }
  emit(trace_to_json(trace).dump() + "\n", out_file);
  return 0;
}

int cmd_diff(const std::string& trace_a, const std::string& trace_b, const std::string& tol_spec,
             const std::string& out_file) {
  ExecutionTrace a = trace_from_json(Json::parse(read_file(trace_a)));
  ExecutionTrace b = trace_from_json(Json::parse(read_file(trace_b)));
  DivergenceReport report = diff_traces(a, b, parse_tol(tol_spec));
  emit(report_to_json(report).dump(2) + "\n", out_file);
  return 0;
}

int cmd_campaign(const std::string& config_file) {
  CampaignConfig cfg = CampaignConfig::from_file(config_file);
  CampaignResult result = run_campaign(cfg);
  std::cout << result.summary.to_text();
  std::cout << "\nledger: " << result.ledger_dir.string() << " (digest "
            << hex64(result.ledger_digest) << ")\n";
  return 0;
}

int cmd_report(const std::string& ledger_dir, bool as_json) {
  if (as_json)
    std::cout << report_json(ledger_dir).dump(2) << "\n";
  else
    std::cout << report_text(ledger_dir);
  return 0;
}

int cmd_replay(const std::string& ledger_dir, int variant, const std::string& backend,
               const std::string& mode, const std::string& out_file) {
  ExecutionTrace trace = replay(ledger_dir, variant, backend, mode);
  if (!out_file.empty()) write_file(out_file, trace_to_json(trace).dump() + "\n");
  std::cout << "replay digest match: variant " << variant << " on " << backend << "/" << mode
            << " -> " << hex64(trace.digest()) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"differential testing harness for tensor computation graphs"};
  app.require_subcommand(1);

  // seed
  auto* seed_cmd = app.add_subcommand("seed", "generate a self-contained seed corpus");
  std::string seed_out = "corpus";
  int seed_count = 16;
  uint64_t seed_seed = 0;
  seed_cmd->add_option("--out", seed_out, "corpus directory");
  seed_cmd->add_option("--count", seed_count, "number of seed graphs");
  seed_cmd->add_option("--seed", seed_seed, "rng seed");

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "synthesize variant models from a corpus");
  std::string synth_corpus = "corpus", synth_out = "variants";
  int synth_count = 1, synth_threshold = 100, synth_max_subgraph = 12;
  double synth_prob = 0.25;
  uint64_t synth_seed = 0;
  int64_t synth_cap = kDefaultElementCap;
  synth_cmd->add_option("--corpus", synth_corpus, "corpus directory");
  synth_cmd->add_option("--count", synth_count, "number of variants");
  synth_cmd->add_option("--threshold", synth_threshold, "operator-node threshold T");
  synth_cmd->add_option("--mutation-prob", synth_prob, "mutation probability");
  synth_cmd->add_option("--seed", synth_seed, "master seed");
  synth_cmd->add_option("--out", synth_out, "output directory");
  synth_cmd->add_option("--element-cap", synth_cap, "max tensor elements for glue");
  synth_cmd->add_option("--max-subgraph-nodes", synth_max_subgraph, "sampled subgraph size");

  // run
  auto* run_cmd = app.add_subcommand("run", "execute one graph on one backend");
  std::string run_graph, run_inputs, run_backend = "reference", run_mode = "eager";
  std::string run_pipeline = "default", run_out, run_save_inputs;
  uint64_t run_input_seed = 0, run_run_seed = 0;
  run_cmd->add_option("--graph", run_graph, "graph json file")->required();
  run_cmd->add_option("--inputs", run_inputs, "input bundle file (replayable)");
  run_cmd->add_option("--input-seed", run_input_seed, "generate inputs with this seed");
  run_cmd->add_option("--backend", run_backend, "builtin profile name or profile json");
  run_cmd->add_option("--mode", run_mode, "eager|compiled");
  run_cmd->add_option("--pipeline", run_pipeline, "default or pipeline json file");
  run_cmd->add_option("--run-seed", run_run_seed, "scheduling seed");
  run_cmd->add_option("--out", run_out, "trace output file (stdout otherwise)");
  run_cmd->add_option("--save-inputs", run_save_inputs, "write generated inputs as a bundle");

  // diff
  auto* diff_cmd = app.add_subcommand("diff", "compare two trace files");
  std::vector<std::string> diff_traces_files;
  std::string diff_tol = "atol=5e-4,rtol=1e-4", diff_out;
  diff_cmd->add_option("--traces", diff_traces_files, "trace A (subject) and trace B (reference)")
      ->expected(2)
      ->required();
  diff_cmd->add_option("--tol", diff_tol, "tolerances, atol=X,rtol=Y");
  diff_cmd->add_option("--out", diff_out, "report output file");

  // campaign
  auto* campaign_cmd = app.add_subcommand("campaign", "run a full fuzzing campaign");
  std::string campaign_config;
  campaign_cmd->add_option("--config", campaign_config, "campaign config file")->required();

  // report
  auto* report_cmd = app.add_subcommand("report", "summarize a campaign ledger");
  std::string report_ledger;
  bool report_as_json = false;
  report_cmd->add_option("--ledger", report_ledger, "ledger directory")->required();
  report_cmd->add_flag("--json", report_as_json, "emit json instead of text");

  // replay
  auto* replay_cmd = app.add_subcommand("replay", "re-execute one ledgered run");
  std::string replay_ledger, replay_backend, replay_mode = "eager", replay_out;
  int replay_variant = 0;
  replay_cmd->add_option("--ledger", replay_ledger, "ledger directory")->required();
  replay_cmd->add_option("--variant", replay_variant, "variant index")->required();
  replay_cmd->add_option("--backend", replay_backend, "backend name")->required();
  replay_cmd->add_option("--mode", replay_mode, "mode");
  replay_cmd->add_option("--out", replay_out, "trace output file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (seed_cmd->parsed()) return cmd_seed(seed_out, seed_count, seed_seed);
    if (synth_cmd->parsed())
      return cmd_synth(synth_corpus, synth_out, synth_count, synth_threshold, synth_prob,
                       synth_seed, synth_cap, synth_max_subgraph);
    if (run_cmd->parsed())
      return cmd_run(run_graph, run_inputs, run_input_seed, run_backend, run_mode, run_pipeline,
                     run_run_seed, run_out, run_save_inputs);
    if (diff_cmd->parsed())
      return cmd_diff(diff_traces_files[0], diff_traces_files[1], diff_tol, diff_out);
    if (campaign_cmd->parsed()) return cmd_campaign(campaign_config);
    if (report_cmd->parsed()) return cmd_report(report_ledger, report_as_json);
    if (replay_cmd->parsed())
      return cmd_replay(replay_ledger, replay_variant, replay_backend, replay_mode, replay_out);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == Errc::DigestMismatch ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
