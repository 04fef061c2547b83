// pybind11 surface for the harness: the main operations of the pipeline
// (seed corpus, synthesis, input generation, execution, diffing, campaigns)
// exchanged as JSON strings so the python wrapper can hand back plain dicts.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "graphdiff/campaign.hpp"
#include "graphdiff/engine.hpp"
#include "graphdiff/errors.hpp"
#include "graphdiff/hash.hpp"
#include "graphdiff/passes.hpp"
#include "graphdiff/serialize.hpp"

namespace py = pybind11;
using namespace graphdiff;

namespace {

std::shared_ptr<const Graph> parse_graph(const std::string& graph_json) {
  return std::make_shared<const Graph>(graph_from_json(Json::parse(graph_json)));
}

InputPolicy policy_from_kwargs(uint64_t seed, double float_min, double float_max,
                               int64_t index_min, int64_t index_max, int64_t int_min,
                               int64_t int_max) {
  InputPolicy p;
  p.seed = seed;
  p.float_min = float_min;
  p.float_max = float_max;
  p.index_min = index_min;
  p.index_max = index_max;
  p.int_min = int_min;
  p.int_max = int_max;
  return p;
}

std::string run_impl(const std::string& graph_json, const std::string& backend,
                     const std::string& mode, uint64_t input_seed, uint64_t run_seed,
                     const std::string& pipeline_spec) {
  auto graph = parse_graph(graph_json);
  if (auto issue = validate(*graph))
    throw Error(Errc::InvalidArgument,
                "graph invalid: " + std::string(to_string(issue->kind)) + ": " + issue->detail);
  BackendProfile profile = load_profile(backend);
  InputPolicy policy;
  policy.seed = input_seed;
  auto inputs = generate_inputs(*graph, policy);

  ExecutionTrace trace;
  if (mode == "eager") {
    trace = execute(profile, graph, inputs, ExecOptions{run_seed});
  } else if (mode == "compiled") {
    PassPipeline pipeline =
        pipeline_spec == "default" ? PassPipeline::full() : PassPipeline::from_file(pipeline_spec);
    trace = execute_compiled(pipeline, profile, graph, inputs, ExecOptions{run_seed});
  } else {
    throw Error(Errc::InvalidArgument, "mode must be eager or compiled");
  }
  return trace_to_json(trace).dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "differential testing harness for tensor computation graphs";
  m.attr("__version__") = "0.1.0";

  py::register_exception<Error>(m, "GraphdiffError");

  m.def("builtin_profiles", [] { return builtin_profile_names(); });

  m.def("profile_json",
        [](const std::string& name) { return profile_to_json(load_profile(name)).dump(); },
        py::arg("name"));

  m.def(
      "generate_seed_corpus",
      [](const std::string& out_dir, int count, uint64_t seed) {
        Rng rng(seed);
        Corpus corpus = generate_seed_corpus(rng, count);
        save_corpus(corpus, out_dir);
        return static_cast<int>(corpus.size());
      },
      py::arg("out_dir"), py::arg("count") = 16, py::arg("seed") = 0);

  m.def(
      "synthesize",
      [](const std::string& corpus_dir, int threshold, double mutation_prob, uint64_t seed,
         int max_subgraph_nodes) {
        Corpus corpus = load_corpus(corpus_dir);
        SynthesisConfig cfg;
        cfg.node_threshold = threshold;
        cfg.mutation_probability = mutation_prob;
        cfg.seed = seed;
        cfg.max_subgraph_nodes = max_subgraph_nodes;
        SynthesisResult result = synthesize(corpus, cfg);
        return canonical_bytes(result.graph);
      },
      py::arg("corpus_dir"), py::arg("threshold") = 100, py::arg("mutation_prob") = 0.25,
      py::arg("seed") = 0, py::arg("max_subgraph_nodes") = 12);

  m.def(
      "validate_graph",
      [](const std::string& graph_json) -> py::dict {
        auto graph = parse_graph(graph_json);
        py::dict out;
        auto issue = validate(*graph);
        out["ok"] = !issue.has_value();
        if (issue) {
          out["kind"] = to_string(issue->kind);
          out["node"] = issue->node_id;
          out["detail"] = issue->detail;
        }
        return out;
      },
      py::arg("graph_json"));

  m.def(
      "graph_stats",
      [](const std::string& graph_json) -> py::dict {
        auto graph = parse_graph(graph_json);
        py::dict out;
        out["nodes"] = graph->nodes().size();
        out["operators"] = graph->operator_count();
        out["inputs"] = graph->inputs().size();
        out["outputs"] = graph->outputs().size();
        out["content_hash"] = hex64(content_hash(*graph));
        out["arch_hash"] = arch_hash(*graph);
        return out;
      },
      py::arg("graph_json"));

  m.def("run", &run_impl, py::arg("graph_json"), py::arg("backend") = "reference",
        py::arg("mode") = "eager", py::arg("input_seed") = 0, py::arg("run_seed") = 0,
        py::arg("pipeline") = "default");

  m.def(
      "save_input_bundle",
      [](const std::string& graph_json, const std::string& path, uint64_t seed, double float_min,
         double float_max, int64_t index_min, int64_t index_max, int64_t int_min,
         int64_t int_max) {
        auto graph = parse_graph(graph_json);
        InputPolicy policy = policy_from_kwargs(seed, float_min, float_max, index_min, index_max,
                                                int_min, int_max);
        auto tensors = generate_inputs(*graph, policy);
        save_input_bundle(path, *graph, policy, tensors);
        return hex64(input_digest(tensors));
      },
      py::arg("graph_json"), py::arg("path"), py::arg("seed") = 0, py::arg("float_min") = 0.0,
      py::arg("float_max") = 1.0, py::arg("index_min") = 0, py::arg("index_max") = 4,
      py::arg("int_min") = 0, py::arg("int_max") = 16);

  m.def(
      "diff",
      [](const std::string& trace_a, const std::string& trace_b, double atol, double rtol) {
        ExecutionTrace a = trace_from_json(Json::parse(trace_a));
        ExecutionTrace b = trace_from_json(Json::parse(trace_b));
        return report_to_json(diff_traces(a, b, ToleranceConfig{atol, rtol})).dump();
      },
      py::arg("trace_a"), py::arg("trace_b"), py::arg("atol") = 5e-4, py::arg("rtol") = 1e-4);

  m.def(
      "run_campaign",
      [](const std::string& corpus_dir, const std::string& out_dir,
         const std::vector<std::string>& backends, const std::vector<std::string>& modes,
         int variants, int threshold, double mutation_prob, uint64_t master_seed, int workers) {
        CampaignConfig cfg;
        cfg.corpus_dir = corpus_dir;
        cfg.out_dir = out_dir;
        cfg.backends = backends;
        cfg.modes = modes;
        cfg.variants = variants;
        cfg.synth.node_threshold = threshold;
        cfg.synth.mutation_probability = mutation_prob;
        cfg.master_seed = master_seed;
        cfg.workers = workers;
        CampaignResult result = run_campaign(cfg);
        Json j = result.summary.to_json();
        j["ledger_digest"] = hex64(result.ledger_digest);
        j["completed"] = result.completed;
        return j.dump();
      },
      py::arg("corpus_dir"), py::arg("out_dir"),
      py::arg("backends") = std::vector<std::string>{"reference", "relaxed-a"},
      py::arg("modes") = std::vector<std::string>{"eager"}, py::arg("variants") = 10,
      py::arg("threshold") = 30, py::arg("mutation_prob") = 0.25, py::arg("master_seed") = 0,
      py::arg("workers") = 0);

  m.def(
      "replay",
      [](const std::string& ledger_dir, int variant, const std::string& backend,
         const std::string& mode) {
        return trace_to_json(replay(ledger_dir, variant, backend, mode)).dump();
      },
      py::arg("ledger_dir"), py::arg("variant"), py::arg("backend"), py::arg("mode") = "eager");

  m.def("campaign_report",
        [](const std::string& ledger_dir) { return report_json(ledger_dir).dump(); },
        py::arg("ledger_dir"));
}
