#include "graphdiff/corpus.hpp"

#include <algorithm>
#include <set>

#include "graphdiff/errors.hpp"
#include "graphdiff/serialize.hpp"

namespace graphdiff {

bool Corpus::insert(Graph graph, std::string origin) {
  std::string key = arch_hash(graph);
  if (entries_.count(key)) return false;
  entries_.emplace(key, CorpusEntry{std::move(graph), std::move(origin), key});
  return true;
}

ImportStats import_graphs(Corpus& corpus, const std::vector<std::filesystem::path>& paths) {
  ImportStats stats;
  for (const auto& p : paths) {
    Graph g = load_graph_file(p);
    ++stats.read;
    if (corpus.insert(std::move(g), p.string()))
      ++stats.kept;
    else
      ++stats.dropped;
  }
  return stats;
}

size_t Subgraph::operator_count() const {
  size_t n = 0;
  for (const auto& node : nodes)
    if (is_operator(node.kind)) ++n;
  return n;
}

Subgraph sample_subgraph(const Corpus& corpus, Rng& rng, int max_nodes) {
  if (corpus.empty()) throw Error(Errc::EmptyCorpus, "cannot sample from an empty corpus");
  if (max_nodes < 1) throw Error(Errc::InvalidArgument, "max_nodes must be >= 1");

  // pick an entry uniformly
  const size_t pick = static_cast<size_t>(rng.bounded(corpus.size()));
  auto it = corpus.entries().begin();
  std::advance(it, static_cast<long>(pick));
  const Graph& src = it->second.graph;

  std::vector<int64_t> op_nodes;
  for (const auto& [id, node] : src.nodes())
    if (is_operator(node.kind)) op_nodes.push_back(id);
  if (op_nodes.empty()) throw Error(Errc::EmptyCorpus, "corpus entry has no operator nodes");

  auto consumers = src.consumer_map();

  // random walk over operator nodes, either edge direction
  std::set<int64_t> chosen;
  std::vector<int64_t> frontier;
  auto add = [&](int64_t id) {
    chosen.insert(id);
    frontier.push_back(id);
  };
  add(op_nodes[static_cast<size_t>(rng.bounded(op_nodes.size()))]);

  while (static_cast<int>(chosen.size()) < max_nodes && !frontier.empty()) {
    // gather unvisited operator neighbors of the current set
    std::vector<int64_t> candidates;
    for (int64_t id : chosen) {
      const Node& node = src.node(id);
      for (const auto& in : node.inputs) {
        if (is_operator(src.node(in.node).kind) && !chosen.count(in.node))
          candidates.push_back(in.node);
      }
      auto c = consumers.find(id);
      if (c != consumers.end())
        for (const auto& [consumer, slot] : c->second) {
          (void)slot;
          if (is_operator(src.node(consumer).kind) && !chosen.count(consumer))
            candidates.push_back(consumer);
        }
    }
    if (candidates.empty()) break;
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
    add(candidates[static_cast<size_t>(rng.bounded(candidates.size()))]);
  }

  // constants feeding chosen nodes ride along
  std::set<int64_t> included = chosen;
  for (int64_t id : chosen)
    for (const auto& in : src.node(id).inputs)
      if (src.node(in.node).kind == OpKind::Constant) included.insert(in.node);

  Subgraph result;
  result.source_arch = it->first;
  for (int64_t id : topo_order(src))
    if (included.count(id)) result.nodes.push_back(src.node(id));

  for (int64_t id : included) {
    const Node& node = src.node(id);
    for (size_t slot = 0; slot < node.inputs.size(); ++slot) {
      const auto& in = node.inputs[slot];
      if (included.count(in.node)) continue;
      const auto& spec = src.node(in.node).output_specs[static_cast<size_t>(in.slot)];
      result.dangling_inputs.push_back(DanglingInput{id, static_cast<int>(slot), spec});
    }
    // output slots with no internal consumer dangle outward
    for (size_t slot = 0; slot < node.output_specs.size(); ++slot) {
      bool consumed_inside = false;
      auto c = consumers.find(id);
      if (c != consumers.end())
        for (const auto& [consumer, cslot] : c->second) {
          (void)cslot;
          if (included.count(consumer) &&
              std::any_of(src.node(consumer).inputs.begin(), src.node(consumer).inputs.end(),
                          [&](const NodeInput& ni) {
                            return ni.node == id && ni.slot == static_cast<int>(slot);
                          }))
            consumed_inside = true;
        }
      if (!consumed_inside)
        result.dangling_outputs.push_back(
            DanglingOutput{id, static_cast<int>(slot), node.output_specs[slot]});
    }
  }

  // deterministic order for downstream seeded choices
  auto by_node_slot = [](const auto& a, const auto& b) {
    return a.node != b.node ? a.node < b.node : a.slot < b.slot;
  };
  std::sort(result.dangling_inputs.begin(), result.dangling_inputs.end(), by_node_slot);
  std::sort(result.dangling_outputs.begin(), result.dangling_outputs.end(), by_node_slot);
  return result;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  Json manifest;
  manifest["schema"] = 1;
  Json entries = Json::array();
  for (const auto& [key, entry] : corpus.entries()) {
    const std::string filename = key + ".json";
    save_graph_file(entry.graph, dir / filename);
    Json e;
    e["arch_hash"] = key;
    e["file"] = filename;
    e["origin"] = entry.origin;
    e["operators"] = entry.graph.operator_count();
    entries.push_back(std::move(e));
  }
  manifest["entries"] = std::move(entries);
  manifest["count"] = corpus.size();
  write_file(dir / "corpus.manifest.json", manifest.dump(2) + "\n");
}

Corpus load_corpus(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "corpus.manifest.json";
  std::vector<std::filesystem::path> files;
  if (std::filesystem::exists(manifest_path)) {
    Json manifest;
    try {
      manifest = Json::parse(read_file(manifest_path));
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::ParseError, manifest_path.string() + ": " + e.what());
    }
    for (const auto& e : manifest.at("entries"))
      files.push_back(dir / e.at("file").get<std::string>());
  } else {
    for (const auto& de : std::filesystem::directory_iterator(dir))
      if (de.path().extension() == ".json") files.push_back(de.path());
    std::sort(files.begin(), files.end());
  }
  Corpus corpus;
  import_graphs(corpus, files);
  return corpus;
}

}  // namespace graphdiff
