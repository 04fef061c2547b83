#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "graphdiff/graph.hpp"
#include "graphdiff/rng.hpp"

namespace graphdiff {

struct CorpusEntry {
  Graph graph;
  std::string origin;     // free-text provenance
  std::string arch_hash;  // architecture dedup key
};

class Corpus {
 public:
  // Returns true when inserted, false when an architecture-duplicate existed.
  bool insert(Graph graph, std::string origin);
  const std::map<std::string, CorpusEntry>& entries() const { return entries_; }
  size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

 private:
  std::map<std::string, CorpusEntry> entries_;
};

struct ImportStats {
  int read = 0;
  int kept = 0;
  int dropped = 0;
};

// Parses graph files and inserts them, dropping architecture duplicates.
// Throws Error(ParseError / SchemaVersionUnsupported) on malformed files.
ImportStats import_graphs(Corpus& corpus, const std::vector<std::filesystem::path>& paths);

// A connected fragment cut out of one corpus entry. Node ids are the source
// graph's ids. Dangling edges carry the tensor specs the synthesizer needs
// to attach fresh inputs/outputs or merge connections.
struct DanglingInput {
  int64_t node = -1;  // consumer inside the fragment
  int slot = 0;
  TensorSpec required;
};

struct DanglingOutput {
  int64_t node = -1;  // producer inside the fragment
  int slot = 0;
  TensorSpec spec;
};

struct Subgraph {
  std::vector<Node> nodes;  // source ids, in source topological order
  std::vector<DanglingInput> dangling_inputs;
  std::vector<DanglingOutput> dangling_outputs;
  std::string source_arch;
  size_t operator_count() const;
};

// Seeded random walk over operator nodes of one corpus entry: start uniform,
// grow by uniformly chosen unvisited neighbors in either edge direction until
// max_nodes operator nodes or an empty frontier. Constants feeding a chosen
// node ride along; source input/output nodes never do.
Subgraph sample_subgraph(const Corpus& corpus, Rng& rng, int max_nodes);

// Self-contained stand-in for a crawled model corpus: n architecture-distinct
// graphs built from curated templates, each passing validate.
Corpus generate_seed_corpus(Rng& rng, int count);

// Directory layout: one graph json per entry named <arch_hash>.json plus
// corpus.manifest.json with entry list and stats.
void save_corpus(const Corpus& corpus, const std::filesystem::path& dir);
Corpus load_corpus(const std::filesystem::path& dir);

}  // namespace graphdiff
