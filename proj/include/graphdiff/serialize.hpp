#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"

#include "graphdiff/graph.hpp"

namespace graphdiff {

using Json = nlohmann::ordered_json;

inline constexpr int kGraphSchemaVersion = 1;

Json spec_to_json(const TensorSpec& spec);
TensorSpec spec_from_json(const Json& j);

// Element payload as a JSON array; non-finite floats encoded as the strings
// "nan", "inf", "-inf" since JSON has no literals for them.
Json tensor_data_to_json(const Tensor& t);
Tensor tensor_from_json(const TensorSpec& spec, const Json& data);

Json attrs_to_json(const Attrs& attrs);
Attrs attrs_from_json(const Json& j);

Json graph_to_json(const Graph& g);
Graph graph_from_json(const Json& j);  // throws Error(ParseError / SchemaVersionUnsupported)

// Canonical bytes: nodes ascending by id, attr keys sorted, compact dump.
// Byte-stable; the corpus dedup hash and all content digests build on it.
std::string canonical_bytes(const Graph& g);
uint64_t content_hash(const Graph& g);

// Architecture digest: canonical bytes of the graph with constant payloads
// dropped, tensor shapes reduced to their rank and extent-vector attrs
// reduced to their length. Equal digests mean same node kinds, same edges,
// same attr structure.
std::string arch_hash(const Graph& g);

// file helpers
std::string read_file(const std::filesystem::path& p);
void write_file(const std::filesystem::path& p, const std::string& contents);
Graph load_graph_file(const std::filesystem::path& p);
void save_graph_file(const Graph& g, const std::filesystem::path& p);

}  // namespace graphdiff
