#include "graphdiff/serialize.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "graphdiff/errors.hpp"
#include "graphdiff/hash.hpp"

namespace graphdiff {

Json spec_to_json(const TensorSpec& spec) {
  Json j;
  j["shape"] = spec.shape;
  j["dtype"] = to_string(spec.dtype);
  j["contiguous"] = spec.contiguous;
  return j;
}

TensorSpec spec_from_json(const Json& j) {
  TensorSpec spec;
  if (!j.is_object() || !j.contains("shape") || !j.contains("dtype"))
    throw Error(Errc::ParseError, "tensor spec requires shape and dtype");
  spec.shape = j.at("shape").get<std::vector<int64_t>>();
  auto dt = dtype_from_string(j.at("dtype").get<std::string>());
  if (!dt) throw Error(Errc::ParseError, "unknown dtype " + j.at("dtype").get<std::string>());
  spec.dtype = *dt;
  spec.contiguous = j.value("contiguous", true);
  return spec;
}

Json tensor_data_to_json(const Tensor& t) {
  Json arr = Json::array();
  for (int64_t i = 0; i < t.count(); ++i) {
    if (is_float_dtype(t.dtype())) {
      const double v = t.get_f(i);
      if (std::isnan(v))
        arr.push_back("nan");
      else if (std::isinf(v))
        arr.push_back(v > 0 ? "inf" : "-inf");
      else
        arr.push_back(v);
    } else {
      arr.push_back(t.get_i(i));
    }
  }
  return arr;
}

Tensor tensor_from_json(const TensorSpec& spec, const Json& data) {
  Tensor t((TensorSpec(spec)));
  if (!data.is_array() || static_cast<int64_t>(data.size()) != t.count())
    throw Error(Errc::ParseError, "tensor payload length mismatch");
  int64_t i = 0;
  for (const auto& v : data) {
    if (v.is_string()) {
      const std::string s = v.get<std::string>();
      double f = 0;
      if (s == "nan")
        f = std::numeric_limits<double>::quiet_NaN();
      else if (s == "inf")
        f = std::numeric_limits<double>::infinity();
      else if (s == "-inf")
        f = -std::numeric_limits<double>::infinity();
      else
        throw Error(Errc::ParseError, "bad tensor element '" + s + "'");
      t.set_f(i, f);
    } else if (is_float_dtype(spec.dtype)) {
      t.set_f(i, v.get<double>());
    } else {
      t.set_i(i, v.get<int64_t>());
    }
    ++i;
  }
  return t;
}

Json attrs_to_json(const Attrs& attrs) {
  Json j = Json::object();
  for (const auto& [key, value] : attrs) {
    std::visit([&](const auto& v) { j[key] = v; }, value);
  }
  return j;
}

Attrs attrs_from_json(const Json& j) {
  Attrs attrs;
  if (j.is_null()) return attrs;
  for (const auto& [key, v] : j.items()) {
    if (v.is_boolean())
      attrs[key] = v.get<bool>();
    else if (v.is_number_integer())
      attrs[key] = v.get<int64_t>();
    else if (v.is_number_float())
      attrs[key] = v.get<double>();
    else if (v.is_array())
      attrs[key] = v.get<std::vector<int64_t>>();
    else if (v.is_string())
      attrs[key] = v.get<std::string>();
    else
      throw Error(Errc::ParseError, "unsupported attr type for '" + key + "'");
  }
  return attrs;
}

Json graph_to_json(const Graph& g) {
  Json j;
  j["schema"] = kGraphSchemaVersion;
  Json nodes = Json::array();
  for (const auto& [id, node] : g.nodes()) {
    Json n;
    n["id"] = id;
    n["kind"] = to_string(node.kind);
    n["attrs"] = attrs_to_json(node.attrs);
    Json ins = Json::array();
    for (const auto& in : node.inputs) ins.push_back(Json::array({in.node, in.slot}));
    n["inputs"] = ins;
    Json outs = Json::array();
    for (const auto& spec : node.output_specs) outs.push_back(spec_to_json(spec));
    n["outputs"] = outs;
    if (node.payload) n["data"] = tensor_data_to_json(*node.payload);
    nodes.push_back(std::move(n));
  }
  j["nodes"] = std::move(nodes);
  j["inputs"] = g.inputs();
  j["outputs"] = g.outputs();
  return j;
}

Graph graph_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("schema")) throw Error(Errc::ParseError, "not a graph document");
  if (j.at("schema").get<int>() != kGraphSchemaVersion)
    throw Error(Errc::SchemaVersionUnsupported,
                "schema " + j.at("schema").dump() + " (supported: 1)");
  Graph g;
  for (const auto& n : j.at("nodes")) {
    Node node;
    node.id = n.at("id").get<int64_t>();
    auto kind = op_kind_from_string(n.at("kind").get<std::string>());
    if (!kind) throw Error(Errc::ParseError, "unknown kind " + n.at("kind").dump());
    node.kind = *kind;
    node.attrs = attrs_from_json(n.value("attrs", Json::object()));
    for (const auto& in : n.value("inputs", Json::array()))
      node.inputs.push_back(NodeInput{in.at(0).get<int64_t>(), in.at(1).get<int>()});
    for (const auto& o : n.value("outputs", Json::array()))
      node.output_specs.push_back(spec_from_json(o));
    if (node.kind == OpKind::Constant) {
      if (!n.contains("data")) throw Error(Errc::ParseError, "constant node without data");
      if (node.output_specs.empty())
        throw Error(Errc::ParseError, "constant node without output spec");
      node.payload = tensor_from_json(node.output_specs[0], n.at("data"));
    }
    if (node.id < 0) throw Error(Errc::ParseError, "negative node id");
    if (g.has_node(node.id)) throw Error(Errc::ParseError, "duplicate node id");
    g.add_node(std::move(node));
  }
  g.inputs() = j.value("inputs", std::vector<int64_t>{});
  g.outputs() = j.value("outputs", std::vector<int64_t>{});
  return g;
}

std::string canonical_bytes(const Graph& g) { return graph_to_json(g).dump(); }

uint64_t content_hash(const Graph& g) { return fnv1a(canonical_bytes(g)); }

namespace {

// Structure-only view: payloads dropped, shapes reduced to rank, extent
// vectors reduced to their length. Scalar attrs are kept; they are part of
// the architecture.
Json normalize_for_arch(const Graph& g) {
  Json j = graph_to_json(g);
  for (auto& n : j.at("nodes")) {
    n.erase("data");
    for (auto& o : n.at("outputs")) {
      o["shape"] = o.at("shape").size();
      o.erase("contiguous");
    }
    for (auto& [key, value] : n.at("attrs").items()) {
      if (value.is_array()) value = value.size();
    }
  }
  return j;
}

}  // namespace

std::string arch_hash(const Graph& g) { return hex64(fnv1a(normalize_for_arch(g).dump())); }

std::string read_file(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw Error(Errc::IoError, "cannot open " + p.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& p, const std::string& contents) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(Errc::IoError, "cannot write " + p.string());
  f << contents;
}

Graph load_graph_file(const std::filesystem::path& p) {
  Json j;
  try {
    j = Json::parse(read_file(p));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, p.string() + ": " + e.what());
  }
  return graph_from_json(j);
}

void save_graph_file(const Graph& g, const std::filesystem::path& p) {
  write_file(p, canonical_bytes(g) + "\n");
}

}  // namespace graphdiff
