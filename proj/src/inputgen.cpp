#include "graphdiff/inputgen.hpp"

#include <algorithm>

#include "graphdiff/errors.hpp"
#include "graphdiff/hash.hpp"
#include "graphdiff/serialize.hpp"

namespace graphdiff {

namespace {

bool cast_to_int(const Node& n) {
  if (n.kind != OpKind::Cast) return false;
  auto to = dtype_from_string(attr_s(n.attrs, "to"));
  return to && is_int_dtype(*to);
}

// Walks forward from each graph input across the allowed kinds; returns the
// inputs from which some (consumer, slot) with slot in the consumer's index
// slots is reachable.
std::set<int64_t> classify(const Graph& g, bool order_preserving_only,
                           const std::set<int>* offsets_only) {
  auto consumers = g.consumer_map();
  std::set<int64_t> result;
  for (int64_t input_id : g.inputs()) {
    std::vector<int64_t> stack = {input_id};
    std::set<int64_t> seen = {input_id};
    bool hit = false;
    while (!stack.empty() && !hit) {
      const int64_t id = stack.back();
      stack.pop_back();
      auto it = consumers.find(id);
      if (it == consumers.end()) continue;
      for (const auto& [consumer, slot] : it->second) {
        const Node& cnode = g.node(consumer);
        const auto& sig = signature(cnode.kind);
        const bool is_index_slot =
            std::find(sig.index_slots.begin(), sig.index_slots.end(), slot) !=
            sig.index_slots.end();
        if (is_index_slot &&
            (!offsets_only ||
             (cnode.kind == OpKind::EmbeddingBag && offsets_only->count(slot)))) {
          hit = true;
          break;
        }
        const bool traversable =
            order_preserving_only
                ? (cnode.kind == OpKind::Reshape || cnode.kind == OpKind::Flatten ||
                   cast_to_int(cnode))
                : (is_shape_only(cnode.kind) &&
                   (cnode.kind != OpKind::Cast || cast_to_int(cnode)));
        if (traversable && !seen.count(consumer)) {
          seen.insert(consumer);
          stack.push_back(consumer);
        }
      }
    }
    if (hit) result.insert(input_id);
  }
  return result;
}

const std::set<int> kOffsetsSlot = {2};

}  // namespace

std::set<int64_t> classify_index_inputs(const Graph& g) {
  return classify(g, /*order_preserving_only=*/false, nullptr);
}

std::set<int64_t> classify_offsets_inputs(const Graph& g) {
  return classify(g, /*order_preserving_only=*/true, &kOffsetsSlot);
}

std::vector<Tensor> generate_inputs(const Graph& g, const InputPolicy& policy) {
  const auto index_inputs = classify_index_inputs(g);
  const auto offsets_inputs = classify_offsets_inputs(g);

  // an offsets feed through element-reordering ops cannot be constrained at
  // the input tensor; surface it instead of generating garbage
  const auto offsets_any = classify(g, /*order_preserving_only=*/false, &kOffsetsSlot);
  for (int64_t id : offsets_any)
    if (!offsets_inputs.count(id))
      throw Error(Errc::UnsatisfiableConstraint,
                  "input " + std::to_string(id) +
                      " reaches an offsets operand through element-reordering ops");

  Rng rng(policy.seed);
  std::vector<Tensor> tensors;
  tensors.reserve(g.inputs().size());
  for (int64_t id : g.inputs()) {
    const TensorSpec& spec = g.node(id).output_specs[0];
    Tensor t{TensorSpec{spec.shape, spec.dtype, true}};
    switch (spec.dtype) {
      case DType::F64:
      case DType::F32:
        for (int64_t i = 0; i < t.count(); ++i)
          t.set_f(i, rng.uniform(policy.float_min, policy.float_max));
        break;
      case DType::I64:
      case DType::I32: {
        const bool is_index = index_inputs.count(id) != 0;
        const int64_t lo = is_index ? policy.index_min : policy.int_min;
        const int64_t hi = is_index ? policy.index_max : policy.int_max;
        for (int64_t i = 0; i < t.count(); ++i) t.set_i(i, rng.range_i64(lo, hi));
        break;
      }
      case DType::Bool:
        for (int64_t i = 0; i < t.count(); ++i) t.set_i(i, static_cast<int64_t>(rng.bounded(2)));
        break;
    }
    if (offsets_inputs.count(id) && t.count() > 0) {
      std::vector<int64_t> v(static_cast<size_t>(t.count()));
      for (int64_t i = 0; i < t.count(); ++i) v[static_cast<size_t>(i)] = t.get_i(i);
      std::sort(v.begin(), v.end());
      v[0] = 0;
      for (int64_t i = 0; i < t.count(); ++i) t.set_i(i, v[static_cast<size_t>(i)]);
    }
    tensors.push_back(std::move(t));
  }
  return tensors;
}

uint64_t input_digest(const std::vector<Tensor>& tensors) {
  Fnv1a h;
  h.update_u64(tensors.size());
  for (const auto& t : tensors) t.hash_into(h);
  return h.digest();
}

namespace {
constexpr char kBundleMagic[] = "GDIB1\n";
}

void save_input_bundle(const std::filesystem::path& path, const Graph& g,
                       const InputPolicy& policy, const std::vector<Tensor>& tensors) {
  Json header;
  header["schema"] = 1;
  header["graph_hash"] = hex64(content_hash(g));
  Json pol;
  pol["float_min"] = policy.float_min;
  pol["float_max"] = policy.float_max;
  pol["index_min"] = policy.index_min;
  pol["index_max"] = policy.index_max;
  pol["int_min"] = policy.int_min;
  pol["int_max"] = policy.int_max;
  pol["seed"] = policy.seed;
  header["policy"] = pol;
  Json specs = Json::array();
  for (const auto& t : tensors) specs.push_back(spec_to_json(t.spec()));
  header["specs"] = specs;

  std::string out = kBundleMagic;
  const std::string h = header.dump();
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((h.size() >> (8 * i)) & 0xff));
  out += h;
  for (const auto& t : tensors) t.append_wire_bytes(out);
  write_file(path, out);
}

InputBundle load_input_bundle(const std::filesystem::path& path) {
  const std::string raw = read_file(path);
  const size_t magic_len = sizeof(kBundleMagic) - 1;
  if (raw.size() < magic_len + 4 || raw.compare(0, magic_len, kBundleMagic) != 0)
    throw Error(Errc::ParseError, path.string() + ": not an input bundle");
  size_t pos = magic_len;
  uint32_t hlen = 0;
  for (int i = 0; i < 4; ++i)
    hlen |= static_cast<uint32_t>(static_cast<unsigned char>(raw[pos + i])) << (8 * i);
  pos += 4;
  if (raw.size() < pos + hlen) throw Error(Errc::ParseError, "truncated bundle header");
  Json header;
  try {
    header = Json::parse(raw.substr(pos, hlen));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, std::string("bundle header: ") + e.what());
  }
  pos += hlen;

  InputBundle bundle;
  const auto& pol = header.at("policy");
  bundle.policy.float_min = pol.at("float_min").get<double>();
  bundle.policy.float_max = pol.at("float_max").get<double>();
  bundle.policy.index_min = pol.at("index_min").get<int64_t>();
  bundle.policy.index_max = pol.at("index_max").get<int64_t>();
  bundle.policy.int_min = pol.at("int_min").get<int64_t>();
  bundle.policy.int_max = pol.at("int_max").get<int64_t>();
  bundle.policy.seed = pol.at("seed").get<uint64_t>();
  bundle.graph_hash = std::stoull(header.at("graph_hash").get<std::string>(), nullptr, 16);

  for (const auto& sj : header.at("specs")) {
    TensorSpec spec = spec_from_json(sj);
    Tensor t{TensorSpec{spec.shape, spec.dtype, true}};
    const size_t bytes = dtype_wire_size(spec.dtype) * static_cast<size_t>(t.count());
    if (raw.size() < pos + bytes) throw Error(Errc::ParseError, "truncated bundle payload");
    t.read_wire_bytes(raw.data() + pos, bytes);
    pos += bytes;
    bundle.tensors.push_back(std::move(t));
  }
  return bundle;
}

}  // namespace graphdiff
