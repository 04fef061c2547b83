#include "graphdiff/synth.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "graphdiff/builder.hpp"
#include "graphdiff/errors.hpp"

namespace graphdiff {

std::vector<GlueStep> plan_glue(const TensorSpec& producer, const TensorSpec& consumer,
                                int64_t element_cap) {
  std::vector<GlueStep> plan;
  const int64_t count_p = producer.element_count();
  const int64_t count_c = consumer.element_count();
  if (std::max(count_p, count_c) > element_cap)
    throw Error(Errc::ElementCapExceeded,
                "glue tensor of " + std::to_string(std::max(count_p, count_c)) +
                    " elements exceeds cap " + std::to_string(element_cap));

  TensorSpec cur = producer;
  if (!cur.contiguous) {
    // materialize layout before reshaping; the chain must not depend on the
    // producer's storage order
    plan.push_back(GlueStep{OpKind::Reshape, Attrs{{"shape", cur.shape}}});
    cur.contiguous = true;
  }
  if (cur.dtype != consumer.dtype) {
    plan.push_back(GlueStep{OpKind::Cast, Attrs{{"to", std::string(to_string(consumer.dtype))}}});
    cur.dtype = consumer.dtype;
  }

  if (cur.shape == consumer.shape) return plan;

  if (count_p == count_c) {
    plan.push_back(GlueStep{OpKind::Reshape, Attrs{{"shape", consumer.shape}}});
    return plan;
  }

  plan.push_back(GlueStep{OpKind::Flatten, {}});
  if (count_p > count_c) {
    plan.push_back(GlueStep{
        OpKind::Slice,
        Attrs{{"dim", int64_t{0}}, {"start", int64_t{0}}, {"end", count_c}}});
  } else {
    plan.push_back(GlueStep{OpKind::Pad,
                            Attrs{{"before", std::vector<int64_t>{0}},
                                  {"after", std::vector<int64_t>{count_c - count_p}},
                                  {"value", 0.0}}});
  }
  plan.push_back(GlueStep{OpKind::Reshape, Attrs{{"shape", consumer.shape}}});
  return plan;
}

NodeInput apply_glue(Graph& g, NodeInput from, const std::vector<GlueStep>& plan) {
  NodeInput cur = from;
  for (const auto& step : plan) cur = {add_inferred_op(g, step.kind, {cur}, step.attrs), 0};
  return cur;
}

namespace {

struct GraphOutputRef {
  int64_t output_node;  // the Output marker node
  NodeInput producer;
  TensorSpec spec;
};

std::vector<GraphOutputRef> graph_output_refs(const Graph& g) {
  std::vector<GraphOutputRef> refs;
  for (int64_t id : g.outputs()) {
    const Node& out = g.node(id);
    const NodeInput producer = out.inputs[0];
    refs.push_back(GraphOutputRef{
        id, producer,
        g.node(producer.node).output_specs[static_cast<size_t>(producer.slot)]});
  }
  return refs;
}

void add_output_node(Graph& g, NodeInput from) {
  Node out;
  out.kind = OpKind::Output;
  out.inputs = {from};
  out.output_specs = {g.node(from.node).output_specs[static_cast<size_t>(from.slot)]};
  const int64_t id = g.add_node(std::move(out));
  g.outputs().push_back(id);
}

void add_input_node(Graph& g, int64_t consumer, int slot, TensorSpec spec) {
  spec.contiguous = true;  // fresh inputs are always packed
  Node in;
  in.kind = OpKind::Input;
  in.output_specs = {std::move(spec)};
  const int64_t id = g.add_node(std::move(in));
  g.inputs().push_back(id);
  g.node_mut(consumer).inputs[static_cast<size_t>(slot)] = NodeInput{id, 0};
}

// Remaps fragment nodes to fresh ids and splices them into g. Returns the
// remap table.
std::map<int64_t, int64_t> splice_fragment(Graph& g, const Subgraph& fragment) {
  std::map<int64_t, int64_t> remap;
  int64_t next = g.next_id();
  for (const auto& node : fragment.nodes) remap[node.id] = next++;
  for (const auto& node : fragment.nodes) {
    Node copy = node;
    copy.id = remap.at(node.id);
    for (auto& in : copy.inputs) {
      auto it = remap.find(in.node);
      if (it != remap.end()) in.node = it->second;
      // dangling edges stay pointed at the source id for now; the caller
      // rewires every one of them before the merge completes
    }
    g.add_node(std::move(copy));
  }
  return remap;
}

// One merge iteration. Throws Error(ElementCapExceeded) when glue would
// exceed the cap; the caller retries on a fresh sample.
MergeRecord merge_fragment(Graph& g, const Subgraph& fragment, Rng& rng,
                           const SynthesisConfig& cfg, int iteration) {
  MergeRecord record;
  record.iteration = iteration;
  record.source_arch = fragment.source_arch;
  record.fragment_operators = static_cast<int>(fragment.operator_count());

  const bool first = g.nodes().empty();
  auto available = first ? std::vector<GraphOutputRef>{} : graph_output_refs(g);

  // plan connections before touching g so the cap check cannot leave a
  // half-merged graph behind
  struct PlannedConnection {
    size_t output_index;
    size_t dangling_index;
    std::vector<GlueStep> glue;
  };
  std::vector<PlannedConnection> planned;
  if (!first) {
    const size_t k = std::min({available.size(), fragment.dangling_inputs.size(),
                               static_cast<size_t>(1 + rng.bounded(3))});
    std::vector<size_t> out_idx(available.size());
    std::vector<size_t> in_idx(fragment.dangling_inputs.size());
    for (size_t i = 0; i < out_idx.size(); ++i) out_idx[i] = i;
    for (size_t i = 0; i < in_idx.size(); ++i) in_idx[i] = i;
    rng.shuffle(out_idx);
    rng.shuffle(in_idx);
    for (size_t i = 0; i < k; ++i) {
      const auto& from = available[out_idx[i]];
      const auto& to = fragment.dangling_inputs[in_idx[i]];
      planned.push_back(
          PlannedConnection{out_idx[i], in_idx[i], plan_glue(from.spec, to.required,
                                                             cfg.element_cap)});
    }
  }

  auto remap = splice_fragment(g, fragment);

  std::set<size_t> wired_dangling;
  for (const auto& pc : planned) {
    const auto& from = available[pc.output_index];
    const auto& to = fragment.dangling_inputs[pc.dangling_index];
    const int64_t consumer = remap.at(to.node);

    // consume the graph output: drop the marker node, keep the producer
    auto& outs = g.outputs();
    outs.erase(std::remove(outs.begin(), outs.end(), from.output_node), outs.end());
    if (g.has_node(from.output_node)) g.remove_node(from.output_node);

    NodeInput wired = apply_glue(g, from.producer, pc.glue);
    g.node_mut(consumer).inputs[static_cast<size_t>(to.slot)] = wired;
    wired_dangling.insert(pc.dangling_index);

    MergeConnection conn;
    conn.from_node = from.producer.node;
    conn.to_node = consumer;
    conn.to_slot = to.slot;
    conn.glue_nodes = static_cast<int>(pc.glue.size());
    record.connections.push_back(conn);
  }

  // unwired dangling inputs become fresh graph inputs
  for (size_t i = 0; i < fragment.dangling_inputs.size(); ++i) {
    if (wired_dangling.count(i)) continue;
    const auto& d = fragment.dangling_inputs[i];
    add_input_node(g, remap.at(d.node), d.slot, d.required);
  }
  // every dangling fragment output becomes a graph output
  for (const auto& d : fragment.dangling_outputs)
    add_output_node(g, NodeInput{remap.at(d.node), d.slot});

  return record;
}

}  // namespace

SynthesisResult synthesize(const Corpus& corpus, const SynthesisConfig& cfg) {
  if (cfg.node_threshold < 1) throw Error(Errc::InvalidArgument, "node_threshold must be >= 1");
  if (cfg.mutation_probability < 0.0 || cfg.mutation_probability > 1.0)
    throw Error(Errc::InvalidArgument, "mutation probability must be in [0, 1]");
  if (corpus.empty()) throw Error(Errc::EmptyCorpus, "synthesis needs a non-empty corpus");

  Rng rng(cfg.seed);
  Graph g;
  SynthesisLog log;
  int iteration = 0;
  int retries = 0;

  while (g.operator_count() < static_cast<size_t>(cfg.node_threshold)) {
    Subgraph fragment = sample_subgraph(corpus, rng, cfg.max_subgraph_nodes);
    if (fragment.dangling_inputs.empty()) {
      // a closed fragment cannot be merged into G, and adopting one first
      // would leave the graph without inputs
      ++log.cap_retries;
      if (++retries > 16) {
        log.finalized_early = true;
        break;
      }
      continue;
    }
    Graph staged = g;
    try {
      MergeRecord record = merge_fragment(staged, fragment, rng, cfg, iteration);
      log.merges.push_back(std::move(record));
    } catch (const Error& e) {
      if (e.code() == Errc::ElementCapExceeded) {
        ++log.cap_retries;
        if (++retries > 16) {
          log.finalized_early = true;
          break;
        }
        continue;
      }
      throw;
    }
    g = std::move(staged);
    retries = 0;
    ++iteration;
  }

  g = mutate(g, MutationTable::standard(), cfg.mutation_probability, rng, &log.mutated_nodes);
  return SynthesisResult{std::move(g), std::move(log)};
}

// ---- mutation ---------------------------------------------------------------

namespace {

bool is_single_consumer(const Graph& g, NodeInput input) {
  int count = 0;
  for (const auto& [id, node] : g.nodes())
    for (const auto& in : node.inputs)
      if (in == input) ++count;
  return count == 1;
}

bool can_add_inplace(const Graph& g, int64_t id) {
  const Node& n = g.node(id);
  if (n.kind != OpKind::Add) return false;
  return is_single_consumer(g, n.inputs[0]);
}

bool apply_add_inplace(Graph& g, int64_t id) {
  if (!can_add_inplace(g, id)) return false;
  g.node_mut(id).kind = OpKind::AddInPlace;
  return true;
}

bool can_relu_swap(const Graph& g, int64_t id) { return g.node(id).kind == OpKind::Relu; }

bool apply_relu_swap(Graph& g, int64_t id) {
  if (!can_relu_swap(g, id)) return false;
  Node& n = g.node_mut(id);
  n.kind = OpKind::HardTanh;
  n.attrs["min_val"] = 0.0;
  n.attrs["max_val"] = 1e30;  // effectively one-sided
  return true;
}

bool can_add_reformulate(const Graph& g, int64_t id) {
  const Node& n = g.node(id);
  return n.kind == OpKind::Add && is_float_dtype(n.output_specs[0].dtype);
}

bool apply_add_reformulate(Graph& g, int64_t id) {
  if (!can_add_reformulate(g, id)) return false;
  const NodeInput b_in = g.node(id).inputs[1];
  const TensorSpec divisor_spec =
      g.node(b_in.node).output_specs[static_cast<size_t>(b_in.slot)];
  Node ones;
  ones.kind = OpKind::Constant;
  TensorSpec spec = divisor_spec;
  spec.contiguous = true;
  ones.payload = Tensor::full(spec, 1.0);
  ones.output_specs = {spec};
  const int64_t ones_id = g.add_node(std::move(ones));

  Node& n = g.node_mut(id);
  n.kind = OpKind::AddCdiv;
  n.inputs.push_back(NodeInput{ones_id, 0});
  n.attrs["value"] = 1.0;
  return true;
}

}  // namespace

const MutationTable& MutationTable::standard() {
  static const MutationTable table = [] {
    MutationTable t;
    t.rules_.push_back(
        MutationRule{OpKind::Add, can_add_inplace, apply_add_inplace, "add->add_inplace"});
    t.rules_.push_back(
        MutationRule{OpKind::Relu, can_relu_swap, apply_relu_swap, "relu->hardtanh"});
    t.rules_.push_back(
        MutationRule{OpKind::Add, can_add_reformulate, apply_add_reformulate, "add->addcdiv"});
    return t;
  }();
  return table;
}

std::vector<const MutationRule*> MutationTable::applicable(const Graph& g, int64_t id) const {
  std::vector<const MutationRule*> out;
  const OpKind kind = g.node(id).kind;
  for (const auto& rule : rules_)
    if (rule.source == kind && rule.can_apply(g, id)) out.push_back(&rule);
  return out;
}

Graph mutate(const Graph& g, const MutationTable& table, double p, Rng& rng,
             int* mutated_count) {
  Graph out = g;
  int mutated = 0;
  std::vector<int64_t> op_ids;
  for (const auto& [id, node] : g.nodes())
    if (is_operator(node.kind)) op_ids.push_back(id);

  for (int64_t id : op_ids) {
    auto rules = table.applicable(out, id);
    if (rules.empty()) continue;
    if (!rng.chance(p)) continue;
    const auto* rule = rules[static_cast<size_t>(rng.bounded(rules.size()))];
    if (rule->apply(out, id)) ++mutated;
  }
  if (mutated_count) *mutated_count = mutated;
  return out;
}

}  // namespace graphdiff
