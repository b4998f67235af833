#include "astarkg/propagation.hpp"

#include <algorithm>

namespace astarkg {

SelectionStep select_frontier(const KnowledgeGraph& graph, const std::vector<EntityId>& reached,
                              const std::vector<double>& priority, std::uint32_t node_budget,
                              std::uint32_t edge_budget, const EdgeMask& mask) {
  SelectionStep sel;
  const std::uint32_t n = graph.num_entities();

  // reached nodes compete for the node budget first; only leftover slots fall
  // through to the unreached remainder, so unreached nodes never crowd out a
  // reached one and a full budget covers every node
  std::vector<char> is_reached(n, 0);
  for (EntityId v : reached) is_reached[v] = 1;
  std::vector<EntityId> rest;
  rest.reserve(n - reached.size());
  for (EntityId v = 0; v < n; ++v)
    if (!is_reached[v]) rest.push_back(v);

  // blocks arrive ascending; stable top-k then breaks priority ties toward
  // the smaller node id
  auto take = [&](const std::vector<EntityId>& block, std::uint32_t budget) {
    if (block.empty() || budget == 0) return;
    RankedBatch<double> node_scores;
    node_scores.sizes = {static_cast<std::uint32_t>(block.size())};
    node_scores.values.reserve(block.size());
    for (EntityId v : block) node_scores.values.push_back(priority[v]);
    TopkResult<double> top_nodes = padding_free_topk(node_scores, budget);
    for (std::uint32_t idx : top_nodes.indices) sel.nodes.push_back(block[idx]);
  };
  take(reached, node_budget);
  take(rest, node_budget - static_cast<std::uint32_t>(sel.nodes.size()));
  std::sort(sel.nodes.begin(), sel.nodes.end());
  if (sel.nodes.empty()) return sel;

  std::vector<EdgeId> candidates;
  for (EntityId x : sel.nodes)
    for (EdgeId e = graph.out_begin(x); e < graph.out_end(x); ++e)
      if (mask.is_visible(e)) candidates.push_back(e);
  if (candidates.empty()) return sel;

  // rank candidates by tail priority; ties resolve to the smaller tail id,
  // then the smaller edge id (presort + stable top-k)
  std::sort(candidates.begin(), candidates.end(), [&](EdgeId a, EdgeId b) {
    const EntityId ta = graph.edge(a).tail, tb = graph.edge(b).tail;
    if (ta != tb) return ta < tb;
    return a < b;
  });
  RankedBatch<double> edge_scores;
  edge_scores.sizes = {static_cast<std::uint32_t>(candidates.size())};
  edge_scores.values.reserve(candidates.size());
  for (EdgeId e : candidates) edge_scores.values.push_back(priority[graph.edge(e).tail]);
  TopkResult<double> top_edges = padding_free_topk(edge_scores, edge_budget);
  sel.edges.reserve(top_edges.indices.size());
  for (std::uint32_t idx : top_edges.indices) sel.edges.push_back(candidates[idx]);
  std::sort(sel.edges.begin(), sel.edges.end(), [&](EdgeId a, EdgeId b) {
    const EntityId ta = graph.edge(a).tail, tb = graph.edge(b).tail;
    if (ta != tb) return ta < tb;
    return a < b;
  });

  RankedBatch<std::uint32_t> tail_ids;
  tail_ids.sizes = {static_cast<std::uint32_t>(sel.edges.size())};
  for (EdgeId e : sel.edges) tail_ids.values.push_back(graph.edge(e).tail);
  UniqueResult<std::uint32_t> uniq = padding_free_unique(tail_ids);
  sel.tails.assign(uniq.values.begin(), uniq.values.end());
  return sel;
}

namespace {

void dfs_walks(const KnowledgeGraph& graph, EntityId at, std::uint32_t remaining,
               const EdgeMask& mask, std::vector<EdgeId>& prefix, WalkSet& out,
               std::uint64_t cap) {
  for (EdgeId e = graph.out_begin(at); e < graph.out_end(at); ++e) {
    if (!mask.is_visible(e)) continue;
    prefix.push_back(e);
    if (out.walks.size() >= cap) throw BudgetError("exhaustive walk enumeration exceeded cap");
    out.walks.push_back(prefix);
    out.ends.push_back(graph.edge(e).tail);
    if (remaining > 1) dfs_walks(graph, graph.edge(e).tail, remaining - 1, mask, prefix, out, cap);
    prefix.pop_back();
  }
}

}  // namespace

WalkSet exhaustive_walks(const KnowledgeGraph& graph, EntityId u, std::uint32_t max_len,
                         const EdgeMask& mask, std::uint64_t cap) {
  if (u >= graph.num_entities()) throw LookupError("source out of range");
  WalkSet out;
  if (max_len == 0) return out;
  std::vector<EdgeId> prefix;
  dfs_walks(graph, u, max_len, mask, prefix, out, cap);
  return out;
}

std::vector<std::vector<EdgeId>> exhaustive_paths(const KnowledgeGraph& graph, EntityId u,
                                                  EntityId v, std::uint32_t max_len,
                                                  const EdgeMask& mask, std::uint64_t cap) {
  if (v >= graph.num_entities()) throw LookupError("target out of range");
  WalkSet all = exhaustive_walks(graph, u, max_len, mask, cap);
  std::vector<std::vector<EdgeId>> out;
  for (std::size_t i = 0; i < all.walks.size(); ++i)
    if (all.ends[i] == v) out.push_back(std::move(all.walks[i]));
  return out;
}

}  // namespace astarkg
