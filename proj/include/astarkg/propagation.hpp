#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "astarkg/batching.hpp"
#include "astarkg/kg.hpp"

namespace astarkg {

struct BudgetConfig {
  double alpha = 1.0;  // node ratio, (0,1]
  double beta = 1.0;   // average-degree ratio, (0,1]
  std::uint32_t steps = 4;

  void validate() const {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw BudgetError("alpha must be in (0,1]");
    if (!(beta > 0.0 && beta <= 1.0)) throw BudgetError("beta must be in (0,1]");
    if (steps == 0) throw BudgetError("steps must be >= 1");
  }
  std::uint32_t node_budget(std::uint32_t num_entities) const {
    return static_cast<std::uint32_t>(std::ceil(alpha * num_entities));
  }
  std::uint32_t edge_budget(std::uint32_t num_entities, std::uint32_t num_edges) const {
    const double k = std::ceil(alpha * num_entities);
    return static_cast<std::uint32_t>(
        std::ceil(beta * k * static_cast<double>(num_edges) / static_cast<double>(num_entities)));
  }
};

struct StepStats {
  std::uint32_t selected_nodes = 0;  // |X^(t)|
  std::uint32_t messages = 0;        // |E^(t)|
  std::uint32_t updated_nodes = 0;   // |V^(t)|
};

struct PropagationStats {
  std::vector<StepStats> steps;
  double wall_ms = 0.0;

  std::uint64_t total_messages() const {
    std::uint64_t n = 0;
    for (const auto& s : steps) n += s.messages;
    return n;
  }
  double mean_messages_per_step() const {
    return steps.empty() ? 0.0 : static_cast<double>(total_messages()) / steps.size();
  }
};

// Everything explain needs to replay a run: the selections of every step and
// the priority table before each step (index 0 = before the first step).
struct PropagationRecord {
  std::vector<std::vector<EntityId>> selected_nodes;   // X^(t), t = 1..T
  std::vector<std::vector<EdgeId>> selected_edges;     // E^(t)
  std::vector<std::vector<EntityId>> updated_nodes;    // V^(t)
  std::vector<std::vector<double>> priorities;         // s^(0..T), dense |V|
};

// Selects up to K nodes: the reached ones first, ranked by priority (ties to
// the smaller node id), then — only if budget remains — unreached nodes in
// the same order, so a full budget covers every node. Gathers the selected
// nodes' unmasked out-edges, keeps the top-L by tail priority (ties to the
// smaller tail id, then edge id), and reports the unique tails.
struct SelectionStep {
  std::vector<EntityId> nodes;    // X^(t), sorted by id
  std::vector<EdgeId> edges;      // E^(t), sorted by (tail, edge id)
  std::vector<EntityId> tails;    // V^(t), ascending
};

SelectionStep select_frontier(const KnowledgeGraph& graph, const std::vector<EntityId>& reached,
                              const std::vector<double>& priority, std::uint32_t node_budget,
                              std::uint32_t edge_budget, const EdgeMask& mask);

// h^(T) after T full relaxation sweeps: every node recomputed each step from
// the boundary and all visible in-edges. Walks of length <= T are aggregated
// exactly once. Parallel over nodes when OpenMP is enabled (pure gather, so
// thread count never changes the result).
template <class Alg>
struct ExactResult {
  std::vector<typename Alg::Value> values;
  PropagationStats stats;
};

template <class Alg>
ExactResult<Alg> bellman_ford_full(const KnowledgeGraph& graph, EntityId source,
                                   std::uint32_t steps, const EdgeMask& mask = {},
                                   const std::vector<typename Alg::Value>* edge_weights = nullptr) {
  using V = typename Alg::Value;
  const auto t0 = std::chrono::steady_clock::now();
  const std::uint32_t n = graph.num_entities();
  if (source >= n) throw LookupError("source out of range");
  std::vector<V> h(n, Alg::zero()), next(n, Alg::zero());
  h[source] = Alg::one();
  std::uint32_t visible_edges = graph.num_edges() - mask.hidden_count();

  ExactResult<Alg> out;
  for (std::uint32_t t = 0; t < steps; ++t) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::int64_t vi = 0; vi < static_cast<std::int64_t>(n); ++vi) {
      const EntityId v = static_cast<EntityId>(vi);
      V acc = v == source ? Alg::one() : Alg::zero();
      for (EdgeId e : graph.in_edge_ids(v)) {
        if (!mask.is_visible(e)) continue;
        const Triplet& tr = graph.edge(e);
        const V w = edge_weights ? (*edge_weights)[e] : Alg::default_weight();
        acc = Alg::oplus(acc, Alg::otimes(h[tr.head], w));
      }
      next[vi] = acc;
    }
    h.swap(next);
    out.stats.steps.push_back({n, visible_edges, n});
  }
  out.values = std::move(h);
  out.stats.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

// Priority-pruned propagation for exact algebras with a static per-node
// priority (handcrafted scores, unit, or an injected vector). The node budget
// goes to reached nodes first (a node counts as reached once an edge from a
// reached head updates it; initially only the source), surplus spills over to
// unreached nodes; only tails of the selected edges are recomputed and
// everything else carries over. Exact algebras use the priority for selection
// only, never as a message factor.
template <class Alg>
struct ExactAstarResult {
  std::vector<typename Alg::Value> values;
  PropagationStats stats;
  PropagationRecord record;
};

template <class Alg>
ExactAstarResult<Alg> astar_propagate(const KnowledgeGraph& graph, EntityId source,
                                      const BudgetConfig& budget,
                                      const std::vector<double>& priority,
                                      const EdgeMask& mask = {},
                                      const std::vector<typename Alg::Value>* edge_weights =
                                          nullptr) {
  using V = typename Alg::Value;
  budget.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const std::uint32_t n = graph.num_entities();
  if (source >= n) throw LookupError("source out of range");
  if (priority.size() != n) throw ShapeError("priority size != num entities");
  const std::uint32_t K = budget.node_budget(n);
  const std::uint32_t L = budget.edge_budget(n, graph.num_edges());

  ExactAstarResult<Alg> out;
  std::vector<V> h(n, Alg::zero());
  h[source] = Alg::one();
  std::vector<char> reached(n, 0);
  reached[source] = 1;
  std::vector<EntityId> reached_list{source};

  out.record.priorities.push_back(priority);
  for (std::uint32_t t = 0; t < budget.steps; ++t) {
    SelectionStep sel = select_frontier(graph, reached_list, priority, K, L, mask);
    // simultaneous update: read h^(t-1), write scratch, then commit
    std::vector<V> fresh(sel.tails.size());
    for (std::size_t i = 0; i < sel.tails.size(); ++i)
      fresh[i] = sel.tails[i] == source ? Alg::one() : Alg::zero();
    {
      std::size_t ti = 0;
      for (EdgeId e : sel.edges) {  // grouped by tail
        const Triplet& tr = graph.edge(e);
        while (sel.tails[ti] != tr.tail) ++ti;
        const V w = edge_weights ? (*edge_weights)[e] : Alg::default_weight();
        fresh[ti] = Alg::oplus(fresh[ti], Alg::otimes(h[tr.head], w));
      }
    }
    for (std::size_t i = 0; i < sel.tails.size(); ++i) h[sel.tails[i]] = fresh[i];
    // a tail joins the reached set once an edge from a reached head hits it;
    // heads are judged by their pre-step status
    std::vector<EntityId> newly;
    for (EdgeId e : sel.edges) {
      const Triplet& tr = graph.edge(e);
      if (reached[tr.head] && !reached[tr.tail]) newly.push_back(tr.tail);
    }
    std::sort(newly.begin(), newly.end());
    newly.erase(std::unique(newly.begin(), newly.end()), newly.end());
    for (EntityId v : newly) reached[v] = 1;
    reached_list.insert(reached_list.end(), newly.begin(), newly.end());
    std::sort(reached_list.begin(), reached_list.end());
    out.stats.steps.push_back({static_cast<std::uint32_t>(sel.nodes.size()),
                               static_cast<std::uint32_t>(sel.edges.size()),
                               static_cast<std::uint32_t>(sel.tails.size())});
    out.record.selected_nodes.push_back(std::move(sel.nodes));
    out.record.selected_edges.push_back(std::move(sel.edges));
    out.record.updated_nodes.push_back(std::move(sel.tails));
    out.record.priorities.push_back(priority);  // static priorities
  }
  out.values = std::move(h);
  out.stats.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

// Depth-first enumeration of all walks (node revisits allowed) from u to v
// with 1..max_len edges, masked edges excluded, lexicographic by edge id per
// step. Throws BudgetError once more than `cap` walks are produced.
std::vector<std::vector<EdgeId>> exhaustive_paths(const KnowledgeGraph& graph, EntityId u,
                                                  EntityId v, std::uint32_t max_len,
                                                  const EdgeMask& mask = {},
                                                  std::uint64_t cap = 1'000'000);

// Same enumeration without fixing the endpoint; walk -> its end node.
struct WalkSet {
  std::vector<std::vector<EdgeId>> walks;
  std::vector<EntityId> ends;
};
WalkSet exhaustive_walks(const KnowledgeGraph& graph, EntityId u, std::uint32_t max_len,
                         const EdgeMask& mask = {}, std::uint64_t cap = 1'000'000);

// Folds boundary ⊗ w(e1) ⊗ ... ⊗ w(ek) left to right, checking contiguity.
template <class Alg>
typename Alg::Value evaluate_path(const KnowledgeGraph& graph, EntityId u,
                                  const std::vector<EdgeId>& path,
                                  const std::vector<typename Alg::Value>* edge_weights = nullptr) {
  using V = typename Alg::Value;
  V acc = Alg::one();
  EntityId at = u;
  for (EdgeId e : path) {
    if (e >= graph.num_edges()) throw LookupError("path edge id out of range");
    const Triplet& tr = graph.edge(e);
    if (tr.head != at)
      throw ShapeError("path is not contiguous: edge head " + std::to_string(tr.head) +
                       " != current node " + std::to_string(at));
    acc = Alg::otimes(acc, edge_weights ? (*edge_weights)[e] : Alg::default_weight());
    at = tr.tail;
  }
  return acc;
}

}  // namespace astarkg
