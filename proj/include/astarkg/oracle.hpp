#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

#include "astarkg/algebra.hpp"
#include "astarkg/kg.hpp"
#include "astarkg/propagation.hpp"

// Independent reference implementations used to cross-check the propagation
// engine: explicit walk enumeration instead of dynamic programming, explicit
// walk-set bookkeeping instead of scatter updates.
namespace astarkg::oracle {

struct RandomGraphSpec {
  std::uint32_t min_nodes = 2;
  std::uint32_t max_nodes = 12;
  std::uint32_t max_base_edges = 20;  // augmented edge count stays <= 40
  std::uint32_t max_relations = 4;
};

inline KnowledgeGraph random_graph(std::mt19937_64& rng, const RandomGraphSpec& spec,
                                   std::vector<Triplet>* base_out = nullptr) {
  const std::uint32_t n =
      spec.min_nodes + static_cast<std::uint32_t>(rng() % (spec.max_nodes - spec.min_nodes + 1));
  const std::uint32_t r = 1 + static_cast<std::uint32_t>(rng() % spec.max_relations);
  const std::uint32_t m = static_cast<std::uint32_t>(rng() % (spec.max_base_edges + 1));
  std::vector<Triplet> base;
  base.reserve(m);
  for (std::uint32_t i = 0; i < m; ++i)
    base.push_back({static_cast<EntityId>(rng() % n), static_cast<RelationId>(rng() % r),
                    static_cast<EntityId>(rng() % n)});
  if (base_out) *base_out = base;
  return KnowledgeGraph::build(n, r, augment_inverse(base, r));
}

inline std::vector<double> random_real_weights(std::mt19937_64& rng, std::uint32_t n,
                                               double lo = 0.1, double hi = 2.0) {
  std::vector<double> w(n);
  for (double& x : w) {
    const double u = static_cast<double>(rng() % 1000003u) / 1000002.0;
    x = lo + u * (hi - lo);
  }
  return w;
}

// Aggregate of every walk from `source` of length <= steps (the empty walk
// contributes the algebra's one at the source), by brute enumeration.
template <class Alg>
std::vector<typename Alg::Value> walk_values(
    const KnowledgeGraph& graph, EntityId source, std::uint32_t steps, const EdgeMask& mask = {},
    const std::vector<typename Alg::Value>* edge_weights = nullptr) {
  std::vector<typename Alg::Value> out(graph.num_entities(), Alg::zero());
  out[source] = Alg::one();
  const WalkSet walks = exhaustive_walks(graph, source, steps, mask);
  for (std::size_t i = 0; i < walks.walks.size(); ++i) {
    const auto value = evaluate_path<Alg>(graph, source, walks.walks[i], edge_weights);
    out[walks.ends[i]] = Alg::oplus(out[walks.ends[i]], value);
  }
  return out;
}

// Replays recorded per-step edge selections with explicit walk sets: a
// recomputed node's walks are the boundary plus one-edge extensions of the
// previous walks of each selected edge's head; untouched nodes keep their
// walk set. The result is the aggregate each pruned state must equal.
template <class Alg>
std::vector<typename Alg::Value> replay_walk_values(
    const KnowledgeGraph& graph, EntityId source,
    const std::vector<std::vector<EdgeId>>& selected_edges,
    const std::vector<typename Alg::Value>* edge_weights = nullptr) {
  using Walks = std::vector<std::vector<EdgeId>>;
  const std::uint32_t n = graph.num_entities();
  std::vector<Walks> live(n);
  std::vector<std::uint8_t> holds_boundary(n, 0);
  holds_boundary[source] = 1;

  for (const std::vector<EdgeId>& step : selected_edges) {
    std::vector<EntityId> tails;
    for (EdgeId e : step) tails.push_back(graph.edge(e).tail);
    std::sort(tails.begin(), tails.end());
    tails.erase(std::unique(tails.begin(), tails.end()), tails.end());

    std::vector<Walks> fresh(tails.size());
    std::vector<std::uint8_t> fresh_boundary(tails.size(), 0);
    for (std::size_t i = 0; i < tails.size(); ++i) {
      fresh_boundary[i] = tails[i] == source ? 1 : 0;
      for (EdgeId e : step) {
        if (graph.edge(e).tail != tails[i]) continue;
        const EntityId head = graph.edge(e).head;
        if (holds_boundary[head]) fresh[i].push_back({e});  // extend the empty walk
        for (const std::vector<EdgeId>& w : live[head]) {
          std::vector<EdgeId> ext = w;
          ext.push_back(e);
          fresh[i].push_back(std::move(ext));
        }
      }
    }
    for (std::size_t i = 0; i < tails.size(); ++i) {
      live[tails[i]] = std::move(fresh[i]);
      holds_boundary[tails[i]] = fresh_boundary[i];
    }
  }

  std::vector<typename Alg::Value> out(n, Alg::zero());
  for (EntityId v = 0; v < n; ++v) {
    if (holds_boundary[v]) out[v] = Alg::one();
    for (const std::vector<EdgeId>& w : live[v])
      out[v] = Alg::oplus(out[v], evaluate_path<Alg>(graph, source, w, edge_weights));
  }
  return out;
}

}  // namespace astarkg::oracle
