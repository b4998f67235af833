#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "astarkg/kg.hpp"
#include "astarkg/propagation.hpp"

namespace astarkg {

// A path from the query head to an answer, scored by the mean of its
// per-step max-normalized priorities.
struct ScoredPath {
  std::vector<EdgeId> edges;
  double importance = 0.0;
  std::vector<double> step_scores;  // normalized priority of each edge's head
};

// Mean over edges t of s^(t-1)(head_t) / max_{x in V^(t-1)} s^(t-1)(x), where
// V^(0) is every node and V^(t) is the recorded update set of step t. Throws
// if the path is longer than the recorded horizon or not contiguous from
// `source`.
double path_importance(const PropagationRecord& record, const KnowledgeGraph& graph,
                       EntityId source, const std::vector<EdgeId>& path);

// Forward beam search over the recorded priorities: partial paths are ranked
// by their running mean of normalized priorities, the best `beam_width` are
// extended each step (0 = unbounded), and every partial that lands on
// `answer` is emitted. Result is ranked by importance, truncated to
// beam_width when bounded.
std::vector<ScoredPath> beam_search_paths(const KnowledgeGraph& graph,
                                          const PropagationRecord& record, EntityId source,
                                          EntityId answer, std::uint32_t beam_width,
                                          const EdgeMask& mask = {});

// "u -r1-> x1 -r2-> ... -> v"; inverse relations print as "name^-1".
std::string format_path(const KnowledgeGraph& graph, const Vocabulary& entities,
                        const Vocabulary& relations, const std::vector<EdgeId>& path);

// DOT digraph of the union of the given paths, edges labelled by relation.
std::string paths_to_dot(const KnowledgeGraph& graph, const Vocabulary& entities,
                         const Vocabulary& relations, std::span<const ScoredPath> paths);

}  // namespace astarkg
