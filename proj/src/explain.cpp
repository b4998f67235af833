#include "astarkg/explain.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

namespace astarkg {

namespace {

// max priority over the recorded update set of the given 0-based step index;
// step 0 normalizes over every node.
double step_normalizer(const PropagationRecord& record, std::uint32_t t) {
  const std::vector<double>& s = record.priorities.at(t);
  double mx = 0.0;
  if (t == 0) {
    for (double v : s) mx = std::max(mx, v);
  } else {
    for (EntityId v : record.updated_nodes.at(t - 1)) mx = std::max(mx, s[v]);
  }
  return mx;
}

// A head outside the step's update set never carried its value into the
// pruned flow; it contributes nothing (and its stale score must not be
// compared against the update set's maximum).
double step_contribution(const PropagationRecord& record, std::uint32_t t, EntityId head) {
  if (t > 0) {
    const std::vector<EntityId>& updated = record.updated_nodes.at(t - 1);
    if (std::find(updated.begin(), updated.end(), head) == updated.end()) return 0.0;
  }
  const double mx = step_normalizer(record, t);
  if (mx <= 0.0) return 0.0;
  return record.priorities.at(t)[head] / mx;
}

}  // namespace

double path_importance(const PropagationRecord& record, const KnowledgeGraph& graph,
                       EntityId source, const std::vector<EdgeId>& path) {
  const std::uint32_t horizon = static_cast<std::uint32_t>(record.updated_nodes.size());
  if (path.size() > horizon) throw ShapeError("path longer than the recorded horizon");
  if (path.empty()) return 0.0;
  EntityId at = source;
  double sum = 0.0;
  for (std::uint32_t t = 0; t < path.size(); ++t) {
    const Triplet& e = graph.edge(path[t]);
    if (e.head != at) throw ShapeError("path is not contiguous from the source");
    sum += step_contribution(record, t, e.head);
    at = e.tail;
  }
  return sum / static_cast<double>(path.size());
}

std::vector<ScoredPath> beam_search_paths(const KnowledgeGraph& graph,
                                          const PropagationRecord& record, EntityId source,
                                          EntityId answer, std::uint32_t beam_width,
                                          const EdgeMask& mask) {
  struct Partial {
    std::vector<EdgeId> edges;
    std::vector<double> step_scores;
    EntityId end;
    double sum;
  };
  const std::uint32_t horizon = static_cast<std::uint32_t>(record.updated_nodes.size());
  std::vector<Partial> beam{{{}, {}, source, 0.0}};
  std::vector<ScoredPath> out;

  for (std::uint32_t t = 0; t < horizon && !beam.empty(); ++t) {
    std::vector<Partial> next;
    for (const Partial& p : beam) {
      const double c = step_contribution(record, t, p.end);
      const EdgeId e0 = graph.out_begin(p.end), e1 = graph.out_end(p.end);
      for (EdgeId e = e0; e < e1; ++e) {
        if (!mask.is_visible(e)) continue;
        Partial q = p;
        q.edges.push_back(e);
        q.step_scores.push_back(c);
        q.end = graph.edge(e).tail;
        q.sum = p.sum + c;
        next.push_back(std::move(q));
      }
    }
    // all candidates share length t+1, so ranking by sum = ranking by mean
    std::stable_sort(next.begin(), next.end(),
                     [](const Partial& a, const Partial& b) { return a.sum > b.sum; });
    if (beam_width > 0 && next.size() > beam_width) next.resize(beam_width);
    for (const Partial& q : next)
      if (q.end == answer)
        out.push_back({q.edges, q.sum / static_cast<double>(q.edges.size()), q.step_scores});
    beam = std::move(next);
  }

  std::stable_sort(out.begin(), out.end(),
                   [](const ScoredPath& a, const ScoredPath& b) {
                     return a.importance > b.importance;
                   });
  if (beam_width > 0 && out.size() > beam_width) out.resize(beam_width);
  return out;
}

namespace {

std::string relation_label(const Vocabulary& relations, RelationId r) {
  const std::uint32_t base = relations.size();
  return r < base ? relations.name(r) : relations.name(r - base) + "^-1";
}

std::string dot_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

}  // namespace

std::string format_path(const KnowledgeGraph& graph, const Vocabulary& entities,
                        const Vocabulary& relations, const std::vector<EdgeId>& path) {
  std::ostringstream os;
  for (std::size_t i = 0; i < path.size(); ++i) {
    const Triplet& e = graph.edge(path[i]);
    if (i == 0) os << entities.name(e.head);
    os << " -" << relation_label(relations, e.relation) << "-> " << entities.name(e.tail);
  }
  return os.str();
}

std::string paths_to_dot(const KnowledgeGraph& graph, const Vocabulary& entities,
                         const Vocabulary& relations, std::span<const ScoredPath> paths) {
  std::set<std::tuple<EntityId, RelationId, EntityId>> seen;
  std::ostringstream os;
  os << "digraph paths {\n  rankdir=LR;\n";
  for (const ScoredPath& p : paths)
    for (EdgeId e : p.edges) {
      const Triplet& tr = graph.edge(e);
      if (!seen.emplace(tr.head, tr.relation, tr.tail).second) continue;
      os << "  \"" << dot_escape(entities.name(tr.head)) << "\" -> \""
         << dot_escape(entities.name(tr.tail)) << "\" [label=\""
         << dot_escape(relation_label(relations, tr.relation)) << "\"];\n";
    }
  os << "}\n";
  return os.str();
}

}  // namespace astarkg
