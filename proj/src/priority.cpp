#include "astarkg/priority.hpp"

#include <algorithm>
#include <cmath>

namespace astarkg {

std::vector<double> ppr_scores(const KnowledgeGraph& graph, EntityId source,
                               const PprConfig& cfg) {
  const std::uint32_t n = graph.num_entities();
  if (source >= n) throw LookupError("ppr source out of range");
  std::vector<double> p(n, 0.0), next(n, 0.0);
  p[source] = 1.0;
  for (std::uint32_t it = 0; it < cfg.iterations; ++it) {
    std::fill(next.begin(), next.end(), 0.0);
    double dangling = 0.0;
    for (EntityId v = 0; v < n; ++v) {
      const std::uint32_t deg = graph.out_degree(v);
      if (deg == 0) {
        dangling += p[v];
        continue;
      }
      const double share = p[v] / deg;
      for (const Triplet& e : graph.out_edges(v)) next[e.tail] += share;
    }
    next[source] += dangling;  // dangling mass restarts
    for (EntityId v = 0; v < n; ++v) next[v] *= cfg.damping;
    next[source] += 1.0 - cfg.damping;
    p.swap(next);
  }
  const double mx = *std::max_element(p.begin(), p.end());
  if (mx > 0.0)
    for (double& x : p) x /= mx;
  return p;
}

std::vector<double> degree_scores(const KnowledgeGraph& graph) {
  const std::uint32_t n = graph.num_entities();
  std::vector<double> s(n, 0.0);
  double mx = 0.0;
  for (EntityId v = 0; v < n; ++v) {
    s[v] = static_cast<double>(graph.out_degree(v));
    mx = std::max(mx, s[v]);
  }
  if (mx > 0.0)
    for (double& x : s) x /= mx;
  return s;
}

PriorityEval neural_priority(std::span<const double> h_row, std::span<const double> q_row,
                             const ParameterStore& params, const std::string& prefix) {
  const auto& g_w1 = params.entry(prefix + "priority.g.w1");
  const auto& g_b1 = params.entry(prefix + "priority.g.b1");
  const auto& g_w2 = params.entry(prefix + "priority.g.w2");
  const auto& g_b2 = params.entry(prefix + "priority.g.b2");
  const auto& f_w1 = params.entry(prefix + "priority.f.w1");
  const auto& f_b1 = params.entry(prefix + "priority.f.b1");
  const auto& f_w2 = params.entry(prefix + "priority.f.w2");
  const auto& f_b2 = params.entry(prefix + "priority.f.b2");
  const std::uint32_t d = static_cast<std::uint32_t>(h_row.size());
  if (q_row.size() != d) throw ShapeError("neural_priority: h and q dims differ");
  const std::uint32_t hidden = g_w1.shape[1];
  if (g_w1.shape[0] != 2 * d) throw ShapeError("neural_priority: g.w1 shape mismatch");

  std::vector<double> cat(2 * d);
  std::copy(h_row.begin(), h_row.end(), cat.begin());
  std::copy(q_row.begin(), q_row.end(), cat.begin() + d);

  std::vector<double> g_hidden(hidden, 0.0);
  for (std::uint32_t i = 0; i < 2 * d; ++i) {
    const double x = cat[i];
    if (x == 0.0) continue;
    const double* row = g_w1.value.data() + static_cast<std::size_t>(i) * hidden;
    for (std::uint32_t j = 0; j < hidden; ++j) g_hidden[j] += x * row[j];
  }
  for (std::uint32_t j = 0; j < hidden; ++j)
    g_hidden[j] = std::max(0.0, g_hidden[j] + g_b1.value[j]);

  PriorityEval out;
  out.s_vec.assign(d, 0.0);
  for (std::uint32_t i = 0; i < hidden; ++i) {
    const double x = g_hidden[i];
    if (x == 0.0) continue;
    const double* row = g_w2.value.data() + static_cast<std::size_t>(i) * d;
    for (std::uint32_t j = 0; j < d; ++j) out.s_vec[j] += x * row[j];
  }
  for (std::uint32_t j = 0; j < d; ++j) out.s_vec[j] = (out.s_vec[j] + g_b2.value[j]) * h_row[j];

  const std::uint32_t fh = f_w1.shape[1];
  std::vector<double> f_hidden(fh, 0.0);
  for (std::uint32_t i = 0; i < d; ++i) {
    const double x = out.s_vec[i];
    if (x == 0.0) continue;
    const double* row = f_w1.value.data() + static_cast<std::size_t>(i) * fh;
    for (std::uint32_t j = 0; j < fh; ++j) f_hidden[j] += x * row[j];
  }
  for (std::uint32_t j = 0; j < fh; ++j)
    f_hidden[j] = std::max(0.0, f_hidden[j] + f_b1.value[j]);
  double logit = f_b2.value[0];
  for (std::uint32_t j = 0; j < fh; ++j) logit += f_hidden[j] * f_w2.value[j];
  out.score = logit >= 0.0 ? 1.0 / (1.0 + std::exp(-logit))
                           : std::exp(logit) / (1.0 + std::exp(logit));
  return out;
}

std::vector<double> PprPriority::scores(const KnowledgeGraph& graph, EntityId source) {
  {
    std::shared_lock lock(mu_);
    auto it = cache_.find(source);
    if (it != cache_.end()) return it->second;
  }
  std::vector<double> s = ppr_scores(graph, source, cfg_);
  std::unique_lock lock(mu_);
  return cache_.emplace(source, std::move(s)).first->second;
}

std::unique_ptr<PriorityProvider> make_priority(const std::string& name) {
  if (name == "unit") return std::make_unique<UnitPriority>();
  if (name == "degree") return std::make_unique<DegreePriority>();
  if (name == "ppr") return std::make_unique<PprPriority>();
  throw LookupError("unknown priority provider: " + name);
}

}  // namespace astarkg
