#include "astarkg/model.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>

#include <json.hpp>

namespace astarkg {

std::string ModelConfig::to_json() const {
  nlohmann::json j;
  j["dim"] = dim;
  j["steps"] = steps;
  j["num_relations"] = num_relations;
  j["g_hidden"] = g_hidden;
  j["f_hidden"] = f_hidden;
  j["edge_mode"] = edge_mode == EdgeWeightMode::kLinear ? "linear" : "embedding";
  j["aggregation"] = aggregation == Aggregation::kSum ? "sum" : "pna";
  j["tied_relation_weights"] = tied_relation_weights;
  j["shared_predictor"] = shared_predictor;
  return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  ModelConfig c;
  c.dim = j.at("dim");
  c.steps = j.at("steps");
  c.num_relations = j.at("num_relations");
  c.g_hidden = j.at("g_hidden");
  c.f_hidden = j.at("f_hidden");
  c.edge_mode =
      j.at("edge_mode") == "linear" ? EdgeWeightMode::kLinear : EdgeWeightMode::kEmbedding;
  c.aggregation = j.at("aggregation") == "sum" ? Aggregation::kSum : Aggregation::kPna;
  c.tied_relation_weights = j.at("tied_relation_weights");
  c.shared_predictor = j.at("shared_predictor");
  return c;
}

namespace {

void register_priority_head(ParameterStore& store, const std::string& prefix,
                            const ModelConfig& cfg, std::mt19937_64& rng) {
  const std::uint32_t d = cfg.dim, gh = cfg.g_hidden, fh = cfg.f_hidden;
  store.add_uniform(prefix + "g.w1", {2 * d, gh}, 2 * d, rng);
  store.add_uniform(prefix + "g.b1", {gh}, 2 * d, rng);
  store.add_uniform(prefix + "g.w2", {gh, d}, gh, rng);
  store.add_uniform(prefix + "g.b2", {d}, gh, rng);
  store.add_uniform(prefix + "f.w1", {d, fh}, d, rng);
  store.add_uniform(prefix + "f.b1", {fh}, d, rng);
  store.add_uniform(prefix + "f.w2", {fh, 1}, fh, rng);
  store.add_uniform(prefix + "f.b2", {1}, fh, rng);
}

}  // namespace

void Model::register_parameters(ParameterStore& store, const ModelConfig& cfg,
                                std::mt19937_64& rng) {
  if (cfg.num_relations == 0) throw ShapeError("model config: num_relations unset");
  const std::uint32_t d = cfg.dim, R2 = cfg.num_relations;
  store.add_uniform("query_embed", {R2, d}, d, rng);
  const std::uint32_t layers = cfg.tied_relation_weights ? 1 : cfg.steps;
  for (std::uint32_t l = 0; l < layers; ++l) {
    const std::string suffix = ".l" + std::to_string(l);
    if (cfg.edge_mode == EdgeWeightMode::kEmbedding) {
      store.add_uniform("rel_embed" + suffix, {R2, d}, d, rng);
    } else {
      store.add_uniform("rel_w" + suffix, {R2 * d, d}, d, rng);
      store.add_uniform("rel_b" + suffix, {R2, d}, d, rng);
    }
    if (cfg.aggregation == Aggregation::kPna) {
      store.add_uniform("pna_w" + suffix, {12 * d, d}, 12 * d, rng);
      store.add_uniform("pna_b" + suffix, {d}, 12 * d, rng);
    }
  }
  register_priority_head(store, "priority.", cfg, rng);
  if (!cfg.shared_predictor) register_priority_head(store, "predictor.", cfg, rng);
}

struct Model::LeafCache {
  Tape& tape;
  const ParameterStore& store;
  std::unordered_map<std::string, Tensor> cache;

  Tensor get(const std::string& name) {
    auto it = cache.find(name);
    if (it != cache.end()) return it->second;
    const auto& e = store.entry(name);
    std::uint32_t rows = 1, cols = 1;
    if (e.shape.size() == 1) {
      cols = e.shape[0];
    } else if (e.shape.size() == 2) {
      rows = e.shape[0];
      cols = e.shape[1];
    } else {
      throw ShapeError("leaf rank > 2 unsupported: " + name);
    }
    Tensor t = tape.leaf(name, rows, cols, e.value.data());
    cache.emplace(name, t);
    return t;
  }
};

Model::PriorityOut Model::priority_rows(Tape& tape, LeafCache& leaves, Tensor rows, Tensor q_row,
                                        const std::string& prefix) const {
  const std::uint32_t n = tape.rows(rows);
  Tensor inp = tape.concat_cols(rows, tape.broadcast_row(q_row, n));
  Tensor g_h = tape.relu(
      tape.add_rowvec(tape.matmul(inp, leaves.get(prefix + "g.w1")), leaves.get(prefix + "g.b1")));
  Tensor gate =
      tape.add_rowvec(tape.matmul(g_h, leaves.get(prefix + "g.w2")), leaves.get(prefix + "g.b2"));
  Tensor s_vec = tape.mul(rows, gate);
  Tensor f_h = tape.relu(tape.add_rowvec(tape.matmul(s_vec, leaves.get(prefix + "f.w1")),
                                         leaves.get(prefix + "f.b1")));
  PriorityOut out;
  out.logit =
      tape.add_rowvec(tape.matmul(f_h, leaves.get(prefix + "f.w2")), leaves.get(prefix + "f.b2"));
  out.score = tape.sigmoid(out.logit);
  return out;
}

Tensor Model::relation_table(Tape& tape, LeafCache& leaves, std::uint32_t layer,
                             Tensor q_row) const {
  const std::uint32_t l = cfg_.tied_relation_weights ? 0 : layer;
  const std::string suffix = ".l" + std::to_string(l);
  if (cfg_.edge_mode == EdgeWeightMode::kEmbedding) return leaves.get("rel_embed" + suffix);
  Tensor w = leaves.get("rel_w" + suffix);                      // (2R*d) x d
  Tensor q_col = tape.reshape(q_row, cfg_.dim, 1);              // d x 1
  Tensor mixed = tape.reshape(tape.matmul(w, q_col), cfg_.num_relations, cfg_.dim);
  return tape.add(mixed, leaves.get("rel_b" + suffix));         // 2R x d
}

Tensor Model::aggregate(Tape& tape, Tensor weighted_msgs, const std::vector<std::uint32_t>& seg_ids,
                        Tensor boundary_rows, std::uint32_t num_tails, LeafCache& leaves,
                        std::uint32_t layer, const std::vector<EntityId>& tails,
                        const KnowledgeGraph& graph) const {
  if (cfg_.aggregation == Aggregation::kSum) {
    Tensor seg = tape.segment_sum(weighted_msgs, seg_ids, num_tails);
    return tape.add(boundary_rows, seg);
  }
  // PNA: the boundary row joins the message multiset, then
  // [mean,max,min,std] x [1, amp, att] degree scalers -> linear projection.
  Tensor all_rows = tape.concat_rows(weighted_msgs, boundary_rows);
  std::vector<std::uint32_t> ids = seg_ids;
  for (std::uint32_t i = 0; i < num_tails; ++i) ids.push_back(i);
  std::vector<double> inv_count(num_tails, 0.0);
  for (std::uint32_t s : ids) inv_count[s] += 1.0;
  for (double& c : inv_count) c = 1.0 / c;
  Tensor inv_cnt = tape.constant(num_tails, 1, inv_count);

  Tensor sum = tape.segment_sum(all_rows, ids, num_tails);
  Tensor mean = tape.scale_rows(sum, inv_cnt);
  Tensor mean_sq = tape.scale_rows(tape.segment_sum(tape.mul(all_rows, all_rows), ids, num_tails),
                                   inv_cnt);
  Tensor var = tape.relu(tape.add(mean_sq, tape.affine(tape.mul(mean, mean), -1.0, 0.0)));
  Tensor stddev = tape.sqrt(tape.affine(var, 1.0, 1e-10));
  Tensor mx = tape.segment_max(all_rows, ids, num_tails);
  Tensor mn = tape.affine(tape.segment_max(tape.affine(all_rows, -1.0, 0.0), ids, num_tails),
                          -1.0, 0.0);
  Tensor feats = tape.concat_cols(tape.concat_cols(mean, mx), tape.concat_cols(mn, stddev));

  // log-degree scalers over the full graph, normalized by the mean log-degree
  double mean_log = 0.0;
  for (EntityId v = 0; v < graph.num_entities(); ++v)
    mean_log += std::log(static_cast<double>(std::max<std::uint32_t>(graph.out_degree(v), 1)) + 1.0);
  mean_log /= std::max<std::uint32_t>(graph.num_entities(), 1);
  std::vector<double> amp(num_tails), att(num_tails);
  for (std::uint32_t i = 0; i < num_tails; ++i) {
    const double s =
        std::log(static_cast<double>(std::max<std::uint32_t>(graph.out_degree(tails[i]), 1)) + 1.0) /
        mean_log;
    amp[i] = s;
    att[i] = 1.0 / s;
  }
  Tensor amp_t = tape.constant(num_tails, 1, amp);
  Tensor att_t = tape.constant(num_tails, 1, att);
  Tensor scaled = tape.concat_cols(
      feats, tape.concat_cols(tape.scale_rows(feats, amp_t), tape.scale_rows(feats, att_t)));

  const std::uint32_t l = cfg_.tied_relation_weights ? 0 : layer;
  const std::string suffix = ".l" + std::to_string(l);
  return tape.add_rowvec(tape.matmul(scaled, leaves.get("pna_w" + suffix)),
                         leaves.get("pna_b" + suffix));
}

Model::Forward Model::astar_forward(Tape& tape, const KnowledgeGraph& graph, EntityId source,
                                    RelationId query, const BudgetConfig& budget,
                                    const EdgeMask& mask, PriorityMode priority_mode,
                                    const std::vector<double>* static_priority,
                                    const PropagationRecord* frozen) const {
  budget.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const std::uint32_t V = graph.num_entities();
  const std::uint32_t d = cfg_.dim;
  if (source >= V) throw LookupError("source out of range");
  if (query >= cfg_.num_relations) throw LookupError("query relation out of range");
  const std::uint32_t K = budget.node_budget(V);
  const std::uint32_t L = budget.edge_budget(V, graph.num_edges());

  LeafCache leaves{tape, *params_, {}};
  Tensor q_row = tape.gather_rows(leaves.get("query_embed"), {query});
  Tensor h = tape.scatter_update(tape.zeros(V, d), {source}, q_row);

  Tensor s;
  if (priority_mode == PriorityMode::kNeural) {
    Tensor c0 = priority_rows(tape, leaves, tape.zeros(1, d), q_row, "priority.").score;
    Tensor su = priority_rows(tape, leaves, tape.gather_rows(h, {source}), q_row,
                              "priority.").score;
    s = tape.scatter_update(tape.broadcast_row(c0, V), {source}, su);
  } else if (priority_mode == PriorityMode::kUnit) {
    s = tape.constant(V, 1, std::vector<double>(V, 1.0));
  } else {
    if (!static_priority || static_priority->size() != V)
      throw ShapeError("static priority missing or wrong size");
    s = tape.constant(V, 1, *static_priority);
  }

  Forward out;
  out.record.priorities.emplace_back(tape.value(s).begin(), tape.value(s).end());

  // the node budget goes to reached nodes first (source only at the start),
  // surplus spills over to unreached ones; stale priorities carry over
  std::vector<char> reached(V, 0);
  reached[source] = 1;
  std::vector<EntityId> reached_list{source};

  for (std::uint32_t t = 0; t < budget.steps; ++t) {
    SelectionStep sel;
    if (frozen) {
      sel.nodes = frozen->selected_nodes.at(t);
      sel.edges = frozen->selected_edges.at(t);
      sel.tails = frozen->updated_nodes.at(t);
    } else {
      auto sv = tape.value(s);
      std::vector<double> s_vals(sv.begin(), sv.end());
      sel = select_frontier(graph, reached_list, s_vals, K, L, mask);
    }
    if (!frozen) {
      // reach extends along selected edges whose head was already reached
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
    }
    out.stats.steps.push_back({static_cast<std::uint32_t>(sel.nodes.size()),
                               static_cast<std::uint32_t>(sel.edges.size()),
                               static_cast<std::uint32_t>(sel.tails.size())});
    if (sel.edges.empty()) {
      out.record.selected_nodes.push_back(sel.nodes);
      out.record.selected_edges.push_back(sel.edges);
      out.record.updated_nodes.push_back(sel.tails);
      out.record.priorities.emplace_back(tape.value(s).begin(), tape.value(s).end());
      continue;
    }

    const std::uint32_t n_tails = static_cast<std::uint32_t>(sel.tails.size());
    std::vector<std::uint32_t> heads, rels, seg_ids;
    heads.reserve(sel.edges.size());
    rels.reserve(sel.edges.size());
    seg_ids.reserve(sel.edges.size());
    {
      std::uint32_t ti = 0;
      for (EdgeId e : sel.edges) {  // grouped by tail ascending
        const Triplet& tr = graph.edge(e);
        while (sel.tails[ti] != tr.tail) ++ti;
        heads.push_back(tr.head);
        rels.push_back(tr.relation);
        seg_ids.push_back(ti);
      }
    }

    Tensor rel_table = relation_table(tape, leaves, t, q_row);
    Tensor msg = tape.mul(tape.gather_rows(h, heads), tape.gather_rows(rel_table, rels),
                          "message");
    Tensor weighted = tape.scale_rows(msg, tape.gather_rows(s, heads), "priority-weight");

    std::vector<double> bmask(n_tails, 0.0);
    std::vector<std::uint32_t> tail_rows(sel.tails.begin(), sel.tails.end());
    for (std::uint32_t i = 0; i < n_tails; ++i)
      if (sel.tails[i] == source) bmask[i] = 1.0;
    Tensor b_rows = tape.scale_rows(tape.broadcast_row(q_row, n_tails),
                                    tape.constant(n_tails, 1, bmask));
    Tensor new_rows =
        aggregate(tape, weighted, seg_ids, b_rows, n_tails, leaves, t, sel.tails, graph);
    h = tape.scatter_update(h, tail_rows, new_rows);

    if (priority_mode == PriorityMode::kNeural) {
      PriorityOut pr = priority_rows(tape, leaves, new_rows, q_row, "priority.");
      s = tape.scatter_update(s, tail_rows, pr.score);
    }

    out.record.selected_nodes.push_back(std::move(sel.nodes));
    out.record.selected_edges.push_back(std::move(sel.edges));
    out.record.updated_nodes.push_back(std::move(sel.tails));
    out.record.priorities.emplace_back(tape.value(s).begin(), tape.value(s).end());
  }

  out.h = h;
  if (cfg_.shared_predictor || priority_mode != PriorityMode::kNeural) {
    out.scores = s;
  } else {
    out.scores = priority_rows(tape, leaves, h, q_row, "predictor.").score;
  }
  out.stats.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

Model::Forward Model::full_forward(Tape& tape, const KnowledgeGraph& graph, EntityId source,
                                   RelationId query, std::uint32_t steps,
                                   const EdgeMask& mask) const {
  const auto t0 = std::chrono::steady_clock::now();
  const std::uint32_t V = graph.num_entities();
  const std::uint32_t d = cfg_.dim;
  if (source >= V) throw LookupError("source out of range");
  const std::uint32_t visible = graph.num_edges() - mask.hidden_count();

  LeafCache leaves{tape, *params_, {}};
  Tensor q_row = tape.gather_rows(leaves.get("query_embed"), {query});
  Tensor h = tape.scatter_update(tape.zeros(V, d), {source}, q_row);

  // every visible edge, ordered by (tail, edge id); constant across steps
  std::vector<EdgeId> active;
  for (EdgeId e = 0; e < graph.num_edges(); ++e)
    if (mask.is_visible(e)) active.push_back(e);
  std::sort(active.begin(), active.end(), [&](EdgeId a, EdgeId b) {
    const EntityId ta = graph.edge(a).tail, tb = graph.edge(b).tail;
    if (ta != tb) return ta < tb;
    return a < b;
  });
  std::vector<EntityId> tails;
  for (EdgeId e : active) {
    const EntityId tl = graph.edge(e).tail;
    if (tails.empty() || tails.back() != tl) tails.push_back(tl);
  }
  const std::uint32_t n_tails = static_cast<std::uint32_t>(tails.size());
  std::vector<std::uint32_t> heads, rels, seg_ids;
  {
    std::uint32_t ti = 0;
    for (EdgeId e : active) {
      const Triplet& tr = graph.edge(e);
      while (tails[ti] != tr.tail) ++ti;
      heads.push_back(tr.head);
      rels.push_back(tr.relation);
      seg_ids.push_back(ti);
    }
  }

  Forward out;
  for (std::uint32_t t = 0; t < steps; ++t) {
    out.stats.steps.push_back({V, visible, n_tails});
    if (active.empty()) continue;

    Tensor rel_table = relation_table(tape, leaves, t, q_row);
    Tensor msg = tape.mul(tape.gather_rows(h, heads), tape.gather_rows(rel_table, rels),
                          "message");
    Tensor ones = tape.constant(static_cast<std::uint32_t>(active.size()), 1,
                                std::vector<double>(active.size(), 1.0));
    Tensor weighted = tape.scale_rows(msg, ones, "priority-weight");

    std::vector<double> bmask(n_tails, 0.0);
    std::vector<std::uint32_t> tail_rows(tails.begin(), tails.end());
    for (std::uint32_t i = 0; i < n_tails; ++i)
      if (tails[i] == source) bmask[i] = 1.0;
    Tensor b_rows = tape.scale_rows(tape.broadcast_row(q_row, n_tails),
                                    tape.constant(n_tails, 1, bmask));
    Tensor new_rows = aggregate(tape, weighted, seg_ids, b_rows, n_tails, leaves, t, tails, graph);
    h = tape.scatter_update(h, tail_rows, new_rows);
  }
  out.h = h;
  out.scores = priority_rows(tape, leaves, h, q_row,
                             cfg_.shared_predictor ? "priority." : "predictor.").score;
  out.stats.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

std::vector<double> Model::adversarial_weights(const std::vector<double>& negative_scores,
                                               double temperature, double eps) {
  const std::size_t n = negative_scores.size();
  std::vector<double> w(n, n == 0 ? 0.0 : 1.0 / static_cast<double>(n));
  if (temperature <= 0.0 || n == 0) return w;
  // softmax(temperature * logit) over the recorded probabilities
  std::vector<double> logits(n);
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const double p = std::min(1.0 - eps, std::max(eps, negative_scores[i]));
    logits[i] = temperature * std::log(p / (1.0 - p));
    mx = std::max(mx, logits[i]);
  }
  double z = 0.0;
  for (double& l : logits) {
    l = std::exp(l - mx);
    z += l;
  }
  for (std::size_t i = 0; i < n; ++i) w[i] = logits[i] / z;
  return w;
}

Tensor Model::loss_on_tape(Tape& tape, Tensor scores, EntityId positive,
                           const std::vector<EntityId>& negatives, double temperature,
                           double eps, const std::vector<double>* negative_weights) const {
  Tensor p_pos = tape.gather_rows(scores, {positive});
  Tensor pos_term = tape.affine(tape.log(tape.clamp(p_pos, eps, 1.0 - eps)), -1.0, 0.0);
  if (negatives.empty()) return pos_term;

  std::vector<std::uint32_t> neg_rows(negatives.begin(), negatives.end());
  Tensor p_neg = tape.gather_rows(scores, neg_rows);
  std::vector<double> w;
  if (negative_weights) {
    if (negative_weights->size() != negatives.size())
      throw ShapeError("negative weight count != negative count");
    w = *negative_weights;
  } else {
    auto vals = tape.value(p_neg);
    w = adversarial_weights({vals.begin(), vals.end()}, temperature, eps);
  }
  Tensor lg = tape.log(tape.clamp(tape.affine(p_neg, -1.0, 1.0), eps, 1.0 - eps));
  Tensor weighted = tape.scale_rows(lg, tape.constant(static_cast<std::uint32_t>(w.size()), 1, w));
  Tensor neg_term = tape.affine(tape.reduce_sum(weighted), -1.0, 0.0);
  return tape.add(pos_term, neg_term);
}

}  // namespace astarkg
