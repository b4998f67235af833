#include "astarkg/training.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <utility>

#include <json.hpp>

namespace astarkg {

void TrainConfig::validate() const {
  if (num_negatives < 1) throw BudgetError("num_negatives must be >= 1");
  if (batch_size < 1) throw BudgetError("batch_size must be >= 1");
  if (learning_rate < 0.0) throw BudgetError("learning_rate must be >= 0");
  budget.validate();
}

std::vector<Negative> sample_negatives(const Triplet& positive, std::uint32_t num_entities,
                                       const FilterIndex& train_filter, std::uint32_t n,
                                       std::mt19937_64& rng) {
  std::vector<Negative> out;
  out.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    Negative neg;
    neg.head_corrupted = (rng() & 1ull) != 0;
    Triplet t = positive;
    for (int tries = 0; tries < 100; ++tries) {
      const EntityId cand = static_cast<EntityId>(rng() % num_entities);
      if (neg.head_corrupted)
        t.head = cand;
      else
        t.tail = cand;
      if (!train_filter.contains(t.head, t.relation, t.tail)) break;
    }
    neg.triplet = t;  // after the cap the last draw stands, false negative or not
    out.push_back(neg);
  }
  return out;
}

namespace {

struct DirectionJob {
  EntityId source = 0;
  RelationId relation = 0;
  EntityId answer = 0;
  std::vector<EntityId> negatives;
};

struct DirectionResult {
  LossReport loss;
  std::unordered_map<std::string, std::vector<double>> grads;
  std::uint64_t messages = 0;
  std::uint64_t steps = 0;
};

}  // namespace

EpochReport train_epoch(const Model& model, ParameterStore& params, const SplitBundle& split,
                        const FilterIndex& train_filter, const TrainConfig& cfg,
                        std::uint32_t epoch_index) {
  cfg.validate();
  const KnowledgeGraph& graph = split.graph;
  const std::uint32_t R = graph.num_base_relations();
  std::mt19937_64 rng(cfg.seed + 0x9E3779B97F4A7C15ull * (epoch_index + 1));

  std::vector<std::uint32_t> order(split.train.size());
  for (std::uint32_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);

  EpochReport report;
  for (std::size_t b0 = 0; b0 < order.size(); b0 += cfg.batch_size) {
    const std::size_t b1 = std::min(order.size(), b0 + cfg.batch_size);
    std::vector<Triplet> batch;
    batch.reserve(b1 - b0);
    for (std::size_t i = b0; i < b1; ++i) batch.push_back(split.train[order[i]]);
    const EdgeMask mask = mask_query_edges(graph, batch);

    std::vector<DirectionJob> jobs;
    jobs.reserve(2 * batch.size());
    for (const Triplet& pos : batch) {
      auto negs = sample_negatives(pos, graph.num_entities(), train_filter, cfg.num_negatives,
                                   rng);
      DirectionJob fwd{pos.head, pos.relation, pos.tail, {}};
      DirectionJob inv{pos.tail, inverse_relation(pos.relation, R), pos.head, {}};
      for (const Negative& n : negs)
        (n.head_corrupted ? inv.negatives : fwd.negatives)
            .push_back(n.head_corrupted ? n.triplet.head : n.triplet.tail);
      jobs.push_back(std::move(fwd));
      jobs.push_back(std::move(inv));
    }

    std::vector<DirectionResult> results(jobs.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(static_cast<int>(std::max(1u, cfg.threads)))
#endif
    for (std::int64_t j = 0; j < static_cast<std::int64_t>(jobs.size()); ++j) {
      const DirectionJob& job = jobs[j];
      Tape tape;
      Model::Forward fw = model.astar_forward(tape, graph, job.source, job.relation, cfg.budget,
                                              mask, PriorityMode::kNeural);
      Tensor loss = model.loss_on_tape(tape, fw.scores, job.answer, job.negatives,
                                       cfg.adversarial_temperature);
      tape.backward(loss);
      DirectionResult& res = results[j];
      res.grads = tape.leaf_gradients();
      const auto scores = tape.value(fw.scores);
      std::vector<double> neg_p;
      neg_p.reserve(job.negatives.size());
      for (EntityId v : job.negatives) neg_p.push_back(scores[v]);
      res.loss = bce_loss(scores[job.answer], neg_p, cfg.adversarial_temperature);
      res.messages = fw.stats.total_messages();
      res.steps = fw.stats.steps.size();
    }

    params.zero_grads();
    for (const DirectionResult& res : results) {  // fixed merge order: bitwise deterministic
      if (!std::isfinite(res.loss.total))
        throw std::runtime_error("non-finite loss at epoch " + std::to_string(epoch_index) +
                                 ", batch offset " + std::to_string(b0));
      for (const auto& [name, g] : res.grads) params.accumulate_grad(name, g);
      report.loss += res.loss.total;
      report.positive_term += res.loss.positive_term;
      report.negative_term += res.loss.negative_term;
      report.messages += res.messages;
      report.propagation_steps += res.steps;
    }
    report.directions += results.size();
    params.scale_grads(1.0 / static_cast<double>(results.size()));
    report.grad_norm = params.grad_norm();
    AdamConfig adam;
    adam.lr = cfg.learning_rate;
    params.adam_step(adam);
  }

  if (report.directions > 0) {
    const double inv = 1.0 / static_cast<double>(report.directions);
    report.loss *= inv;
    report.positive_term *= inv;
    report.negative_term *= inv;
  }
  return report;
}

double filtered_rank(std::span<const double> scores, EntityId answer,
                     std::span<const EntityId> known_true, bool filtered) {
  std::vector<std::uint8_t> struck(scores.size(), 0);
  if (filtered)
    for (EntityId v : known_true)
      if (v != answer) struck[v] = 1;
  const double s = scores[answer];
  std::uint64_t greater = 0, tied = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (struck[i]) continue;
    if (scores[i] > s)
      ++greater;
    else if (scores[i] == s)
      ++tied;  // includes the answer itself
  }
  return static_cast<double>(greater) + (static_cast<double>(tied) + 1.0) / 2.0;
}

void RankingReport::finalize() {
  mrr = h1 = h3 = h10 = 0.0;
  if (ranks.empty()) return;
  for (double r : ranks) {
    mrr += 1.0 / r;
    h1 += r <= 1.0 ? 1.0 : 0.0;
    h3 += r <= 3.0 ? 1.0 : 0.0;
    h10 += r <= 10.0 ? 1.0 : 0.0;
  }
  const double inv = 1.0 / static_cast<double>(ranks.size());
  mrr *= inv;
  h1 *= inv;
  h3 *= inv;
  h10 *= inv;
}

std::string RankingReport::to_json() const {
  nlohmann::json j;
  j["mrr"] = mrr;
  j["hits_at_1"] = h1;
  j["hits_at_3"] = h3;
  j["hits_at_10"] = h10;
  j["num_ranked"] = ranks.size();
  j["mean_messages_per_step"] = mean_messages_per_step();
  return j.dump(2);
}

FilterIndex augmented_filter(std::span<const Triplet> triplets,
                             std::uint32_t num_base_relations) {
  std::vector<Triplet> base(triplets.begin(), triplets.end());
  FilterIndex filter;
  filter.add(augment_inverse(base, num_base_relations));
  return filter;
}

RankingReport evaluate(const Model& model, const SplitBundle& universe,
                       std::span<const Triplet> queries, const FilterIndex& filter,
                       const EvalOptions& opt) {
  opt.budget.validate();
  const KnowledgeGraph& graph = universe.graph;
  const std::uint32_t R = graph.num_base_relations();
  const std::size_t nq = opt.max_queries == 0
                             ? queries.size()
                             : std::min<std::size_t>(queries.size(), opt.max_queries);

  struct Direction {
    EntityId source, answer;
    RelationId relation;
  };
  std::vector<Direction> dirs;
  dirs.reserve(2 * nq);
  for (std::size_t i = 0; i < nq; ++i) {
    const Triplet& q = queries[i];
    dirs.push_back({q.head, q.tail, q.relation});
    dirs.push_back({q.tail, q.head, inverse_relation(q.relation, R)});
  }

  RankingReport report;
  report.ranks.assign(dirs.size(), 0.0);
  std::vector<std::uint64_t> msgs(dirs.size(), 0), steps(dirs.size(), 0);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(static_cast<int>(std::max(1u, opt.threads)))
#endif
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(dirs.size()); ++i) {
    const Direction& d = dirs[i];
    Tape tape;
    Model::Forward fw =
        model.astar_forward(tape, graph, d.source, d.relation, opt.budget, EdgeMask{});
    const auto scores = tape.value(fw.scores);
    static const std::vector<EntityId> kNone;
    const std::vector<EntityId>* known = filter.tails(d.source, d.relation);
    report.ranks[i] = filtered_rank(scores, d.answer, known ? *known : kNone, opt.filtered);
    msgs[i] = fw.stats.total_messages();
    steps[i] = fw.stats.steps.size();
  }
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    report.messages += msgs[i];
    report.propagation_steps += steps[i];
  }
  report.finalize();
  return report;
}

Dataset make_synthetic_dataset(const SyntheticSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  const std::uint32_t V = spec.num_entities;
  const std::uint32_t R = 3 * spec.num_rules;  // a_k, b_k -> c_k per rule

  auto bundle = SplitBundle{};
  bundle.entity_vocab = std::make_shared<Vocabulary>();
  bundle.relation_vocab = std::make_shared<Vocabulary>();
  for (std::uint32_t v = 0; v < V; ++v) bundle.entity_vocab->intern("e" + std::to_string(v));
  for (std::uint32_t k = 0; k < spec.num_rules; ++k) {
    bundle.relation_vocab->intern("a" + std::to_string(k));
    bundle.relation_vocab->intern("b" + std::to_string(k));
    bundle.relation_vocab->intern("c" + std::to_string(k));
  }

  std::vector<Triplet> evidence, targets;
  for (std::uint32_t k = 0; k < spec.num_rules; ++k) {
    const RelationId ra = 3 * k, rb = 3 * k + 1, rc = 3 * k + 2;
    auto draw_edges = [&](RelationId r) {
      std::set<std::pair<EntityId, EntityId>> seen;
      std::vector<Triplet> out;
      for (std::uint32_t tries = 0;
           out.size() < spec.edges_per_evidence && tries < 20 * spec.edges_per_evidence;
           ++tries) {
        const EntityId u = static_cast<EntityId>(rng() % V);
        const EntityId w = static_cast<EntityId>(rng() % V);
        if (u == w || !seen.emplace(u, w).second) continue;
        out.push_back({u, r, w});
      }
      return out;
    };
    const auto ea = draw_edges(ra);
    const auto eb = draw_edges(rb);
    evidence.insert(evidence.end(), ea.begin(), ea.end());
    evidence.insert(evidence.end(), eb.begin(), eb.end());

    std::set<std::pair<EntityId, EntityId>> comp;
    for (const Triplet& x : ea)
      for (const Triplet& y : eb)
        if (x.tail == y.head && x.head != y.tail) comp.emplace(x.head, y.tail);
    for (const auto& [u, w] : comp) targets.push_back({u, rc, w});
  }

  std::shuffle(targets.begin(), targets.end(), rng);
  const std::size_t holdout =
      static_cast<std::size_t>(spec.holdout_fraction * static_cast<double>(targets.size()));
  const std::size_t n_valid = holdout / 2, n_test = holdout - n_valid;
  bundle.valid.assign(targets.begin(), targets.begin() + n_valid);
  bundle.test.assign(targets.begin() + n_valid, targets.begin() + n_valid + n_test);

  bundle.fact_triplets = evidence;
  bundle.fact_triplets.insert(bundle.fact_triplets.end(), targets.begin() + holdout,
                              targets.end());
  bundle.train.assign(targets.begin() + holdout, targets.end());
  for (std::size_t i = 0; i < evidence.size(); i += spec.evidence_train_stride)
    bundle.train.push_back(evidence[i]);

  bundle.graph = KnowledgeGraph::build(V, R, augment_inverse(bundle.fact_triplets, R));
  Dataset ds;
  ds.mode = SplitMode::kTransductive;
  ds.main = std::move(bundle);
  return ds;
}

}  // namespace astarkg
