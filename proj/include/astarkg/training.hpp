#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "astarkg/kg.hpp"
#include "astarkg/model.hpp"
#include "astarkg/params.hpp"
#include "astarkg/propagation.hpp"

namespace astarkg {

struct TrainConfig {
  std::uint32_t epochs = 20;
  std::uint32_t batch_size = 256;
  std::uint32_t num_negatives = 32;
  double learning_rate = 5e-3;
  double adversarial_temperature = 0.0;  // 0 = uniform 1/n negative weights
  BudgetConfig budget;
  std::uint64_t seed = 0;
  std::uint32_t threads = 1;

  void validate() const;
};

// One corrupted copy of a positive. The coin decides the side up front; the
// replacement entity is redrawn (up to a cap) while it reproduces a known
// train positive.
struct Negative {
  Triplet triplet;
  bool head_corrupted = false;
};

std::vector<Negative> sample_negatives(const Triplet& positive, std::uint32_t num_entities,
                                       const FilterIndex& train_filter, std::uint32_t n,
                                       std::mt19937_64& rng);

struct EpochReport {
  double loss = 0.0;  // mean BCE per directional query
  double positive_term = 0.0;
  double negative_term = 0.0;
  double grad_norm = 0.0;  // pre-step norm of the last batch
  std::uint64_t directions = 0;
  std::uint64_t messages = 0;
  std::uint64_t propagation_steps = 0;

  double mean_messages_per_step() const {
    return propagation_steps == 0 ? 0.0
                                  : static_cast<double>(messages) /
                                        static_cast<double>(propagation_steps);
  }
};

// One shuffled pass over split.train. Per batch: hide the batch's query edges,
// propagate each positive in both directions (tail query and head query via
// the inverse relation), route each fair-coin negative to the direction that
// scores it, sum per-direction BCE gradients, one Adam step per batch.
EpochReport train_epoch(const Model& model, ParameterStore& params, const SplitBundle& split,
                        const FilterIndex& train_filter, const TrainConfig& cfg,
                        std::uint32_t epoch_index);

struct RankingReport {
  double mrr = 0.0;
  double h1 = 0.0, h3 = 0.0, h10 = 0.0;
  std::vector<double> ranks;  // one per scored direction
  std::uint64_t messages = 0;
  std::uint64_t propagation_steps = 0;

  void finalize();  // fills mrr/h@k from ranks
  double mean_messages_per_step() const {
    return propagation_steps == 0 ? 0.0
                                  : static_cast<double>(messages) /
                                        static_cast<double>(propagation_steps);
  }
  std::string to_json() const;
};

struct EvalOptions {
  BudgetConfig budget;
  bool filtered = true;
  std::uint32_t threads = 1;
  std::uint32_t max_queries = 0;  // 0 = all
};

// Rank of `answer` among `scores` after striking out `known_true` (the answer
// itself excluded). Ties resolve to the mean rank of the tied block.
double filtered_rank(std::span<const double> scores, EntityId answer,
                     std::span<const EntityId> known_true, bool filtered = true);

// Filtered ranking over both directions of every query triplet. `filter` must
// hold all known-true triplets of the universe in augmented form (both
// directions), see augmented_filter.
RankingReport evaluate(const Model& model, const SplitBundle& universe,
                       std::span<const Triplet> queries, const FilterIndex& filter,
                       const EvalOptions& opt);

FilterIndex augmented_filter(std::span<const Triplet> triplets, std::uint32_t num_base_relations);

// Deterministic compositional-rule KG: evidence relations a, b and target
// relation c with planted rule a(x,y) ∧ b(y,z) → c(x,z). A slice of the
// target facts is held out as valid/test queries; their two-hop evidence
// stays in the graph, so path reasoning can recover them.
struct SyntheticSpec {
  std::uint32_t num_entities = 80;
  std::uint32_t edges_per_evidence = 90;
  std::uint32_t num_rules = 3;
  double holdout_fraction = 0.3;  // split evenly between valid and test
  std::uint32_t evidence_train_stride = 4;
  std::uint64_t seed = 7;
};

Dataset make_synthetic_dataset(const SyntheticSpec& spec = {});

}  // namespace astarkg
