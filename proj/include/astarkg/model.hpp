#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "astarkg/algebra.hpp"
#include "astarkg/kg.hpp"
#include "astarkg/params.hpp"
#include "astarkg/propagation.hpp"
#include "astarkg/tape.hpp"

namespace astarkg {

enum class Aggregation { kSum, kPna };

struct ModelConfig {
  std::uint32_t dim = 32;
  std::uint32_t steps = 8;
  std::uint32_t num_relations = 0;  // augmented count (2R)
  std::uint32_t g_hidden = 64;      // priority gate net hidden width
  std::uint32_t f_hidden = 64;      // priority score net hidden width
  EdgeWeightMode edge_mode = EdgeWeightMode::kLinear;
  Aggregation aggregation = Aggregation::kSum;
  bool tied_relation_weights = false;  // one relation table shared across steps
  bool shared_predictor = true;        // final score = the priority itself

  std::string to_json() const;
  static ModelConfig from_json(const std::string& json_text);
};

// How the pruned forward obtains per-node priorities.
enum class PriorityMode {
  kNeural,  // learned priority, recomputed for updated nodes each step
  kUnit,    // constant 1 (selection degenerates to insertion order)
  kStatic,  // caller-provided fixed scores
};

// Vector-algebra propagation on a tape: state h(v) in R^d, messages
// h(x) * w(r) (elementwise), sum or PNA aggregation with the boundary row
// aggregated as one of the inputs, and the learned priority both gating the
// messages and, under weight sharing, producing the final scores.
class Model {
 public:
  Model(ModelConfig cfg, const ParameterStore* params) : cfg_(cfg), params_(params) {}

  const ModelConfig& config() const { return cfg_; }

  static void register_parameters(ParameterStore& store, const ModelConfig& cfg,
                                  std::mt19937_64& rng);

  struct Forward {
    Tensor h;       // |V| x d final states
    Tensor scores;  // |V| x 1 final probabilities
    PropagationStats stats;
    PropagationRecord record;
  };

  // Priority-pruned propagation: each step spends the node budget on reached
  // nodes first (surplus spills over to unreached ones), relaxes the selected
  // out-edges, and recomputes only the touched tails — everything else carries
  // over. When `frozen` is given its recorded selections are replayed instead
  // of being recomputed — that is what makes the loss differentiable-by-replay
  // for grad checks.
  Forward astar_forward(Tape& tape, const KnowledgeGraph& graph, EntityId source,
                        RelationId query, const BudgetConfig& budget, const EdgeMask& mask = {},
                        PriorityMode priority_mode = PriorityMode::kNeural,
                        const std::vector<double>* static_priority = nullptr,
                        const PropagationRecord* frozen = nullptr) const;

  // Unpruned reference: every step relaxes every visible edge, all touched
  // tails recomputed. Written independently of the pruned path (no selection
  // kernels); every visible edge counts as one message each step.
  Forward full_forward(Tape& tape, const KnowledgeGraph& graph, EntityId source,
                       RelationId query, std::uint32_t steps, const EdgeMask& mask = {}) const;

  // Self-adversarial weights over a batch of negative probabilities:
  // softmax(temperature * logit); uniform when temperature <= 0. Factored out
  // so callers can freeze the weights at a reference point — a
  // finite-difference check must perturb the same fixed-weight objective the
  // backward pass differentiates.
  static std::vector<double> adversarial_weights(const std::vector<double>& negative_scores,
                                                 double temperature, double eps = 1e-7);

  // Appends the per-direction BCE loss to the tape: -log p(pos) minus the
  // weighted sum of log(1 - p(neg)). Adversarial weights (temperature > 0)
  // are computed from the logits recorded in `scores` and fixed as constants;
  // pass `negative_weights` to pin them explicitly instead.
  Tensor loss_on_tape(Tape& tape, Tensor scores, EntityId positive,
                      const std::vector<EntityId>& negatives, double temperature = 0.0,
                      double eps = 1e-7,
                      const std::vector<double>* negative_weights = nullptr) const;

 private:
  struct LeafCache;
  struct PriorityOut {
    Tensor score;   // n x 1 sigmoid
    Tensor logit;   // n x 1 pre-sigmoid
  };
  PriorityOut priority_rows(Tape& tape, LeafCache& leaves, Tensor rows, Tensor q_row,
                            const std::string& prefix) const;
  Tensor relation_table(Tape& tape, LeafCache& leaves, std::uint32_t layer, Tensor q_row) const;
  Tensor aggregate(Tape& tape, Tensor weighted_msgs, const std::vector<std::uint32_t>& seg_ids,
                   Tensor boundary_rows, std::uint32_t num_tails, LeafCache& leaves,
                   std::uint32_t layer, const std::vector<EntityId>& tails,
                   const KnowledgeGraph& graph) const;

  ModelConfig cfg_;
  const ParameterStore* params_;
};

}  // namespace astarkg
