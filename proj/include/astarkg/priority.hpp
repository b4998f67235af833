#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <span>
#include <unordered_map>
#include <vector>

#include "astarkg/kg.hpp"
#include "astarkg/params.hpp"

namespace astarkg {

// Personalized PageRank from `source` by power iteration over the augmented
// graph: p <- (1-damping) e_u + damping A^T D^-1 p. Dangling mass restarts at
// the source. The result is max-normalized into [0,1].
struct PprConfig {
  double damping = 0.85;
  std::uint32_t iterations = 20;
};

std::vector<double> ppr_scores(const KnowledgeGraph& graph, EntityId source,
                               const PprConfig& cfg = {});

// Augmented out-degree, max-normalized into [0,1].
std::vector<double> degree_scores(const KnowledgeGraph& graph);

// One evaluation of the learned priority for a single state row:
//   hidden = relu([h, q] G1 + g_b1); gate = hidden G2 + g_b2
//   s_vec  = h * gate; score = sigmoid(relu(s_vec F1 + f_b1) F2 + f_b2)
// Used as the plain-math reference for the taped computation (the training
// path builds the same formula on the tape).
struct PriorityEval {
  double score = 0.0;
  std::vector<double> s_vec;
};

PriorityEval neural_priority(std::span<const double> h_row, std::span<const double> q_row,
                             const ParameterStore& params, const std::string& prefix = "");

// Static per-query score providers for the exact-algebra pruned propagation.
class PriorityProvider {
 public:
  virtual ~PriorityProvider() = default;
  virtual std::vector<double> scores(const KnowledgeGraph& graph, EntityId source) = 0;
};

class UnitPriority : public PriorityProvider {
 public:
  std::vector<double> scores(const KnowledgeGraph& graph, EntityId) override {
    return std::vector<double>(graph.num_entities(), 1.0);
  }
};

class DegreePriority : public PriorityProvider {
 public:
  std::vector<double> scores(const KnowledgeGraph& graph, EntityId) override {
    return degree_scores(graph);
  }
};

// Caches per-source vectors; reads are lock-shared, inserts exclusive.
class PprPriority : public PriorityProvider {
 public:
  explicit PprPriority(PprConfig cfg = {}) : cfg_(cfg) {}
  std::vector<double> scores(const KnowledgeGraph& graph, EntityId source) override;

 private:
  PprConfig cfg_;
  std::shared_mutex mu_;
  std::unordered_map<EntityId, std::vector<double>> cache_;
};

class FixedPriority : public PriorityProvider {
 public:
  explicit FixedPriority(std::vector<double> scores) : scores_(std::move(scores)) {}
  std::vector<double> scores(const KnowledgeGraph& graph, EntityId) override {
    if (scores_.size() != graph.num_entities()) throw ShapeError("fixed priority size mismatch");
    return scores_;
  }

 private:
  std::vector<double> scores_;
};

std::unique_ptr<PriorityProvider> make_priority(const std::string& name);

}  // namespace astarkg
