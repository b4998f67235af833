#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "astarkg/types.hpp"

namespace astarkg {

// String <-> id table. Ids are assigned in first-appearance order. A frozen
// vocabulary rejects unseen strings instead of growing.
class Vocabulary {
 public:
  EntityId intern(const std::string& name);
  std::optional<std::uint32_t> lookup(const std::string& name) const;
  std::uint32_t require(const std::string& name) const;  // throws LookupError
  const std::string& name(std::uint32_t id) const;
  std::uint32_t size() const { return static_cast<std::uint32_t>(names_.size()); }
  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::uint32_t> ids_;
  bool frozen_ = false;
};

// Reads tab-separated "head<TAB>relation<TAB>tail" lines. Blank lines are
// skipped; anything else malformed raises ParseError with the line number.
std::vector<Triplet> load_tsv(const std::string& path, Vocabulary& entities,
                              Vocabulary& relations);

// Appends an inverse edge (tail, r + num_base_relations, head) for every
// input edge. Relations >= num_base_relations are rejected.
std::vector<Triplet> augment_inverse(const std::vector<Triplet>& base,
                                     std::uint32_t num_base_relations);

inline RelationId inverse_relation(RelationId r, std::uint32_t num_base_relations) {
  return r < num_base_relations ? r + num_base_relations : r - num_base_relations;
}

// Immutable graph over the augmented edge list. Edges are stored twice: CSR
// grouped by head (edge ids are positions in this order) and an index grouped
// by tail for gather-style relaxation.
class KnowledgeGraph {
 public:
  KnowledgeGraph() = default;
  static KnowledgeGraph build(std::uint32_t num_entities, std::uint32_t num_base_relations,
                              const std::vector<Triplet>& augmented_edges);

  std::uint32_t num_entities() const { return num_entities_; }
  std::uint32_t num_base_relations() const { return num_base_relations_; }
  std::uint32_t num_relations() const { return 2 * num_base_relations_; }
  std::uint32_t num_edges() const { return static_cast<std::uint32_t>(edges_.size()); }

  const Triplet& edge(EdgeId e) const { return edges_[e]; }
  const std::vector<Triplet>& edges() const { return edges_; }

  std::span<const Triplet> out_edges(EntityId v) const {
    return {edges_.data() + head_offsets_[v], edges_.data() + head_offsets_[v + 1]};
  }
  EdgeId out_begin(EntityId v) const { return head_offsets_[v]; }
  EdgeId out_end(EntityId v) const { return head_offsets_[v + 1]; }
  const std::vector<EdgeId>& head_offsets() const { return head_offsets_; }

  std::span<const EdgeId> in_edge_ids(EntityId v) const {
    return {in_edge_ids_.data() + in_offsets_[v], in_edge_ids_.data() + in_offsets_[v + 1]};
  }

  std::uint32_t out_degree(EntityId v) const { return head_offsets_[v + 1] - head_offsets_[v]; }
  std::uint32_t in_degree(EntityId v) const { return in_offsets_[v + 1] - in_offsets_[v]; }

 private:
  std::uint32_t num_entities_ = 0;
  std::uint32_t num_base_relations_ = 0;
  std::vector<Triplet> edges_;           // sorted by head, input order preserved within a head
  std::vector<EdgeId> head_offsets_;     // size |V|+1
  std::vector<EdgeId> in_offsets_;       // size |V|+1
  std::vector<EdgeId> in_edge_ids_;      // edge ids grouped by tail
};

// Per-batch edge visibility. visible[e] == 0 hides edge e.
struct EdgeMask {
  std::vector<std::uint8_t> visible;
  bool all_visible = true;

  bool is_visible(EdgeId e) const { return all_visible || visible[e]; }
  std::uint32_t hidden_count() const;
  static EdgeMask none(std::uint32_t num_edges);
};

// Hides every edge matching (u,q,v) or its inverse for each query triplet in
// the batch, parallel duplicates included. Triplets absent from the graph are
// no-ops.
EdgeMask mask_query_edges(const KnowledgeGraph& graph, std::span<const Triplet> batch);

// An evaluation query: rank positive_tails for (head, relation, ?).
struct Query {
  EntityId head = 0;
  RelationId relation = 0;
  std::vector<EntityId> positive_tails;
};

enum class SplitMode { kTransductive, kInductive };

// One self-contained ranking universe: a fact graph plus the query triplets
// expressed in its vocabulary.
struct SplitBundle {
  std::shared_ptr<Vocabulary> entity_vocab;
  std::shared_ptr<Vocabulary> relation_vocab;
  std::vector<Triplet> fact_triplets;  // base edges of the inference graph
  KnowledgeGraph graph;                // augmented fact graph
  std::vector<Triplet> train;
  std::vector<Triplet> valid;
  std::vector<Triplet> test;
};

struct Dataset {
  SplitMode mode = SplitMode::kTransductive;
  SplitBundle main;                          // train facts; train/valid queries
  std::optional<SplitBundle> inductive_test; // fresh entities, shared relations
};

// Loads train.txt/valid.txt/test.txt from dir. If test_graph.txt exists the
// dataset is inductive: test queries rank against that graph under a fresh
// entity vocabulary (relation vocabulary frozen from training).
Dataset load_dataset(const std::string& dir);

// All known-true (h,r,t) triplets as a filter index: (h,r) -> tails.
class FilterIndex {
 public:
  void add(std::span<const Triplet> triplets);
  bool contains(EntityId h, RelationId r, EntityId t) const;
  const std::vector<EntityId>* tails(EntityId h, RelationId r) const;

 private:
  std::unordered_map<std::uint64_t, std::vector<EntityId>> map_;
  static std::uint64_t key(EntityId h, RelationId r) {
    return (static_cast<std::uint64_t>(h) << 32) | r;
  }
};

}  // namespace astarkg
