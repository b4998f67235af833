#include "astarkg/kg.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

namespace astarkg {

EntityId Vocabulary::intern(const std::string& name) {
  auto it = ids_.find(name);
  if (it != ids_.end()) return it->second;
  if (frozen_) throw LookupError("unknown name in frozen vocabulary: '" + name + "'");
  std::uint32_t id = static_cast<std::uint32_t>(names_.size());
  names_.push_back(name);
  ids_.emplace(name, id);
  return id;
}

std::optional<std::uint32_t> Vocabulary::lookup(const std::string& name) const {
  auto it = ids_.find(name);
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

std::uint32_t Vocabulary::require(const std::string& name) const {
  auto id = lookup(name);
  if (!id) throw LookupError("unknown name: '" + name + "'");
  return *id;
}

const std::string& Vocabulary::name(std::uint32_t id) const {
  if (id >= names_.size()) throw LookupError("vocabulary id out of range: " + std::to_string(id));
  return names_[id];
}

std::vector<Triplet> load_tsv(const std::string& path, Vocabulary& entities,
                              Vocabulary& relations) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<Triplet> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::size_t t1 = line.find('\t');
    std::size_t t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos || line.find('\t', t2 + 1) != std::string::npos) {
      throw ParseError(path + ":" + std::to_string(lineno) +
                       ": expected head<TAB>relation<TAB>tail, got '" + line + "'");
    }
    std::string h = line.substr(0, t1);
    std::string r = line.substr(t1 + 1, t2 - t1 - 1);
    std::string t = line.substr(t2 + 1);
    if (h.empty() || r.empty() || t.empty()) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": empty field in '" + line + "'");
    }
    Triplet tr;
    tr.head = entities.intern(h);
    tr.relation = relations.intern(r);
    tr.tail = entities.intern(t);
    out.push_back(tr);
  }
  return out;
}

std::vector<Triplet> augment_inverse(const std::vector<Triplet>& base,
                                     std::uint32_t num_base_relations) {
  std::vector<Triplet> out;
  out.reserve(base.size() * 2);
  for (const Triplet& t : base) {
    if (t.relation >= num_base_relations) {
      throw LookupError("augment_inverse: relation id " + std::to_string(t.relation) +
                        " >= num_base_relations " + std::to_string(num_base_relations));
    }
    out.push_back(t);
  }
  for (const Triplet& t : base) {
    out.push_back(Triplet{t.tail, t.relation + num_base_relations, t.head});
  }
  return out;
}

KnowledgeGraph KnowledgeGraph::build(std::uint32_t num_entities, std::uint32_t num_base_relations,
                                     const std::vector<Triplet>& augmented_edges) {
  KnowledgeGraph g;
  g.num_entities_ = num_entities;
  g.num_base_relations_ = num_base_relations;
  const std::uint32_t nrel = 2 * num_base_relations;
  for (const Triplet& t : augmented_edges) {
    if (t.head >= num_entities || t.tail >= num_entities) {
      throw LookupError("edge endpoint out of range");
    }
    if (t.relation >= nrel) throw LookupError("edge relation out of range");
  }
  // counting sort by head keeps input order inside each head bucket
  std::vector<EdgeId> counts(num_entities + 1, 0);
  for (const Triplet& t : augmented_edges) counts[t.head + 1]++;
  g.head_offsets_.assign(num_entities + 1, 0);
  std::partial_sum(counts.begin(), counts.end(), g.head_offsets_.begin());
  g.edges_.resize(augmented_edges.size());
  std::vector<EdgeId> cursor(g.head_offsets_.begin(), g.head_offsets_.end() - 1);
  for (const Triplet& t : augmented_edges) g.edges_[cursor[t.head]++] = t;

  std::vector<EdgeId> in_counts(num_entities + 1, 0);
  for (const Triplet& t : g.edges_) in_counts[t.tail + 1]++;
  g.in_offsets_.assign(num_entities + 1, 0);
  std::partial_sum(in_counts.begin(), in_counts.end(), g.in_offsets_.begin());
  g.in_edge_ids_.resize(g.edges_.size());
  std::vector<EdgeId> in_cursor(g.in_offsets_.begin(), g.in_offsets_.end() - 1);
  for (EdgeId e = 0; e < g.edges_.size(); ++e) g.in_edge_ids_[in_cursor[g.edges_[e].tail]++] = e;
  return g;
}

std::uint32_t EdgeMask::hidden_count() const {
  if (all_visible) return 0;
  std::uint32_t n = 0;
  for (std::uint8_t v : visible)
    if (!v) ++n;
  return n;
}

EdgeMask EdgeMask::none(std::uint32_t) {
  EdgeMask m;
  m.all_visible = true;
  return m;
}

EdgeMask mask_query_edges(const KnowledgeGraph& graph, std::span<const Triplet> batch) {
  EdgeMask m;
  if (batch.empty()) {
    m.all_visible = true;
    return m;
  }
  m.all_visible = false;
  m.visible.assign(graph.num_edges(), 1);
  const std::uint32_t R = graph.num_base_relations();
  bool any_hidden = false;
  auto hide = [&](EntityId h, RelationId r, EntityId t) {
    if (h >= graph.num_entities()) return;
    for (EdgeId e = graph.out_begin(h); e < graph.out_end(h); ++e) {
      const Triplet& tr = graph.edge(e);
      if (tr.relation == r && tr.tail == t) {
        m.visible[e] = 0;
        any_hidden = true;
      }
    }
  };
  for (const Triplet& q : batch) {
    hide(q.head, q.relation, q.tail);
    hide(q.tail, inverse_relation(q.relation, R), q.head);
  }
  if (!any_hidden) {
    m.all_visible = true;
    m.visible.clear();
  }
  return m;
}

namespace {

std::vector<Triplet> load_if_exists(const std::string& path, Vocabulary& ents, Vocabulary& rels) {
  if (!std::filesystem::exists(path)) return {};
  return load_tsv(path, ents, rels);
}

}  // namespace

Dataset load_dataset(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw IoError("dataset directory not found: " + dir);
  const std::string train_path = dir + "/train.txt";
  if (!fs::exists(train_path)) throw IoError("missing " + train_path);

  Dataset ds;
  auto ents = std::make_shared<Vocabulary>();
  auto rels = std::make_shared<Vocabulary>();
  SplitBundle& main = ds.main;
  main.entity_vocab = ents;
  main.relation_vocab = rels;
  main.train = load_tsv(train_path, *ents, *rels);
  main.valid = load_if_exists(dir + "/valid.txt", *ents, *rels);
  main.fact_triplets = main.train;

  const std::string test_graph_path = dir + "/test_graph.txt";
  if (fs::exists(test_graph_path)) {
    ds.mode = SplitMode::kInductive;
    rels->freeze();
    SplitBundle ind;
    auto ind_ents = std::make_shared<Vocabulary>();
    ind.entity_vocab = ind_ents;
    ind.relation_vocab = rels;
    ind.fact_triplets = load_tsv(test_graph_path, *ind_ents, *rels);
    ind.test = load_if_exists(dir + "/test.txt", *ind_ents, *rels);
    ind.graph = KnowledgeGraph::build(ind_ents->size(), rels->size(),
                                      augment_inverse(ind.fact_triplets, rels->size()));
    ds.inductive_test = std::move(ind);
  } else {
    ds.mode = SplitMode::kTransductive;
    main.test = load_if_exists(dir + "/test.txt", *ents, *rels);
  }
  main.graph = KnowledgeGraph::build(ents->size(), rels->size(),
                                     augment_inverse(main.fact_triplets, rels->size()));
  return ds;
}

void FilterIndex::add(std::span<const Triplet> triplets) {
  for (const Triplet& t : triplets) map_[key(t.head, t.relation)].push_back(t.tail);
}

bool FilterIndex::contains(EntityId h, RelationId r, EntityId t) const {
  auto it = map_.find(key(h, r));
  if (it == map_.end()) return false;
  return std::find(it->second.begin(), it->second.end(), t) != it->second.end();
}

const std::vector<EntityId>* FilterIndex::tails(EntityId h, RelationId r) const {
  auto it = map_.find(key(h, r));
  return it == map_.end() ? nullptr : &it->second;
}

}  // namespace astarkg
