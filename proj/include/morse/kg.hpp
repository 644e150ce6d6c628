#pragma once

#include "morse/types.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace morse {

using EntityId = std::int32_t;
using RelationId = std::int32_t;

struct Triple {
  EntityId head{};
  RelationId relation{};
  EntityId tail{};

  friend bool operator==(const Triple&, const Triple&) = default;
  friend auto operator<=>(const Triple&, const Triple&) = default;
};

// Label interning in first-appearance order. A frozen vocab only looks up;
// unknown labels raise DataError naming the label.
class Vocab {
 public:
  int intern(const std::string& label);
  bool contains(const std::string& label) const { return to_id_.count(label) > 0; }
  const std::string& label(int id) const { return labels_.at(std::size_t(id)); }
  const std::vector<std::string>& labels() const { return labels_; }
  int size() const { return int(labels_.size()); }
  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }

 private:
  std::unordered_map<std::string, int> to_id_;
  std::vector<std::string> labels_;
  bool frozen_ = false;
};

// Immutable after construction; safe for concurrent reads.
//
// Adjacency orders are canonical so that downstream float accumulation is
// reproducible and permutation-equivariant:
//   - out_relations / in_relations: sorted unique relation ids (set semantics)
//   - in_neighbors / out_neighbors: one entry per triple occurrence, in
//     triple-list order
class KnowledgeGraph {
 public:
  KnowledgeGraph() = default;  // empty graph; assign before use
  KnowledgeGraph(int entity_count, int relation_count, std::vector<Triple> triples,
                 std::vector<std::string> entity_labels = {},
                 std::vector<std::string> relation_labels = {});

  int entity_count() const { return entity_count_; }
  int relation_count() const { return relation_count_; }
  const std::vector<Triple>& triples() const { return triples_; }

  const std::vector<RelationId>& out_relations(EntityId e) const {
    return out_relations_[std::size_t(e)];
  }
  const std::vector<RelationId>& in_relations(EntityId e) const {
    return in_relations_[std::size_t(e)];
  }
  // (head, relation) pairs of ingoing triples.
  const std::vector<std::pair<EntityId, RelationId>>& in_neighbors(EntityId e) const {
    return in_neighbors_[std::size_t(e)];
  }
  // (tail, relation) pairs of outgoing triples; used by random walks.
  const std::vector<std::pair<EntityId, RelationId>>& out_neighbors(EntityId e) const {
    return out_neighbors_[std::size_t(e)];
  }

  const std::vector<std::string>& entity_labels() const { return entity_labels_; }
  const std::vector<std::string>& relation_labels() const { return relation_labels_; }

 private:
  int entity_count_ = 0;
  int relation_count_ = 0;
  std::vector<Triple> triples_;
  std::vector<std::vector<RelationId>> out_relations_;
  std::vector<std::vector<RelationId>> in_relations_;
  std::vector<std::vector<std::pair<EntityId, RelationId>>> in_neighbors_;
  std::vector<std::vector<std::pair<EntityId, RelationId>>> out_neighbors_;
  std::vector<std::string> entity_labels_;
  std::vector<std::string> relation_labels_;
};

KnowledgeGraph build_graph(std::vector<Triple> triples, int entity_count,
                           int relation_count,
                           std::vector<std::string> entity_labels = {},
                           std::vector<std::string> relation_labels = {});

// Applies an entity permutation: (h,r,t) -> (perm[h], r, perm[t]), preserving
// triple-list order. perm must be a bijection on [0, entity_count).
KnowledgeGraph relabel(const KnowledgeGraph& graph, std::span<const EntityId> perm);

// One triple per nonempty line: head<TAB>relation<TAB>tail. Labels interned
// in first-appearance order; duplicate lines preserved.
std::vector<Triple> load_triples(const std::filesystem::path& path, Vocab& entities,
                                 Vocab& relations);

struct InductiveSplit {
  KnowledgeGraph source;
  KnowledgeGraph target_support;
  std::vector<Triple> target_valid;
  std::vector<Triple> target_test;
};

struct TargetData {
  KnowledgeGraph support;
  std::vector<Triple> valid;
  std::vector<Triple> test;
};

// Directory layout: source/train.txt, target/{train,valid,test}.txt.
// Target relations resolve through the source relation vocabulary; target
// entity labels must be disjoint from source entity labels.
InductiveSplit load_split(const std::filesystem::path& dir);

// Loads only the target side against a fixed relation vocabulary (taken from
// a trained checkpoint). valid/test entities must occur in target train.
TargetData load_target(const std::filesystem::path& dir, Vocab& relations);

}  // namespace morse
