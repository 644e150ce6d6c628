#include "morse/kg.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace morse {

int Vocab::intern(const std::string& label) {
  auto it = to_id_.find(label);
  if (it != to_id_.end()) return it->second;
  if (frozen_) throw DataError("unknown label in frozen vocabulary: '" + label + "'");
  int id = int(labels_.size());
  to_id_.emplace(label, id);
  labels_.push_back(label);
  return id;
}

KnowledgeGraph::KnowledgeGraph(int entity_count, int relation_count,
                               std::vector<Triple> triples,
                               std::vector<std::string> entity_labels,
                               std::vector<std::string> relation_labels)
    : entity_count_(entity_count),
      relation_count_(relation_count),
      triples_(std::move(triples)),
      entity_labels_(std::move(entity_labels)),
      relation_labels_(std::move(relation_labels)) {
  if (entity_count_ < 0 || relation_count_ < 0) {
    throw DataError("graph: negative entity or relation count");
  }
  if (!entity_labels_.empty() && int(entity_labels_.size()) != entity_count_) {
    throw DataError("graph: entity label count does not match entity count");
  }
  if (!relation_labels_.empty() && int(relation_labels_.size()) != relation_count_) {
    throw DataError("graph: relation label count does not match relation count");
  }
  for (const Triple& t : triples_) {
    if (t.head < 0 || t.head >= entity_count_ || t.tail < 0 || t.tail >= entity_count_) {
      throw DataError("graph: entity id out of range in triple");
    }
    if (t.relation < 0 || t.relation >= relation_count_) {
      throw DataError("graph: relation id out of range in triple");
    }
  }

  out_relations_.resize(std::size_t(entity_count_));
  in_relations_.resize(std::size_t(entity_count_));
  in_neighbors_.resize(std::size_t(entity_count_));
  out_neighbors_.resize(std::size_t(entity_count_));
  for (const Triple& t : triples_) {
    out_relations_[std::size_t(t.head)].push_back(t.relation);
    in_relations_[std::size_t(t.tail)].push_back(t.relation);
    in_neighbors_[std::size_t(t.tail)].emplace_back(t.head, t.relation);
    out_neighbors_[std::size_t(t.head)].emplace_back(t.tail, t.relation);
  }
  for (auto& rels : out_relations_) {
    std::sort(rels.begin(), rels.end());
    rels.erase(std::unique(rels.begin(), rels.end()), rels.end());
  }
  for (auto& rels : in_relations_) {
    std::sort(rels.begin(), rels.end());
    rels.erase(std::unique(rels.begin(), rels.end()), rels.end());
  }

  std::vector<EntityId> isolated;
  for (EntityId e = 0; e < entity_count_; ++e) {
    if (out_relations_[std::size_t(e)].empty() && in_relations_[std::size_t(e)].empty()) {
      isolated.push_back(e);
    }
  }
  if (!isolated.empty()) {
    std::ostringstream msg;
    msg << "graph: " << isolated.size() << " isolated entities (ids";
    for (std::size_t i = 0; i < isolated.size() && i < 10; ++i) msg << ' ' << isolated[i];
    if (isolated.size() > 10) msg << " ...";
    msg << ")";
    throw DataError(msg.str());
  }
}

KnowledgeGraph build_graph(std::vector<Triple> triples, int entity_count,
                           int relation_count, std::vector<std::string> entity_labels,
                           std::vector<std::string> relation_labels) {
  return KnowledgeGraph(entity_count, relation_count, std::move(triples),
                        std::move(entity_labels), std::move(relation_labels));
}

KnowledgeGraph relabel(const KnowledgeGraph& graph, std::span<const EntityId> perm) {
  const int n = graph.entity_count();
  if (int(perm.size()) != n) throw DataError("relabel: permutation size mismatch");
  std::vector<char> seen(std::size_t(n), 0);
  for (EntityId p : perm) {
    if (p < 0 || p >= n || seen[std::size_t(p)]) {
      throw DataError("relabel: not a bijection on [0, entity_count)");
    }
    seen[std::size_t(p)] = 1;
  }

  std::vector<Triple> mapped;
  mapped.reserve(graph.triples().size());
  for (const Triple& t : graph.triples()) {
    mapped.push_back(Triple{perm[std::size_t(t.head)], t.relation, perm[std::size_t(t.tail)]});
  }
  std::vector<std::string> labels;
  if (!graph.entity_labels().empty()) {
    labels.resize(std::size_t(n));
    for (EntityId e = 0; e < n; ++e) {
      labels[std::size_t(perm[std::size_t(e)])] = graph.entity_labels()[std::size_t(e)];
    }
  }
  return KnowledgeGraph(n, graph.relation_count(), std::move(mapped), std::move(labels),
                        graph.relation_labels());
}

std::vector<Triple> load_triples(const std::filesystem::path& path, Vocab& entities,
                                 Vocab& relations) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open triple file: " + path.string());

  std::vector<Triple> triples;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    const std::size_t tab1 = line.find('\t');
    const std::size_t tab2 = tab1 == std::string::npos ? std::string::npos
                                                       : line.find('\t', tab1 + 1);
    if (tab1 == std::string::npos || tab2 == std::string::npos ||
        line.find('\t', tab2 + 1) != std::string::npos) {
      throw DataError("malformed triple at " + path.string() + ":" +
                      std::to_string(line_no) + " (need head<TAB>relation<TAB>tail)");
    }
    const std::string head = line.substr(0, tab1);
    const std::string rel = line.substr(tab1 + 1, tab2 - tab1 - 1);
    const std::string tail = line.substr(tab2 + 1);
    if (head.empty() || rel.empty() || tail.empty()) {
      throw DataError("empty field in triple at " + path.string() + ":" +
                      std::to_string(line_no));
    }
    triples.push_back(Triple{EntityId(entities.intern(head)),
                             RelationId(relations.intern(rel)),
                             EntityId(entities.intern(tail))});
  }
  if (in.bad()) throw DataError("I/O error reading " + path.string());
  return triples;
}

namespace {

std::vector<Triple> load_eval_triples(const std::filesystem::path& path,
                                      Vocab& entities, Vocab& relations) {
  // valid/test triples may not introduce entities absent from target train.
  entities.freeze();
  auto triples = load_triples(path, entities, relations);
  return triples;
}

TargetData load_target_impl(const std::filesystem::path& dir, Vocab& relations,
                            Vocab& target_entities) {
  auto support_triples = load_triples(dir / "target" / "train.txt", target_entities, relations);
  TargetData out{
      build_graph(std::move(support_triples), target_entities.size(), relations.size(),
                  target_entities.labels(), relations.labels()),
      load_eval_triples(dir / "target" / "valid.txt", target_entities, relations),
      load_eval_triples(dir / "target" / "test.txt", target_entities, relations)};
  return out;
}

}  // namespace

InductiveSplit load_split(const std::filesystem::path& dir) {
  Vocab source_entities;
  Vocab relations;
  auto source_triples = load_triples(dir / "source" / "train.txt", source_entities, relations);
  // Target relations must be a subset of source relations.
  relations.freeze();

  Vocab target_entities;
  TargetData target = load_target_impl(dir, relations, target_entities);

  for (const std::string& label : target_entities.labels()) {
    if (source_entities.contains(label)) {
      throw DataError("target entity '" + label + "' also appears in the source KG");
    }
  }

  KnowledgeGraph source = build_graph(std::move(source_triples), source_entities.size(),
                                      relations.size(), source_entities.labels(),
                                      relations.labels());
  return InductiveSplit{std::move(source), std::move(target.support),
                        std::move(target.valid), std::move(target.test)};
}

TargetData load_target(const std::filesystem::path& dir, Vocab& relations) {
  relations.freeze();
  Vocab target_entities;
  return load_target_impl(dir, relations, target_entities);
}

}  // namespace morse
