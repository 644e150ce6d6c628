#include "morse/sampler.hpp"

#include "morse/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_map>

namespace morse {

void SamplerConfig::validate() const {
  if (n_rw < 1) throw ConfigError("sampler.n_rw must be >= 1");
  if (l_rw < 1) throw ConfigError("sampler.l_rw must be >= 1");
  if (t_rw < 1) throw ConfigError("sampler.t_rw must be >= 1");
  if (!(query_fraction > 0.0 && query_fraction < 1.0)) {
    throw ConfigError("sampler.query_fraction must be in (0, 1)");
  }
}

namespace {

// One undirected walk; appends every visited entity (including the start).
void walk_from(const KnowledgeGraph& graph, EntityId start, int length, Rng& rng,
               std::vector<EntityId>& order,
               std::unordered_set<EntityId>& members) {
  EntityId at = start;
  if (members.insert(at).second) order.push_back(at);
  for (int step = 0; step < length; ++step) {
    const auto& out = graph.out_neighbors(at);
    const auto& in = graph.in_neighbors(at);
    const std::size_t degree = out.size() + in.size();
    // Isolated entities are rejected at graph construction.
    const std::size_t pick = std::size_t(rng.below(degree));
    at = pick < out.size() ? out[pick].first : in[pick - out.size()].first;
    if (members.insert(at).second) order.push_back(at);
  }
}

}  // namespace

std::vector<EntityId> sample_entity_set(const KnowledgeGraph& graph,
                                        const SamplerConfig& cfg, Rng& rng) {
  cfg.validate();
  if (graph.entity_count() == 0) throw ContractError("sample_entity_set: empty graph");

  std::vector<EntityId> order;
  std::unordered_set<EntityId> members;

  const EntityId seed = EntityId(rng.below(std::uint64_t(graph.entity_count())));
  for (int w = 0; w < cfg.n_rw; ++w) {
    walk_from(graph, seed, cfg.l_rw, rng, order, members);
  }
  for (int rep = 0; rep < cfg.t_rw; ++rep) {
    const EntityId next = order[std::size_t(rng.below(order.size()))];
    for (int w = 0; w < cfg.n_rw; ++w) {
      walk_from(graph, next, cfg.l_rw, rng, order, members);
    }
  }
  return order;
}

std::vector<Triple> induce_subkg(const KnowledgeGraph& graph,
                                 const std::vector<EntityId>& entities) {
  if (entities.empty()) throw ContractError("induce_subkg: empty entity set");
  std::unordered_set<EntityId> member(entities.begin(), entities.end());

  // Scan out-adjacency of the member entities in ascending id order; the
  // within-entity order follows the triple list.
  std::vector<EntityId> sorted(member.begin(), member.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<Triple> induced;
  for (EntityId h : sorted) {
    for (const auto& [t, r] : graph.out_neighbors(h)) {
      if (member.count(t)) induced.push_back(Triple{h, r, t});
    }
  }
  return induced;
}

std::optional<Task> build_task(const std::vector<Triple>& triples,
                               const SamplerConfig& cfg, Rng& rng) {
  cfg.validate();
  if (triples.empty()) throw ContractError("build_task: empty triple list");

  const std::size_t n = triples.size();
  const std::size_t want_query =
      std::size_t(std::ceil(cfg.query_fraction * Scalar(n)));

  std::vector<std::size_t> picks(n);
  for (std::size_t i = 0; i < n; ++i) picks[i] = i;
  rng.shuffle(picks);
  picks.resize(want_query);

  // Support occurrences per entity; a query pick that would zero one out is
  // returned to support.
  std::unordered_map<EntityId, int> support_degree;
  for (const Triple& t : triples) {
    support_degree[t.head]++;
    support_degree[t.tail]++;
  }
  std::vector<char> is_query(n, 0);
  for (std::size_t pick : picks) {
    const Triple& t = triples[pick];
    const int need_head = t.head == t.tail ? 2 : 1;
    if (support_degree[t.head] - need_head < 1) continue;
    if (support_degree[t.tail] - 1 < 1) continue;
    support_degree[t.head] -= t.head == t.tail ? 2 : 1;
    if (t.head != t.tail) support_degree[t.tail] -= 1;
    is_query[pick] = 1;
  }

  std::vector<Triple> support, query;
  for (std::size_t i = 0; i < n; ++i) {
    (is_query[i] ? query : support).push_back(triples[i]);
  }
  if (query.empty() || support.size() < 2) return std::nullopt;

  // Task-local ids in order of first appearance over support triples.
  std::unordered_map<EntityId, EntityId> entity_map;
  std::unordered_map<RelationId, RelationId> rel_local;
  std::vector<RelationId> relation_map;
  auto map_entity = [&](EntityId e) {
    auto [it, inserted] = entity_map.emplace(e, EntityId(entity_map.size()));
    return it->second;
  };
  auto map_relation = [&](RelationId r) {
    auto [it, inserted] = rel_local.emplace(r, RelationId(relation_map.size()));
    if (inserted) relation_map.push_back(r);
    return it->second;
  };

  std::vector<Triple> local_support;
  local_support.reserve(support.size());
  for (const Triple& t : support) {
    local_support.push_back(
        Triple{map_entity(t.head), map_relation(t.relation), map_entity(t.tail)});
  }
  if (entity_map.size() < 2) return std::nullopt;

  std::vector<Triple> local_query;
  local_query.reserve(query.size());
  for (const Triple& t : query) {
    // Repair guarantees query entities kept support occurrences.
    local_query.push_back(
        Triple{entity_map.at(t.head), map_relation(t.relation), entity_map.at(t.tail)});
  }

  Task task{build_graph(std::move(local_support), int(entity_map.size()),
                        int(relation_map.size())),
            std::move(local_query), std::move(relation_map)};
  return task;
}

Task sample_task(const KnowledgeGraph& graph, const SamplerConfig& cfg,
                 std::uint64_t task_seed) {
  constexpr int kMaxRetries = 100;
  Rng rng(task_seed);
  for (int attempt = 0; attempt < kMaxRetries; ++attempt) {
    const std::vector<EntityId> entities = sample_entity_set(graph, cfg, rng);
    const std::vector<Triple> induced = induce_subkg(graph, entities);
    if (induced.size() < 3) continue;
    std::optional<Task> task = build_task(induced, cfg, rng);
    if (task) return std::move(*task);
  }
  throw DataError("sample_task: no valid task after " + std::to_string(kMaxRetries) +
                  " attempts (seed " + std::to_string(task_seed) + ")");
}

std::vector<Task> sample_pool(const KnowledgeGraph& graph, const SamplerConfig& cfg,
                              int count, std::uint64_t stream, int workers) {
  cfg.validate();
  if (count < 0) throw ConfigError("task pool size must be >= 0");
  std::vector<Task> pool;
  pool.resize(std::size_t(count));
  parallel_for(std::size_t(count), workers, [&](std::size_t i) {
    pool[i] = sample_task(graph, cfg, derive_seed(cfg.seed, stream, i));
  });
  return pool;
}

void write_task_pool(const std::filesystem::path& path, const std::vector<Task>& pool) {
  std::ofstream out(path, std::ios::binary);  // binary: LF endings everywhere
  if (!out) throw DataError("cannot open task pool file for writing: " + path.string());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const Task& task = pool[i];
    out << "task\t" << i << "\n";
    for (std::size_t r = 0; r < task.relation_map.size(); ++r) {
      out << "rel\t" << r << "\t" << task.relation_map[r] << "\n";
    }
    for (const Triple& t : task.graph.triples()) {
      out << "s\t" << t.head << "\t" << t.relation << "\t" << t.tail << "\n";
    }
    for (const Triple& t : task.query) {
      out << "q\t" << t.head << "\t" << t.relation << "\t" << t.tail << "\n";
    }
  }
  if (!out) throw DataError("write failed: " + path.string());
}

}  // namespace morse
