#pragma once

#include "morse/kg.hpp"
#include "morse/rng.hpp"
#include "morse/types.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <unordered_set>
#include <vector>

namespace morse {

struct SamplerConfig {
  int n_rw = 10;               // walks per seed entity
  int l_rw = 5;                // walk length
  int t_rw = 10;               // expansion repetitions
  Scalar query_fraction = 0.1;
  std::uint64_t seed = 0;
  void validate() const;
};

// A sampled sub-KG with task-local contiguous entity ids. Support triples form
// the graph; query triples supply the loss. Every query entity occurs in at
// least one support triple, and every task relation maps back to a source
// relation via relation_map.
struct Task {
  KnowledgeGraph graph;
  std::vector<Triple> query;
  std::vector<RelationId> relation_map;  // task relation id -> source relation id
};

// Random-walk entity collection: a uniform seed entity, n_rw undirected walks
// of length l_rw collecting visits, then t_rw rounds of re-expansion from a
// uniform member of the collected set.
std::vector<EntityId> sample_entity_set(const KnowledgeGraph& graph,
                                        const SamplerConfig& cfg, Rng& rng);

// All source triples with both endpoints inside `entities`. Scans the
// adjacency of the given entities; duplicates preserved.
std::vector<Triple> induce_subkg(const KnowledgeGraph& graph,
                                 const std::vector<EntityId>& entities);

// Splits induced triples into support and query, repairs query picks that
// would orphan an entity, and re-labels entities/relations to task-local ids.
// Empty result means the split degenerated and the caller should resample.
std::optional<Task> build_task(const std::vector<Triple>& triples,
                               const SamplerConfig& cfg, Rng& rng);

// Samples one task end to end with a bounded number of retries.
Task sample_task(const KnowledgeGraph& graph, const SamplerConfig& cfg,
                 std::uint64_t task_seed);

// Fixed pool of tasks; task i uses a seed derived from (cfg.seed, stream, i),
// so pools are reproducible and tasks can be sampled in parallel.
std::vector<Task> sample_pool(const KnowledgeGraph& graph, const SamplerConfig& cfg,
                              int count, std::uint64_t stream, int workers = 1);

// Line-oriented pool dump (TSV, task-local integer labels).
void write_task_pool(const std::filesystem::path& path, const std::vector<Task>& pool);

}  // namespace morse
