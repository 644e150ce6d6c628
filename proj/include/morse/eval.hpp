#pragma once

#include "morse/kg.hpp"
#include "morse/model.hpp"
#include "morse/rng.hpp"
#include "morse/train.hpp"

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace morse {

struct EvalProtocol {
  int num_negatives = 50;
  int repeats = 5;
  enum class Sides { Head, Tail, Both } sides = Sides::Both;
  std::uint64_t seed = 0;
  std::vector<int> hits_levels = {1, 5, 10};
  void validate() const;
};

std::string to_string(EvalProtocol::Sides sides);

struct EvalReport {
  Scalar mrr = 0.0;
  std::map<int, Scalar> hits;
  std::vector<Scalar> ranks;  // one per (triple, side, repeat) record, in order
  // protocol echo
  int num_negatives = 0;
  int repeats = 0;
  std::string sides;
  std::uint64_t seed = 0;
  std::size_t record_count = 0;
  std::size_t excluded_test = 0;
};

// Mid-rank tie handling: 1 + #{better} + #{tied}/2.
Scalar rank_triple(Scalar pos_score, std::span<const Scalar> neg_scores);

// `count` distinct entities from [0, entity_count) \ {exclude}.
std::vector<EntityId> sample_negative_entities(int entity_count, EntityId exclude,
                                               int count, Rng& rng);

// Ranked link prediction against sampled negative candidate entities. Each
// (triple, side, repeat) record draws its candidates from a seed derived from
// (protocol.seed, triple index, side, repeat), so reports do not depend on
// evaluation order.
EvalReport evaluate(const Matrix& embeddings, const ModelParams& params,
                    std::span<const Triple> test, const EvalProtocol& protocol,
                    int workers = 1);

struct SparsifyResult {
  KnowledgeGraph graph;
  std::vector<EntityId> old_to_new;  // -1 for entities dropped as isolated
  std::size_t kept_triples = 0;
};

// Keeps a uniform sample of ceil(keep_ratio * |triples|) support triples;
// entities isolated by the deletion are dropped and ids compacted.
SparsifyResult sparsify_target(const KnowledgeGraph& graph, Scalar keep_ratio,
                               Rng& rng);

// Test triples surviving a sparsified entity mapping, plus the excluded count.
std::pair<std::vector<Triple>, std::size_t> remap_triples(
    std::span<const Triple> triples, std::span<const EntityId> old_to_new);

// Meta-trains the given variant on the split's source KG and evaluates frozen
// on the target test triples.
EvalReport run_ablation(Variant variant, const InductiveSplit& split,
                        const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                        const EvalProtocol& protocol,
                        const ProgressFn& progress = nullptr);

}  // namespace morse
