#include "morse/eval.hpp"

#include "morse/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace morse {

void EvalProtocol::validate() const {
  if (num_negatives < 1) throw ConfigError("protocol.num_negatives must be >= 1");
  if (repeats < 1) throw ConfigError("protocol.repeats must be >= 1");
  if (hits_levels.empty()) throw ConfigError("protocol.hits_levels must be nonempty");
  for (int n : hits_levels) {
    if (n < 1) throw ConfigError("protocol.hits_levels entries must be >= 1");
  }
}

std::string to_string(EvalProtocol::Sides sides) {
  switch (sides) {
    case EvalProtocol::Sides::Head: return "head";
    case EvalProtocol::Sides::Tail: return "tail";
    case EvalProtocol::Sides::Both: return "both";
  }
  return "?";
}

Scalar rank_triple(Scalar pos_score, std::span<const Scalar> neg_scores) {
  std::size_t better = 0;
  std::size_t tied = 0;
  for (Scalar s : neg_scores) {
    if (s > pos_score) {
      ++better;
    } else if (s == pos_score) {
      ++tied;
    }
  }
  return 1.0 + Scalar(better) + Scalar(tied) / 2.0;
}

std::vector<EntityId> sample_negative_entities(int entity_count, EntityId exclude,
                                               int count, Rng& rng) {
  if (count > entity_count - 1) {
    throw ContractError("sample_negative_entities: not enough entities");
  }
  std::vector<EntityId> out;
  out.reserve(std::size_t(count));
  if (count == entity_count - 1) {
    for (EntityId e = 0; e < entity_count; ++e) {
      if (e != exclude) out.push_back(e);
    }
    return out;
  }
  std::unordered_set<EntityId> seen;
  while (int(out.size()) < count) {
    EntityId draw = EntityId(rng.below(std::uint64_t(entity_count - 1)));
    if (draw >= exclude) ++draw;
    if (seen.insert(draw).second) out.push_back(draw);
  }
  return out;
}

EvalReport evaluate(const Matrix& embeddings, const ModelParams& params,
                    std::span<const Triple> test, const EvalProtocol& protocol,
                    int workers) {
  protocol.validate();
  const int n = int(embeddings.rows());
  if (n < protocol.num_negatives + 1) {
    throw DataError("evaluate: entity table smaller than num_negatives + 1");
  }
  for (const Triple& t : test) {
    if (t.head < 0 || t.head >= n || t.tail < 0 || t.tail >= n) {
      throw DataError("evaluate: test entity outside the embedding table");
    }
    if (t.relation < 0 || t.relation >= params.cfg.relation_count) {
      throw DataError("evaluate: test relation outside the trained vocabulary");
    }
  }

  std::vector<int> side_list;
  if (protocol.sides != EvalProtocol::Sides::Tail) side_list.push_back(0);  // head
  if (protocol.sides != EvalProtocol::Sides::Head) side_list.push_back(1);  // tail

  const std::size_t per_triple = side_list.size() * std::size_t(protocol.repeats);
  EvalReport report;
  report.ranks.assign(test.size() * per_triple, 0.0);

  parallel_for(test.size(), workers, [&](std::size_t ti) {
    const Triple& triple = test[ti];
    const RowVector h = embeddings.row(triple.head);
    const RowVector r = params.relation_emb.row(triple.relation);
    const RowVector t = embeddings.row(triple.tail);
    const Scalar pos = score(params.cfg.score_kind, h, r, t);

    std::size_t at = ti * per_triple;
    for (int side : side_list) {
      const EntityId truth = side == 0 ? triple.head : triple.tail;
      for (int rep = 0; rep < protocol.repeats; ++rep) {
        Rng rng(derive_seed(protocol.seed, ti, std::uint64_t(side),
                            std::uint64_t(rep)));
        const std::vector<EntityId> candidates =
            sample_negative_entities(n, truth, protocol.num_negatives, rng);
        std::vector<Scalar> neg_scores;
        neg_scores.reserve(candidates.size());
        for (EntityId c : candidates) {
          const RowVector cand = embeddings.row(c);
          neg_scores.push_back(side == 0
                                   ? score(params.cfg.score_kind, cand, r, t)
                                   : score(params.cfg.score_kind, h, r, cand));
        }
        report.ranks[at++] = rank_triple(pos, neg_scores);
      }
    }
  });

  report.record_count = report.ranks.size();
  Scalar sum_recip = 0.0;
  for (Scalar rank : report.ranks) sum_recip += 1.0 / rank;
  report.mrr = report.ranks.empty() ? 0.0 : sum_recip / Scalar(report.ranks.size());
  for (int level : protocol.hits_levels) {
    std::size_t hit = 0;
    for (Scalar rank : report.ranks) {
      if (rank <= Scalar(level)) ++hit;
    }
    report.hits[level] =
        report.ranks.empty() ? 0.0 : Scalar(hit) / Scalar(report.ranks.size());
  }
  report.num_negatives = protocol.num_negatives;
  report.repeats = protocol.repeats;
  report.sides = to_string(protocol.sides);
  report.seed = protocol.seed;
  return report;
}

SparsifyResult sparsify_target(const KnowledgeGraph& graph, Scalar keep_ratio,
                               Rng& rng) {
  if (!(keep_ratio > 0.0 && keep_ratio <= 1.0)) {
    throw ConfigError("sparsify_target: keep_ratio must be in (0, 1]");
  }
  const std::size_t total = graph.triples().size();
  const std::size_t keep = std::size_t(std::ceil(keep_ratio * Scalar(total)));

  // Seeded shuffle-prefix selection, then restore triple-list order.
  std::vector<std::size_t> order(total);
  for (std::size_t i = 0; i < total; ++i) order[i] = i;
  rng.shuffle(order);
  order.resize(keep);
  std::sort(order.begin(), order.end());

  std::vector<char> used(std::size_t(graph.entity_count()), 0);
  std::vector<Triple> kept;
  kept.reserve(keep);
  for (std::size_t i : order) {
    const Triple& t = graph.triples()[i];
    kept.push_back(t);
    used[std::size_t(t.head)] = 1;
    used[std::size_t(t.tail)] = 1;
  }
  if (kept.empty()) throw DataError("sparsify_target: no triples left");

  SparsifyResult result;
  result.kept_triples = keep;
  result.old_to_new.assign(std::size_t(graph.entity_count()), EntityId(-1));
  std::vector<std::string> labels;
  EntityId next = 0;
  for (EntityId e = 0; e < graph.entity_count(); ++e) {
    if (used[std::size_t(e)]) {
      result.old_to_new[std::size_t(e)] = next++;
      if (!graph.entity_labels().empty()) {
        labels.push_back(graph.entity_labels()[std::size_t(e)]);
      }
    }
  }
  std::vector<Triple> remapped;
  remapped.reserve(kept.size());
  for (const Triple& t : kept) {
    remapped.push_back(Triple{result.old_to_new[std::size_t(t.head)], t.relation,
                              result.old_to_new[std::size_t(t.tail)]});
  }
  result.graph = build_graph(std::move(remapped), int(next), graph.relation_count(),
                             std::move(labels), graph.relation_labels());
  return result;
}

std::pair<std::vector<Triple>, std::size_t> remap_triples(
    std::span<const Triple> triples, std::span<const EntityId> old_to_new) {
  std::vector<Triple> out;
  std::size_t excluded = 0;
  for (const Triple& t : triples) {
    const EntityId h = old_to_new[std::size_t(t.head)];
    const EntityId tl = old_to_new[std::size_t(t.tail)];
    if (h < 0 || tl < 0) {
      ++excluded;
      continue;
    }
    out.push_back(Triple{h, t.relation, tl});
  }
  return {std::move(out), excluded};
}

EvalReport run_ablation(Variant variant, const InductiveSplit& split,
                        const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                        const EvalProtocol& protocol, const ProgressFn& progress) {
  auto [params, log] = meta_train(split.source, model_cfg, train_cfg, variant, progress);

  EmbedOptions opts;
  Matrix random_init;
  if (variant == Variant::NoInitializer) {
    Rng rng(derive_seed(protocol.seed, 0xada9));
    const Scalar bound = 1.0 / std::sqrt(Scalar(model_cfg.dim));
    random_init.resize(split.target_support.entity_count(), model_cfg.dim);
    for (Index i = 0; i < random_init.rows(); ++i) {
      for (Index j = 0; j < random_init.cols(); ++j) {
        random_init(i, j) = rng.uniform(-bound, bound);
      }
    }
    opts.use_initializer = false;
    opts.random_init = &random_init;
  }
  if (variant == Variant::NoModulator) opts.use_modulator = false;

  const Matrix embeddings = adapt_freeze(params, split.target_support, opts);
  return evaluate(embeddings, params, split.target_test, protocol, train_cfg.workers);
}

}  // namespace morse
