#include "morse/train.hpp"

#include "morse/eval.hpp"
#include "morse/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <unordered_set>

namespace morse {

namespace {

// Seed-stream tags; every random decision derives from (seed, tag, ...).
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kTrainPoolStream = 2;
constexpr std::uint64_t kValPoolStream = 3;
constexpr std::uint64_t kShuffleStream = 4;
constexpr std::uint64_t kNegativeStream = 5;
constexpr std::uint64_t kRandomInitStream = 6;
constexpr std::uint64_t kValRankStream = 7;

constexpr int kValidationNegatives = 50;
// Triples per optimizer step when training on the whole source KG
// (NoMetaLearning) — the fine-tuning batching convention.
constexpr int kWholeGraphBatch = 512;

std::uint64_t triple_key(const Triple& t) {
  if (t.head >= (1 << 24) || t.tail >= (1 << 24) || t.relation >= (1 << 16)) {
    throw ContractError("triple_key: id out of packing range");
  }
  return (std::uint64_t(t.head) << 40) | (std::uint64_t(t.relation) << 24) |
         std::uint64_t(t.tail);
}

Matrix random_entity_init(Index entities, Index dim, std::uint64_t seed) {
  Rng rng(seed);
  const Scalar bound = 1.0 / std::sqrt(Scalar(dim));
  Matrix m(entities, dim);
  for (Index i = 0; i < entities; ++i) {
    for (Index j = 0; j < dim; ++j) m(i, j) = rng.uniform(-bound, bound);
  }
  return m;
}

struct SlotResult {
  Scalar loss = 0.0;
  std::vector<Matrix> grads;
};

}  // namespace

Variant variant_from_string(const std::string& name) {
  if (name == "full") return Variant::Full;
  if (name == "no_meta_learning") return Variant::NoMetaLearning;
  if (name == "no_initializer") return Variant::NoInitializer;
  if (name == "no_modulator") return Variant::NoModulator;
  throw ConfigError("unknown variant: '" + name + "'");
}

std::string to_string(Variant variant) {
  switch (variant) {
    case Variant::Full: return "full";
    case Variant::NoMetaLearning: return "no_meta_learning";
    case Variant::NoInitializer: return "no_initializer";
    case Variant::NoModulator: return "no_modulator";
  }
  return "?";
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (!(learning_rate > 0)) throw ConfigError("train.learning_rate must be > 0");
  if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
  if (task_pool_size < 1) throw ConfigError("train.task_pool_size must be >= 1");
  if (validation_tasks < 1) throw ConfigError("train.validation_tasks must be >= 1");
  if (workers < 1) throw ConfigError("train.workers must be >= 1");
  loss.validate();
  sampler.validate();
}

void Adam::step(const std::vector<std::pair<std::string, Matrix*>>& params,
                const std::vector<Matrix>& grads) {
  if (grads.size() != params.size()) {
    throw ContractError("Adam::step: gradient count mismatch");
  }
  if (m_.empty()) {
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (const auto& [name, mat] : params) {
      m_.push_back(Matrix::Zero(mat->rows(), mat->cols()));
      v_.push_back(Matrix::Zero(mat->rows(), mat->cols()));
    }
  }
  ++t_;
  const Scalar bc1 = 1.0 - std::pow(beta1_, Scalar(t_));
  const Scalar bc2 = 1.0 - std::pow(beta2_, Scalar(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& p = *params[i].second;
    const Matrix& g = grads[i];
    if (g.rows() != p.rows() || g.cols() != p.cols()) {
      throw ContractError("Adam::step: gradient shape mismatch for " + params[i].first);
    }
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.cwiseProduct(g);
    p.array() -= lr_ * (m_[i].array() / bc1) /
                 ((v_[i].array() / bc2).sqrt() + eps_);
  }
}

TaskBatch make_task_batch(std::span<const Triple> queries,
                          std::span<const RelationId> relation_map, int entity_count,
                          const LossConfig& loss, Rng& rng,
                          const KnowledgeGraph* filter_graph) {
  TaskBatch batch;
  batch.k = loss.k;
  auto global_rel = [&](RelationId r) {
    return relation_map.empty() ? Index(r) : Index(relation_map[std::size_t(r)]);
  };

  std::unordered_set<std::uint64_t> known;
  if (loss.filter_negatives && filter_graph != nullptr) {
    for (const Triple& t : filter_graph->triples()) known.insert(triple_key(t));
    for (const Triple& t : queries) known.insert(triple_key(t));
  }

  for (const Triple& q : queries) {
    batch.pos_h.push_back(q.head);
    batch.pos_r.push_back(global_rel(q.relation));
    batch.pos_t.push_back(q.tail);
    std::vector<Triple> negatives = sample_negatives(q, entity_count, loss.k, rng);
    if (!known.empty()) {
      for (Triple& neg : negatives) {
        // Redraw known-positive corruptions a bounded number of times.
        for (int tries = 0; tries < 50 && known.count(triple_key(neg)); ++tries) {
          neg = sample_negatives(q, entity_count, 1, rng)[0];
        }
      }
    }
    for (const Triple& neg : negatives) {
      batch.neg_h.push_back(neg.head);
      batch.neg_r.push_back(global_rel(neg.relation));
      batch.neg_t.push_back(neg.tail);
    }
  }
  return batch;
}

ad::Var task_loss(ad::Tape& tape, const KnowledgeGraph& graph,
                  const TapedParams& leaves, const ModelConfig& cfg,
                  const TaskBatch& batch, const LossConfig& loss,
                  const EmbedOptions& opts, const Matrix* fixed_weights) {
  ad::Var embeddings = embed_entities(tape, graph, leaves, cfg, opts);

  ad::Var pos = score_batch(cfg.score_kind, ad::gather_rows(embeddings, batch.pos_h),
                            ad::gather_rows(leaves.relation_emb, batch.pos_r),
                            ad::gather_rows(embeddings, batch.pos_t));
  ad::Var neg = score_batch(cfg.score_kind, ad::gather_rows(embeddings, batch.neg_h),
                            ad::gather_rows(leaves.relation_emb, batch.neg_r),
                            ad::gather_rows(embeddings, batch.neg_t));
  return self_adv_loss(pos, neg, batch.k, loss, fixed_weights);
}

Scalar task_query_mrr(const ModelParams& params, const KnowledgeGraph& graph,
                      std::span<const Triple> queries,
                      std::span<const RelationId> relation_map, std::uint64_t seed,
                      int num_negatives, const EmbedOptions& opts) {
  if (queries.empty()) return 0.0;
  const Matrix embeddings = embed_entities(graph, params, opts);
  const int n = graph.entity_count();
  const int count = std::min(num_negatives, n - 1);

  Scalar sum_recip = 0.0;
  std::size_t records = 0;
  for (std::size_t qi = 0; qi < queries.size(); ++qi) {
    const Triple& q = queries[qi];
    const Index rel = relation_map.empty() ? Index(q.relation)
                                           : Index(relation_map[std::size_t(q.relation)]);
    const RowVector r = params.relation_emb.row(rel);
    for (int side = 0; side < 2; ++side) {
      Rng rng(derive_seed(seed, kValRankStream, qi, std::uint64_t(side)));
      const EntityId truth = side == 0 ? q.head : q.tail;
      const std::vector<EntityId> candidates =
          sample_negative_entities(n, truth, count, rng);
      const RowVector h = embeddings.row(q.head);
      const RowVector t = embeddings.row(q.tail);
      const Scalar pos = score(params.cfg.score_kind, h, r, t);
      std::vector<Scalar> neg_scores;
      neg_scores.reserve(candidates.size());
      for (EntityId c : candidates) {
        const RowVector cand = embeddings.row(c);
        neg_scores.push_back(side == 0 ? score(params.cfg.score_kind, cand, r, t)
                                       : score(params.cfg.score_kind, h, r, cand));
      }
      sum_recip += 1.0 / rank_triple(pos, neg_scores);
      ++records;
    }
  }
  return sum_recip / Scalar(records);
}

namespace {

EmbedOptions variant_options(Variant variant, const Matrix* random_init) {
  EmbedOptions opts;
  if (variant == Variant::NoInitializer) {
    opts.use_initializer = false;
    opts.random_init = random_init;
  }
  if (variant == Variant::NoModulator) {
    opts.use_modulator = false;
  }
  return opts;
}

Scalar validation_mrr(const ModelParams& params, const std::vector<Task>& val_pool,
                      Variant variant, const TrainConfig& cfg, int dim, int workers) {
  if (val_pool.empty()) return 0.0;
  std::vector<Scalar> per_task(val_pool.size());
  parallel_for(val_pool.size(), workers, [&](std::size_t i) {
    const Task& task = val_pool[i];
    Matrix random_init;
    EmbedOptions opts;
    if (variant == Variant::NoInitializer) {
      random_init = random_entity_init(task.graph.entity_count(), dim,
                                       derive_seed(cfg.seed, kRandomInitStream, 1, i));
      opts = variant_options(variant, &random_init);
    } else {
      opts = variant_options(variant, nullptr);
    }
    per_task[i] = task_query_mrr(params, task.graph, task.query, task.relation_map,
                                 derive_seed(cfg.seed, kValRankStream, i),
                                 kValidationNegatives, opts);
  });
  Scalar total = 0.0;
  for (Scalar v : per_task) total += v;
  return total / Scalar(per_task.size());
}

}  // namespace

std::pair<ModelParams, TrainLog> meta_train(const KnowledgeGraph& source,
                                            const ModelConfig& model_cfg,
                                            const TrainConfig& cfg, Variant variant,
                                            const ProgressFn& progress) {
  model_cfg.validate();
  cfg.validate();
  if (model_cfg.relation_count != source.relation_count()) {
    throw ConfigError("meta_train: model relation_count (" +
                      std::to_string(model_cfg.relation_count) +
                      ") must match the source KG (" +
                      std::to_string(source.relation_count()) + ")");
  }

  const bool episodic = variant != Variant::NoMetaLearning;
  std::vector<Task> pool;
  if (episodic) {
    pool = sample_pool(source, cfg.sampler, cfg.task_pool_size, kTrainPoolStream,
                       cfg.workers);
  }
  const std::vector<Task> val_pool =
      sample_pool(source, cfg.sampler, cfg.validation_tasks, kValPoolStream,
                  cfg.workers);
  if (progress) {
    std::ostringstream msg;
    msg << "sampled " << pool.size() << " training tasks, " << val_pool.size()
        << " validation tasks";
    progress(msg.str());
  }

  Rng init_rng(derive_seed(cfg.seed, kInitStream));
  ModelParams params = init_params(model_cfg, init_rng);
  params.relation_labels = source.relation_labels();

  Adam adam(cfg.learning_rate);
  TrainLog log;
  ModelParams best = params;
  Scalar best_mrr = -std::numeric_limits<Scalar>::infinity();
  int step_index = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(cfg.seed, kShuffleStream, std::uint64_t(epoch)));

    // The epoch's work units: either task indices or source-triple batches.
    std::vector<std::size_t> order;
    int per_step = 0;
    if (episodic) {
      order.resize(pool.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      shuffle_rng.shuffle(order);
      per_step = cfg.batch_size;
    } else {
      order.resize(source.triples().size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      shuffle_rng.shuffle(order);
      per_step = kWholeGraphBatch;
    }

    const auto registry = params.registry();
    for (std::size_t at = 0; at < order.size(); at += std::size_t(per_step)) {
      const std::size_t batch_end = std::min(order.size(), at + std::size_t(per_step));

      std::vector<SlotResult> slots;
      if (episodic) {
        const std::size_t batch_count = batch_end - at;
        slots.resize(batch_count);
        parallel_for(batch_count, cfg.workers, [&](std::size_t slot) {
          const std::size_t ordinal = at + slot;
          const Task& task = pool[order[ordinal]];
          Rng neg_rng(derive_seed(cfg.seed, kNegativeStream, std::uint64_t(epoch),
                                  ordinal));
          const TaskBatch batch = make_task_batch(
              task.query, task.relation_map, task.graph.entity_count(), cfg.loss,
              neg_rng, &task.graph);

          Matrix random_init;
          EmbedOptions opts;
          if (variant == Variant::NoInitializer) {
            random_init = random_entity_init(
                task.graph.entity_count(), model_cfg.dim,
                derive_seed(cfg.seed, kRandomInitStream, std::uint64_t(epoch), ordinal));
            opts = variant_options(variant, &random_init);
          } else {
            opts = variant_options(variant, nullptr);
          }

          ad::Tape tape;
          TapedParams leaves = make_leaves(tape, params);
          ad::Var loss =
              task_loss(tape, task.graph, leaves, model_cfg, batch, cfg.loss, opts);
          slots[slot].loss = loss.value()(0, 0);
          slots[slot].grads = tape.backward(loss);
        });
      } else {
        // Whole-graph training: one support graph, this step's triples as
        // queries. Negatives range over the full entity set.
        std::vector<Triple> queries;
        queries.reserve(batch_end - at);
        for (std::size_t i = at; i < batch_end; ++i) {
          queries.push_back(source.triples()[order[i]]);
        }
        Rng neg_rng(derive_seed(cfg.seed, kNegativeStream, std::uint64_t(epoch), at));
        const TaskBatch batch =
            make_task_batch(queries, {}, source.entity_count(), cfg.loss, neg_rng,
                            &source);
        ad::Tape tape;
        TapedParams leaves = make_leaves(tape, params);
        ad::Var loss = task_loss(tape, source, leaves, model_cfg, batch, cfg.loss);
        slots.resize(1);
        slots[0].loss = loss.value()(0, 0);
        slots[0].grads = tape.backward(loss);
      }

      // Fixed-order reduction keeps results identical at any worker count.
      Scalar step_loss = 0.0;
      std::vector<Matrix> grads;
      grads.reserve(registry.size());
      for (std::size_t p = 0; p < registry.size(); ++p) {
        grads.push_back(Matrix::Zero(registry[p].second->rows(),
                                     registry[p].second->cols()));
      }
      for (const SlotResult& slot : slots) {
        step_loss += slot.loss;
        for (std::size_t p = 0; p < grads.size(); ++p) grads[p] += slot.grads[p];
      }
      if (!std::isfinite(step_loss)) {
        throw NumericError("meta_train: non-finite loss at step " +
                           std::to_string(step_index));
      }
      adam.step(registry, grads);
      log.step_loss.push_back(step_loss);
      ++step_index;
    }

    const Scalar val_mrr =
        validation_mrr(params, val_pool, variant, cfg, model_cfg.dim, cfg.workers);
    log.epoch_val_mrr.push_back(val_mrr);
    if (val_mrr > best_mrr) {
      best_mrr = val_mrr;
      best = params;
      log.selected_epoch = epoch;
    }
    if (progress) {
      std::ostringstream msg;
      msg << "epoch " << epoch << ": mean step loss "
          << (log.step_loss.empty() ? 0.0 : log.step_loss.back()) << ", val MRR "
          << val_mrr;
      progress(msg.str());
    }
  }
  return {std::move(best), std::move(log)};
}

Matrix adapt_freeze(const ModelParams& params, const KnowledgeGraph& target,
                    const EmbedOptions& opts) {
  if (target.relation_count() > params.cfg.relation_count) {
    throw DataError("adapt_freeze: target relations outside the trained vocabulary");
  }
  return embed_entities(target, params, opts);
}

std::pair<ModelParams, TrainLog> finetune(const ModelParams& trained,
                                          const KnowledgeGraph& target,
                                          const TrainConfig& cfg,
                                          const ProgressFn& progress) {
  if (cfg.epochs > 0) {
    cfg.loss.validate();
    if (cfg.batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
    if (!(cfg.learning_rate > 0)) throw ConfigError("train.learning_rate must be > 0");
  }
  if (target.relation_count() > trained.cfg.relation_count) {
    throw DataError("finetune: target relations outside the trained vocabulary");
  }

  ModelParams params = trained;
  Adam adam(cfg.learning_rate);
  TrainLog log;
  const auto registry = params.registry();
  int step_index = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(cfg.seed, kShuffleStream, std::uint64_t(epoch), 1));
    std::vector<std::size_t> order(target.triples().size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    shuffle_rng.shuffle(order);

    for (std::size_t at = 0; at < order.size(); at += std::size_t(cfg.batch_size)) {
      const std::size_t batch_end =
          std::min(order.size(), at + std::size_t(cfg.batch_size));
      std::vector<Triple> queries;
      queries.reserve(batch_end - at);
      for (std::size_t i = at; i < batch_end; ++i) {
        queries.push_back(target.triples()[order[i]]);
      }
      Rng neg_rng(derive_seed(cfg.seed, kNegativeStream, std::uint64_t(epoch), at + 1));
      const TaskBatch batch = make_task_batch(queries, {}, target.entity_count(),
                                              cfg.loss, neg_rng, &target);
      ad::Tape tape;
      TapedParams leaves = make_leaves(tape, params);
      ad::Var loss = task_loss(tape, target, leaves, params.cfg, batch, cfg.loss);
      const Scalar loss_value = loss.value()(0, 0);
      if (!std::isfinite(loss_value)) {
        throw NumericError("finetune: non-finite loss at step " +
                           std::to_string(step_index));
      }
      adam.step(registry, tape.backward(loss));
      log.step_loss.push_back(loss_value);
      ++step_index;
    }
    if (progress) {
      std::ostringstream msg;
      msg << "fine-tune epoch " << epoch << ": last step loss "
          << (log.step_loss.empty() ? 0.0 : log.step_loss.back());
      progress(msg.str());
    }
  }
  log.selected_epoch = cfg.epochs - 1;
  return {std::move(params), std::move(log)};
}

}  // namespace morse
