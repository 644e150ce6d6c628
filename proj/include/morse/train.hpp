#pragma once

#include "morse/model.hpp"
#include "morse/sampler.hpp"
#include "morse/scoring.hpp"

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace morse {

enum class Variant { Full, NoMetaLearning, NoInitializer, NoModulator };

Variant variant_from_string(const std::string& name);
std::string to_string(Variant variant);

struct TrainConfig {
  int batch_size = 64;          // tasks per step (meta-train), triples per step (fine-tune)
  Scalar learning_rate = 0.01;
  int epochs = 10;
  int task_pool_size = 10000;
  int validation_tasks = 200;
  LossConfig loss;
  SamplerConfig sampler;
  std::uint64_t seed = 0;
  int workers = 1;
  void validate() const;
};

struct TrainLog {
  std::vector<Scalar> step_loss;       // summed batch loss per optimizer step
  std::vector<Scalar> epoch_val_mrr;   // empty for fine-tuning
  int selected_epoch = -1;             // arg max of epoch_val_mrr
};

// Adam with bias correction (0.9 / 0.999, eps 1e-8). State is aligned with
// the parameter registry order.
class Adam {
 public:
  explicit Adam(Scalar learning_rate) : lr_(learning_rate) {}
  void step(const std::vector<std::pair<std::string, Matrix*>>& params,
            const std::vector<Matrix>& grads);

 private:
  Scalar lr_;
  Scalar beta1_ = 0.9;
  Scalar beta2_ = 0.999;
  Scalar eps_ = 1e-8;
  std::int64_t t_ = 0;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
};

// Index arrays for one scored batch. Relation ids are global (already mapped
// through Task::relation_map where applicable); entity ids index the rows of
// the embedding matrix being scored against.
struct TaskBatch {
  std::vector<Index> pos_h, pos_r, pos_t;
  std::vector<Index> neg_h, neg_r, neg_t;
  int k = 0;
};

TaskBatch make_task_batch(std::span<const Triple> queries,
                          std::span<const RelationId> relation_map, int entity_count,
                          const LossConfig& loss, Rng& rng,
                          const KnowledgeGraph* filter_graph = nullptr);

// Full loss of one batch on one support graph: embed, score positives and
// negatives, self-adversarial loss. fixed_weights (q x k) bypasses the
// weight softmax; the gradient checker uses it to hold the stop-gradient
// weights constant across finite-difference evaluations.
ad::Var task_loss(ad::Tape& tape, const KnowledgeGraph& graph,
                  const TapedParams& leaves, const ModelConfig& cfg,
                  const TaskBatch& batch, const LossConfig& loss,
                  const EmbedOptions& opts = {},
                  const Matrix* fixed_weights = nullptr);

// Mean reciprocal rank of a task's query triples against sampled negative
// entities (head and tail corruption), used for validation-time checkpoint
// selection.
Scalar task_query_mrr(const ModelParams& params, const KnowledgeGraph& graph,
                      std::span<const Triple> queries,
                      std::span<const RelationId> relation_map, std::uint64_t seed,
                      int num_negatives, const EmbedOptions& opts = {});

using ProgressFn = std::function<void(const std::string&)>;

// Episodic meta-training over a sampled task pool; returns the checkpoint
// with the best validation MRR. Variants implement the ablation suite:
// NoMetaLearning trains on the whole source KG as one permanent task,
// NoInitializer replaces the entity initializer output with fresh random
// vectors, NoModulator skips the GNN and JK stages.
std::pair<ModelParams, TrainLog> meta_train(const KnowledgeGraph& source,
                                            const ModelConfig& model_cfg,
                                            const TrainConfig& cfg,
                                            Variant variant = Variant::Full,
                                            const ProgressFn& progress = nullptr);

// Frozen adaptation: produce target embeddings without touching parameters.
Matrix adapt_freeze(const ModelParams& params, const KnowledgeGraph& target,
                    const EmbedOptions& opts = {});

// Fine-tuning adaptation: keep optimizing on target support triples with the
// full target graph as embedding context. epochs = 0 returns params unchanged.
std::pair<ModelParams, TrainLog> finetune(const ModelParams& params,
                                          const KnowledgeGraph& target,
                                          const TrainConfig& cfg,
                                          const ProgressFn& progress = nullptr);

}  // namespace morse
