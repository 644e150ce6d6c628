#pragma once

#include "morse/autodiff.hpp"
#include "morse/kg.hpp"
#include "morse/rng.hpp"
#include "morse/types.hpp"

#include <string>
#include <vector>

namespace morse {

enum class ScoreKind { TransE, DistMult, ComplEx, RotatE };

ScoreKind score_kind_from_string(const std::string& name);
std::string to_string(ScoreKind kind);
bool is_complex_kind(ScoreKind kind);

struct LossConfig {
  Scalar gamma = 10.0;        // fixed margin
  int k = 32;                 // negatives per positive
  Scalar beta = 1.0;          // self-adversarial temperature
  bool filter_negatives = false;
  void validate() const;
};

struct ScoredBatch {
  Matrix positive;  // q x 1
  Matrix negative;  // q x k
};

// Score of one triple from embedding rows. h/t are d-wide; r is d-wide except
// RotatE, whose relation row holds d/2 phases. Complex kinds read h/t as
// interleaved (re, im) pairs.
Scalar score(ScoreKind kind, const RowVector& h, const RowVector& r, const RowVector& t);

// Taped batch scoring: one score per row of the gathered embedding rows.
ad::Var score_batch(ScoreKind kind, ad::Var h_rows, ad::Var r_rows, ad::Var t_rows);

// Each negative corrupts head or tail (fair coin) with a uniform entity
// different from the original at that slot.
std::vector<Triple> sample_negatives(const Triple& positive, int entity_count, int k,
                                     Rng& rng);

// Row-wise softmax of beta * scores; the self-adversarial weights of the loss.
Matrix self_adv_weights(const Matrix& neg_scores, Scalar beta);

// Self-adversarial negative-sampling loss, summed over the batch's queries.
// The adversarial weights are treated as constants (no gradient flows through
// the softmax).
Scalar self_adv_loss(const ScoredBatch& batch, const LossConfig& cfg);

// Taped counterpart used in training. neg_scores is flattened (q*k) x 1 with
// a query's k negatives contiguous. fixed_weights (q x k), when given,
// replaces the weight softmax; the gradient checker uses it to keep the
// stop-gradient weights constant across finite-difference evaluations.
ad::Var self_adv_loss(ad::Var pos_scores, ad::Var neg_scores, int k,
                      const LossConfig& cfg, const Matrix* fixed_weights = nullptr);

}  // namespace morse
