#include "morse/scoring.hpp"

#include <algorithm>
#include <cmath>

namespace morse {

ScoreKind score_kind_from_string(const std::string& name) {
  if (name == "transe") return ScoreKind::TransE;
  if (name == "distmult") return ScoreKind::DistMult;
  if (name == "complex") return ScoreKind::ComplEx;
  if (name == "rotate") return ScoreKind::RotatE;
  throw ConfigError("unknown score kind: '" + name +
                    "' (expected transe|distmult|complex|rotate)");
}

std::string to_string(ScoreKind kind) {
  switch (kind) {
    case ScoreKind::TransE: return "transe";
    case ScoreKind::DistMult: return "distmult";
    case ScoreKind::ComplEx: return "complex";
    case ScoreKind::RotatE: return "rotate";
  }
  return "?";
}

bool is_complex_kind(ScoreKind kind) {
  return kind == ScoreKind::ComplEx || kind == ScoreKind::RotatE;
}

void LossConfig::validate() const {
  if (gamma < 0) throw ConfigError("loss.gamma must be >= 0");
  if (k < 1) throw ConfigError("loss.k must be >= 1");
  if (beta < 0) throw ConfigError("loss.beta must be >= 0");
}

namespace {

void check_widths(ScoreKind kind, Index h, Index r, Index t) {
  if (h != t) throw ShapeError("score: head and tail widths differ");
  switch (kind) {
    case ScoreKind::TransE:
    case ScoreKind::DistMult:
      if (r != h) throw ShapeError("score: relation width must equal entity width");
      break;
    case ScoreKind::ComplEx:
      if (h % 2 != 0) throw ShapeError("score: complex layout needs even width");
      if (r != h) throw ShapeError("score: relation width must equal entity width");
      break;
    case ScoreKind::RotatE:
      if (h % 2 != 0) throw ShapeError("score: complex layout needs even width");
      if (r * 2 != h) throw ShapeError("score: rotate relation holds d/2 phases");
      break;
  }
}

}  // namespace

Scalar score(ScoreKind kind, const RowVector& h, const RowVector& r, const RowVector& t) {
  check_widths(kind, h.size(), r.size(), t.size());
  switch (kind) {
    case ScoreKind::TransE:
      return -(h + r - t).norm();
    case ScoreKind::DistMult:
      return h.cwiseProduct(r).dot(t);
    case ScoreKind::ComplEx: {
      // Re(sum_i h_i r_i conj(t_i)) with interleaved pairs.
      Scalar acc = 0.0;
      for (Index j = 0; j < h.size(); j += 2) {
        const Scalar pr = h[j] * r[j] - h[j + 1] * r[j + 1];
        const Scalar pi = h[j] * r[j + 1] + h[j + 1] * r[j];
        acc += pr * t[j] + pi * t[j + 1];
      }
      return acc;
    }
    case ScoreKind::RotatE: {
      Scalar acc = 0.0;
      for (Index j = 0; j < r.size(); ++j) {
        const Scalar c = std::cos(r[j]);
        const Scalar s = std::sin(r[j]);
        const Scalar dr = h[2 * j] * c - h[2 * j + 1] * s - t[2 * j];
        const Scalar di = h[2 * j] * s + h[2 * j + 1] * c - t[2 * j + 1];
        acc += dr * dr + di * di;
      }
      return -std::sqrt(acc);
    }
  }
  throw ContractError("score: unreachable");
}

ad::Var score_batch(ScoreKind kind, ad::Var h_rows, ad::Var r_rows, ad::Var t_rows) {
  check_widths(kind, h_rows.cols(), r_rows.cols(), t_rows.cols());
  switch (kind) {
    case ScoreKind::TransE:
      return ad::scalar_mul(ad::row_l2_norm(ad::sub(ad::add(h_rows, r_rows), t_rows)), -1.0);
    case ScoreKind::DistMult:
      return ad::row_sum(ad::mul(ad::mul(h_rows, r_rows), t_rows));
    case ScoreKind::ComplEx:
      // Re((h*r) . conj(t)) = sum over pairs of (h*r) elementwise t.
      return ad::row_sum(ad::mul(ad::complex_hadamard(h_rows, r_rows), t_rows));
    case ScoreKind::RotatE: {
      ad::Var rot = ad::phase_to_complex(r_rows);
      return ad::scalar_mul(
          ad::row_l2_norm(ad::sub(ad::complex_hadamard(h_rows, rot), t_rows)), -1.0);
    }
  }
  throw ContractError("score_batch: unreachable");
}

std::vector<Triple> sample_negatives(const Triple& positive, int entity_count, int k,
                                     Rng& rng) {
  if (entity_count < 2) {
    throw ContractError("sample_negatives: need at least 2 entities");
  }
  std::vector<Triple> out;
  out.reserve(std::size_t(k));
  for (int i = 0; i < k; ++i) {
    const bool corrupt_head = rng.coin();
    const EntityId original = corrupt_head ? positive.head : positive.tail;
    // Uniform over the entity_count-1 alternatives.
    EntityId draw = EntityId(rng.below(std::uint64_t(entity_count - 1)));
    if (draw >= original) ++draw;
    Triple neg = positive;
    (corrupt_head ? neg.head : neg.tail) = draw;
    out.push_back(neg);
  }
  return out;
}

Matrix self_adv_weights(const Matrix& neg_scores, Scalar beta) {
  Matrix w(neg_scores.rows(), neg_scores.cols());
  for (Index i = 0; i < neg_scores.rows(); ++i) {
    const Scalar m = neg_scores.row(i).maxCoeff();
    Eigen::Array<Scalar, 1, Eigen::Dynamic> e =
        ((neg_scores.row(i).array() - m) * beta).exp();
    w.row(i) = e / e.sum();
  }
  return w;
}

Scalar self_adv_loss(const ScoredBatch& batch, const LossConfig& cfg) {
  cfg.validate();
  if (batch.positive.cols() != 1 || batch.positive.rows() != batch.negative.rows()) {
    throw ShapeError("self_adv_loss: batch shapes inconsistent");
  }
  if (!batch.positive.allFinite() || !batch.negative.allFinite()) {
    throw NumericError("self_adv_loss: non-finite scores");
  }
  const Matrix p = self_adv_weights(batch.negative, cfg.beta);
  Scalar loss = 0.0;
  for (Index q = 0; q < batch.positive.rows(); ++q) {
    loss -= ad::stable_log_sigmoid(cfg.gamma + batch.positive(q, 0));
    for (Index i = 0; i < batch.negative.cols(); ++i) {
      loss -= p(q, i) * ad::stable_log_sigmoid(-cfg.gamma - batch.negative(q, i));
    }
  }
  return loss;
}

ad::Var self_adv_loss(ad::Var pos_scores, ad::Var neg_scores, int k,
                      const LossConfig& cfg, const Matrix* fixed_weights) {
  cfg.validate();
  if (pos_scores.cols() != 1 || neg_scores.cols() != 1) {
    throw ShapeError("self_adv_loss: scores must be column vectors");
  }
  if (neg_scores.rows() != pos_scores.rows() * k) {
    throw ShapeError("self_adv_loss: negative count must be q*k");
  }

  // Adversarial weights from current values; constant on the tape by design.
  const Index q = pos_scores.rows();
  Matrix w;
  if (fixed_weights != nullptr) {
    if (fixed_weights->rows() != q || fixed_weights->cols() != k) {
      throw ShapeError("self_adv_loss: fixed_weights must be q x k");
    }
    w = *fixed_weights;
  } else {
    Matrix neg_by_query(q, k);
    for (Index i = 0; i < q; ++i) {
      for (Index j = 0; j < k; ++j) {
        neg_by_query(i, j) = neg_scores.value()(i * k + j, 0);
      }
    }
    w = self_adv_weights(neg_by_query, cfg.beta);
  }
  Matrix w_flat(q * Index(k), 1);
  for (Index i = 0; i < q; ++i) {
    for (Index j = 0; j < k; ++j) {
      w_flat(i * k + j, 0) = w(i, j);
    }
  }

  ad::Var pos_term = ad::sum(ad::log_sigmoid(ad::add_scalar(pos_scores, cfg.gamma)));
  ad::Var neg_term = ad::sum(ad::mul_const(
      ad::log_sigmoid(ad::scalar_mul(ad::add_scalar(neg_scores, cfg.gamma), -1.0)),
      w_flat));
  return ad::scalar_mul(ad::add(pos_term, neg_term), -1.0);
}

}  // namespace morse
