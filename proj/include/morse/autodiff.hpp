#pragma once

#include "morse/types.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace morse::ad {

using NodeId = std::int32_t;

// Tensors are dense row-major matrices: scalars are 1x1, vectors 1xn.
// The tape records each forward op; backward replays them once in reverse.
enum class Op : std::uint8_t {
  Leaf,
  Constant,
  Add,
  Sub,
  ScalarMul,
  AddScalar,
  Mul,
  MulConst,
  MatMul,
  GatherRows,
  IndexAddRows,
  Relu,
  ConcatCols,
  SliceCols,
  ScaleRows,
  ScaleRowsConst,
  RowL2Norm,
  RowSum,
  Sum,
  Sigmoid,
  LogSigmoid,
  SoftmaxVec,
  ComplexHadamard,
  PhaseToComplex,
};

const char* op_name(Op op);

class Tape;

// Handle to a tape node; cheap to copy, valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, NodeId id) : tape_(tape), id_(id) {}

  const Matrix& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  NodeId id() const { return id_; }
  Tape* tape() const { return tape_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  NodeId id_ = -1;
};

struct Node {
  Op op = Op::Leaf;
  NodeId a = -1;
  NodeId b = -1;
  std::vector<NodeId> parts;   // ConcatCols inputs
  Matrix value;
  std::vector<Index> idx;      // GatherRows / IndexAddRows row indices
  Vector factors;              // ScaleRowsConst
  Matrix weight;               // MulConst
  Scalar scalar = 0.0;         // ScalarMul / AddScalar
  Index i0 = 0;                // SliceCols start; IndexAddRows output rows
  Index i1 = 0;                // SliceCols count
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Parameter leaf: a gradient target.
  Var leaf(Matrix value);
  // Constant input: recorded but receives no gradient entry.
  Var constant(Matrix value);

  const Matrix& value(NodeId id) const { return nodes_[std::size_t(id)].value; }
  std::size_t node_count() const { return nodes_.size(); }
  const std::vector<NodeId>& leaf_ids() const { return leaves_; }

  // Gradients of a scalar loss w.r.t. every leaf, indexed like leaf_ids().
  // Leaves the loss does not depend on get zero gradients.
  std::vector<Matrix> backward(const Var& loss) const;

  NodeId push(Node n);

 private:
  std::vector<Node> nodes_;
  std::vector<NodeId> leaves_;
};

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var scalar_mul(Var a, Scalar c);
Var add_scalar(Var a, Scalar c);
Var mul(Var a, Var b);                        // elementwise
Var mul_const(Var a, const Matrix& weight);   // elementwise constant weight
Var matmul(Var a, Var b);
Var gather_rows(Var a, std::span<const Index> rows);
Var index_add_rows(Var a, std::span<const Index> rows, Index out_rows);
Var relu(Var a);
Var concat_cols(std::span<const Var> parts);
Var slice_cols(Var a, Index start, Index count);
Var scale_rows(Var a, Var s);                 // s: m x 1
Var scale_rows_const(Var a, const Vector& s);
Var row_l2_norm(Var a);                       // m x 1
Var row_sum(Var a);                           // m x 1
Var sum(Var a);                               // 1 x 1
Var sigmoid(Var a);
Var log_sigmoid(Var a);
Var softmax_vec(Var a);                       // flat vector (1xn or nx1)
Var complex_hadamard(Var a, Var b);           // interleaved (re, im) pairs
Var phase_to_complex(Var a);                  // m x p phases -> m x 2p (cos, sin)

// Numerically stable scalar kernels shared with untaped code paths.
Scalar stable_sigmoid(Scalar x);
Scalar stable_log_sigmoid(Scalar x);

struct FiniteDiffReport {
  Scalar max_rel_err = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // kinks: the two one-sided slopes disagree
  int worst_param = -1;
  Index worst_coord = -1;
  Scalar worst_analytic = 0.0;
  Scalar worst_numeric = 0.0;
};

// Central-difference check of `analytic` against f. f must be deterministic
// (the baseline is evaluated twice and compared). On tensors with more than
// max_coords coordinates, a seeded random sample of coordinates is checked.
// Relative error uses denominator max(|analytic|, |numeric|, 1e-8).
FiniteDiffReport finite_diff_check(
    const std::function<Scalar(const std::vector<Matrix>&)>& f,
    std::vector<Matrix> params, const std::vector<Matrix>& analytic, Scalar step,
    std::size_t max_coords = 100, std::uint64_t seed = 0);

}  // namespace morse::ad
