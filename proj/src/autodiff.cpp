#include "morse/autodiff.hpp"

#include "morse/rng.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace morse::ad {

const char* op_name(Op op) {
  switch (op) {
    case Op::Leaf: return "leaf";
    case Op::Constant: return "constant";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::ScalarMul: return "scalar_mul";
    case Op::AddScalar: return "add_scalar";
    case Op::Mul: return "mul";
    case Op::MulConst: return "mul_const";
    case Op::MatMul: return "matmul";
    case Op::GatherRows: return "gather_rows";
    case Op::IndexAddRows: return "index_add_rows";
    case Op::Relu: return "relu";
    case Op::ConcatCols: return "concat_cols";
    case Op::SliceCols: return "slice_cols";
    case Op::ScaleRows: return "scale_rows";
    case Op::ScaleRowsConst: return "scale_rows_const";
    case Op::RowL2Norm: return "row_l2_norm";
    case Op::RowSum: return "row_sum";
    case Op::Sum: return "sum";
    case Op::Sigmoid: return "sigmoid";
    case Op::LogSigmoid: return "log_sigmoid";
    case Op::SoftmaxVec: return "softmax_vec";
    case Op::ComplexHadamard: return "complex_hadamard";
    case Op::PhaseToComplex: return "phase_to_complex";
  }
  return "?";
}

const Matrix& Var::value() const {
  if (!tape_) throw ContractError("Var: unbound handle");
  return tape_->value(id_);
}

namespace {

[[noreturn]] void shape_fail(Op op, const std::string& detail) {
  throw ShapeError(std::string(op_name(op)) + ": " + detail);
}

void check_finite(Op op, const Matrix& m) {
  if (!m.allFinite()) {
    throw NumericError(std::string(op_name(op)) + ": non-finite output");
  }
}

Tape* same_tape(Var a, Var b, Op op) {
  if (!a.valid() || !b.valid() || a.tape() != b.tape()) {
    throw ContractError(std::string(op_name(op)) + ": operands on different tapes");
  }
  return a.tape();
}

void require_same_shape(Op op, const Var& a, const Var& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    shape_fail(op, "operand shapes differ (" + std::to_string(a.rows()) + "x" +
                       std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) +
                       "x" + std::to_string(b.cols()) + ")");
  }
}

Var record(Tape* tape, Node node) {
  check_finite(node.op, node.value);
  NodeId id = tape->push(std::move(node));
  return Var(tape, id);
}

void require_even_cols(Op op, const Var& a) {
  if (a.cols() % 2 != 0) shape_fail(op, "interleaved complex layout needs even width");
}

}  // namespace

Scalar stable_sigmoid(Scalar x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const Scalar e = std::exp(x);
  return e / (1.0 + e);
}

Scalar stable_log_sigmoid(Scalar x) {
  // log sigma(x) = min(x, 0) - log1p(exp(-|x|)); no overflow for |x| <= 1e3.
  return std::min(x, 0.0) - std::log1p(std::exp(-std::abs(x)));
}

NodeId Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return NodeId(nodes_.size() - 1);
}

Var Tape::leaf(Matrix value) {
  Node n;
  n.op = Op::Leaf;
  n.value = std::move(value);
  check_finite(Op::Leaf, n.value);
  NodeId id = push(std::move(n));
  leaves_.push_back(id);
  return Var(this, id);
}

Var Tape::constant(Matrix value) {
  Node n;
  n.op = Op::Constant;
  n.value = std::move(value);
  check_finite(Op::Constant, n.value);
  return Var(this, push(std::move(n)));
}

Var add(Var a, Var b) {
  Tape* t = same_tape(a, b, Op::Add);
  require_same_shape(Op::Add, a, b);
  Node n;
  n.op = Op::Add;
  n.a = a.id();
  n.b = b.id();
  n.value = a.value() + b.value();
  return record(t, std::move(n));
}

Var sub(Var a, Var b) {
  Tape* t = same_tape(a, b, Op::Sub);
  require_same_shape(Op::Sub, a, b);
  Node n;
  n.op = Op::Sub;
  n.a = a.id();
  n.b = b.id();
  n.value = a.value() - b.value();
  return record(t, std::move(n));
}

Var scalar_mul(Var a, Scalar c) {
  Node n;
  n.op = Op::ScalarMul;
  n.a = a.id();
  n.scalar = c;
  n.value = a.value() * c;
  return record(a.tape(), std::move(n));
}

Var add_scalar(Var a, Scalar c) {
  Node n;
  n.op = Op::AddScalar;
  n.a = a.id();
  n.scalar = c;
  n.value = a.value().array() + c;
  return record(a.tape(), std::move(n));
}

Var mul(Var a, Var b) {
  Tape* t = same_tape(a, b, Op::Mul);
  require_same_shape(Op::Mul, a, b);
  Node n;
  n.op = Op::Mul;
  n.a = a.id();
  n.b = b.id();
  n.value = a.value().cwiseProduct(b.value());
  return record(t, std::move(n));
}

Var mul_const(Var a, const Matrix& weight) {
  if (a.rows() != weight.rows() || a.cols() != weight.cols()) {
    shape_fail(Op::MulConst, "weight shape mismatch");
  }
  Node n;
  n.op = Op::MulConst;
  n.a = a.id();
  n.weight = weight;
  n.value = a.value().cwiseProduct(weight);
  return record(a.tape(), std::move(n));
}

Var matmul(Var a, Var b) {
  Tape* t = same_tape(a, b, Op::MatMul);
  if (a.cols() != b.rows()) {
    shape_fail(Op::MatMul, "inner dimensions differ (" + std::to_string(a.cols()) +
                               " vs " + std::to_string(b.rows()) + ")");
  }
  Node n;
  n.op = Op::MatMul;
  n.a = a.id();
  n.b = b.id();
  // Row-by-row products: each output row is a function of its input row and
  // the right factor alone, so row permutations commute bit-exactly (blocked
  // GEMM kernels make row results depend on panel position).
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  n.value.resize(av.rows(), bv.cols());
  for (Index i = 0; i < av.rows(); ++i) {
    n.value.row(i) = av.row(i) * bv;
  }
  return record(t, std::move(n));
}

Var gather_rows(Var a, std::span<const Index> rows) {
  const Matrix& src = a.value();
  Node n;
  n.op = Op::GatherRows;
  n.a = a.id();
  n.idx.assign(rows.begin(), rows.end());
  n.value.resize(Index(rows.size()), src.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= src.rows()) shape_fail(Op::GatherRows, "row index out of range");
    n.value.row(Index(i)) = src.row(rows[i]);
  }
  return record(a.tape(), std::move(n));
}

Var index_add_rows(Var a, std::span<const Index> rows, Index out_rows) {
  const Matrix& src = a.value();
  if (Index(rows.size()) != src.rows()) {
    shape_fail(Op::IndexAddRows, "index count must equal input rows");
  }
  Node n;
  n.op = Op::IndexAddRows;
  n.a = a.id();
  n.idx.assign(rows.begin(), rows.end());
  n.i0 = out_rows;
  n.value = Matrix::Zero(out_rows, src.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= out_rows) shape_fail(Op::IndexAddRows, "row index out of range");
    n.value.row(rows[i]) += src.row(Index(i));
  }
  return record(a.tape(), std::move(n));
}

Var relu(Var a) {
  Node n;
  n.op = Op::Relu;
  n.a = a.id();
  n.value = a.value().cwiseMax(0.0);
  return record(a.tape(), std::move(n));
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("concat_cols: no inputs");
  Tape* t = parts[0].tape();
  Index rows = parts[0].rows();
  Index cols = 0;
  for (const Var& p : parts) {
    same_tape(parts[0], p, Op::ConcatCols);
    if (p.rows() != rows) shape_fail(Op::ConcatCols, "row counts differ");
    cols += p.cols();
  }
  Node n;
  n.op = Op::ConcatCols;
  n.value.resize(rows, cols);
  Index at = 0;
  for (const Var& p : parts) {
    n.parts.push_back(p.id());
    n.value.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  return record(t, std::move(n));
}

Var slice_cols(Var a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) {
    shape_fail(Op::SliceCols, "column range out of bounds");
  }
  Node n;
  n.op = Op::SliceCols;
  n.a = a.id();
  n.i0 = start;
  n.i1 = count;
  n.value = a.value().middleCols(start, count);
  return record(a.tape(), std::move(n));
}

Var scale_rows(Var a, Var s) {
  Tape* t = same_tape(a, s, Op::ScaleRows);
  if (s.cols() != 1 || s.rows() != a.rows()) {
    shape_fail(Op::ScaleRows, "scale must be rows(a) x 1");
  }
  Node n;
  n.op = Op::ScaleRows;
  n.a = a.id();
  n.b = s.id();
  n.value = a.value().array().colwise() * s.value().col(0).array();
  return record(t, std::move(n));
}

Var scale_rows_const(Var a, const Vector& s) {
  if (s.size() != a.rows()) shape_fail(Op::ScaleRowsConst, "factor count must equal rows");
  Node n;
  n.op = Op::ScaleRowsConst;
  n.a = a.id();
  n.factors = s;
  n.value = a.value().array().colwise() * s.array();
  return record(a.tape(), std::move(n));
}

Var row_l2_norm(Var a) {
  Node n;
  n.op = Op::RowL2Norm;
  n.a = a.id();
  n.value = a.value().rowwise().norm();
  return record(a.tape(), std::move(n));
}

Var row_sum(Var a) {
  Node n;
  n.op = Op::RowSum;
  n.a = a.id();
  n.value = a.value().rowwise().sum();
  return record(a.tape(), std::move(n));
}

Var sum(Var a) {
  Node n;
  n.op = Op::Sum;
  n.a = a.id();
  n.value = Matrix::Constant(1, 1, a.value().sum());
  return record(a.tape(), std::move(n));
}

Var sigmoid(Var a) {
  Node n;
  n.op = Op::Sigmoid;
  n.a = a.id();
  n.value = a.value().unaryExpr([](Scalar x) { return stable_sigmoid(x); });
  return record(a.tape(), std::move(n));
}

Var log_sigmoid(Var a) {
  Node n;
  n.op = Op::LogSigmoid;
  n.a = a.id();
  n.value = a.value().unaryExpr([](Scalar x) { return stable_log_sigmoid(x); });
  return record(a.tape(), std::move(n));
}

Var softmax_vec(Var a) {
  if (a.rows() != 1 && a.cols() != 1) shape_fail(Op::SoftmaxVec, "input must be a vector");
  Node n;
  n.op = Op::SoftmaxVec;
  n.a = a.id();
  const Scalar m = a.value().maxCoeff();
  Matrix e = (a.value().array() - m).exp();
  n.value = e / e.sum();
  return record(a.tape(), std::move(n));
}

Var complex_hadamard(Var a, Var b) {
  Tape* t = same_tape(a, b, Op::ComplexHadamard);
  require_same_shape(Op::ComplexHadamard, a, b);
  require_even_cols(Op::ComplexHadamard, a);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  Node n;
  n.op = Op::ComplexHadamard;
  n.a = a.id();
  n.b = b.id();
  n.value.resize(av.rows(), av.cols());
  for (Index i = 0; i < av.rows(); ++i) {
    for (Index j = 0; j < av.cols(); j += 2) {
      const Scalar ar = av(i, j), ai = av(i, j + 1);
      const Scalar br = bv(i, j), bi = bv(i, j + 1);
      n.value(i, j) = ar * br - ai * bi;
      n.value(i, j + 1) = ar * bi + ai * br;
    }
  }
  return record(t, std::move(n));
}

Var phase_to_complex(Var a) {
  const Matrix& av = a.value();
  Node n;
  n.op = Op::PhaseToComplex;
  n.a = a.id();
  n.value.resize(av.rows(), 2 * av.cols());
  for (Index i = 0; i < av.rows(); ++i) {
    for (Index j = 0; j < av.cols(); ++j) {
      n.value(i, 2 * j) = std::cos(av(i, j));
      n.value(i, 2 * j + 1) = std::sin(av(i, j));
    }
  }
  return record(a.tape(), std::move(n));
}

std::vector<Matrix> Tape::backward(const Var& loss) const {
  if (loss.tape() != this) throw ContractError("backward: loss from a different tape");
  const Node& loss_node = nodes_[std::size_t(loss.id())];
  if (loss_node.value.rows() != 1 || loss_node.value.cols() != 1) {
    throw ContractError("backward: loss must be a 1x1 scalar");
  }

  std::vector<Matrix> adj(nodes_.size());
  auto ensure = [&](NodeId id) -> Matrix& {
    Matrix& g = adj[std::size_t(id)];
    if (g.size() == 0) {
      const Matrix& v = nodes_[std::size_t(id)].value;
      g = Matrix::Zero(v.rows(), v.cols());
    }
    return g;
  };

  ensure(loss.id())(0, 0) = 1.0;

  for (NodeId id = loss.id(); id >= 0; --id) {
    const Matrix& up = adj[std::size_t(id)];
    if (up.size() == 0) continue;
    const Node& n = nodes_[std::size_t(id)];
    switch (n.op) {
      case Op::Leaf:
      case Op::Constant:
        break;
      case Op::Add:
        ensure(n.a) += up;
        ensure(n.b) += up;
        break;
      case Op::Sub:
        ensure(n.a) += up;
        ensure(n.b) -= up;
        break;
      case Op::ScalarMul:
        ensure(n.a) += n.scalar * up;
        break;
      case Op::AddScalar:
        ensure(n.a) += up;
        break;
      case Op::Mul:
        ensure(n.a) += up.cwiseProduct(nodes_[std::size_t(n.b)].value);
        ensure(n.b) += up.cwiseProduct(nodes_[std::size_t(n.a)].value);
        break;
      case Op::MulConst:
        ensure(n.a) += up.cwiseProduct(n.weight);
        break;
      case Op::MatMul:
        ensure(n.a) += up * nodes_[std::size_t(n.b)].value.transpose();
        ensure(n.b) += nodes_[std::size_t(n.a)].value.transpose() * up;
        break;
      case Op::GatherRows: {
        Matrix& ga = ensure(n.a);
        for (std::size_t i = 0; i < n.idx.size(); ++i) {
          ga.row(n.idx[i]) += up.row(Index(i));
        }
        break;
      }
      case Op::IndexAddRows: {
        Matrix& ga = ensure(n.a);
        for (std::size_t i = 0; i < n.idx.size(); ++i) {
          ga.row(Index(i)) += up.row(n.idx[i]);
        }
        break;
      }
      case Op::Relu:
        // Subgradient at 0 is 0.
        ensure(n.a) += up.cwiseProduct(
            nodes_[std::size_t(n.a)].value.unaryExpr([](Scalar x) {
              return x > 0.0 ? 1.0 : 0.0;
            }));
        break;
      case Op::ConcatCols: {
        Index at = 0;
        for (NodeId part : n.parts) {
          const Index w = nodes_[std::size_t(part)].value.cols();
          ensure(part) += up.middleCols(at, w);
          at += w;
        }
        break;
      }
      case Op::SliceCols:
        ensure(n.a).middleCols(n.i0, n.i1) += up;
        break;
      case Op::ScaleRows: {
        const Matrix& av = nodes_[std::size_t(n.a)].value;
        const Matrix& sv = nodes_[std::size_t(n.b)].value;
        ensure(n.a).array() += up.array().colwise() * sv.col(0).array();
        Matrix& gs = ensure(n.b);
        gs.col(0) += up.cwiseProduct(av).rowwise().sum();
        break;
      }
      case Op::ScaleRowsConst:
        ensure(n.a).array() += up.array().colwise() * n.factors.array();
        break;
      case Op::RowL2Norm: {
        const Matrix& av = nodes_[std::size_t(n.a)].value;
        Matrix& ga = ensure(n.a);
        for (Index i = 0; i < av.rows(); ++i) {
          const Scalar norm = n.value(i, 0);
          if (norm > 0.0) ga.row(i) += (up(i, 0) / norm) * av.row(i);
        }
        break;
      }
      case Op::RowSum: {
        Matrix& ga = ensure(n.a);
        ga.array().colwise() += up.col(0).array();
        break;
      }
      case Op::Sum:
        ensure(n.a).array() += up(0, 0);
        break;
      case Op::Sigmoid:
        ensure(n.a) += up.cwiseProduct(
            n.value.unaryExpr([](Scalar y) { return y * (1.0 - y); }));
        break;
      case Op::LogSigmoid:
        // d/dx log sigma(x) = sigma(-x) = 1 - exp(log sigma(x)).
        ensure(n.a) += up.cwiseProduct(
            n.value.unaryExpr([](Scalar y) { return 1.0 - std::exp(y); }));
        break;
      case Op::SoftmaxVec: {
        const Scalar dot = up.cwiseProduct(n.value).sum();
        ensure(n.a).array() += n.value.array() * (up.array() - dot);
        break;
      }
      case Op::ComplexHadamard: {
        const Matrix& av = nodes_[std::size_t(n.a)].value;
        const Matrix& bv = nodes_[std::size_t(n.b)].value;
        Matrix& ga = ensure(n.a);
        Matrix& gb = ensure(n.b);
        for (Index i = 0; i < av.rows(); ++i) {
          for (Index j = 0; j < av.cols(); j += 2) {
            const Scalar ur = up(i, j), ui = up(i, j + 1);
            const Scalar ar = av(i, j), ai = av(i, j + 1);
            const Scalar br = bv(i, j), bi = bv(i, j + 1);
            // grad_a = up * conj(b); grad_b = up * conj(a)
            ga(i, j) += ur * br + ui * bi;
            ga(i, j + 1) += -ur * bi + ui * br;
            gb(i, j) += ur * ar + ui * ai;
            gb(i, j + 1) += -ur * ai + ui * ar;
          }
        }
        break;
      }
      case Op::PhaseToComplex: {
        Matrix& ga = ensure(n.a);
        for (Index i = 0; i < ga.rows(); ++i) {
          for (Index j = 0; j < ga.cols(); ++j) {
            const Scalar c = n.value(i, 2 * j);
            const Scalar s = n.value(i, 2 * j + 1);
            ga(i, j) += -s * up(i, 2 * j) + c * up(i, 2 * j + 1);
          }
        }
        break;
      }
    }
  }

  std::vector<Matrix> grads;
  grads.reserve(leaves_.size());
  for (NodeId leaf : leaves_) {
    Matrix& g = adj[std::size_t(leaf)];
    if (g.size() == 0) {
      const Matrix& v = nodes_[std::size_t(leaf)].value;
      grads.push_back(Matrix::Zero(v.rows(), v.cols()));
    } else {
      grads.push_back(std::move(g));
    }
  }
  return grads;
}

FiniteDiffReport finite_diff_check(
    const std::function<Scalar(const std::vector<Matrix>&)>& f,
    std::vector<Matrix> params, const std::vector<Matrix>& analytic, Scalar step,
    std::size_t max_coords, std::uint64_t seed) {
  if (step <= 0.0) throw ContractError("finite_diff_check: step must be positive");
  if (analytic.size() != params.size()) {
    throw ContractError("finite_diff_check: analytic gradient count mismatch");
  }

  const Scalar base0 = f(params);
  const Scalar base1 = f(params);
  if (base0 != base1) {
    throw ContractError("finite_diff_check: f is not deterministic");
  }

  FiniteDiffReport report;
  Rng rng(derive_seed(seed, 0x9d5c0ffeULL));
  for (std::size_t p = 0; p < params.size(); ++p) {
    Matrix& mat = params[p];
    const std::size_t total = std::size_t(mat.size());
    std::vector<Index> coords;
    if (total <= max_coords) {
      coords.resize(total);
      for (std::size_t i = 0; i < total; ++i) coords[i] = Index(i);
    } else {
      coords.resize(max_coords);
      for (std::size_t i = 0; i < max_coords; ++i) {
        coords[i] = Index(rng.below(total));
      }
    }
    for (Index flat : coords) {
      const Index r = flat / mat.cols();
      const Index c = flat % mat.cols();
      const Scalar saved = mat(r, c);

      mat(r, c) = saved + step;
      const Scalar fp = f(params);
      mat(r, c) = saved - step;
      const Scalar fm = f(params);
      mat(r, c) = saved;

      const Scalar fwd = (fp - base0) / step;
      const Scalar bwd = (base0 - fm) / step;
      const Scalar slope_denom = std::max({std::abs(fwd), std::abs(bwd), Scalar(1e-8)});
      if (std::abs(fwd - bwd) / slope_denom > 0.05) {
        // One-sided slopes disagree: a kink (e.g. ReLU at 0) sits inside the
        // stencil, where central differences say nothing about the gradient.
        ++report.skipped;
        continue;
      }

      const Scalar numeric = (fp - fm) / (2.0 * step);
      const Scalar a = analytic[p](r, c);
      const Scalar denom = std::max({std::abs(a), std::abs(numeric), Scalar(1e-8)});
      const Scalar rel = std::abs(a - numeric) / denom;
      ++report.checked;
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst_param = int(p);
        report.worst_coord = flat;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace morse::ad
