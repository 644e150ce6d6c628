#include "morse/autodiff.hpp"

#include "testutil.hpp"

#include <doctest.h>

#include <cmath>
#include <complex>

using namespace morse;
using namespace morse::ad;

namespace {

Matrix row(std::initializer_list<Scalar> values) {
  Matrix m(1, Index(values.size()));
  Index j = 0;
  for (Scalar v : values) m(0, j++) = v;
  return m;
}

}  // namespace

TEST_CASE("relu by definition") {
  Tape tape;
  Var x = tape.leaf(row({-1, 0, 2}));
  Var y = relu(x);
  CHECK(y.value()(0, 0) == 0.0);
  CHECK(y.value()(0, 1) == 0.0);
  CHECK(y.value()(0, 2) == 2.0);
}

TEST_CASE("softmax of a constant vector is uniform") {
  Tape tape;
  Var y = softmax_vec(tape.leaf(row({0, 0})));
  CHECK(y.value()(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(y.value()(0, 1) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("matmul matches a triple-loop oracle") {
  const Matrix a = test::random_matrix(3, 4, 11);
  const Matrix b = test::random_matrix(4, 2, 12);
  Tape tape;
  Var c = matmul(tape.leaf(a), tape.leaf(b));
  Matrix expected = Matrix::Zero(3, 2);
  for (Index i = 0; i < 3; ++i) {
    for (Index j = 0; j < 2; ++j) {
      for (Index k = 0; k < 4; ++k) expected(i, j) += a(i, k) * b(k, j);
    }
  }
  CHECK((c.value() - expected).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("backward of sum is all-ones") {
  Tape tape;
  Var x = tape.leaf(test::random_matrix(3, 5, 13));
  auto grads = tape.backward(sum(x));
  CHECK(grads.size() == 1);
  CHECK((grads[0] - Matrix::Ones(3, 5)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("backward of squared norm is 2x") {
  const Matrix x = test::random_matrix(4, 3, 14);
  Tape tape;
  Var v = tape.leaf(x);
  auto grads = tape.backward(sum(mul(v, v)));
  CHECK((grads[0] - 2.0 * x).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("gradients are linear in the loss") {
  const Matrix x = test::random_matrix(3, 3, 15);
  const Matrix w = test::random_matrix(3, 3, 16);

  auto grad_of = [&](int which) {
    Tape tape;
    Var v = tape.leaf(x);
    Var a = sum(matmul(v, tape.constant(w)));
    Var b = row_l2_norm(v);
    Var loss_b = sum(b);
    Var loss = which == 0 ? a : (which == 1 ? loss_b : add(a, loss_b));
    return tape.backward(loss)[0];
  };
  const Matrix ga = grad_of(0);
  const Matrix gb = grad_of(1);
  const Matrix gsum = grad_of(2);
  CHECK((gsum - (ga + gb)).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("index_add then gather on disjoint indices is the identity") {
  const Matrix x = test::random_matrix(4, 3, 17);
  Tape tape;
  Var v = tape.leaf(x);
  std::vector<Index> idx{2, 0, 5, 3};  // disjoint targets
  Var scattered = index_add_rows(v, idx, 6);
  Var back = gather_rows(scattered, idx);
  CHECK((back.value() - x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("concat backward splits the upstream gradient without loss") {
  const Matrix a = test::random_matrix(3, 2, 18);
  const Matrix b = test::random_matrix(3, 4, 19);
  const Matrix w = test::random_matrix(3, 6, 20);
  Tape tape;
  Var va = tape.leaf(a);
  Var vb = tape.leaf(b);
  std::vector<Var> parts{va, vb};
  Var cat = concat_cols(parts);
  auto grads = tape.backward(sum(mul_const(cat, w)));
  // Upstream gradient of cat is exactly w; rowwise norms must split exactly.
  for (Index i = 0; i < 3; ++i) {
    const Scalar upstream = w.row(i).squaredNorm();
    const Scalar split = grads[0].row(i).squaredNorm() + grads[1].row(i).squaredNorm();
    CHECK(split == doctest::Approx(upstream).epsilon(1e-15));
  }
}

TEST_CASE("untouched leaves get zero gradients") {
  Tape tape;
  Var used = tape.leaf(row({1, 2}));
  [[maybe_unused]] Var unused = tape.leaf(test::random_matrix(2, 2, 21));
  auto grads = tape.backward(sum(used));
  CHECK(grads.size() == 2);
  CHECK(grads[1].rows() == 2);
  CHECK(grads[1].cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("backward requires a scalar loss") {
  Tape tape;
  Var x = tape.leaf(row({1, 2}));
  CHECK_THROWS_AS(tape.backward(x), ContractError);
}

TEST_CASE("shape errors name the op") {
  Tape tape;
  Var a = tape.leaf(row({1, 2}));
  Var b = tape.leaf(row({1, 2, 3}));
  CHECK_THROWS_MSG(add(a, b), ShapeError, "add");
  CHECK_THROWS_MSG(matmul(a, b), ShapeError, "matmul");
}

TEST_CASE("non-finite outputs raise numeric errors") {
  Tape tape;
  Var x = tape.leaf(row({1e308}));
  CHECK_THROWS_AS(scalar_mul(x, 1e10), NumericError);
  Matrix nan(1, 1);
  nan(0, 0) = std::nan("");
  CHECK_THROWS_AS(tape.leaf(nan), NumericError);
}

TEST_CASE("log_sigmoid is stable across [-1e3, 1e3]") {
  Tape tape;
  Var x = tape.leaf(row({-1000, -10, 0, 10, 1000}));
  Var y = log_sigmoid(x);
  CHECK(y.value().allFinite());
  CHECK(y.value()(0, 0) == doctest::Approx(-1000.0).epsilon(1e-12));
  CHECK(y.value()(0, 2) == doctest::Approx(std::log(0.5)).epsilon(1e-12));
  CHECK(y.value()(0, 4) == doctest::Approx(0.0).epsilon(1e-12));
  Var z = sigmoid(x);
  CHECK(z.value().allFinite());
}

TEST_CASE("complex hadamard matches std::complex") {
  const Matrix a = test::random_matrix(2, 6, 22);
  const Matrix b = test::random_matrix(2, 6, 23);
  Tape tape;
  Var c = complex_hadamard(tape.leaf(a), tape.leaf(b));
  for (Index i = 0; i < 2; ++i) {
    for (Index j = 0; j < 6; j += 2) {
      const std::complex<Scalar> za(a(i, j), a(i, j + 1));
      const std::complex<Scalar> zb(b(i, j), b(i, j + 1));
      const std::complex<Scalar> zc = za * zb;
      CHECK(c.value()(i, j) == doctest::Approx(zc.real()).epsilon(1e-14));
      CHECK(c.value()(i, j + 1) == doctest::Approx(zc.imag()).epsilon(1e-14));
    }
  }
}

TEST_CASE("phase_to_complex produces unit-modulus pairs") {
  const Matrix phases = test::random_matrix(3, 4, 24, -3.0, 3.0);
  Tape tape;
  Var c = phase_to_complex(tape.leaf(phases));
  REQUIRE(c.cols() == 8);
  for (Index i = 0; i < 3; ++i) {
    for (Index j = 0; j < 4; ++j) {
      const Scalar re = c.value()(i, 2 * j);
      const Scalar im = c.value()(i, 2 * j + 1);
      CHECK(re * re + im * im == doctest::Approx(1.0).epsilon(1e-14));
    }
  }
}

namespace {

// Rebuilds the same composite expression from scratch; used both as the
// finite-difference target and (once) for the analytic gradient.
Scalar composite(const std::vector<Matrix>& params, std::vector<Matrix>* grads) {
  Tape tape;
  Var a = tape.leaf(params[0]);  // 4 x 6
  Var b = tape.leaf(params[1]);  // 6 x 6
  Var s = tape.leaf(params[2]);  // 4 x 1
  Var phases = tape.leaf(params[3]);  // 4 x 3

  std::vector<Index> gather_idx{1, 3, 0, 2};
  Var g = gather_rows(a, gather_idx);
  Var m = matmul(g, b);
  Var sm = scale_rows(m, s);
  std::vector<Index> scatter_idx{0, 1, 2, 3};
  Var agg = index_add_rows(sm, scatter_idx, 4);
  Var act = relu(agg);
  Var rot = phase_to_complex(phases);
  Var had = complex_hadamard(act, rot);
  std::vector<Var> parts{had, slice_cols(act, 0, 2)};
  Var cat = concat_cols(parts);
  Var norms = row_l2_norm(cat);
  Var sig = log_sigmoid(scalar_mul(norms, 0.5));
  Var loss = sum(add(sig, row_sum(sigmoid(slice_cols(cat, 2, 3)))));
  if (grads != nullptr) *grads = tape.backward(loss);
  return loss.value()(0, 0);
}

}  // namespace

TEST_CASE("finite differences confirm the composite op backward") {
  std::vector<Matrix> params{
      test::random_matrix(4, 6, 31), test::random_matrix(6, 6, 32),
      test::random_matrix(4, 1, 33, 0.5, 1.5), test::random_matrix(4, 3, 34)};
  std::vector<Matrix> grads;
  composite(params, &grads);
  auto f = [](const std::vector<Matrix>& p) { return composite(p, nullptr); };
  auto report = finite_diff_check(f, params, grads, 1e-5, 200, 5);
  CHECK(report.checked > 50);
  CHECK(report.max_rel_err <= 1e-6);
}

TEST_CASE("finite_diff_check on x*x at x=3") {
  auto f = [](const std::vector<Matrix>& p) { return p[0](0, 0) * p[0](0, 0); };
  std::vector<Matrix> params{Matrix::Constant(1, 1, 3.0)};
  std::vector<Matrix> analytic{Matrix::Constant(1, 1, 6.0)};
  auto report = finite_diff_check(f, params, analytic, 1e-4);
  CHECK(report.checked == 1);
  CHECK(report.skipped == 0);
  CHECK(report.max_rel_err <= 1e-9);
}

TEST_CASE("finite_diff_check skips the ReLU kink at exactly 0") {
  auto f = [](const std::vector<Matrix>& p) { return std::max(p[0](0, 0), 0.0); };
  std::vector<Matrix> params{Matrix::Constant(1, 1, 0.0)};
  std::vector<Matrix> analytic{Matrix::Constant(1, 1, 0.0)};
  auto report = finite_diff_check(f, params, analytic, 1e-4);
  CHECK(report.checked == 0);
  CHECK(report.skipped == 1);
}

TEST_CASE("finite_diff_check rejects non-deterministic functions") {
  int calls = 0;
  auto f = [&calls](const std::vector<Matrix>&) { return Scalar(calls++); };
  std::vector<Matrix> params{Matrix::Constant(1, 1, 0.0)};
  std::vector<Matrix> analytic{Matrix::Constant(1, 1, 0.0)};
  CHECK_THROWS_AS(finite_diff_check(f, params, analytic, 1e-4), ContractError);
}

TEST_CASE("softmax backward matches finite differences") {
  const Matrix x = test::random_matrix(1, 5, 35);
  auto f = [](const std::vector<Matrix>& p) {
    Tape tape;
    Var sm = softmax_vec(tape.leaf(p[0]));
    // Weighted sum so the gradient is nontrivial.
    Matrix w(1, 5);
    w << 1, -2, 3, 0.5, -1;
    return sum(mul_const(sm, w)).value()(0, 0);
  };
  std::vector<Matrix> params{x};
  std::vector<Matrix> grads;
  {
    Tape tape;
    Var v = tape.leaf(x);
    Matrix w(1, 5);
    w << 1, -2, 3, 0.5, -1;
    grads = tape.backward(sum(mul_const(softmax_vec(v), w)));
  }
  auto report = finite_diff_check(f, params, grads, 1e-5);
  CHECK(report.max_rel_err <= 1e-8);
}
