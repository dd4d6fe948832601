#include <gtest/gtest.h>

#include <functional>
#include <memory>

#include "ecdiff/errors.hpp"
#include "ecdiff/matrix.hpp"
#include "ecdiff/sparse.hpp"
#include "ecdiff/spectral.hpp"
#include "ecdiff/tape.hpp"
#include "oracles.hpp"

using namespace ecdiff;
using oracle::to_eigen;

TEST(Matmul, IdentityLeavesOperand) {
  const Matrix b{{1, 2}, {3, 4}};
  EXPECT_EQ(matmul(Matrix::identity(2), b), b);
}

TEST(Matmul, Projector) {
  const Matrix p{{1, 0}, {0, 0}};
  const Matrix v{{5}, {7}};
  EXPECT_EQ(matmul(p, v), (Matrix{{5}, {0}}));
}

TEST(Matmul, MatchesTripleLoop) {
  const Matrix a = oracle::uniform(7, 5, 1);
  const Matrix b = oracle::uniform(5, 3, 2);
  EXPECT_LE(max_abs_diff(matmul(a, b), oracle::naive_matmul(a, b)), 1e-12);
}

TEST(Matmul, ShapeMismatchNamesBothShapes) {
  try {
    matmul(Matrix(2, 3), Matrix(2, 3));
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("2x3"), std::string::npos) << what;
  }
}

TEST(Matmul, Associative) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Matrix a = oracle::uniform(6, 6, seed * 3);
    const Matrix b = oracle::uniform(6, 6, seed * 3 + 1);
    const Matrix c = oracle::uniform(6, 6, seed * 3 + 2);
    EXPECT_LE(max_abs_diff(matmul(matmul(a, b), c), matmul(a, matmul(b, c))), 1e-10);
  }
}

TEST(Matmul, Deterministic) {
  const Matrix a = oracle::uniform(9, 9, 4);
  EXPECT_EQ(matmul(a, a), matmul(a, a));
}

TEST(RowNormalize, ThreeFourFive) {
  const Matrix out = row_l2_normalize(Matrix{{3, 4}}, 1e-12);
  EXPECT_DOUBLE_EQ(out(0, 0), 0.6);
  EXPECT_DOUBLE_EQ(out(0, 1), 0.8);
}

TEST(RowNormalize, ZeroRowPreserved) {
  EXPECT_EQ(row_l2_normalize(Matrix{{0, 0}}, 1e-12), (Matrix{{0, 0}}));
}

TEST(RowNormalize, RandomRowsUnitNorm) {
  const Matrix out = row_l2_normalize(oracle::uniform(10, 4, 7), 1e-12);
  const Eigen::MatrixXd e = to_eigen(out);
  for (Eigen::Index i = 0; i < e.rows(); ++i) {
    EXPECT_NEAR(e.row(i).norm(), 1.0, 1e-12);
  }
}

TEST(Spectral, TwoNodeBracket) {
  const auto b = laplacian_spectral_bracket(Matrix{{0, 1}, {1, 0}});
  EXPECT_NEAR(b.lambda_max, 2.0, 1e-12);
  EXPECT_NEAR(b.lambda_min, 0.0, 1e-12);
}

TEST(Spectral, IdentityHasZeroLaplacian) {
  const auto b = laplacian_spectral_bracket(Matrix::identity(3));
  EXPECT_EQ(b.lambda_max, 0.0);
  EXPECT_EQ(b.lambda_min, 0.0);
}

TEST(Spectral, MatchesDenseEigensolve) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Matrix s = oracle::random_symmetric_coupling(8, 100 + seed);
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(oracle::laplacian(s));
    const auto sv = svd.singularValues();
    const auto b = laplacian_spectral_bracket(s);
    EXPECT_NEAR(b.lambda_max, sv.maxCoeff(), 1e-7 * sv.maxCoeff());
    EXPECT_NEAR(b.lambda_min, sv.minCoeff(), 1e-7 * std::max(1.0, sv.maxCoeff()));
    EXPECT_LE(0.0, b.lambda_min);
    EXPECT_LE(b.lambda_min, b.lambda_max);
  }
}

TEST(Spectral, NonSymmetricUsesSingularValues) {
  Matrix s = oracle::uniform(6, 6, 9, 0.0, 1.0);
  for (std::size_t i = 0; i < 6; ++i) s(i, i) = 0.0;
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(oracle::laplacian(s));
  const auto b = laplacian_spectral_bracket(s);
  EXPECT_NEAR(b.lambda_max, svd.singularValues().maxCoeff(), 1e-7);
  EXPECT_NEAR(b.lambda_min, svd.singularValues().minCoeff(), 1e-7);
}

TEST(Spectral, ConnectedCouplingHasZeroSmallest) {
  const auto b = laplacian_spectral_bracket(oracle::random_symmetric_coupling(12, 3));
  EXPECT_LE(b.lambda_min, 1e-7);
}

TEST(Spectral, NonSquareRejected) {
  EXPECT_THROW(laplacian_spectral_bracket(Matrix(2, 3)), DimensionError);
}

TEST(Spectral, PowerIterationAgreesWithJacobi) {
  const Matrix s = oracle::random_symmetric_coupling(10, 21);
  const Matrix lap = oracle::from_eigen(oracle::laplacian(s));
  const auto eig = symmetric_eigenvalues(lap);
  EXPECT_NEAR(power_iteration_max(lap), eig.back(), 1e-6 * eig.back());
}

TEST(Sparse, ApplyMatchesDense) {
  SparseMatrix a(3, 3, {{0, 1, 2.0}, {2, 0, -1.0}, {0, 1, 1.0}, {1, 1, 4.0}});
  const Matrix x = oracle::uniform(3, 2, 5);
  EXPECT_EQ(a.to_dense()(0, 1), 3.0);
  EXPECT_LE(max_abs_diff(a.apply(x), matmul(a.to_dense(), x)), 1e-15);
  EXPECT_LE(max_abs_diff(a.apply_transpose(x), matmul(transpose(a.to_dense()), x)), 1e-15);
}

TEST(FiniteDiff, Quadratic) {
  const Matrix g = finite_diff_grad([](const Matrix& x) { return x(0, 0) * x(0, 0); },
                                    Matrix{{3.0}}, 1e-5);
  EXPECT_NEAR(g(0, 0), 6.0, 1e-8);
}

TEST(FiniteDiff, ConstantIsZero) {
  const Matrix g = finite_diff_grad([](const Matrix&) { return 4.2; }, Matrix(2, 3, 1.0), 1e-5);
  EXPECT_EQ(g, Matrix(2, 3));
}

TEST(FiniteDiff, DirichletEnergyGradient) {
  // lambda * sum_{i<j} s_ij ||z_i - z_j||^2 = lambda tr(Z^T L Z), gradient 2 lambda L Z.
  const Matrix s{{0, 1, 0.5}, {1, 0, 2}, {0.5, 2, 0}};
  const double lambda = 0.7;
  const Eigen::MatrixXd lap = oracle::laplacian(s);
  auto energy = [&](const Matrix& z) {
    const Eigen::MatrixXd e = to_eigen(z);
    return lambda * (e.transpose() * lap * e).trace();
  };
  const Matrix z = oracle::uniform(3, 2, 11);
  const Matrix fd = finite_diff_grad(energy, z, 1e-5);
  const Eigen::MatrixXd exact = 2.0 * lambda * lap * to_eigen(z);
  EXPECT_LE(oracle::max_abs(to_eigen(fd), exact), 1e-6);
}

TEST(Tape, SigmoidOfZero) {
  Tape t;
  EXPECT_EQ(t.value(t.sigmoid(t.constant(Matrix{{0}})))(0, 0), 0.5);
}

TEST(Tape, ReluClamps) {
  Tape t;
  EXPECT_EQ(t.value(t.relu(t.constant(Matrix{{-1, 2}}))), (Matrix{{0, 2}}));
}

TEST(Tape, LayerNormOfConstantRowIsZero) {
  Tape t;
  EXPECT_EQ(t.value(t.layer_norm(t.constant(Matrix{{3, 3, 3, 3}}))), Matrix(1, 4));
}

TEST(Tape, SumGradientIsOnes) {
  ParameterStore ps;
  ps.add("W", Matrix{{1, 2}, {3, 4}});
  Tape t(&ps);
  const auto grads = t.backward(t.sum_all(t.param("W")));
  EXPECT_EQ(grads.at("W"), Matrix(2, 2, 1.0));
  EXPECT_EQ(ps.grad("W"), Matrix(2, 2, 1.0));
}

TEST(Tape, FrobeniusGradient) {
  ParameterStore ps;
  ps.add("W", Matrix{{1, 2}});
  Tape t(&ps);
  const Var w = t.param("W");
  t.backward(t.sum_all(t.hadamard(w, w)));
  EXPECT_EQ(ps.grad("W"), (Matrix{{2, 4}}));
}

TEST(Tape, NonScalarLossRejected) {
  ParameterStore ps;
  ps.add("W", Matrix(2, 2, 1.0));
  Tape t(&ps);
  EXPECT_THROW(t.backward(t.param("W")), ContractError);
}

TEST(Tape, ShapeMismatchRejected) {
  Tape t;
  EXPECT_THROW(t.add(t.constant(Matrix(2, 2)), t.constant(Matrix(2, 3))), DimensionError);
}

TEST(Tape, ValuesMatchEagerOps) {
  const Matrix a = oracle::uniform(4, 3, 1);
  const Matrix b = oracle::uniform(3, 5, 2);
  Tape t;
  EXPECT_EQ(t.value(t.matmul(t.constant(a), t.constant(b))), matmul(a, b));
  EXPECT_EQ(t.value(t.transpose(t.constant(a))), transpose(a));
  EXPECT_EQ(t.value(t.row_l2_normalize(t.constant(a))), row_l2_normalize(a));
}

// Gradient of sum(op(x) .* r) against central differences at several points.
namespace {

using Op = std::function<Var(Tape&, Var)>;

double rel_error(const Matrix& a, const Matrix& b) {
  const double diff = std::sqrt(frobenius_sq(sub(a, b)));
  const double scale = std::max({std::sqrt(frobenius_sq(a)), std::sqrt(frobenius_sq(b)), 1e-12});
  return diff / scale;
}

void check_primitive(const std::string& label, const Op& op, std::size_t rows, std::size_t cols,
                     double lo = -1.0, double hi = 1.0) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Matrix x0 = oracle::uniform(rows, cols, 1000 + seed, lo, hi);
    Matrix weights;
    auto value = [&](const Matrix& x, Matrix* grad) {
      ParameterStore ps;
      ps.add("x", x);
      Tape t(&ps);
      const Var y = op(t, t.param("x"));
      if (weights.empty()) weights = oracle::uniform(t.value(y).rows(), t.value(y).cols(), seed);
      const Var loss = t.sum_all(t.hadamard(y, t.constant(weights)));
      if (grad) {
        t.backward(loss);
        *grad = ps.grad("x");
      }
      return t.value(loss)(0, 0);
    };
    Matrix tape_grad;
    value(x0, &tape_grad);
    const Matrix fd = finite_diff_grad([&](const Matrix& x) { return value(x, nullptr); }, x0, 1e-5);
    EXPECT_LE(rel_error(tape_grad, fd), 1e-5) << label << " seed " << seed;
  }
}

}  // namespace

TEST(TapeGradients, EveryPrimitiveMatchesFiniteDifferences) {
  const Matrix c34 = oracle::uniform(3, 4, 50);
  const Matrix c43 = oracle::uniform(4, 3, 51);
  const Matrix col = oracle::uniform(4, 1, 52);
  auto sparse = std::make_shared<const SparseMatrix>(
      4, 4, std::vector<SparseMatrix::Entry>{{0, 1, 0.5}, {1, 0, 0.5}, {2, 3, 1.5}, {3, 3, -2.0}});
  const std::vector<int> labels{0, 2, 1, 1};
  const std::vector<std::size_t> rows{0, 1, 3};

  check_primitive("matmul left", [&](Tape& t, Var x) { return t.matmul(x, t.constant(c34)); }, 4, 3);
  check_primitive("matmul right", [&](Tape& t, Var x) { return t.matmul(t.constant(c43), x); }, 3, 2);
  check_primitive("add", [&](Tape& t, Var x) { return t.add(x, t.scale(x, 2.0)); }, 4, 3);
  check_primitive("sub", [&](Tape& t, Var x) { return t.sub(t.constant(c43), x); }, 4, 3);
  check_primitive("add_scalar", [&](Tape& t, Var x) { return t.add_scalar(x, 3.0); }, 4, 3);
  check_primitive("hadamard", [&](Tape& t, Var x) { return t.hadamard(x, x); }, 4, 3);
  check_primitive("sigmoid", [&](Tape& t, Var x) { return t.sigmoid(x); }, 4, 3);
  check_primitive("relu", [&](Tape& t, Var x) { return t.relu(x); }, 4, 3);
  check_primitive("reciprocal", [&](Tape& t, Var x) { return t.reciprocal(x); }, 4, 3, 0.5, 2.0);
  check_primitive("row_l2_normalize", [&](Tape& t, Var x) { return t.row_l2_normalize(x); }, 4, 3);
  check_primitive("layer_norm", [&](Tape& t, Var x) { return t.layer_norm(x); }, 4, 5);
  check_primitive("row_softmax", [&](Tape& t, Var x) { return t.row_softmax(x); }, 4, 3);
  check_primitive("mean", [&](Tape& t, Var x) {
    const std::vector<Var> terms{x, t.hadamard(x, x), t.constant(c43)};
    return t.mean(terms);
  }, 4, 3);
  check_primitive("transpose", [&](Tape& t, Var x) { return t.transpose(x); }, 4, 3);
  check_primitive("diag_scale_rows matrix",
                  [&](Tape& t, Var x) { return t.diag_scale_rows(x, t.constant(col)); }, 4, 3);
  check_primitive("diag_scale_rows column",
                  [&](Tape& t, Var x) { return t.diag_scale_rows(t.constant(c43), x); }, 4, 1);
  check_primitive("row_sum", [&](Tape& t, Var x) { return t.row_sum(x); }, 4, 3);
  check_primitive("broadcast_row", [&](Tape& t, Var x) { return t.broadcast_row(x, 5); }, 1, 3);
  check_primitive("sparse_matmul", [&](Tape& t, Var x) { return t.sparse_matmul(sparse, x); }, 4, 3);
  check_primitive("softmax_cross_entropy",
                  [&](Tape& t, Var x) { return t.softmax_cross_entropy(x, labels, rows); }, 4, 3);
  check_primitive("mean_squared_error",
                  [&](Tape& t, Var x) { return t.mean_squared_error(x, c43, rows); }, 4, 3);
}

TEST(ParameterStore, GradientShapesMatchValues) {
  ParameterStore ps;
  ps.add("a", Matrix(2, 3, 1.0));
  ps.add("b", Matrix(1, 4, 1.0));
  Tape t(&ps);
  t.backward(t.add(t.sum_all(t.param("a")), t.sum_all(t.param("b"))));
  for (const auto& name : ps.names()) EXPECT_TRUE(ps.grad(name).same_shape(ps.value(name)));
  EXPECT_EQ(ps.scalar_count(), 10u);
  EXPECT_EQ(ps.names(), (std::vector<std::string>{"a", "b"}));
}
