#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "smalleig/densecore.hpp"
#include "smalleig/error.hpp"
#include "test_support.hpp"

using namespace smalleig;
using namespace testsupport;

TEST(DenseCore, FrankEntries) {
  const auto a = frank_matrix(4);
  EXPECT_EQ(a(0, 0), 4.0);
  EXPECT_EQ(a(0, 3), 1.0);
  EXPECT_EQ(a(2, 1), 2.0);
  EXPECT_EQ(a(3, 3), 1.0);
  EXPECT_THROW(frank_matrix(0), UsageError);
}

TEST(DenseCore, FrankEigenvaluesDescendingAndTrace) {
  for (int n : {1, 2, 5, 50, 200}) {
    const auto l = frank_eigenvalues(n);
    ASSERT_EQ(static_cast<int>(l.size()), n);
    for (int k = 1; k < n; ++k) EXPECT_GT(l[k - 1], l[k]);
    double tr = 0.0;
    for (double v : l) tr += v;
    // trace of the Frank matrix is n(n+1)/2
    EXPECT_NEAR(tr, n * (n + 1) / 2.0, 1e-12 * n * n);
  }
  EXPECT_DOUBLE_EQ(frank_eigenvalues(1)[0], 1.0);
  const auto l2 = frank_eigenvalues(2);  // [[2,1],[1,1]]
  EXPECT_NEAR(l2[0], (3.0 + std::sqrt(5.0)) / 2.0, 1e-15);
  EXPECT_NEAR(l2[1], (3.0 - std::sqrt(5.0)) / 2.0, 1e-15);
}

TEST(DenseCore, FrankSmallestEigenvalueAccurate) {
  // det(F_n) = 1, so the product of the eigenvalues is 1.
  for (int n : {10, 100, 400}) {
    double logdet = 0.0;
    for (double v : frank_eigenvalues(n)) logdet += std::log(v);
    EXPECT_NEAR(logdet, 0.0, 1e-12 * n);
  }
}

TEST(DenseCore, HouseholderReflect) {
  const std::vector<double> x{3.0, 4.0, 0.0, 12.0};
  const auto r = householder_reflect(x);
  EXPECT_DOUBLE_EQ(r.beta, -13.0);
  EXPECT_EQ(r.v[0], 1.0);
  std::vector<double> y = x;
  kernels::apply_reflector(r.tau, r.v, y);
  EXPECT_NEAR(y[0], -13.0, 1e-14);
  for (std::size_t i = 1; i < y.size(); ++i) EXPECT_NEAR(y[i], 0.0, 1e-14);
}

TEST(DenseCore, HouseholderZeroTailIsIdentity) {
  const auto r = householder_reflect(std::vector<double>{-2.0, 0.0, 0.0});
  EXPECT_EQ(r.tau, 0.0);
  EXPECT_EQ(r.beta, -2.0);
  const auto z = householder_reflect(std::vector<double>{-0.0});
  EXPECT_EQ(z.tau, 0.0);
  EXPECT_FALSE(std::signbit(z.beta));
  EXPECT_THROW(householder_reflect(std::vector<double>{}), UsageError);
}

TEST(DenseCore, HouseholderZeroAlphaUsesPositiveSign) {
  const auto r = householder_reflect(std::vector<double>{0.0, 2.0});
  EXPECT_DOUBLE_EQ(r.beta, -2.0);
}

TEST(DenseCore, TrdSequentialReconstructs) {
  std::mt19937_64 rng(17);
  for (int n = 1; n <= 8; ++n) {
    for (int trial = 0; trial < 5; ++trial) {
      const auto a = random_symmetric(n, rng);
      const auto r = trd_sequential(a);
      ASSERT_EQ(static_cast<int>(r.factors.size()), std::max(n - 2, 0));
      const auto q = explicit_q(r.factors);
      const auto qtq = multiply(multiply(q, r.t.to_dense()), transpose(q));
      EXPECT_LT(max_abs_diff(qtq, a), 1e-13) << "n=" << n;
      EXPECT_LT(max_abs_diff(multiply(transpose(q), q), DenseMatrix::identity(n)), 1e-14);
    }
  }
}

TEST(DenseCore, TrdOfTridiagonalTakesIdentityPath) {
  TridiagonalMatrix t{{1.0, 2.0, 3.0, 4.0}, {0.5, -0.25, 0.125}};
  const auto r = trd_sequential(t.to_dense());
  for (double tau : r.factors.tau) EXPECT_EQ(tau, 0.0);
  EXPECT_EQ(r.t.d, t.d);
  EXPECT_EQ(r.t.e, t.e);
}

TEST(DenseCore, TrdPreservesSpectrumOfFrank) {
  const int n = 12;
  const auto r = trd_sequential(frank_matrix(n));
  const auto ev = brute_eigenvalues(r.t);
  const auto ref = frank_eigenvalues(n);
  for (int k = 0; k < n; ++k) EXPECT_NEAR(ev[k], ref[k], 1e-11 * ref[0]);
}

TEST(DenseCore, HitSequentialOrthogonal) {
  std::mt19937_64 rng(2);
  const auto a = random_symmetric(7, rng);
  const auto f = trd_sequential(a).factors;
  Columns v{{1, 0, 0, 0, 0, 0, 0}, {0, 0, 0, 0, 0, 0, 1}};
  const auto x = hit_sequential(f, v);
  double dot = 0.0;
  for (int i = 0; i < 7; ++i) dot += x[0][i] * x[1][i];
  EXPECT_NEAR(dot, 0.0, 1e-15);
  EXPECT_THROW(hit_sequential(f, Columns{{1.0, 2.0}}), UsageError);
}

TEST(DenseCore, AccuracyMetrics) {
  const auto a = DenseMatrix::diagonal(std::vector<double>{3.0, 1.0});
  const std::vector<double> lam{3.0, 1.0};
  const Columns x{{1.0, 0.0}, {0.0, 1.0}};
  const std::vector<double> exact{3.0, 1.0 + 1e-3};
  const auto rep = accuracy(a, lam, x, std::span<const double>(exact));
  EXPECT_NEAR(*rep.max_eval_err, 1e-3, 1e-15);
  EXPECT_EQ(rep.orth_err, 0.0);
  EXPECT_EQ(rep.max_residual, 0.0);
  const Columns bad{{1.0, 0.0}, {1.0, 0.0}};
  const auto rep2 = accuracy(a, lam, bad);
  EXPECT_FALSE(rep2.max_eval_err.has_value());
  EXPECT_NEAR(rep2.orth_err, std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(rep2.max_residual, 2.0, 1e-15);
}

TEST(DenseCore, SymmetryValidation) {
  DenseMatrix a(3, 1.0);
  EXPECT_NO_THROW(check_symmetric(a));
  a(0, 2) = 1.5;
  try {
    check_symmetric(a);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("a(1,3)"), std::string::npos);
  }
  DenseMatrix b(2, 1.0);
  b(1, 1) = std::nan("");
  EXPECT_THROW(check_symmetric(b), ValidationError);
  DenseMatrix c(2, 1.0);
  c(0, 1) = 1.0 + 1e-15;  // inside the relative tolerance
  EXPECT_NO_THROW(check_symmetric(c));
}

TEST(DenseCore, MatrixIoRoundTrip) {
  std::mt19937_64 rng(4);
  const auto a = random_symmetric(5, rng);
  std::stringstream ss;
  write_matrix(ss, a);
  EXPECT_EQ(read_matrix(ss), a);
}

TEST(DenseCore, MatrixIoRejectsMalformed) {
  std::stringstream short_data("2\n1 2 2\n");
  EXPECT_THROW(read_matrix(short_data), ValidationError);
  std::stringstream extra("1\n5 6\n");
  EXPECT_THROW(read_matrix(extra), ValidationError);
  std::stringstream nonsym("2\n1 2 3 1\n");
  EXPECT_THROW(read_matrix(nonsym), ValidationError);
  std::stringstream bad_n("0\n");
  EXPECT_THROW(read_matrix(bad_n), ValidationError);
  EXPECT_THROW(read_matrix_file("/nonexistent/matrix.txt"), ValidationError);
}

TEST(DenseCore, ReflectorPreservesNorm) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = 1 + trial % 17;
    std::vector<double> v(m);
    for (auto& e : v) e = u(rng);
    const auto r = householder_reflect(v);
    std::vector<double> x(m);
    for (auto& e : x) e = u(rng);
    double before = 0.0;
    for (double e : x) before += e * e;
    kernels::apply_reflector(r.tau, r.v, x);
    double after = 0.0;
    for (double e : x) after += e * e;
    EXPECT_LE(std::fabs(std::sqrt(after) - std::sqrt(before)),
              4.0 * std::numeric_limits<double>::epsilon() * std::sqrt(before) * std::sqrt(static_cast<double>(m)));
  }
}
