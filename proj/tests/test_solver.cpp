#include <gtest/gtest.h>

#include <cmath>

#include "smalleig/error.hpp"
#include "smalleig/solver.hpp"
#include "test_support.hpp"

using namespace smalleig;
using namespace testsupport;
using msgnet::Category;

namespace {

SolveConfig grid(int px, int py) {
  SolveConfig c;
  c.p_x = px;
  c.p_y = py;
  c.verify = true;
  return c;
}

}  // namespace

TEST(Solver, SmallDiagonal) {
  const auto a = DenseMatrix::diagonal(std::vector<double>{3.0, 1.0, 2.0});
  const auto r = solve(a, grid(1, 2));
  const double tol = 3.0 * 1e-14;
  EXPECT_NEAR(r.eigenvalues[0], 3.0, tol);
  EXPECT_NEAR(r.eigenvalues[1], 2.0, tol);
  EXPECT_NEAR(r.eigenvalues[2], 1.0, tol);
  const auto x = gather_eigenvectors(r);
  EXPECT_EQ(std::fabs(x(0, 0)), 1.0);
  EXPECT_EQ(std::fabs(x(2, 1)), 1.0);
  EXPECT_EQ(std::fabs(x(1, 2)), 1.0);
  EXPECT_LT(r.accuracy->orth_err, 1e-15);
}

TEST(Solver, FrankAccuracyAcrossGrids) {
  const int n = 50;
  const auto a = frank_matrix(n);
  const auto ref = frank_eigenvalues(n);
  for (auto [px, py] : std::vector<std::pair<int, int>>{{1, 1}, {2, 2}, {2, 4}}) {
    auto cfg = grid(px, py);
    cfg.exact = ref;
    const auto r = solve(a, cfg);
    ASSERT_TRUE(r.accuracy);
    EXPECT_LE(*r.accuracy->max_eval_err, 1e-10 * ref[0]);
    EXPECT_LE(r.accuracy->orth_err, 1e-9);
    EXPECT_LE(r.accuracy->max_residual, 1e-8 * a.norm_fro());
  }
}

TEST(Solver, RandomMatrixResidual) {
  std::mt19937_64 rng(12);
  const auto a = random_symmetric(40, rng);
  const auto r = solve(a, grid(2, 2));
  EXPECT_LE(r.accuracy->orth_err, 1e-9);
  EXPECT_LE(r.accuracy->max_residual, 1e-8 * a.norm_fro());
  for (std::size_t k = 1; k < r.eigenvalues.size(); ++k) EXPECT_GE(r.eigenvalues[k - 1], r.eigenvalues[k]);
}

TEST(Solver, ShardsFollowOneDimensionalLayout) {
  const auto r = solve(frank_matrix(10), grid(2, 2));
  ASSERT_EQ(r.shards.size(), 4u);
  EXPECT_EQ(r.shards[1].indices, (std::vector<int>{2, 6, 10}));
  EXPECT_EQ(r.shards[3].indices, (std::vector<int>{4, 8}));
  for (const auto& s : r.shards)
    for (const auto& v : s.vectors) EXPECT_EQ(v.size(), 10u);
}

TEST(Solver, DeterministicAcrossRuns) {
  std::mt19937_64 rng(99);
  const auto a = random_symmetric(25, rng);
  auto cfg = grid(2, 4);
  cfg.trd = {PivotSend::NonBlockingPresend, 5, ReduceImpl::BinaryTree};
  cfg.hit = {GatherImpl::NonBlockingSend, 4};
  const auto r1 = solve(a, cfg);
  const auto r2 = solve(a, cfg);
  EXPECT_EQ(r1.eigenvalues, r2.eigenvalues);
  EXPECT_EQ(r1.shards, r2.shards);
  EXPECT_EQ(r1.stats.trd, r2.stats.trd);
  EXPECT_EQ(r1.stats.hit, r2.stats.hit);
  EXPECT_EQ(r1.rank_stats.size(), 8u);
}

TEST(Solver, EigenvaluesIndependentOfGrid) {
  std::mt19937_64 rng(41);
  const auto a = random_symmetric(17, rng);
  const auto ref = solve(a, grid(1, 1));
  for (auto [px, py] : small_grids()) EXPECT_EQ(solve(a, grid(px, py)).eigenvalues, ref.eigenvalues);
}

TEST(Solver, SeptPhaseIsSilent) {
  const auto r = solve(frank_matrix(30), grid(2, 2));
  EXPECT_EQ(r.stats.sept.total_messages(), 0u);
  EXPECT_GT(r.stats.trd.total_messages(), 0u);
  EXPECT_GT(r.stats.hit.total_messages(), 0u);
}

TEST(Solver, DegenerateOrders) {
  for (auto [px, py] : small_grids()) {
    const auto one = solve(DenseMatrix(1, -2.0), grid(px, py));
    EXPECT_EQ(one.eigenvalues, (std::vector<double>{-2.0}));
    EXPECT_EQ(gather_eigenvectors(one)(0, 0), 1.0);
    const auto two = solve(DenseMatrix(2, std::vector<double>{2.0, 1.0, 1.0, 2.0}), grid(px, py));
    EXPECT_NEAR(two.eigenvalues[0], 3.0, 3e-14);
    EXPECT_NEAR(two.eigenvalues[1], 1.0, 3e-14);
    EXPECT_LT(two.accuracy->max_residual, 5e-14);
    EXPECT_EQ(two.stats.trd[Category::PivotTrd].messages, 0u);
  }
}

TEST(Solver, ValidationErrors) {
  EXPECT_THROW(solve(frank_matrix(4), grid(0, 1)), ConfigError);
  auto c = grid(1, 1);
  c.hit.mblk = 0;
  EXPECT_THROW(solve(frank_matrix(4), c), ConfigError);
  c = grid(1, 1);
  c.exact = std::vector<double>{1.0};
  EXPECT_THROW(solve(frank_matrix(4), c), ConfigError);
  c = grid(1, 1);
  c.mems.tol = -1.0;
  EXPECT_THROW(solve(frank_matrix(4), c), ConfigError);
  DenseMatrix ns(3, 1.0);
  ns(0, 1) = 2.0;
  EXPECT_THROW(solve(ns, grid(1, 1)), ValidationError);
}

TEST(Solver, PerturbationHookShowsInError) {
  auto c = grid(1, 1);
  c.exact = frank_eigenvalues(8);
  c.perturb_eigenvalue = 1e-6;
  const auto r = solve(frank_matrix(8), c);
  EXPECT_GE(*r.accuracy->max_eval_err, 1e-6 * 0.99);
}

TEST(Solver, EmbeddedMatchesSpawned) {
  std::mt19937_64 rng(14);
  const auto a = random_symmetric(12, rng);
  const auto ref = solve(a, grid(2, 1));
  auto run = msgnet::spawn_spmd(2, [&](msgnet::Communicator& w) {
    auto cfg = grid(2, 1);
    return solve_embedded(w, a, cfg).shard;
  });
  EXPECT_EQ(run.results[0], ref.shards[0]);
  EXPECT_EQ(run.results[1], ref.shards[1]);
}

TEST(Solver, IncompleteShardsAreRejected) {
  auto r = solve(frank_matrix(6), grid(2, 1));
  r.shards[1].indices.pop_back();
  r.shards[1].vectors.pop_back();
  EXPECT_THROW(eigenvector_columns(r), UsageError);
}

TEST(Solver, MultipleEigenvaluesStayOrthogonalAcrossRanks) {
  const auto a = DenseMatrix::diagonal(std::vector<double>{2.0, 2.0, 1.0, 2.0, 1.0, 3.0});
  for (auto [px, py] : small_grids()) {
    const auto r = solve(a, grid(px, py));
    EXPECT_LT(r.accuracy->orth_err, 1e-12) << px << "x" << py;
  }
  auto owned = grid(2, 2);
  owned.reorth = ReorthScope::OwnedOnly;
  EXPECT_GT(solve(DenseMatrix::identity(8), owned).accuracy->orth_err, 1e-3);
}

TEST(Solver, MatchesBruteForceSpectrumOnEveryShape) {
  std::mt19937_64 rng(55);
  for (int n : {3, 7, 12}) {
    std::vector<DenseMatrix> inputs{random_symmetric(n, rng), frank_matrix(n)};
    for (const auto& a : inputs) {
      const auto ref = brute_eigenvalues(trd_sequential(a).t);
      for (int p : {1, 2, 4, 8})
        for (auto [px, py] : grid_shapes(p)) {
          const auto r = solve(a, grid(px, py));
          for (int k = 0; k < n; ++k) EXPECT_NEAR(r.eigenvalues[k], ref[k], 1e-11 * a.norm_inf());
        }
    }
  }
}
