#include <gtest/gtest.h>

#include <cmath>

#include "smalleig/error.hpp"
#include "smalleig/trd.hpp"
#include "test_support.hpp"

using namespace smalleig;
using namespace testsupport;
using msgnet::Category;

namespace {

std::vector<TrdVariant> all_variants(int n) {
  std::vector<TrdVariant> vs;
  for (auto red : {ReduceImpl::Allreduce, ReduceImpl::BinaryTree}) {
    vs.push_back({PivotSend::Blocking, 0, red});
    for (double frac : {0.0, 0.25, 0.5, 1.0})
      vs.push_back({PivotSend::NonBlockingPresend, presend_limit_for(frac, n), red});
  }
  return vs;
}

}  // namespace

TEST(Trd, DistributeFrankExample) {
  const auto a = frank_matrix(4);
  const auto b = distribute_matrix(a, build_grid(4, 2, 2, 0));
  EXPECT_EQ(b.data, (std::vector<double>{4.0, 2.0, 2.0, 2.0}));
  const auto c = distribute_matrix(a, build_grid(4, 2, 2, 3));  // rows {2,4}, cols {2,4}
  EXPECT_EQ(c.data, (std::vector<double>{3.0, 1.0, 1.0, 1.0}));
}

TEST(Trd, DistributeAssembleRoundTrip) {
  std::mt19937_64 rng(1);
  const auto a = random_symmetric(9, rng);
  for (auto [px, py] : small_grids()) {
    std::vector<LocalMatrix> blocks;
    for (int r = 0; r < px * py; ++r) blocks.push_back(distribute_matrix(a, build_grid(px * py, px, py, r)));
    EXPECT_EQ(assemble_matrix(blocks), a);
  }
}

TEST(Trd, PresendLimits) {
  EXPECT_EQ(default_presend_limit(2), 0);
  EXPECT_EQ(default_presend_limit(10), 2);
  EXPECT_EQ(presend_limit_for(0.5, 10), 4);
  EXPECT_EQ(presend_limit_for(1.0, 10), 8);
  EXPECT_THROW(presend_limit_for(1.5, 10), ConfigError);
  EXPECT_THROW(validate(TrdVariant{PivotSend::NonBlockingPresend, 9, ReduceImpl::Allreduce}, 10),
               ConfigError);
  EXPECT_NO_THROW(validate(TrdVariant{PivotSend::Blocking, 99, ReduceImpl::Allreduce}, 10));
}

TEST(Trd, BitwiseEqualsSequentialForAllVariants) {
  std::mt19937_64 rng(21);
  for (int n : {1, 2, 3, 4, 7, 11, 16}) {
    for (int trial = 0; trial < 3; ++trial) {
      const auto a = random_symmetric(n, rng);
      const auto ref = trd_sequential(a);
      for (auto [px, py] : small_grids()) {
        for (const auto& v : all_variants(n)) {
          const auto d = run_trd(a, px, py, v);
          std::vector<FactorSlices> slices;
          for (const auto& o : d.outs) {
            ASSERT_EQ(o.t, ref.t) << "n=" << n << " grid " << px << "x" << py;
            slices.push_back(o.factors);
          }
          ASSERT_EQ(assemble_factors(slices), ref.factors) << "n=" << n;
        }
      }
    }
  }
}

TEST(Trd, ReflectorsVanishOnTridiagonalInput) {
  TridiagonalMatrix t{{1, 2, 3, 4, 5, 6}, {1, 1, 1, 1, 1}};
  const auto d = run_trd(t.to_dense(), 2, 2, TrdVariant{});
  for (const auto& o : d.outs) {
    EXPECT_EQ(o.t, t);
    for (double tau : o.factors.tau) EXPECT_EQ(tau, 0.0);
  }
}

TEST(Trd, NoPivotTrafficForTinyMatrices) {
  for (int n : {1, 2}) {
    for (auto [px, py] : small_grids()) {
      const auto d = run_trd(DenseMatrix(n, 1.0), px, py, TrdVariant{});
      EXPECT_EQ(d.merged[Category::PivotTrd].messages, 0u);
      EXPECT_EQ(d.merged[Category::PivotTrd].invocations, 0u);
      EXPECT_EQ(d.merged[Category::MatvecReduce].invocations, 0u);
    }
  }
}

TEST(Trd, PivotCountersFollowVariant) {
  const int n = 14;
  const int px = 2;
  const int py = 4;
  const auto a = frank_matrix(n);
  const auto blocking = run_trd(a, px, py, TrdVariant{});
  // one row broadcast per step in every process row
  EXPECT_EQ(blocking.totals.instances(Category::PivotTrd), static_cast<std::uint64_t>((n - 2) * px));
  EXPECT_EQ(blocking.merged[Category::PivotTrd].messages,
            static_cast<std::uint64_t>((n - 2) * px * (py - 1)));
  for (int limit : {1, 3, 12}) {
    const auto pre = run_trd(a, px, py, TrdVariant{PivotSend::NonBlockingPresend, limit, ReduceImpl::Allreduce});
    const int presends = std::min(limit, n - 3);
    EXPECT_EQ(pre.totals.instances(Category::PivotTrd),
              static_cast<std::uint64_t>((n - 2 - presends) * px))
        << "limit " << limit;
    EXPECT_EQ(pre.merged[Category::PivotTrd].messages, blocking.merged[Category::PivotTrd].messages);
  }
}

TEST(Trd, ReductionCountersFollowVariant) {
  const int n = 12;
  const auto a = frank_matrix(n);
  const auto all = run_trd(a, 2, 4, TrdVariant{});
  const auto tree = run_trd(a, 2, 4, TrdVariant{PivotSend::Blocking, 0, ReduceImpl::BinaryTree});
  EXPECT_EQ(all.totals.instances(Category::MatvecReduce), tree.totals.instances(Category::MatvecReduce));
  EXPECT_GT(tree.merged[Category::MatvecReduce].rounds, 0u);
  EXPECT_EQ(all.merged[Category::MatvecReduce].rounds, 0u);
  EXPECT_EQ(all.merged[Category::MatvecReduce].scopes, static_cast<std::uint8_t>(msgnet::Scope::Row));
  EXPECT_EQ(all.merged[Category::HouseholderReduce].scopes,
            static_cast<std::uint8_t>(msgnet::Scope::Column));
  EXPECT_EQ(all.totals.instances(Category::HouseholderReduce), static_cast<std::uint64_t>((n - 2) * 4));
}

TEST(Trd, SingleProcessSendsNothing) {
  std::mt19937_64 rng(8);
  const auto d = run_trd(random_symmetric(10, rng), 1, 1, TrdVariant{});
  EXPECT_EQ(d.merged.total_messages(), 0u);
  EXPECT_EQ(d.totals.bytes_sent, 0u);
}

TEST(Trd, PhaseTimesCoverCategories) {
  const auto d = run_trd(frank_matrix(10), 2, 2, TrdVariant{});
  std::vector<std::string> names;
  for (const auto& [k, v] : d.outs[0].times.entries()) {
    names.push_back(k);
    EXPECT_GE(v, 0.0);
  }
  for (const char* want : {"Send Piv", "Matvec", "Update"})
    EXPECT_NE(std::find(names.begin(), names.end(), want), names.end()) << want;
}

TEST(Trd, MismatchedBlockIsRejected) {
  const auto a = frank_matrix(6);
  EXPECT_THROW(msgnet::spawn_spmd(2,
                                  [&](msgnet::Communicator& w) {
                                    auto ctx = GridContext::make(w, 2, 1);
                                    // every rank passes rank 0's block
                                    return trd_distributed(ctx, distribute_matrix(a, build_grid(2, 2, 1, 0)),
                                                           TrdVariant{})
                                        .t.n();
                                  }),
               ProtocolError);
}

TEST(Trd, TrafficScopes) {
  const auto d = run_trd(frank_matrix(15), 2, 4, TrdVariant{PivotSend::NonBlockingPresend, 4, ReduceImpl::Allreduce});
  const auto row = static_cast<std::uint8_t>(msgnet::Scope::Row);
  const auto col = static_cast<std::uint8_t>(msgnet::Scope::Column);
  EXPECT_EQ(d.merged[Category::PivotTrd].scopes, row);
  EXPECT_EQ(d.merged[Category::SendYt].scopes, col);
  EXPECT_EQ(d.merged[Category::SendXt].scopes, col);
  EXPECT_EQ(d.merged[Category::MuReduce].scopes, row);
  EXPECT_EQ(d.merged[Category::TridiagAssemble].scopes, static_cast<std::uint8_t>(msgnet::Scope::World));
  for (auto c : msgnet::all_categories()) {
    if (c == Category::TridiagAssemble) continue;
    EXPECT_EQ(d.merged[c].scopes & static_cast<std::uint8_t>(msgnet::Scope::World), 0)
        << msgnet::category_name(c);
  }
}

TEST(Trd, CountersAreDeterministic) {
  const auto a = frank_matrix(13);
  const TrdVariant v{PivotSend::NonBlockingPresend, 3, ReduceImpl::BinaryTree};
  const auto d1 = run_trd(a, 4, 2, v);
  const auto d2 = run_trd(a, 4, 2, v);
  EXPECT_EQ(d1.merged, d2.merged);
  EXPECT_EQ(d1.totals.collective_instances, d2.totals.collective_instances);
}
