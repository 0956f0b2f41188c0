#include <gtest/gtest.h>

#include "smalleig/error.hpp"
#include "smalleig/hit.hpp"
#include "test_support.hpp"

using namespace smalleig;
using namespace testsupport;
using msgnet::Category;

namespace {

struct HitRun {
  std::vector<Columns> x;  // per rank
  std::vector<EigenPairsLocal> pairs;
  msgnet::SpmdRun<std::pair<HitOutput, EigenPairsLocal>> raw;
};

HitRun run_hit(const DenseMatrix& a, int px, int py, const HitVariant& hv) {
  HitRun out;
  out.raw = msgnet::spawn_spmd(px * py, [&](msgnet::Communicator& w) {
    auto ctx = GridContext::make(w, px, py);
    auto trd = trd_distributed(ctx, distribute_matrix(a, ctx.grid), TrdVariant{});
    auto pairs = sept_distributed(w, trd.t, MemsParams{});
    auto h = hit_distributed(ctx, trd.factors, pairs, hv);
    return std::make_pair(std::move(h), std::move(pairs));
  });
  for (auto& [h, p] : out.raw.results) {
    out.x.push_back(h.x);
    out.pairs.push_back(p);
  }
  return out;
}

std::vector<HitVariant> hit_variants() {
  std::vector<HitVariant> vs;
  for (auto g : {GatherImpl::PerVectorBcast, GatherImpl::NonBlockingSend, GatherImpl::BlockBcast})
    for (int m : {1, 3, 16, 128}) vs.push_back({g, m});
  return vs;
}

}  // namespace

TEST(Hit, ExpectedInvocationFormula) {
  EXPECT_EQ(expected_gather_invocations(34, 2, {GatherImpl::PerVectorBcast, 4}), 64u);
  EXPECT_EQ(expected_gather_invocations(34, 2, {GatherImpl::BlockBcast, 4}), 16u);
  EXPECT_EQ(expected_gather_invocations(34, 2, {GatherImpl::BlockBcast, 128}), 2u);
  EXPECT_EQ(expected_gather_invocations(34, 1, {GatherImpl::NonBlockingSend, 4}), 0u);
  EXPECT_EQ(expected_gather_invocations(2, 4, {GatherImpl::BlockBcast, 1}), 0u);
}

TEST(Hit, BitwiseEqualsSequentialForAllVariants) {
  std::mt19937_64 rng(31);
  for (int n : {1, 2, 3, 5, 9, 16}) {
    const auto a = random_symmetric(n, rng);
    const auto seq = trd_sequential(a);
    for (auto [px, py] : small_grids()) {
      for (const auto& hv : hit_variants()) {
        const auto r = run_hit(a, px, py, hv);
        for (std::size_t rank = 0; rank < r.x.size(); ++rank) {
          const auto expect = hit_sequential(seq.factors, r.pairs[rank].vectors);
          ASSERT_EQ(r.x[rank], expect) << "n=" << n << " grid " << px << "x" << py << " rank "
                                       << rank << " gather " << static_cast<int>(hv.gather)
                                       << " mblk " << hv.mblk;
        }
      }
    }
  }
}

TEST(Hit, InvocationCountsMatchFormula) {
  for (int n : {18, 34}) {
    for (int px : {1, 2, 4}) {
      const auto a = frank_matrix(n);
      for (const auto& hv : hit_variants()) {
        const auto r = run_hit(a, px, 2, hv);
        for (const auto& s : r.raw.rank_stats)
          EXPECT_EQ(s[Category::GatherHit].invocations, expected_gather_invocations(n, px, hv))
              << "n=" << n << " px=" << px << " gather " << static_cast<int>(hv.gather)
              << " mblk " << hv.mblk;
      }
    }
  }
}

TEST(Hit, BlockBroadcastMovesSameBytesInFewerMessages) {
  const auto a = frank_matrix(34);
  const auto per = run_hit(a, 2, 2, {GatherImpl::PerVectorBcast, 1});
  const auto blk = run_hit(a, 2, 2, {GatherImpl::BlockBcast, 8});
  const auto& ps = per.raw.merged[Category::GatherHit];
  const auto& bs = blk.raw.merged[Category::GatherHit];
  const auto isend = run_hit(a, 2, 2, {GatherImpl::NonBlockingSend, 8});
  EXPECT_LT(bs.messages, ps.messages);
  EXPECT_EQ(bs.bytes, ps.bytes);
  EXPECT_EQ(isend.raw.merged[Category::GatherHit].bytes, ps.bytes);
  EXPECT_EQ(per.x, blk.x);
}

TEST(Hit, RejectsBadBlockSize) {
  const auto a = frank_matrix(6);
  EXPECT_THROW(run_hit(a, 2, 1, {GatherImpl::BlockBcast, 0}), ConfigError);
}

TEST(Hit, OrthogonalityTransport) {
  std::mt19937_64 rng(8);
  const int n = 30;
  const auto a = random_symmetric(n, rng);
  const auto r = run_hit(a, 2, 2, {GatherImpl::BlockBcast, 4});
  Columns v;
  Columns x;
  for (std::size_t rank = 0; rank < r.x.size(); ++rank) {
    v.insert(v.end(), r.pairs[rank].vectors.begin(), r.pairs[rank].vectors.end());
    x.insert(x.end(), r.x[rank].begin(), r.x[rank].end());
  }
  auto orth = [](const Columns& c) {
    double s = 0.0;
    for (std::size_t p = 0; p < c.size(); ++p)
      for (std::size_t q = 0; q < c.size(); ++q) {
        double d = 0.0;
        for (std::size_t i = 0; i < c[p].size(); ++i) d += c[p][i] * c[q][i];
        d -= p == q ? 1.0 : 0.0;
        s += d * d;
      }
    return std::sqrt(s);
  };
  EXPECT_LE(orth(x), orth(v) + n * 1e-13);
}

TEST(Hit, GatherStaysInColumnCommunicators) {
  const auto r = run_hit(frank_matrix(20), 4, 2, {GatherImpl::NonBlockingSend, 1});
  EXPECT_EQ(r.raw.merged[Category::GatherHit].scopes, static_cast<std::uint8_t>(msgnet::Scope::Column));
}
