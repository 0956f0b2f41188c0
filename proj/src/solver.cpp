#include "smalleig/solver.hpp"

#include <chrono>
#include <cmath>
#include <string>

#include "smalleig/error.hpp"

namespace smalleig {

namespace {

template <class F>
auto tagged(const char* phase, F&& f) -> decltype(f()) {
  const std::string p = std::string(phase) + ": ";
  try {
    return f();
  } catch (const ConfigError& e) {
    throw ConfigError(p + e.what());
  } catch (const ProtocolError& e) {
    throw ProtocolError(p + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(p + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(p + e.what());
  } catch (const UsageError& e) {
    throw UsageError(p + e.what());
  }
}

}  // namespace

void validate(const SolveConfig& c, int n) {
  if (n < 1) throw ConfigError("matrix order must be >= 1");
  if (c.p_x < 1 || c.p_y < 1) throw ConfigError("grid dimensions must be >= 1");
  validate(c.trd, n);
  if (c.hit.mblk < 1) throw ConfigError("MBLK must be >= 1");
  if (c.mems.ml < 1 || c.mems.el < 1) throw ConfigError("ML and EL must be >= 1");
  if (c.mems.tol < 0.0 || !std::isfinite(c.mems.tol))
    throw ConfigError("tolerance must be finite and non-negative");
  if (c.exact && static_cast<int>(c.exact->size()) != n)
    throw ConfigError("reference eigenvalue count does not match n");
}

RankSolve solve_embedded(msgnet::Communicator& world, const DenseMatrix& a,
                         const SolveConfig& config) {
  RankSolve out;
  GridContext ctx = tagged("grid", [&] { return GridContext::make(world, config.p_x, config.p_y); });
  LocalMatrix local = distribute_matrix(a, ctx.grid);
  TrdOutput trd = tagged("trd", [&] { return trd_distributed(ctx, std::move(local), config.trd); });

  const msgnet::CommStats before = world.stats();
  const auto t0 = std::chrono::steady_clock::now();
  EigenPairsLocal pairs =
      tagged("sept", [&] { return sept_distributed(world, trd.t, config.mems, config.reorth); });
  out.sept_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out.stats.sept = world.stats().since(before);

  HitOutput hit = tagged("hit", [&] { return hit_distributed(ctx, trd.factors, pairs, config.hit); });

  out.shard.rank = world.rank();
  out.shard.indices.assign(pairs.indices.elements().begin(), pairs.indices.elements().end());
  out.shard.values = std::move(pairs.values);
  out.shard.vectors = std::move(hit.x);
  out.t = std::move(trd.t);
  out.stats.trd = trd.stats;
  out.stats.hit = hit.stats;
  out.trd_times = std::move(trd.times);
  out.hit_times = std::move(hit.times);
  return out;
}

EigenResult solve(const DenseMatrix& a, const SolveConfig& config) {
  validate(config, a.n());
  check_symmetric(a);
  const auto t0 = std::chrono::steady_clock::now();
  auto run = msgnet::spawn_spmd(config.p_total(), [&](msgnet::Communicator& world) {
    return solve_embedded(world, a, config);
  });

  EigenResult r;
  r.n = a.n();
  r.totals = run.totals;
  r.eigenvalues.assign(static_cast<std::size_t>(a.n()), 0.0);
  for (auto& rs : run.results) {
    for (std::size_t s = 0; s < rs.shard.indices.size(); ++s)
      r.eigenvalues[static_cast<std::size_t>(rs.shard.indices[s] - 1)] = rs.shard.values[s];
    r.stats.trd += rs.stats.trd;
    r.stats.sept += rs.stats.sept;
    r.stats.hit += rs.stats.hit;
    r.rank_stats.push_back(rs.stats);
  }
  r.trd_times = run.results.back().trd_times;
  r.hit_times = run.results.back().hit_times;
  r.sept_seconds = run.results.back().sept_seconds;
  for (auto& rs : run.results) r.shards.push_back(std::move(rs.shard));
  if (config.perturb_eigenvalue != 0.0) {
    r.eigenvalues[0] += config.perturb_eigenvalue;
    for (auto& sh : r.shards)
      for (std::size_t s = 0; s < sh.indices.size(); ++s)
        if (sh.indices[s] == 1) sh.values[s] = r.eigenvalues[0];
  }
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  if (config.verify) {
    const Columns x = eigenvector_columns(r);
    if (config.exact)
      r.accuracy = accuracy(a, r.eigenvalues, x, std::span<const double>(*config.exact));
    else
      r.accuracy = accuracy(a, r.eigenvalues, x);
  }
  return r;
}

Columns eigenvector_columns(const EigenResult& result) {
  Columns x(static_cast<std::size_t>(result.n));
  std::vector<char> seen(static_cast<std::size_t>(result.n), 0);
  for (const auto& sh : result.shards) {
    if (sh.vectors.size() != sh.indices.size())
      throw UsageError("shard of rank " + std::to_string(sh.rank) + " is incomplete");
    for (std::size_t s = 0; s < sh.indices.size(); ++s) {
      const int k = sh.indices[s];
      if (k < 1 || k > result.n || seen[static_cast<std::size_t>(k - 1)])
        throw UsageError("shard of rank " + std::to_string(sh.rank) + " has a bad index " +
                         std::to_string(k));
      seen[static_cast<std::size_t>(k - 1)] = 1;
      x[static_cast<std::size_t>(k - 1)] = sh.vectors[s];
    }
  }
  for (int k = 1; k <= result.n; ++k)
    if (!seen[static_cast<std::size_t>(k - 1)])
      throw UsageError("eigenvector " + std::to_string(k) + " is missing from every shard");
  return x;
}

DenseMatrix gather_eigenvectors(const EigenResult& result) {
  const Columns x = eigenvector_columns(result);
  DenseMatrix m(result.n);
  for (int j = 0; j < result.n; ++j)
    for (int i = 0; i < result.n; ++i) m(i, j) = x[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
  return m;
}

}  // namespace smalleig
