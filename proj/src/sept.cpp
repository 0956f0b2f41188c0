#include "smalleig/sept.hpp"

#include <algorithm>
#include <bit>
#include <cfloat>
#include <cmath>
#include <random>
#include <string>

#include "smalleig/error.hpp"

namespace smalleig {

namespace {
constexpr double kEps = DBL_EPSILON;
constexpr int kMaxIterations = 8;
constexpr int kRetries = 3;

double pivmin_of(const TridiagonalMatrix& t) {
  double m = 1.0;
  for (double e : t.e) m = std::max(m, e * e);
  return DBL_MIN * m;
}

void check_params(const MemsParams& p) {
  if (p.ml < 1) throw ConfigError("ML must be >= 1");
  if (p.el < 1) throw ConfigError("EL must be >= 1");
  if (!std::isfinite(p.tol)) throw ConfigError("tolerance must be finite");
}

struct Bracket {
  double lo;
  double hi;
  int target;  // count(lo) <= target < count(hi)
  bool done;
};

// One multisection step; returns false when the bracket cannot shrink.
bool refine(const TridiagonalMatrix& t, Bracket& b, int ml, double tol) {
  if (b.hi - b.lo <= tol) return false;
  double lo = b.lo;
  double hi = b.hi;
  bool moved = false;
  for (int s = 1; s <= ml; ++s) {
    const double p = b.lo + (b.hi - b.lo) * (static_cast<double>(s) / static_cast<double>(ml + 1));
    if (p <= lo || p >= hi) continue;
    if (sturm_count(t, p) <= b.target) {
      lo = p;
      moved = true;
    } else {
      hi = p;
      moved = true;
      break;
    }
  }
  b.lo = lo;
  b.hi = hi;
  return moved;
}

struct TridiagLu {
  std::vector<double> dl, dd, du, du2;
  std::vector<char> swapped;
};

TridiagLu factor(const TridiagonalMatrix& t, double sigma, double pivtiny) {
  const std::size_t n = t.d.size();
  TridiagLu f;
  f.dd.resize(n);
  for (std::size_t i = 0; i < n; ++i) f.dd[i] = t.d[i] - sigma;
  f.dl = t.e;
  f.du = t.e;
  f.du2.assign(n > 2 ? n - 2 : 0, 0.0);
  f.swapped.assign(n > 1 ? n - 1 : 0, 0);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (std::fabs(f.dd[i]) >= std::fabs(f.dl[i])) {
      const double fact = f.dd[i] != 0.0 ? f.dl[i] / f.dd[i] : 0.0;
      f.dl[i] = fact;
      f.dd[i + 1] -= fact * f.du[i];
    } else {
      const double fact = f.dd[i] / f.dl[i];
      f.dd[i] = f.dl[i];
      f.dl[i] = fact;
      const double tmp = f.du[i];
      f.du[i] = f.dd[i + 1];
      f.dd[i + 1] = tmp - fact * f.dd[i + 1];
      if (i + 2 < n) {
        f.du2[i] = f.du[i + 1];
        f.du[i + 1] = -fact * f.du[i + 1];
      }
      f.swapped[i] = 1;
    }
  }
  for (double& p : f.dd)
    if (std::fabs(p) < pivtiny) p = p < 0.0 ? -pivtiny : pivtiny;
  return f;
}

void solve(const TridiagLu& f, std::vector<double>& b) {
  const std::size_t n = b.size();
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (f.swapped[i]) {
      const double tmp = b[i];
      b[i] = b[i + 1];
      b[i + 1] = tmp - f.dl[i] * b[i];
    } else {
      b[i + 1] -= f.dl[i] * b[i];
    }
  }
  b[n - 1] /= f.dd[n - 1];
  if (n >= 2) b[n - 2] = (b[n - 2] - f.du[n - 2] * b[n - 1]) / f.dd[n - 2];
  for (std::size_t i = n >= 3 ? n - 2 : 0; i-- > 0;)
    b[i] = (b[i] - f.du[i] * b[i + 1] - f.du2[i] * b[i + 2]) / f.dd[i];
}

double norm2(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

void scale_to_unit(std::vector<double>& x) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::fabs(v));
  if (m > 0.0)
    for (double& v : x) v /= m;
  const double nrm = norm2(x);
  if (nrm > 0.0)
    for (double& v : x) v /= nrm;
}

void project_out(std::vector<double>& x, const std::vector<std::vector<double>>& basis) {
  for (const auto& q : basis) {
    double dot = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) dot += q[i] * x[i];
    for (std::size_t i = 0; i < x.size(); ++i) x[i] -= dot * q[i];
  }
}

double residual(const TridiagonalMatrix& t, double lambda, const std::vector<double>& x) {
  const std::size_t n = x.size();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double r = (t.d[i] - lambda) * x[i];
    if (i > 0) r += t.e[i - 1] * x[i - 1];
    if (i + 1 < n) r += t.e[i] * x[i + 1];
    s += r * r;
  }
  return std::sqrt(s);
}

void fix_sign(std::vector<double>& x) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < x.size(); ++i)
    if (std::fabs(x[i]) > std::fabs(x[best])) best = i;
  if (x[best] < 0.0)
    for (double& v : x) v = -v;
}
}  // namespace

double default_tolerance(const TridiagonalMatrix& t) {
  const double nrm = t.norm_inf();
  return nrm > 0.0 ? 1e-14 * nrm : DBL_MIN;
}

int sturm_count(const TridiagonalMatrix& t, double sigma) {
  const std::size_t n = t.d.size();
  if (n == 0) return 0;
  const double pivmin = pivmin_of(t);
  auto fix = [pivmin](double q) {
    if (std::fabs(q) < pivmin) return q < 0.0 ? -pivmin : pivmin;
    return q;
  };
  int count = 0;
  double q = fix(t.d[0] - sigma);
  if (q < 0.0) ++count;
  for (std::size_t i = 1; i < n; ++i) {
    q = fix((t.d[i] - sigma) - (t.e[i - 1] * t.e[i - 1]) / q);
    if (q < 0.0) ++count;
  }
  return count;
}

std::pair<double, double> gershgorin(const TridiagonalMatrix& t) {
  const std::size_t n = t.d.size();
  if (n == 0) return {0.0, 0.0};
  double lo = t.d[0];
  double hi = t.d[0];
  for (std::size_t i = 0; i < n; ++i) {
    double r = 0.0;
    if (i > 0) r += std::fabs(t.e[i - 1]);
    if (i + 1 < n) r += std::fabs(t.e[i]);
    lo = std::min(lo, t.d[i] - r);
    hi = std::max(hi, t.d[i] + r);
  }
  const double pad = 2.0 * kEps * std::max(std::fabs(lo), std::fabs(hi)) * static_cast<double>(n) +
                     2.0 * pivmin_of(t);
  return {lo - pad, hi + pad};
}

std::vector<double> mems_eigenvalues(const TridiagonalMatrix& t, const std::vector<int>& indices,
                                     const MemsParams& params) {
  check_params(params);
  const int n = t.n();
  for (int k : indices)
    if (k < 1 || k > n)
      throw UsageError("eigenvalue index " + std::to_string(k) + " outside [1, " +
                       std::to_string(n) + "]");
  if (n == 1) return std::vector<double>(indices.size(), t.d[0]);
  const double tol = params.tol > 0.0 ? params.tol : default_tolerance(t);
  const auto [glo, ghi] = gershgorin(t);

  std::vector<Bracket> br;
  br.reserve(indices.size());
  for (int k : indices) br.push_back({glo, ghi, n - k, false});
  const std::size_t el = static_cast<std::size_t>(params.el);
  for (std::size_t start = 0; start < br.size(); start += el) {
    const std::size_t end = std::min(br.size(), start + el);
    bool active = true;
    while (active) {
      active = false;
      for (std::size_t i = start; i < end; ++i) {
        if (br[i].done) continue;
        if (refine(t, br[i], params.ml, tol))
          active = true;
        else
          br[i].done = true;
      }
    }
  }
  std::vector<double> out;
  out.reserve(br.size());
  for (const auto& b : br) out.push_back(b.lo + (b.hi - b.lo) * 0.5);
  return out;
}

double cluster_gap(const TridiagonalMatrix& t) { return 1e-3 * t.norm_inf(); }

std::vector<double> inverse_iteration(const TridiagonalMatrix& t, double lambda, int index,
                                      const std::vector<std::vector<double>>& against,
                                      double tol) {
  const std::size_t n = t.d.size();
  if (n == 0) throw UsageError("inverse_iteration on an empty matrix");
  if (n == 1) return {1.0};
  const double nrm = t.norm_inf();
  const double pivtiny = nrm > 0.0 ? kEps * nrm : DBL_MIN;
  const double eig_tol = tol > 0.0 ? tol : default_tolerance(t);
  const double thresh = 10.0 * static_cast<double>(n) * kEps * nrm + eig_tol;

  std::mt19937_64 rng(static_cast<std::uint64_t>(index));
  std::vector<double> start(n);
  for (auto& v : start) v = static_cast<double>(rng() >> 11) * 0x1p-53 * 2.0 - 1.0;

  for (int attempt = 0; attempt < kRetries; ++attempt) {
    const double sigma = lambda + static_cast<double>(attempt) * 10.0 * pivtiny;
    const TridiagLu f = factor(t, sigma, pivtiny);
    std::vector<double> x = start;
    project_out(x, against);
    scale_to_unit(x);
    bool converged = false;
    for (int it = 0; it < kMaxIterations; ++it) {
      solve(f, x);
      for (double v : x)
        if (!std::isfinite(v)) {
          x.clear();
          break;
        }
      if (x.empty()) break;
      project_out(x, against);
      scale_to_unit(x);
      if (norm2(x) == 0.0) break;
      if (converged) {
        fix_sign(x);
        return x;
      }
      converged = residual(t, lambda, x) <= thresh;
    }
    if (converged && !x.empty()) {
      fix_sign(x);
      return x;
    }
  }
  throw NumericalError("inverse iteration did not converge for eigenvalue index " +
                       std::to_string(index));
}

EigenPairsLocal sept_indices(const TridiagonalMatrix& t, IndexSet indices,
                             const MemsParams& params, ReorthScope scope) {
  check_params(params);
  const int n = t.n();
  EigenPairsLocal out;
  out.indices = indices;
  if (indices.empty()) return out;

  std::vector<int> all(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) all[static_cast<std::size_t>(k)] = k + 1;
  const std::vector<double> lambda = mems_eigenvalues(t, all, params);
  const double tol = params.tol > 0.0 ? params.tol : default_tolerance(t);
  const double gap = cluster_gap(t);

  // cluster_start[k]: first (1-based) index of the cluster holding k.
  std::vector<int> cluster_start(static_cast<std::size_t>(n) + 1, 1);
  for (int k = 2; k <= n; ++k)
    cluster_start[static_cast<std::size_t>(k)] =
        lambda[static_cast<std::size_t>(k - 2)] - lambda[static_cast<std::size_t>(k - 1)] > gap
            ? k
            : cluster_start[static_cast<std::size_t>(k - 1)];

  std::vector<std::vector<double>> cluster;
  int current = 0;
  int computed_to = 0;
  for (int k : indices.elements()) {
    const int cs = cluster_start[static_cast<std::size_t>(k)];
    if (cs != current) {
      cluster.clear();
      current = cs;
      computed_to = cs - 1;
    }
    if (scope == ReorthScope::GlobalCluster) {
      for (int j = computed_to + 1; j <= k; ++j)
        cluster.push_back(inverse_iteration(t, lambda[static_cast<std::size_t>(j - 1)], j, cluster, tol));
      computed_to = k;
    } else {
      cluster.push_back(inverse_iteration(t, lambda[static_cast<std::size_t>(k - 1)], k, cluster, tol));
    }
    out.values.push_back(lambda[static_cast<std::size_t>(k - 1)]);
    out.vectors.push_back(cluster.back());
  }
  return out;
}

std::uint64_t hash_tridiagonal(const TridiagonalMatrix& t) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xFF;
      h *= 0x100000001b3ull;
    }
  };
  mix(t.d.size());
  for (double v : t.d) mix(std::bit_cast<std::uint64_t>(v));
  for (double v : t.e) mix(std::bit_cast<std::uint64_t>(v));
  return h;
}

EigenPairsLocal sept_distributed(msgnet::Communicator& world, const TridiagonalMatrix& t,
                                 const MemsParams& params, ReorthScope scope) {
  const msgnet::CommStats before = world.stats();
  world.check_consistent(hash_tridiagonal(t), "sept_distributed replicated T");
  EigenPairsLocal out =
      sept_indices(t, owned_cols_1d(world.rank(), world.size(), t.n()), params, scope);
  if (world.stats().total_messages() != before.total_messages())
    throw ProtocolError("messages were exchanged during the tridiagonal eigensolve");
  return out;
}

}  // namespace smalleig
