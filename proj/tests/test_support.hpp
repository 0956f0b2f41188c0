#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "smalleig/densecore.hpp"
#include "smalleig/msgnet.hpp"
#include "smalleig/sept.hpp"
#include "smalleig/trd.hpp"

namespace testsupport {

using smalleig::Columns;
using smalleig::DenseMatrix;

inline DenseMatrix random_symmetric(int n, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  DenseMatrix a(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) a(i, j) = a(j, i) = u(rng);
  return a;
}

inline DenseMatrix multiply(const DenseMatrix& a, const DenseMatrix& b) {
  const int n = a.n();
  DenseMatrix c(n);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) {
      const double aik = a(i, k);
      for (int j = 0; j < n; ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

inline DenseMatrix transpose(const DenseMatrix& a) {
  DenseMatrix t(a.n());
  for (int i = 0; i < a.n(); ++i)
    for (int j = 0; j < a.n(); ++j) t(j, i) = a(i, j);
  return t;
}

/// Explicit Q = Q_1 Q_2 ... Q_{n-2} from a factor set.
inline DenseMatrix explicit_q(const smalleig::HouseholderFactorSet& f) {
  Columns cols;
  for (int j = 0; j < f.n; ++j) {
    std::vector<double> e(static_cast<std::size_t>(f.n), 0.0);
    e[static_cast<std::size_t>(j)] = 1.0;
    cols.push_back(e);
  }
  const Columns q = smalleig::hit_sequential(f, cols);
  DenseMatrix m(f.n);
  for (int j = 0; j < f.n; ++j)
    for (int i = 0; i < f.n; ++i) m(i, j) = q[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
  return m;
}

inline double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b) {
  double m = 0.0;
  for (int i = 0; i < a.n(); ++i)
    for (int j = 0; j < a.n(); ++j) m = std::max(m, std::fabs(a(i, j) - b(i, j)));
  return m;
}

/// Eigenvalues below sigma from the sign changes of the characteristic
/// polynomial sequence p_0 .. p_n of T (computed independently of the LDL
/// recurrence); only reliable for small, well-scaled n.
inline int charpoly_count(const smalleig::TridiagonalMatrix& t, double sigma) {
  const std::size_t n = t.d.size();
  // p_k(sigma) = det(T_k - sigma I); eigenvalues below sigma equal the sign
  // agreements of det(sigma I - T_k) sequence, counted the classical way.
  long double pm1 = 1.0L;
  long double p = static_cast<long double>(t.d[0]) - sigma;
  auto sgn = [](long double v) { return v > 0 ? 1 : (v < 0 ? -1 : 0); };
  int prev = 1;
  int count = 0;
  auto step = [&](long double v) {
    int s = sgn(v);
    if (s == 0) s = -prev;
    if (s != prev) ++count;
    prev = s;
  };
  step(p);
  for (std::size_t i = 1; i < n; ++i) {
    const long double e = t.e[i - 1];
    const long double next = (static_cast<long double>(t.d[i]) - sigma) * p - e * e * pm1;
    pm1 = p;
    p = next;
    step(p);
  }
  return count;
}

/// Eigenvalues of T by bisection on charpoly_count, descending.
inline std::vector<double> brute_eigenvalues(const smalleig::TridiagonalMatrix& t) {
  const int n = t.n();
  double lo = 0.0;
  double hi = 0.0;
  for (int i = 0; i < n; ++i) {
    double r = 0.0;
    if (i > 0) r += std::fabs(t.e[static_cast<std::size_t>(i - 1)]);
    if (i + 1 < n) r += std::fabs(t.e[static_cast<std::size_t>(i)]);
    lo = std::min(lo, t.d[static_cast<std::size_t>(i)] - r);
    hi = std::max(hi, t.d[static_cast<std::size_t>(i)] + r);
  }
  lo -= 1.0;
  hi += 1.0;
  std::vector<double> out;
  for (int k = 1; k <= n; ++k) {
    double a = lo;
    double b = hi;
    for (int it = 0; it < 200; ++it) {
      const double m = 0.5 * (a + b);
      if (m <= a || m >= b) break;
      if (charpoly_count(t, m) <= n - k)
        a = m;
      else
        b = m;
    }
    out.push_back(0.5 * (a + b));
  }
  return out;
}

/// Distributed TRD on a p_x x p_y grid; results indexed by rank.
struct DistTrd {
  std::vector<smalleig::TrdOutput> outs;
  smalleig::msgnet::WorldTotals totals;
  smalleig::msgnet::CommStats merged;
};

inline DistTrd run_trd(const DenseMatrix& a, int px, int py, const smalleig::TrdVariant& v) {
  auto run = smalleig::msgnet::spawn_spmd(px * py, [&](smalleig::msgnet::Communicator& w) {
    auto ctx = smalleig::GridContext::make(w, px, py);
    return smalleig::trd_distributed(ctx, smalleig::distribute_matrix(a, ctx.grid), v);
  });
  return {std::move(run.results), run.totals, run.merged};
}

inline std::vector<std::pair<int, int>> small_grids() {
  return {{1, 1}, {1, 2}, {2, 1}, {2, 2}, {2, 4}, {4, 2}};
}

}  // namespace testsupport
