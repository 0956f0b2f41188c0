#include "smalleig/densecore.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

#include "smalleig/error.hpp"

namespace smalleig {

DenseMatrix::DenseMatrix(int n, double fill)
    : n_(n), data_(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), fill) {
  if (n < 0) throw UsageError("matrix order must be non-negative");
}

DenseMatrix::DenseMatrix(int n, std::vector<double> row_major)
    : n_(n), data_(std::move(row_major)) {
  if (n < 0 || data_.size() != static_cast<std::size_t>(n) * static_cast<std::size_t>(n))
    throw UsageError("row-major data does not match matrix order");
}

DenseMatrix DenseMatrix::identity(int n) {
  DenseMatrix m(n);
  for (int i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

DenseMatrix DenseMatrix::diagonal(std::span<const double> d) {
  DenseMatrix m(static_cast<int>(d.size()));
  for (int i = 0; i < m.n(); ++i) m(i, i) = d[static_cast<std::size_t>(i)];
  return m;
}

std::vector<double> DenseMatrix::column(int j) const {
  std::vector<double> c(static_cast<std::size_t>(n_));
  for (int i = 0; i < n_; ++i) c[static_cast<std::size_t>(i)] = (*this)(i, j);
  return c;
}

double DenseMatrix::norm_inf() const {
  double best = 0.0;
  for (int i = 0; i < n_; ++i) {
    double row = 0.0;
    for (int j = 0; j < n_; ++j) row += std::fabs((*this)(i, j));
    best = std::max(best, row);
  }
  return best;
}

double DenseMatrix::norm_fro() const {
  double s = 0.0;
  for (double v : data_) s += v * v;
  return std::sqrt(s);
}

double DenseMatrix::trace() const {
  double t = 0.0;
  for (int i = 0; i < n_; ++i) t += (*this)(i, i);
  return t;
}

double TridiagonalMatrix::norm_inf() const {
  double best = 0.0;
  const int m = n();
  for (int i = 0; i < m; ++i) {
    double row = std::fabs(d[static_cast<std::size_t>(i)]);
    if (i > 0) row += std::fabs(e[static_cast<std::size_t>(i - 1)]);
    if (i + 1 < m) row += std::fabs(e[static_cast<std::size_t>(i)]);
    best = std::max(best, row);
  }
  return best;
}

DenseMatrix TridiagonalMatrix::to_dense() const {
  DenseMatrix m(n());
  for (int i = 0; i < n(); ++i) {
    m(i, i) = d[static_cast<std::size_t>(i)];
    if (i + 1 < n()) {
      m(i + 1, i) = e[static_cast<std::size_t>(i)];
      m(i, i + 1) = e[static_cast<std::size_t>(i)];
    }
  }
  return m;
}

DenseMatrix frank_matrix(int n) {
  if (n < 1) throw UsageError("Frank matrix order must be >= 1");
  DenseMatrix a(n);
  for (int i = 1; i <= n; ++i)
    for (int j = 1; j <= n; ++j) a(i - 1, j - 1) = static_cast<double>(n - std::max(i, j) + 1);
  return a;
}

std::vector<double> frank_eigenvalues(int n) {
  if (n < 1) throw UsageError("Frank matrix order must be >= 1");
  std::vector<double> lambda(static_cast<std::size_t>(n));
  for (int k = 1; k <= n; ++k) {
    const double theta = static_cast<double>(2 * k - 1) * std::numbers::pi / static_cast<double>(2 * n + 1);
    const double s = std::sin(0.5 * theta);  // 1 - cos(theta) = 2 sin^2(theta / 2)
    lambda[static_cast<std::size_t>(k - 1)] = 1.0 / (4.0 * s * s);
  }
  return lambda;
}

Reflection householder_reflect(std::span<const double> x) {
  if (x.empty()) throw UsageError("householder_reflect needs a non-empty vector");
  ExactSum tail;
  for (std::size_t i = 1; i < x.size(); ++i) tail.add(x[i] * x[i]);
  const auto r = kernels::make_reflector(x[0], tail);
  Reflection out{r.tau, r.beta, std::vector<double>(x.size(), 0.0)};
  out.v[0] = 1.0;
  for (std::size_t i = 1; i < x.size(); ++i) out.v[i] = kernels::reflector_entry(x[i], r);
  return out;
}

void check_symmetric(const DenseMatrix& a) {
  const int n = a.n();
  double worst = -1.0;
  int wi = 0;
  int wj = 0;
  double max_row = 0.0;
  for (int i = 0; i < n; ++i) {
    double row = 0.0;
    for (int j = 0; j < n; ++j) {
      if (!std::isfinite(a(i, j)))
        throw ValidationError("matrix entry (" + std::to_string(i + 1) + ", " +
                              std::to_string(j + 1) + ") is not finite");
      const double diff = std::fabs(a(i, j) - a(j, i));
      row += diff;
      if (diff > worst) {
        worst = diff;
        wi = i;
        wj = j;
      }
    }
    max_row = std::max(max_row, row);
  }
  if (max_row > 1e-12 * a.norm_inf()) {
    std::ostringstream os;
    os.precision(17);
    os << "matrix is not symmetric: worst pair a(" << wi + 1 << "," << wj + 1
       << ") = " << a(wi, wj) << " vs a(" << wj + 1 << "," << wi + 1 << ") = " << a(wj, wi);
    throw ValidationError(os.str());
  }
}

TrdResult trd_sequential(const DenseMatrix& a_in) {
  check_symmetric(a_in);
  const int n = a_in.n();
  if (n < 1) throw UsageError("trd_sequential needs n >= 1");
  DenseMatrix a = a_in;
  TrdResult out;
  out.t.d.assign(static_cast<std::size_t>(n), 0.0);
  out.t.e.assign(static_cast<std::size_t>(std::max(n - 1, 0)), 0.0);
  out.factors.n = n;

  std::vector<double> v(static_cast<std::size_t>(n));
  std::vector<double> y(static_cast<std::size_t>(n));
  std::vector<double> w(static_cast<std::size_t>(n));
  for (int k = 0; k + 2 < n; ++k) {
    // Reflector annihilating a(k+2.., k).
    ExactSum tail;
    for (int i = k + 2; i < n; ++i) tail.add(a(i, k) * a(i, k));
    const auto r = kernels::make_reflector(a(k + 1, k), tail);
    v[static_cast<std::size_t>(k + 1)] = 1.0;
    for (int i = k + 2; i < n; ++i) v[static_cast<std::size_t>(i)] = kernels::reflector_entry(a(i, k), r);
    out.t.d[static_cast<std::size_t>(k)] = a(k, k);
    out.t.e[static_cast<std::size_t>(k)] = r.beta;

    // y = tau A v over the trailing block.
    for (int i = k + 1; i < n; ++i) {
      ExactSum s;
      for (int j = k + 1; j < n; ++j) s.add(a(i, j) * v[static_cast<std::size_t>(j)]);
      y[static_cast<std::size_t>(i)] = r.tau * s.round();
    }
    // mu = tau y^T v
    ExactSum dot;
    for (int i = k + 1; i < n; ++i) dot.add(y[static_cast<std::size_t>(i)] * v[static_cast<std::size_t>(i)]);
    const double mu = r.tau * dot.round();
    const double half_mu = 0.5 * mu;
    for (int i = k + 1; i < n; ++i)
      w[static_cast<std::size_t>(i)] = kernels::w_entry(y[static_cast<std::size_t>(i)], half_mu, v[static_cast<std::size_t>(i)]);
    for (int i = k + 1; i < n; ++i)
      for (int j = k + 1; j < n; ++j)
        a(i, j) = kernels::rank2_update(a(i, j), v[static_cast<std::size_t>(i)], w[static_cast<std::size_t>(i)],
                                        v[static_cast<std::size_t>(j)], w[static_cast<std::size_t>(j)]);

    out.factors.tau.push_back(r.tau);
    out.factors.v.emplace_back(v.begin() + k + 1, v.end());
  }
  if (n >= 2) {
    out.t.d[static_cast<std::size_t>(n - 2)] = a(n - 2, n - 2);
    out.t.e[static_cast<std::size_t>(n - 2)] = a(n - 1, n - 2);
  }
  out.t.d[static_cast<std::size_t>(n - 1)] = a(n - 1, n - 1);
  return out;
}

Columns hit_sequential(const HouseholderFactorSet& f, const Columns& v) {
  Columns x = v;
  for (const auto& col : x)
    if (static_cast<int>(col.size()) != f.n)
      throw UsageError("hit_sequential: column length does not match the factor set");
  for (int k = static_cast<int>(f.size()) - 1; k >= 0; --k) {
    const auto& vk = f.v[static_cast<std::size_t>(k)];
    for (auto& col : x)
      kernels::apply_reflector(f.tau[static_cast<std::size_t>(k)], vk,
                               std::span<double>(col).subspan(static_cast<std::size_t>(k + 1)));
  }
  return x;
}

AccuracyReport accuracy(const DenseMatrix& a, std::span<const double> lambdas,
                        const Columns& x, std::optional<std::span<const double>> exact) {
  const int n = a.n();
  if (lambdas.size() != x.size())
    throw UsageError("accuracy: eigenvalue and eigenvector counts differ");
  AccuracyReport rep;
  if (exact) {
    if (exact->size() != lambdas.size())
      throw UsageError("accuracy: reference eigenvalue count differs");
    double err = 0.0;
    for (std::size_t k = 0; k < lambdas.size(); ++k)
      err = std::max(err, std::fabs(lambdas[k] - (*exact)[k]));
    rep.max_eval_err = err;
  }
  const std::size_t m = x.size();
  double orth = 0.0;
  for (std::size_t p = 0; p < m; ++p) {
    for (std::size_t q = 0; q < m; ++q) {
      double dot = 0.0;
      for (int r = 0; r < n; ++r) dot += x[p][static_cast<std::size_t>(r)] * x[q][static_cast<std::size_t>(r)];
      const double dev = dot - (p == q ? 1.0 : 0.0);
      orth += dev * dev;
    }
  }
  rep.orth_err = std::sqrt(orth);
  for (std::size_t p = 0; p < m; ++p) {
    double res = 0.0;
    for (int i = 0; i < n; ++i) {
      double ax = 0.0;
      for (int j = 0; j < n; ++j) ax += a(i, j) * x[p][static_cast<std::size_t>(j)];
      const double ri = ax - lambdas[p] * x[p][static_cast<std::size_t>(i)];
      res += ri * ri;
    }
    rep.max_residual = std::max(rep.max_residual, std::sqrt(res));
  }
  return rep;
}

DenseMatrix read_matrix(std::istream& in) {
  long long n = 0;
  if (!(in >> n) || n < 1 || n > 100000)
    throw ValidationError("matrix file: first token must be the order n >= 1");
  const int order = static_cast<int>(n);
  DenseMatrix a(order);
  for (int i = 0; i < order; ++i) {
    for (int j = 0; j < order; ++j) {
      double v = 0.0;
      if (!(in >> v))
        throw ValidationError("matrix file: expected " + std::to_string(n * n) +
                              " values, read " + std::to_string(i * order + j));
      a(i, j) = v;
    }
  }
  std::string extra;
  if (in >> extra) throw ValidationError("matrix file: trailing data after n*n values");
  check_symmetric(a);
  return a;
}

DenseMatrix read_matrix_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open matrix file '" + path + "'");
  return read_matrix(in);
}

void write_matrix(std::ostream& out, const DenseMatrix& a) {
  out.precision(17);
  out << a.n() << '\n';
  for (int i = 0; i < a.n(); ++i) {
    for (int j = 0; j < a.n(); ++j) out << (j ? " " : "") << a(i, j);
    out << '\n';
  }
}

}  // namespace smalleig
