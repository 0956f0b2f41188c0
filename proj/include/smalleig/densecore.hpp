#pragma once

// Sequential reference kernels: dense and tridiagonal matrix types, the
// Householder reflector, sequential tridiagonalization and back
// transformation, the Frank test matrix, and accuracy metrics.
//
// The element-level kernels in `kernels::` are shared with the distributed
// phases; the distributed code produces the same bits as the sequential
// code because both go through these functions and every reduction is an
// ExactSum.

#include <cmath>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "smalleig/exact_sum.hpp"

namespace smalleig {

/// Square matrix of doubles, row-major, 0-based element access.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  explicit DenseMatrix(int n, double fill = 0.0);
  DenseMatrix(int n, std::vector<double> row_major);

  static DenseMatrix identity(int n);
  static DenseMatrix diagonal(std::span<const double> d);

  int n() const { return n_; }
  double& operator()(int i, int j) { return data_[index(i, j)]; }
  double operator()(int i, int j) const { return data_[index(i, j)]; }
  std::span<const double> data() const { return data_; }

  std::vector<double> column(int j) const;
  double norm_inf() const;
  double norm_fro() const;
  double trace() const;

  bool operator==(const DenseMatrix&) const = default;

 private:
  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(i) * static_cast<std::size_t>(n_) +
           static_cast<std::size_t>(j);
  }
  int n_ = 0;
  std::vector<double> data_;
};

/// A set of column vectors of equal length (eigenvector shards, V, X).
using Columns = std::vector<std::vector<double>>;

struct TridiagonalMatrix {
  std::vector<double> d;  // diagonal, length n
  std::vector<double> e;  // sub/super-diagonal, length n - 1

  int n() const { return static_cast<int>(d.size()); }
  double norm_inf() const;
  DenseMatrix to_dense() const;
  bool operator==(const TridiagonalMatrix&) const = default;
};

/// Reflectors Q_k = I - tau_k v_k v_k^T for k = 1..n-2 (stored 0-based).
///
/// v[k] covers global rows k+2..n (1-based), i.e. 0-based rows k+1..n-1,
/// with v[k][0] == 1. tau[k] == 0 encodes the identity.
struct HouseholderFactorSet {
  int n = 0;
  std::vector<double> tau;
  std::vector<std::vector<double>> v;

  std::size_t size() const { return tau.size(); }
  bool operator==(const HouseholderFactorSet&) const = default;
};

struct AccuracyReport {
  std::optional<double> max_eval_err;  // only with reference eigenvalues
  double orth_err = 0.0;               // ||X^T X - I||_F
  double max_residual = 0.0;           // max_i ||A x_i - lambda_i x_i||_2
};

struct Reflection {
  double tau = 0.0;
  double beta = 0.0;
  std::vector<double> v;  // v[0] == 1
};

namespace kernels {

struct ReflectorScalars {
  double tau = 0.0;
  double beta = 0.0;
  double scale = 0.0;  // v_i = x_i * scale below the leading entry
};

/// Reflector for the vector (alpha, tail...) given alpha and the exact sum
/// of squares of the tail. beta = -sign(alpha) * ||x|| with sign(0) = +1.
inline ReflectorScalars make_reflector(double alpha, const ExactSum& tail_squares) {
  const double a = alpha + 0.0;  // folds -0.0 into +0.0
  if (tail_squares.is_zero()) return {0.0, a, 0.0};
  ExactSum total = tail_squares;
  total.add(a * a);
  const double norm = std::sqrt(total.round());
  const double beta = a >= 0.0 ? -norm : norm;
  return {(beta - a) / beta, beta, 1.0 / (a - beta)};
}

inline double reflector_entry(double x, const ReflectorScalars& r) {
  return r.tau == 0.0 ? 0.0 : x * r.scale;
}

/// w = y - (mu / 2) v, elementwise.
inline double w_entry(double y, double half_mu, double v) { return y - half_mu * v; }

/// One element of A - v w^T - w v^T.
inline double rank2_update(double a, double v_i, double w_i, double v_j, double w_j) {
  return (a - v_i * w_j) - w_i * v_j;
}

/// x <- (I - tau v v^T) x over the reflector's support.
inline void apply_reflector(double tau, std::span<const double> v, std::span<double> x) {
  double dot = 0.0;
  for (std::size_t r = 0; r < v.size(); ++r) dot += v[r] * x[r];
  const double sigma = tau * dot;
  for (std::size_t r = 0; r < v.size(); ++r) x[r] -= sigma * v[r];
}

}  // namespace kernels

/// a_ij = n - max(i, j) + 1 (1-based).
DenseMatrix frank_matrix(int n);

/// lambda_k = 1 / (2 (1 - cos((2k - 1) pi / (2n + 1)))), k = 1..n, descending.
std::vector<double> frank_eigenvalues(int n);

/// Householder reflection of x: (I - tau v v^T) x = (beta, 0, ..., 0).
Reflection householder_reflect(std::span<const double> x);

/// Throws ValidationError naming the worst pair when
/// ||A - A^T||_inf > 1e-12 ||A||_inf or an entry is non-finite.
void check_symmetric(const DenseMatrix& a);

struct TrdResult {
  TridiagonalMatrix t;
  HouseholderFactorSet factors;
};

/// A = Q T Q^T with Q = Q_1 Q_2 ... Q_{n-2}.
TrdResult trd_sequential(const DenseMatrix& a);

/// X = Q V, applying reflectors k = n-2 down to 1 to every column.
Columns hit_sequential(const HouseholderFactorSet& f, const Columns& v);

AccuracyReport accuracy(const DenseMatrix& a, std::span<const double> lambdas,
                        const Columns& x,
                        std::optional<std::span<const double>> exact = std::nullopt);

/// Plain-text matrix: first token n, then n*n whitespace-separated values in
/// row-major order. Symmetry is validated on load.
DenseMatrix read_matrix(std::istream& in);
DenseMatrix read_matrix_file(const std::string& path);
void write_matrix(std::ostream& out, const DenseMatrix& a);

}  // namespace smalleig
