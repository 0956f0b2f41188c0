#pragma once

// Tridiagonal eigensolver run redundantly on every rank: multisection
// bisection on Sturm counts for eigenvalues, inverse iteration for vectors.
// Each rank keeps only the pairs of its 1D-owned indices.

#include <cstdint>
#include <vector>

#include "smalleig/densecore.hpp"
#include "smalleig/msgnet.hpp"
#include "smalleig/procgrid.hpp"

namespace smalleig {

struct MemsParams {
  int ml = 2;         // interior section points per refinement step
  int el = 75;        // intervals refined per sweep
  double tol = 0.0;   // absolute bracket width; <= 0 selects the default

  bool operator==(const MemsParams&) const = default;
};

/// Which earlier vectors a new vector is orthogonalized against.
enum class ReorthScope {
  /// Every earlier member of its eigenvalue cluster, computed redundantly.
  GlobalCluster,
  /// Only the earlier cluster members owned by the same rank. Loses
  /// orthogonality when a multiple eigenvalue spans several ranks.
  OwnedOnly,
};

/// 1e-14 * ||T||_inf, or the smallest normal number for T == 0.
double default_tolerance(const TridiagonalMatrix& t);

/// Number of eigenvalues of T strictly below sigma.
int sturm_count(const TridiagonalMatrix& t, double sigma);

/// Gershgorin interval [lo, hi] containing the spectrum.
std::pair<double, double> gershgorin(const TridiagonalMatrix& t);

/// Eigenvalues with the given 1-based descending indices, in the same order.
std::vector<double> mems_eigenvalues(const TridiagonalMatrix& t,
                                     const std::vector<int>& indices,
                                     const MemsParams& params);

/// Consecutive descending eigenvalues closer than this belong to one cluster.
double cluster_gap(const TridiagonalMatrix& t);

/// Unit eigenvector for lambda. `index` (1-based) seeds the start vector and
/// names the pair in errors; `against` are orthonormal vectors to project out.
std::vector<double> inverse_iteration(const TridiagonalMatrix& t, double lambda, int index,
                                      const std::vector<std::vector<double>>& against = {},
                                      double tol = 0.0);

struct EigenPairsLocal {
  IndexSet indices;             // owned_cols_1d of the rank
  std::vector<double> values;   // one per owned index
  std::vector<std::vector<double>> vectors;  // eigenvectors of T, length n
};

/// Sequential solve for the given indices. In GlobalCluster mode the result
/// does not depend on which other indices are requested.
EigenPairsLocal sept_indices(const TridiagonalMatrix& t, IndexSet indices,
                             const MemsParams& params,
                             ReorthScope scope = ReorthScope::GlobalCluster);

/// Bitwise hash of T used for the replication check.
std::uint64_t hash_tridiagonal(const TridiagonalMatrix& t);

/// Collective over `world`; exchanges no messages. Throws ProtocolError
/// when the ranks hold different T.
EigenPairsLocal sept_distributed(msgnet::Communicator& world, const TridiagonalMatrix& t,
                                 const MemsParams& params,
                                 ReorthScope scope = ReorthScope::GlobalCluster);

}  // namespace smalleig
