#pragma once

// Distributed Householder tridiagonalization on a P_x x P_y grid with
// cyclic-cyclic distribution (blocking factor 1).

#include <algorithm>
#include <vector>

#include "smalleig/densecore.hpp"
#include "smalleig/msgnet.hpp"
#include "smalleig/phase_times.hpp"
#include "smalleig/procgrid.hpp"

namespace smalleig {

enum class PivotSend { Blocking, NonBlockingPresend };
enum class ReduceImpl { Allreduce, BinaryTree };

struct TrdVariant {
  PivotSend pivot_send = PivotSend::Blocking;
  /// Steps 1..presend_limit (1-based) receive their pivot column from a
  /// pre-send issued during the previous step. Ignored for Blocking.
  int presend_limit = 0;
  ReduceImpl reduce_impl = ReduceImpl::Allreduce;

  bool operator==(const TrdVariant&) const = default;
};

/// floor((n - 2) / 4), clamped to [0, n - 2].
int default_presend_limit(int n);
/// floor(frac * (n - 2)) for frac in [0, 1].
int presend_limit_for(double frac, int n);
/// Throws ConfigError when the presend limit is outside [0, max(n - 2, 0)].
void validate(const TrdVariant& v, int n);

/// The block A[Pi(x), Gamma(y)] held by one rank, row-major in set order.
struct LocalMatrix {
  int n = 0;
  IndexSet rows;
  IndexSet cols;
  std::vector<double> data;

  double& at(std::size_t r, std::size_t c) { return data[r * cols.size() + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols.size() + c]; }
};

LocalMatrix distribute_matrix(const DenseMatrix& a, const ProcessGrid& grid);
/// Inverse of distribute_matrix over every rank's block (indexed by rank).
DenseMatrix assemble_matrix(const std::vector<LocalMatrix>& blocks);

/// Reflector slices for the rows a rank owns. v[k] lists v_k on the owned
/// rows i >= k + 2 (1-based) in ascending order; tau is replicated.
struct FactorSlices {
  int n = 0;
  IndexSet rows;
  std::vector<double> tau;
  std::vector<std::vector<double>> v;

  bool operator==(const FactorSlices& o) const {
    return n == o.n && rows.elements().size() == o.rows.elements().size() &&
           std::equal(rows.elements().begin(), rows.elements().end(),
                      o.rows.elements().begin()) &&
           tau == o.tau && v == o.v;
  }
};

/// World communicator plus the row and column communicators of one rank.
struct GridContext {
  msgnet::Communicator& world;
  ProcessGrid grid;
  msgnet::Communicator row;  // same my_x, ordered by my_y
  msgnet::Communicator col;  // same my_y, ordered by my_x

  static GridContext make(msgnet::Communicator& world, int p_x, int p_y);
};

struct TrdOutput {
  TridiagonalMatrix t;
  FactorSlices factors;
  msgnet::CommStats stats;  // growth during this call
  PhaseTimes times;         // "Send Piv", "Send yt", ..., "Other"
};

/// Collective over ctx. T is replicated bitwise on every rank and equals
/// trd_sequential's T for every variant.
TrdOutput trd_distributed(GridContext& ctx, LocalMatrix a, const TrdVariant& variant);

/// Full reflector set rebuilt from every rank's slices (indexed by rank).
HouseholderFactorSet assemble_factors(const std::vector<FactorSlices>& slices);

}  // namespace smalleig
