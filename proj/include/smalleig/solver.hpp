#pragma once

// Full pipeline: distribute, tridiagonalize, solve T, back-transform.

#include <optional>
#include <vector>

#include "smalleig/densecore.hpp"
#include "smalleig/hit.hpp"
#include "smalleig/msgnet.hpp"
#include "smalleig/phase_times.hpp"
#include "smalleig/sept.hpp"
#include "smalleig/trd.hpp"

namespace smalleig {

struct SolveConfig {
  int p_x = 1;
  int p_y = 1;
  TrdVariant trd;
  HitVariant hit;
  MemsParams mems;
  ReorthScope reorth = ReorthScope::GlobalCluster;
  bool verify = false;
  /// Reference eigenvalues (descending) for the eigenvalue-error metric.
  std::optional<std::vector<double>> exact;
  /// Test hook: added to eigenvalue 1 after the solve.
  double perturb_eigenvalue = 0.0;

  int p_total() const { return p_x * p_y; }
};

/// Owned eigenpairs of one rank.
struct Shard {
  int rank = 0;
  std::vector<int> indices;  // 1-based, ascending
  std::vector<double> values;
  Columns vectors;

  bool operator==(const Shard&) const = default;
};

struct PhaseStats {
  msgnet::CommStats trd;
  msgnet::CommStats sept;
  msgnet::CommStats hit;
};

struct EigenResult {
  int n = 0;
  std::vector<double> eigenvalues;  // descending
  std::vector<Shard> shards;        // indexed by rank
  std::optional<AccuracyReport> accuracy;
  PhaseStats stats;                 // merged over ranks
  std::vector<PhaseStats> rank_stats;
  msgnet::WorldTotals totals;
  PhaseTimes trd_times;             // from the last rank
  PhaseTimes hit_times;
  double sept_seconds = 0.0;
  double wall_seconds = 0.0;
};

/// Output of one rank in embedded mode.
struct RankSolve {
  Shard shard;
  TridiagonalMatrix t;
  PhaseStats stats;
  PhaseTimes trd_times;
  PhaseTimes hit_times;
  double sept_seconds = 0.0;
};

/// Collective over `world`; every rank passes the same A and config.
RankSolve solve_embedded(msgnet::Communicator& world, const DenseMatrix& a,
                         const SolveConfig& config);

/// Spawns p_x * p_y logical processes and runs the pipeline.
EigenResult solve(const DenseMatrix& a, const SolveConfig& config);

/// Dense X (column k holds eigenvector k) assembled from the shards.
DenseMatrix gather_eigenvectors(const EigenResult& result);

/// Columns of X in index order.
Columns eigenvector_columns(const EigenResult& result);

/// Throws ConfigError for illegal shapes or parameters.
void validate(const SolveConfig& config, int n);

}  // namespace smalleig
