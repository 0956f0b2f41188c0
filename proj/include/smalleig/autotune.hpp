#pragma once

// Enumeration-based tuning of the communication variants.

#include <functional>
#include <string>
#include <vector>

#include "smalleig/densecore.hpp"
#include "smalleig/hit.hpp"
#include "smalleig/solver.hpp"
#include "smalleig/trd.hpp"

namespace smalleig {

enum class CostMetric { MessageCount, ByteVolume, WallTime };

struct PivotCandidate {
  PivotSend send = PivotSend::Blocking;
  double presend_frac = 0.0;  // only for NonBlockingPresend

  bool operator==(const PivotCandidate&) const = default;
};

struct TuneSpace {
  std::vector<ReduceImpl> trd_reduce{ReduceImpl::BinaryTree, ReduceImpl::Allreduce};
  std::vector<PivotCandidate> trd_pivot{{PivotSend::Blocking, 0.0},
                                        {PivotSend::NonBlockingPresend, 0.0},
                                        {PivotSend::NonBlockingPresend, 0.25},
                                        {PivotSend::NonBlockingPresend, 0.5},
                                        {PivotSend::NonBlockingPresend, 1.0}};
  std::vector<GatherImpl> hit_gather{GatherImpl::PerVectorBcast, GatherImpl::NonBlockingSend,
                                     GatherImpl::BlockBcast};
  std::vector<int> mblk{1, 2, 4, 8, 12, 16, 32, 48, 56, 64, 80, 96, 112, 128};
  bool tune_trd = true;
  bool tune_hit = true;
};

/// Configuration the runner is asked to cost.
struct VariantConfig {
  ReduceImpl reduce = ReduceImpl::Allreduce;
  PivotCandidate pivot;
  HitVariant hit;

  bool operator==(const VariantConfig&) const = default;
};

/// Phase a runner measurement applies to.
enum class TunePhase { Trd, Hit };

struct RunMeasurement {
  double messages = 0.0;
  double bytes = 0.0;
  double seconds = 0.0;
};

using Runner = std::function<RunMeasurement(TunePhase, const VariantConfig&)>;

struct TraceEntry {
  TunePhase phase;
  int step;  // TRD: 1 reduce sweep, 2 pivot sweep; HIT: 2 mblk sweep, 3 gather sweep
  VariantConfig config;
  double cost;
};

struct TuneResult {
  VariantConfig best;
  std::vector<TraceEntry> trace;

  std::size_t evaluations(TunePhase phase) const;
};

double cost_of(const RunMeasurement& m, CostMetric metric);

/// TRD: sweep reduce with blocking pivots, then pivots with the best reduce.
/// HIT: fix PerVectorBcast and sweep mblk, then sweep the gathers at the
/// chosen mblk. Ties keep the earlier candidate. Runner failures are
/// rethrown with the offending configuration in the message.
TuneResult tune(const TuneSpace& space, const Runner& runner, CostMetric metric);

/// Runner measuring the solver's counters on `a` over a fixed grid; the
/// TRD and HIT phase counters are costed separately.
Runner solver_runner(const DenseMatrix& a, const SolveConfig& base);

struct ShapeTuneResult {
  int p_x = 1;
  int p_y = 1;
  TuneResult result;
  double cost = 0.0;  // whole-pipeline cost of the tuned configuration
};

/// Tunes on every (p_x, p_y) shape given and keeps the cheapest.
ShapeTuneResult tune_shapes(const DenseMatrix& a, const SolveConfig& base,
                            const std::vector<std::pair<int, int>>& shapes,
                            const TuneSpace& space, CostMetric metric);

std::string describe(const VariantConfig& c);
std::string to_string(GatherImpl g);
std::string to_string(ReduceImpl r);
std::string to_string(PivotSend p);
std::string to_string(CostMetric m);

}  // namespace smalleig
