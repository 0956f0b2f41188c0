#include "smalleig/autotune.hpp"

#include <sstream>
#include <stdexcept>

#include "smalleig/error.hpp"

namespace smalleig {

std::string to_string(GatherImpl g) {
  switch (g) {
    case GatherImpl::PerVectorBcast: return "bcast";
    case GatherImpl::NonBlockingSend: return "isend";
    case GatherImpl::BlockBcast: return "block-bcast";
  }
  return "?";
}

std::string to_string(ReduceImpl r) {
  return r == ReduceImpl::BinaryTree ? "tree" : "allreduce";
}

std::string to_string(PivotSend p) {
  return p == PivotSend::Blocking ? "blocking" : "nonblocking";
}

std::string to_string(CostMetric m) {
  switch (m) {
    case CostMetric::MessageCount: return "messages";
    case CostMetric::ByteVolume: return "bytes";
    case CostMetric::WallTime: return "time";
  }
  return "?";
}

std::string describe(const VariantConfig& c) {
  std::ostringstream os;
  os << "reduce=" << to_string(c.reduce) << " pivot=" << to_string(c.pivot.send);
  if (c.pivot.send == PivotSend::NonBlockingPresend) os << '(' << c.pivot.presend_frac << ')';
  os << " gather=" << to_string(c.hit.gather) << " mblk=" << c.hit.mblk;
  return os.str();
}

double cost_of(const RunMeasurement& m, CostMetric metric) {
  switch (metric) {
    case CostMetric::MessageCount: return m.messages;
    case CostMetric::ByteVolume: return m.bytes;
    case CostMetric::WallTime: return m.seconds;
  }
  return m.messages;
}

std::size_t TuneResult::evaluations(TunePhase phase) const {
  std::size_t c = 0;
  for (const auto& e : trace)
    if (e.phase == phase) ++c;
  return c;
}

namespace {

double evaluate(const Runner& runner, TunePhase phase, int step, const VariantConfig& c,
                CostMetric metric, TuneResult& out) {
  RunMeasurement m;
  try {
    m = runner(phase, c);
  } catch (const ConfigError& e) {
    throw ConfigError("tuning run [" + describe(c) + "] failed: " + e.what());
  } catch (const UsageError& e) {
    throw UsageError("tuning run [" + describe(c) + "] failed: " + e.what());
  } catch (const std::exception& e) {
    throw std::runtime_error("tuning run [" + describe(c) + "] failed: " + e.what());
  }
  const double cost = cost_of(m, metric);
  out.trace.push_back({phase, step, c, cost});
  return cost;
}

template <class T, class Apply>
T sweep(const std::vector<T>& candidates, VariantConfig& current, const Runner& runner,
        TunePhase phase, int step, CostMetric metric, TuneResult& out, Apply apply) {
  T best = candidates.front();
  double best_cost = 0.0;
  bool first = true;
  for (const T& cand : candidates) {
    VariantConfig c = current;
    apply(c, cand);
    const double cost = evaluate(runner, phase, step, c, metric, out);
    if (first || cost < best_cost) {
      best = cand;
      best_cost = cost;
      first = false;
    }
  }
  apply(current, best);
  return best;
}

}  // namespace

TuneResult tune(const TuneSpace& space, const Runner& runner, CostMetric metric) {
  if (space.tune_trd && (space.trd_reduce.empty() || space.trd_pivot.empty()))
    throw UsageError("TRD tuning needs at least one reduce and one pivot candidate");
  if (space.tune_hit && (space.hit_gather.empty() || space.mblk.empty()))
    throw UsageError("HIT tuning needs at least one gather and one MBLK candidate");
  for (int b : space.mblk)
    if (b < 1) throw UsageError("MBLK candidates must be >= 1");
  for (const auto& p : space.trd_pivot)
    if (!(p.presend_frac >= 0.0 && p.presend_frac <= 1.0))
      throw UsageError("presend fractions must lie in [0, 1]");

  TuneResult out;
  VariantConfig cur;
  if (space.tune_trd) {
    cur.pivot = PivotCandidate{PivotSend::Blocking, 0.0};
    sweep(space.trd_reduce, cur, runner, TunePhase::Trd, 1, metric, out,
          [](VariantConfig& c, ReduceImpl r) { c.reduce = r; });
    sweep(space.trd_pivot, cur, runner, TunePhase::Trd, 2, metric, out,
          [](VariantConfig& c, const PivotCandidate& p) { c.pivot = p; });
  }
  if (space.tune_hit) {
    cur.hit.gather = GatherImpl::PerVectorBcast;
    sweep(space.mblk, cur, runner, TunePhase::Hit, 2, metric, out,
          [](VariantConfig& c, int b) { c.hit.mblk = b; });
    sweep(space.hit_gather, cur, runner, TunePhase::Hit, 3, metric, out,
          [](VariantConfig& c, GatherImpl g) { c.hit.gather = g; });
  }
  out.best = cur;
  return out;
}

namespace {

SolveConfig apply(const SolveConfig& base, const VariantConfig& c, int n) {
  SolveConfig s = base;
  s.verify = false;
  s.trd.reduce_impl = c.reduce;
  s.trd.pivot_send = c.pivot.send;
  s.trd.presend_limit =
      c.pivot.send == PivotSend::NonBlockingPresend ? presend_limit_for(c.pivot.presend_frac, n) : 0;
  s.hit = c.hit;
  return s;
}

double seconds(const PhaseTimes& t) {
  double s = 0.0;
  for (const auto& [k, v] : t.entries()) s += v;
  return s;
}

}  // namespace

Runner solver_runner(const DenseMatrix& a, const SolveConfig& base) {
  return [a, base](TunePhase phase, const VariantConfig& c) {
    const EigenResult r = solve(a, apply(base, c, a.n()));
    const msgnet::CommStats& s = phase == TunePhase::Trd ? r.stats.trd : r.stats.hit;
    return RunMeasurement{static_cast<double>(s.total_messages()),
                          static_cast<double>(s.total_bytes()),
                          seconds(phase == TunePhase::Trd ? r.trd_times : r.hit_times)};
  };
}

ShapeTuneResult tune_shapes(const DenseMatrix& a, const SolveConfig& base,
                            const std::vector<std::pair<int, int>>& shapes,
                            const TuneSpace& space, CostMetric metric) {
  if (shapes.empty()) throw UsageError("shape tuning needs at least one grid shape");
  ShapeTuneResult best;
  bool first = true;
  for (const auto& [px, py] : shapes) {
    SolveConfig b = base;
    b.p_x = px;
    b.p_y = py;
    TuneResult tr = tune(space, solver_runner(a, b), metric);
    const EigenResult r = solve(a, apply(b, tr.best, a.n()));
    msgnet::CommStats total = r.stats.trd;
    total += r.stats.hit;
    const double cost = cost_of({static_cast<double>(total.total_messages()),
                                 static_cast<double>(total.total_bytes()),
                                 seconds(r.trd_times) + seconds(r.hit_times) + r.sept_seconds},
                                metric);
    if (first || cost < best.cost) {
      best = ShapeTuneResult{px, py, std::move(tr), cost};
      first = false;
    }
  }
  return best;
}

}  // namespace smalleig
