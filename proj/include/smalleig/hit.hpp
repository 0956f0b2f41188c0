#pragma once

// Distributed back transformation X = Q V. Reflector slices live on the
// process rows that own them; eigenvector columns are 1D-distributed.

#include "smalleig/densecore.hpp"
#include "smalleig/msgnet.hpp"
#include "smalleig/phase_times.hpp"
#include "smalleig/sept.hpp"
#include "smalleig/trd.hpp"

namespace smalleig {

enum class GatherImpl { PerVectorBcast, NonBlockingSend, BlockBcast };

struct HitVariant {
  GatherImpl gather = GatherImpl::BlockBcast;
  int mblk = 1;

  bool operator==(const HitVariant&) const = default;
};

struct HitOutput {
  Columns x;                // owned columns of X, same order as V_local
  msgnet::CommStats stats;  // growth during this call
  PhaseTimes times;         // "Send Piv", "HIT Ker", "Other"
};

/// Collective over ctx. Every variant reproduces hit_sequential's bits.
HitOutput hit_distributed(GridContext& ctx, const FactorSlices& f, const EigenPairsLocal& v,
                          const HitVariant& variant);

/// GatherHit invocations one rank performs for the given shape.
std::uint64_t expected_gather_invocations(int n, int p_x, const HitVariant& variant);

}  // namespace smalleig
