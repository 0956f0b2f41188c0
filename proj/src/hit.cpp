#include "smalleig/hit.hpp"

#include <string>

#include "smalleig/error.hpp"

namespace smalleig {

using msgnet::Category;

namespace {

// Slice wire format: k, owner row coordinate, length, values.
void pack(std::vector<double>& buf, int k, int owner, const std::vector<double>& values) {
  buf.push_back(static_cast<double>(k));
  buf.push_back(static_cast<double>(owner));
  buf.push_back(static_cast<double>(values.size()));
  buf.insert(buf.end(), values.begin(), values.end());
}

class HitRank {
 public:
  HitRank(GridContext& ctx, const FactorSlices& f, const HitVariant& v)
      : ctx_(ctx), f_(f), var_(v), n_(f.n), m_(static_cast<int>(f.tau.size())),
        full_(f.tau.size()) {}

  HitOutput run(const EigenPairsLocal& pairs) {
    const msgnet::CommStats before = ctx_.world.stats();
    HitOutput out;
    {
      ScopedTimer t(out.times, "Other");
      out.x = pairs.vectors;
      for (const auto& col : out.x)
        if (static_cast<int>(col.size()) != n_)
          throw UsageError("eigenvector length does not match the reflector set");
    }
    const int mblk = var_.mblk;
    for (int top = m_ - 1; top >= 0; top -= mblk) {
      const int low = std::max(top - mblk + 1, 0);
      {
        ScopedTimer t(out.times, "Send Piv");
        gather(top, low);
      }
      ScopedTimer t(out.times, "HIT Ker");
      for (int k = top; k >= low; --k) {
        const auto& vk = full_[static_cast<std::size_t>(k)];
        const double tau = f_.tau[static_cast<std::size_t>(k)];
        for (auto& col : out.x)
          kernels::apply_reflector(tau, vk, std::span<double>(col).subspan(static_cast<std::size_t>(k + 1)));
        full_[static_cast<std::size_t>(k)].clear();
        full_[static_cast<std::size_t>(k)].shrink_to_fit();
      }
    }
    out.stats = ctx_.world.stats().since(before);
    return out;
  }

 private:
  void place(int k, int owner, std::span<const double> values) {
    auto& dst = full_[static_cast<std::size_t>(k)];
    if (dst.empty()) dst.assign(static_cast<std::size_t>(n_ - k - 1), 0.0);
    const int px = ctx_.grid.p_x;
    int row = k + 1;
    while (row % px != owner) ++row;
    std::size_t t = 0;
    for (; row < n_ && t < values.size(); row += px, ++t)
      dst[static_cast<std::size_t>(row - k - 1)] = values[t];
    if (t != values.size() || row < n_)
      throw ProtocolError("reflector slice " + std::to_string(k) + " from row owner " +
                          std::to_string(owner) + " has the wrong length");
  }

  void place_own(int k) { place(k, ctx_.grid.my_x, f_.v[static_cast<std::size_t>(k)]); }

  // Walks a received buffer of packed slices.
  void unpack(const std::vector<double>& buf, int expected_owner) {
    std::size_t pos = 0;
    while (pos < buf.size()) {
      if (pos + 3 > buf.size()) throw ProtocolError("truncated reflector slice header");
      const int k = static_cast<int>(buf[pos]);
      const int owner = static_cast<int>(buf[pos + 1]);
      const auto len = static_cast<std::size_t>(buf[pos + 2]);
      pos += 3;
      if (owner == ctx_.grid.my_x)
        throw ProtocolError("reflector slice " + std::to_string(k) +
                            " sent to a process that already owns it");
      if (owner != expected_owner || k < 0 || k >= m_ || pos + len > buf.size())
        throw ProtocolError("malformed reflector slice header");
      place(k, owner, std::span<const double>(buf).subspan(pos, len));
      pos += len;
    }
  }

  std::vector<double> packed(int k) const {
    std::vector<double> buf;
    pack(buf, k, ctx_.grid.my_x, f_.v[static_cast<std::size_t>(k)]);
    return buf;
  }

  void gather(int top, int low) {
    const int px = ctx_.grid.p_x;
    const int me = ctx_.grid.my_x;
    for (int k = top; k >= low; --k) place_own(k);
    switch (var_.gather) {
      case GatherImpl::PerVectorBcast:
        for (int k = top; k >= low; --k)
          for (int root = 0; root < px; ++root) {
            auto buf = ctx_.col.bcast(root, root == me ? packed(k) : std::vector<double>{},
                                      Category::GatherHit);
            if (root != me) unpack(buf, root);
          }
        break;
      case GatherImpl::NonBlockingSend:
        for (int k = top; k >= low; --k) {
          std::vector<msgnet::PendingSend> pending;
          const auto mine = packed(k);
          for (int peer = 0; peer < px; ++peer)
            if (peer != me) pending.push_back(ctx_.col.isend(peer, k, mine, Category::GatherHit));
          for (int peer = 0; peer < px; ++peer)
            if (peer != me) unpack(ctx_.col.recv(peer, k, Category::GatherHit), peer);
          for (auto& p : pending) ctx_.col.wait(p);
        }
        break;
      case GatherImpl::BlockBcast:
        for (int root = 0; root < px; ++root) {
          std::vector<double> buf;
          if (root == me)
            for (int k = top; k >= low; --k) pack(buf, k, me, f_.v[static_cast<std::size_t>(k)]);
          buf = ctx_.col.bcast(root, std::move(buf), Category::GatherHit);
          if (root != me) unpack(buf, root);
        }
        break;
    }
  }

  GridContext& ctx_;
  const FactorSlices& f_;
  HitVariant var_;
  int n_;
  int m_;
  std::vector<std::vector<double>> full_;
};

}  // namespace

HitOutput hit_distributed(GridContext& ctx, const FactorSlices& f, const EigenPairsLocal& v,
                          const HitVariant& variant) {
  if (variant.mblk < 1) throw ConfigError("MBLK must be >= 1");
  const IndexSet expect = owned_rows(ctx.grid, f.n);
  if (!std::equal(expect.elements().begin(), expect.elements().end(),
                  f.rows.elements().begin(), f.rows.elements().end()))
    throw ProtocolError("reflector slices were produced on a different process grid");
  if (f.v.size() != f.tau.size())
    throw UsageError("reflector slice count does not match tau");
  ctx.world.check_consistent(static_cast<std::uint64_t>(f.n) * 1000003u +
                                 static_cast<std::uint64_t>(variant.mblk) * 7u +
                                 static_cast<std::uint64_t>(variant.gather),
                             "hit_distributed");
  return HitRank(ctx, f, variant).run(v);
}

std::uint64_t expected_gather_invocations(int n, int p_x, const HitVariant& variant) {
  const auto m = static_cast<std::uint64_t>(n > 2 ? n - 2 : 0);
  const auto px = static_cast<std::uint64_t>(p_x);
  switch (variant.gather) {
    case GatherImpl::PerVectorBcast: return m * px;
    case GatherImpl::NonBlockingSend: return m * (px - 1);
    case GatherImpl::BlockBcast: {
      const auto b = static_cast<std::uint64_t>(variant.mblk);
      return (m + b - 1) / b * px;
    }
  }
  return 0;
}

}  // namespace smalleig
