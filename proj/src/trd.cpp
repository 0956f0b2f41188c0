#include "smalleig/trd.hpp"

#include <array>
#include <cmath>
#include <string>

#include "smalleig/error.hpp"

namespace smalleig {

using msgnet::Category;
using msgnet::Communicator;

namespace {
constexpr std::size_t kL = static_cast<std::size_t>(ExactSum::kLimbs);

std::vector<int> zero_based(const IndexSet& s) {
  std::vector<int> g;
  g.reserve(s.size());
  for (int e : s.elements()) g.push_back(e - 1);
  return g;
}

std::size_t first_at_least(const std::vector<int>& g, int value) {
  return static_cast<std::size_t>(std::lower_bound(g.begin(), g.end(), value) - g.begin());
}

void put(const ExactSum& s, std::vector<double>& buf, std::size_t slot) {
  s.serialize(std::span<double, ExactSum::kLimbs>(buf.data() + slot * kL, kL));
}

ExactSum get(const std::vector<double>& buf, std::size_t slot) {
  return ExactSum::deserialize(std::span<const double, ExactSum::kLimbs>(buf.data() + slot * kL, kL));
}
}  // namespace

int default_presend_limit(int n) { return n > 2 ? (n - 2) / 4 : 0; }

int presend_limit_for(double frac, int n) {
  if (!(frac >= 0.0 && frac <= 1.0))
    throw ConfigError("presend fraction must lie in [0, 1]");
  return n > 2 ? static_cast<int>(std::floor(frac * (n - 2))) : 0;
}

void validate(const TrdVariant& v, int n) {
  if (v.pivot_send == PivotSend::Blocking) return;
  const int hi = n > 2 ? n - 2 : 0;
  if (v.presend_limit < 0 || v.presend_limit > hi)
    throw ConfigError("presend limit " + std::to_string(v.presend_limit) +
                      " outside [0, " + std::to_string(hi) + "]");
}

LocalMatrix distribute_matrix(const DenseMatrix& a, const ProcessGrid& grid) {
  LocalMatrix m;
  m.n = a.n();
  m.rows = owned_rows(grid, a.n());
  m.cols = owned_cols(grid, a.n());
  m.data.reserve(m.rows.size() * m.cols.size());
  for (int i : m.rows.elements())
    for (int j : m.cols.elements()) m.data.push_back(a(i - 1, j - 1));
  return m;
}

DenseMatrix assemble_matrix(const std::vector<LocalMatrix>& blocks) {
  if (blocks.empty()) throw UsageError("assemble_matrix needs at least one block");
  DenseMatrix a(blocks.front().n);
  for (const auto& b : blocks)
    for (std::size_t r = 0; r < b.rows.size(); ++r)
      for (std::size_t c = 0; c < b.cols.size(); ++c)
        a(b.rows.elements()[r] - 1, b.cols.elements()[c] - 1) = b.at(r, c);
  return a;
}

GridContext GridContext::make(Communicator& world, int p_x, int p_y) {
  const ProcessGrid g = build_grid(world.size(), p_x, p_y, world.rank());
  auto [row, col] = world.split(g);
  return GridContext{world, g, std::move(row), std::move(col)};
}

namespace {

class TrdRank {
 public:
  TrdRank(GridContext& ctx, LocalMatrix a, const TrdVariant& v)
      : ctx_(ctx), a_(std::move(a)), v_(v), n_(a_.n), rows_(zero_based(a_.rows)),
        cols_(zero_based(a_.cols)) {}

  TrdOutput run() {
    const msgnet::CommStats before = ctx_.world.stats();
    out_.t.d.assign(static_cast<std::size_t>(n_), 0.0);
    out_.t.e.assign(static_cast<std::size_t>(n_ > 1 ? n_ - 1 : 0), 0.0);
    out_.factors.n = n_;
    out_.factors.rows = a_.rows;
    for (int k = 0; k + 2 < n_; ++k) step(k);
    for (auto& p : pending_) ctx_.row.wait(p);
    pending_.clear();
    assemble();
    out_.stats = ctx_.world.stats().since(before);
    return std::move(out_);
  }

 private:
  bool presend(int k) const {
    return v_.pivot_send == PivotSend::NonBlockingPresend && k >= 1 &&
           k <= v_.presend_limit && k + 2 < n_;
  }

  std::vector<double> local_column(int k, std::size_t from_row) const {
    const std::size_t c = first_at_least(cols_, k);
    std::vector<double> col;
    for (std::size_t r = from_row; r < rows_.size(); ++r) col.push_back(a_.at(r, c));
    return col;
  }

  // Values indexed by active rows -> values indexed by active columns, via
  // one broadcast per column-communicator member owning some active column.
  std::vector<double> rows_to_cols(const std::vector<double>& by_row, std::size_t rb,
                                   std::size_t cb, Category cat) {
    const int px = ctx_.grid.p_x;
    std::vector<double> by_col(cols_.size() - cb, 0.0);
    for (int root = 0; root < px; ++root) {
      std::vector<std::size_t> slots;
      for (std::size_t c = cb; c < cols_.size(); ++c)
        if (cols_[c] % px == root) slots.push_back(c);
      if (slots.empty()) continue;
      std::vector<double> payload;
      if (ctx_.grid.my_x == root) {
        for (std::size_t c : slots) payload.push_back(by_row[first_at_least(rows_, cols_[c]) - rb]);
      }
      payload = ctx_.col.bcast(root, std::move(payload), cat);
      for (std::size_t s = 0; s < slots.size(); ++s) by_col[slots[s] - cb] = payload[s];
    }
    return by_col;
  }

  void step(int k) {
    const int py = ctx_.grid.p_y;
    const int my_y = ctx_.grid.my_y;
    const std::size_t rb = first_at_least(rows_, k + 1);
    const std::size_t cb = first_at_least(cols_, k + 1);
    const std::size_t nr = rows_.size() - rb;
    const std::size_t nc = cols_.size() - cb;

    std::vector<double> piv;
    {
      ScopedTimer t(out_.times, "Send Piv");
      const int owner = k % py;
      if (presend(k)) {
        if (my_y == owner)
          piv = local_column(k, rb);
        else
          piv = ctx_.row.recv(owner, k, Category::PivotTrd);
        for (auto& p : pending_) ctx_.row.wait(p);
        pending_.clear();
      } else {
        std::vector<double> payload;
        if (my_y == owner) payload = local_column(k, rb);
        piv = ctx_.row.bcast(owner, std::move(payload), Category::PivotTrd);
      }
    }

    kernels::ReflectorScalars r;
    std::vector<double> v_row(nr);
    {
      ScopedTimer t(out_.times, "Other");
      ExactSum tail;
      ExactSum alpha;
      for (std::size_t t2 = 0; t2 < nr; ++t2) {
        if (rows_[rb + t2] == k + 1)
          alpha.add(piv[t2]);
        else
          tail.add(piv[t2] * piv[t2]);
      }
      std::vector<double> buf(2 * kL);
      put(tail, buf, 0);
      put(alpha, buf, 1);
      buf = ctx_.col.allreduce_sum(buf, Category::HouseholderReduce);
      r = kernels::make_reflector(get(buf, 1).round(), get(buf, 0));
      for (std::size_t t2 = 0; t2 < nr; ++t2)
        v_row[t2] = rows_[rb + t2] == k + 1 ? 1.0 : kernels::reflector_entry(piv[t2], r);
      out_.t.e[static_cast<std::size_t>(k)] = r.beta;
      out_.factors.tau.push_back(r.tau);
      out_.factors.v.push_back(v_row);
    }

    std::vector<double> v_col;
    {
      ScopedTimer t(out_.times, "Send yt");
      v_col = rows_to_cols(v_row, rb, cb, Category::SendYt);
    }

    std::vector<double> partial(nr * kL);
    {
      ScopedTimer t(out_.times, "Matvec");
      for (std::size_t t2 = 0; t2 < nr; ++t2) {
        ExactSum s;
        for (std::size_t c = 0; c < nc; ++c) s.add(a_.at(rb + t2, cb + c) * v_col[c]);
        put(s, partial, t2);
      }
    }
    {
      ScopedTimer t(out_.times, "MatVec Reduce");
      partial = v_.reduce_impl == ReduceImpl::BinaryTree
                    ? ctx_.row.reduce_binary_tree(partial, Category::MatvecReduce)
                    : ctx_.row.allreduce_sum(partial, Category::MatvecReduce);
    }
    std::vector<double> y_row(nr);
    {
      ScopedTimer t(out_.times, "Matvec");
      for (std::size_t t2 = 0; t2 < nr; ++t2) y_row[t2] = r.tau * get(partial, t2).round();
    }

    std::vector<double> y_col;
    {
      ScopedTimer t(out_.times, "Send xt");
      y_col = rows_to_cols(y_row, rb, cb, Category::SendXt);
    }

    double half_mu;
    {
      ScopedTimer t(out_.times, "Other");
      ExactSum dot;
      for (std::size_t c = 0; c < nc; ++c) dot.add(y_col[c] * v_col[c]);
      std::vector<double> buf(kL);
      put(dot, buf, 0);
      buf = ctx_.row.allreduce_sum(buf, Category::MuReduce);
      half_mu = 0.5 * (r.tau * get(buf, 0).round());
    }

    ScopedTimer t(out_.times, "Update");
    std::vector<double> w_row(nr);
    std::vector<double> w_col(nc);
    for (std::size_t t2 = 0; t2 < nr; ++t2) w_row[t2] = kernels::w_entry(y_row[t2], half_mu, v_row[t2]);
    for (std::size_t c = 0; c < nc; ++c) w_col[c] = kernels::w_entry(y_col[c], half_mu, v_col[c]);
    auto update_col = [&](std::size_t c) {
      for (std::size_t t2 = 0; t2 < nr; ++t2) {
        double& e = a_.at(rb + t2, cb + c);
        e = kernels::rank2_update(e, v_row[t2], w_row[t2], v_col[c], w_col[c]);
      }
    };
    std::size_t skip = nc;
    if (presend(k + 1) && my_y == (k + 1) % py && nc > 0) {
      // Column k+1 is the first active owned column.
      skip = 0;
      update_col(0);
      const std::vector<double> payload = local_column(k + 1, first_at_least(rows_, k + 2));
      for (int peer = 0; peer < py; ++peer)
        if (peer != my_y) pending_.push_back(ctx_.row.isend(peer, k + 1, payload, Category::PivotTrd));
    }
    for (std::size_t c = 0; c < nc; ++c)
      if (c != skip) update_col(c);
  }

  void assemble() {
    ScopedTimer t(out_.times, "Other");
    const ProcessGrid& g = ctx_.grid;
    for (int rank = 0; rank < g.p_total; ++rank) {
      const int rx = rank % g.p_x;
      const int ry = rank / g.p_x;
      std::vector<int> diag;
      for (int i = 0; i < n_; ++i)
        if (i % g.p_x == rx && i % g.p_y == ry) diag.push_back(i);
      const bool last = n_ >= 2 && (n_ - 1) % g.p_x == rx && (n_ - 2) % g.p_y == ry;
      if (diag.empty() && !last) continue;
      std::vector<double> payload;
      if (rank == g.rank()) {
        for (int i : diag) payload.push_back(a_.at(first_at_least(rows_, i), first_at_least(cols_, i)));
        if (last) payload.push_back(a_.at(first_at_least(rows_, n_ - 1), first_at_least(cols_, n_ - 2)));
      }
      payload = ctx_.world.bcast(rank, std::move(payload), Category::TridiagAssemble);
      for (std::size_t s = 0; s < diag.size(); ++s)
        out_.t.d[static_cast<std::size_t>(diag[s])] = payload[s];
      if (last) out_.t.e[static_cast<std::size_t>(n_ - 2)] = payload[diag.size()];
    }
  }

  GridContext& ctx_;
  LocalMatrix a_;
  TrdVariant v_;
  int n_;
  std::vector<int> rows_;
  std::vector<int> cols_;
  std::vector<msgnet::PendingSend> pending_;
  TrdOutput out_;
};

}  // namespace

TrdOutput trd_distributed(GridContext& ctx, LocalMatrix a, const TrdVariant& variant) {
  validate(variant, a.n);
  if (a.n < 1) throw UsageError("trd_distributed needs n >= 1");
  const IndexSet expect_rows = owned_rows(ctx.grid, a.n);
  if (!std::equal(expect_rows.elements().begin(), expect_rows.elements().end(),
                  a.rows.elements().begin(), a.rows.elements().end()) ||
      a.cols.size() != owned_cols(ctx.grid, a.n).size())
    throw ProtocolError("local block does not match this rank's grid position");
  ctx.world.check_consistent(static_cast<std::uint64_t>(a.n) * 1000003u +
                                 static_cast<std::uint64_t>(variant.presend_limit) * 31u +
                                 static_cast<std::uint64_t>(variant.pivot_send) * 7u +
                                 static_cast<std::uint64_t>(variant.reduce_impl),
                             "trd_distributed");
  return TrdRank(ctx, std::move(a), variant).run();
}

HouseholderFactorSet assemble_factors(const std::vector<FactorSlices>& slices) {
  if (slices.empty()) throw UsageError("assemble_factors needs at least one slice set");
  HouseholderFactorSet f;
  f.n = slices.front().n;
  f.tau = slices.front().tau;
  f.v.resize(f.tau.size());
  for (std::size_t k = 0; k < f.tau.size(); ++k)
    f.v[k].assign(static_cast<std::size_t>(f.n) - k - 1, 0.0);
  for (const auto& s : slices) {
    if (s.tau != f.tau) throw ProtocolError("factor slices disagree on tau");
    for (std::size_t k = 0; k < s.v.size(); ++k) {
      const auto& el = s.rows.elements();
      const std::size_t rb = s.rows.lower_bound(static_cast<int>(k) + 2);
      for (std::size_t t = 0; t < s.v[k].size(); ++t)
        f.v[k][static_cast<std::size_t>(el[rb + t] - 1) - k - 1] = s.v[k][t];
    }
  }
  return f;
}

}  // namespace smalleig
