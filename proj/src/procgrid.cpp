#include "smalleig/procgrid.hpp"

#include <algorithm>
#include <string>

#include "smalleig/error.hpp"

namespace smalleig {

ProcessGrid build_grid(int p_total, int p_x, int p_y, int rank) {
  if (p_x < 1 || p_y < 1)
    throw ConfigError("process grid dimensions must be >= 1, got " +
                      std::to_string(p_x) + "x" + std::to_string(p_y));
  if (p_x * p_y != p_total)
    throw ConfigError("process grid " + std::to_string(p_x) + "x" +
                      std::to_string(p_y) + " does not match " +
                      std::to_string(p_total) + " processes");
  if (rank < 0 || rank >= p_total)
    throw UsageError("rank " + std::to_string(rank) + " outside [0, " +
                     std::to_string(p_total) + ")");
  return ProcessGrid{p_total, p_x, p_y, rank % p_x, rank / p_x};
}

int cyclic_count(int n, int stride, int coord) {
  // last(a, b): one extra element when the would-be next index still fits.
  const int base = n / stride;
  return coord + 1 + base * stride <= n ? base + 1 : base;
}

IndexSet::IndexSet(int n, int stride, int offset)
    : n_(n), stride_(stride), offset_(offset) {
  if (stride < 1) throw UsageError("index set stride must be >= 1");
  if (offset < 0 || offset >= stride)
    throw UsageError("index set offset outside [0, stride)");
  const int count = n >= 1 ? cyclic_count(n, stride, offset) : 0;
  elements_.reserve(static_cast<std::size_t>(count));
  for (int t = 0; t < count; ++t) elements_.push_back(offset + 1 + t * stride);
}

int IndexSet::at(std::size_t position) const {
  if (position < 1 || position > elements_.size())
    throw UsageError("index set position " + std::to_string(position) +
                     " outside [1, " + std::to_string(elements_.size()) + "]");
  return elements_[position - 1];
}

bool IndexSet::contains(int global) const {
  return global >= 1 && global <= n_ && (global - 1) % stride_ == offset_;
}

std::size_t IndexSet::lower_bound(int global) const {
  return static_cast<std::size_t>(
      std::lower_bound(elements_.begin(), elements_.end(), global) -
      elements_.begin());
}

void IndexSet::drop_below(int global) {
  active_ = std::max(active_, lower_bound(global));
}

bool IndexSet::remove(int global) {
  if (active_ < elements_.size() && elements_[active_] == global) {
    ++active_;
    return true;
  }
  return false;
}

IndexSet owned_rows(const ProcessGrid& grid, int n) {
  return IndexSet(n, grid.p_x, grid.my_x);
}

IndexSet owned_cols(const ProcessGrid& grid, int n) {
  return IndexSet(n, grid.p_y, grid.my_y);
}

IndexSet owned_cols_1d(int rank, int p_total, int n) {
  if (rank < 0 || rank >= p_total)
    throw UsageError("rank " + std::to_string(rank) + " outside [0, " +
                     std::to_string(p_total) + ")");
  return IndexSet(n, p_total, rank);
}

std::pair<int, int> owner_of(int i, int j, const ProcessGrid& grid, int n) {
  if (i < 1 || i > n || j < 1 || j > n)
    throw UsageError("element (" + std::to_string(i) + ", " +
                     std::to_string(j) + ") outside a " + std::to_string(n) +
                     "x" + std::to_string(n) + " matrix");
  return {(i - 1) % grid.p_x, (j - 1) % grid.p_y};
}

int global_to_local(int global, const IndexSet& set) {
  if (!set.contains(global))
    throw UsageError("index " + std::to_string(global) +
                     " is not a member of the set");
  return (global - 1) / set.stride() + 1;
}

std::vector<std::pair<int, int>> grid_shapes(int p) {
  std::vector<std::pair<int, int>> shapes;
  for (int px = 1; px <= p; ++px)
    if (p % px == 0) shapes.emplace_back(px, p / px);
  return shapes;
}

}  // namespace smalleig
