#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace smalleig {

/// Position of one logical process inside a P_x x P_y grid.
///
/// Ranks are linearized column-major: rank = my_x + my_y * p_x.
struct ProcessGrid {
  int p_total = 1;
  int p_x = 1;
  int p_y = 1;
  int my_x = 0;
  int my_y = 0;

  int rank() const { return my_x + my_y * p_x; }
  int rank_of(int x, int y) const { return x + y * p_x; }
  bool operator==(const ProcessGrid&) const = default;
};

/// Builds the descriptor of `rank` on a p_x x p_y grid.
/// Throws ConfigError when p_x * p_y != p_total or a dimension is < 1,
/// UsageError when rank is outside [0, p_total).
ProcessGrid build_grid(int p_total, int p_x, int p_y, int rank);

/// Ordered set of 1-based global indices {offset + 1 + t * stride}.
///
/// Elements are never physically removed. `drop_below` moves an "active"
/// cursor forward so the untouched set stays available after reduction.
class IndexSet {
 public:
  IndexSet() = default;
  IndexSet(int n, int stride, int offset);

  int n() const { return n_; }
  int stride() const { return stride_; }
  int offset() const { return offset_; }

  std::size_t size() const { return elements_.size(); }
  bool empty() const { return elements_.empty(); }
  std::span<const int> elements() const { return elements_; }

  /// 1-based position access, mirroring global_to_local.
  int at(std::size_t position) const;

  bool contains(int global) const;

  /// Local positions before `active_begin()` have been retired.
  std::size_t active_begin() const { return active_; }
  std::span<const int> active() const {
    return std::span<const int>(elements_).subspan(active_);
  }
  /// Retires every element smaller than `global`.
  void drop_below(int global);
  /// Retires `global` if it is the first active element. Returns true when
  /// something was retired.
  bool remove(int global);

  /// First local (0-based) position whose element is >= global.
  std::size_t lower_bound(int global) const;

 private:
  int n_ = 0;
  int stride_ = 1;
  int offset_ = 0;
  std::vector<int> elements_;
  std::size_t active_ = 0;
};

/// Number of indices a coordinate owns under the cyclic rule with
/// blocking factor 1.
int cyclic_count(int n, int stride, int coord);

/// Rows owned by the grid coordinate my_x.
IndexSet owned_rows(const ProcessGrid& grid, int n);
/// Columns owned by the grid coordinate my_y.
IndexSet owned_cols(const ProcessGrid& grid, int n);
/// 1D cyclic column distribution over all p_total processes.
IndexSet owned_cols_1d(int rank, int p_total, int n);

/// Grid coordinates (row coord, col coord) owning element (i, j), 1-based.
std::pair<int, int> owner_of(int i, int j, const ProcessGrid& grid, int n);

/// 1-based position of `global` inside `set`. Throws UsageError if absent.
int global_to_local(int global, const IndexSet& set);

/// Factor pairs (p_x, p_y) of p ordered by ascending p_x.
std::vector<std::pair<int, int>> grid_shapes(int p);

}  // namespace smalleig
