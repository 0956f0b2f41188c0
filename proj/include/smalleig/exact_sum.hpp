#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace smalleig {

/// Exact accumulator for sums of doubles.
///
/// Holds the running sum as a fixed-point integer in units of 2^-1074 split
/// into 32-bit limbs, so additions are exact and the final `round()` is the
/// correctly rounded (nearest, ties to even) value of the true sum. The
/// result does not depend on the order in which terms or partial
/// accumulators are combined.
///
/// `serialize` writes the normalized limbs as doubles (each below 2^32 in
/// magnitude); adding up to 2^20 serialized accumulators elementwise in
/// double precision is exact, so an ordinary elementwise sum-reduction over
/// serialized accumulators yields the serialized accumulator of the total.
class ExactSum {
 public:
  static constexpr int kLimbs = 68;

  ExactSum() = default;

  /// Adds a finite double exactly.
  void add(double x);
  void add(const ExactSum& other);

  /// Correctly rounded value of the accumulated sum.
  double round() const;
  bool is_zero() const;

  void serialize(std::span<double, kLimbs> out) const;
  static ExactSum deserialize(std::span<const double, kLimbs> in);

 private:
  void normalize();

  // value = sum_i limbs_[i] * 2^(32 i - 1074)
  std::array<std::int64_t, kLimbs> limbs_{};
  std::uint32_t pending_ = 0;
};

/// Correctly rounded sum of a sequence of doubles.
double exact_sum(std::span<const double> values);

}  // namespace smalleig
