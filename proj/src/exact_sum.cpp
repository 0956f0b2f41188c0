#include "smalleig/exact_sum.hpp"

#include <bit>
#include <cmath>

#include "smalleig/error.hpp"

namespace smalleig {

namespace {
constexpr std::int64_t kRadix = std::int64_t{1} << 32;
constexpr std::uint64_t kMask = 0xFFFFFFFFull;
// Each add() puts < 2^32 into at most three limbs; normalize well before a
// limb could leave the int64 range.
constexpr std::uint32_t kNormalizeEvery = 1u << 28;
}  // namespace

void ExactSum::add(double x) {
  if (x == 0.0) return;
  if (!std::isfinite(x)) throw ValidationError("ExactSum::add on a non-finite value");
  int e = 0;
  const double f = std::frexp(std::fabs(x), &e);  // |x| = f * 2^e, f in [0.5, 1)
  auto m = static_cast<std::uint64_t>(std::ldexp(f, 53));
  int shift = e - 53 + 1074;
  if (shift < 0) {  // subnormal: the dropped bits are zero
    m >>= -shift;
    shift = 0;
  }
  const int limb = shift / 32;
  const int off = shift % 32;
  const unsigned __int128 wide = static_cast<unsigned __int128>(m) << off;
  const std::int64_t parts[3] = {
      static_cast<std::int64_t>(static_cast<std::uint64_t>(wide) & kMask),
      static_cast<std::int64_t>(static_cast<std::uint64_t>(wide >> 32) & kMask),
      static_cast<std::int64_t>(static_cast<std::uint64_t>(wide >> 64) & kMask)};
  for (int t = 0; t < 3; ++t) {
    if (x > 0)
      limbs_[static_cast<std::size_t>(limb + t)] += parts[t];
    else
      limbs_[static_cast<std::size_t>(limb + t)] -= parts[t];
  }
  if (++pending_ >= kNormalizeEvery) normalize();
}

void ExactSum::add(const ExactSum& other) {
  ExactSum o = other;
  o.normalize();
  normalize();
  for (int i = 0; i < kLimbs; ++i) limbs_[static_cast<std::size_t>(i)] += o.limbs_[static_cast<std::size_t>(i)];
  normalize();
}

void ExactSum::normalize() {
  for (int i = 0; i + 1 < kLimbs; ++i) {
    auto& l = limbs_[static_cast<std::size_t>(i)];
    const std::int64_t carry = l >> 32;  // floor division by 2^32
    l -= carry * kRadix;
    limbs_[static_cast<std::size_t>(i + 1)] += carry;
  }
  pending_ = 0;
}

bool ExactSum::is_zero() const {
  ExactSum c = *this;
  c.normalize();
  for (auto l : c.limbs_)
    if (l != 0) return false;
  return true;
}

double ExactSum::round() const {
  ExactSum c = *this;
  c.normalize();
  // After normalization limbs 0..K-2 are in [0, 2^32) and the sign of the
  // value is the sign of the top limb.
  const bool negative = c.limbs_[kLimbs - 1] < 0;
  if (negative) {
    for (auto& l : c.limbs_) l = -l;
    c.normalize();
  }
  int h = kLimbs - 1;
  while (h >= 0 && c.limbs_[static_cast<std::size_t>(h)] == 0) --h;
  if (h < 0) return 0.0;

  // Window of the three most significant limbs, LSB weight 2^(32 lo - 1074).
  const int lo = h >= 2 ? h - 2 : 0;
  unsigned __int128 window = 0;
  for (int i = h; i >= lo; --i)
    window = (window << 32) | static_cast<std::uint64_t>(c.limbs_[static_cast<std::size_t>(i)]);
  bool sticky = false;
  for (int i = 0; i < lo; ++i)
    if (c.limbs_[static_cast<std::size_t>(i)] != 0) sticky = true;
  int exponent = 32 * lo - 1074;

  const auto hi64 = static_cast<std::uint64_t>(window >> 64);
  const int bits = hi64 ? 128 - std::countl_zero(hi64)
                        : 64 - std::countl_zero(static_cast<std::uint64_t>(window));
  std::uint64_t top;
  if (bits > 64) {
    const int s = bits - 64;
    const unsigned __int128 dropped = window & ((static_cast<unsigned __int128>(1) << s) - 1);
    sticky = sticky || dropped != 0;
    top = static_cast<std::uint64_t>(window >> s);
    exponent += s;
  } else {
    top = static_cast<std::uint64_t>(window);
  }

  const int top_bits = 64 - std::countl_zero(top);
  double result;
  if (top_bits <= 53 && !sticky) {
    result = std::ldexp(static_cast<double>(top), exponent);
  } else {
    const int drop = top_bits - 53;
    std::uint64_t mant = top >> drop;
    const std::uint64_t rem = top & ((std::uint64_t{1} << drop) - 1);
    const std::uint64_t half = std::uint64_t{1} << (drop - 1);
    if (rem > half || (rem == half && (sticky || (mant & 1u)))) ++mant;
    result = std::ldexp(static_cast<double>(mant), exponent + drop);
  }
  return negative ? -result : result;
}

void ExactSum::serialize(std::span<double, kLimbs> out) const {
  ExactSum c = *this;
  c.normalize();
  for (int i = 0; i < kLimbs; ++i)
    out[static_cast<std::size_t>(i)] = static_cast<double>(c.limbs_[static_cast<std::size_t>(i)]);
}

ExactSum ExactSum::deserialize(std::span<const double, kLimbs> in) {
  ExactSum s;
  for (int i = 0; i < kLimbs; ++i) {
    const double v = in[static_cast<std::size_t>(i)];
    if (v != std::trunc(v) || std::fabs(v) >= 0x1p53)
      throw ValidationError("serialized ExactSum limb is not an exact integer");
    s.limbs_[static_cast<std::size_t>(i)] = static_cast<std::int64_t>(v);
  }
  s.normalize();
  return s;
}

double exact_sum(std::span<const double> values) {
  ExactSum s;
  for (double v : values) s.add(v);
  return s.round();
}

}  // namespace smalleig
