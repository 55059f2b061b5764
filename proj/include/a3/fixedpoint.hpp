#pragma once

// Signed fixed-point values with explicit integer/fraction widths, and the
// per-stage width schedule used by the attention pipeline.
//
// Raw values are counts of 2^-frac_bits units held in 64-bit integers.
// Widths are checked, never packed. All rounding is round-half-to-even and
// every result saturates to its target format.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>

#include "a3/error.hpp"

namespace a3 {

// Nonnegative quantities (scores, weights, the exponent sum) spend the sign
// bit as one more magnitude bit, so a (0, f) unsigned format holds exactly 1.0.
enum class Signedness : std::uint8_t { kSigned, kUnsigned };

class QFormat {
 public:
  static constexpr int kMaxWidth = 63;

  constexpr QFormat() = default;
  constexpr QFormat(int int_bits, int frac_bits,
                    Signedness signedness = Signedness::kSigned)
      : int_bits_(int_bits), frac_bits_(frac_bits), signedness_(signedness) {
    if (int_bits < 0 || frac_bits < 0 || int_bits + frac_bits < 1) {
      throw InputError("QFormat: need int_bits >= 0, frac_bits >= 0 and at least one bit");
    }
    if (width() > kMaxWidth) {
      throw InputError("QFormat: " + std::to_string(width()) + "-bit format exceeds 63 bits");
    }
  }

  constexpr int int_bits() const noexcept { return int_bits_; }
  constexpr int frac_bits() const noexcept { return frac_bits_; }
  constexpr Signedness signedness() const noexcept { return signedness_; }
  constexpr bool is_signed() const noexcept { return signedness_ == Signedness::kSigned; }

  // Storage bits including the sign (or reused sign) bit.
  constexpr int width() const noexcept { return 1 + int_bits_ + frac_bits_; }

  constexpr std::int64_t max_raw() const noexcept {
    const int magnitude_bits = int_bits_ + frac_bits_ + (is_signed() ? 0 : 1);
    return (std::int64_t{1} << magnitude_bits) - 1;
  }
  constexpr std::int64_t min_raw() const noexcept { return is_signed() ? -max_raw() : 0; }

  double max_value() const noexcept { return std::ldexp(static_cast<double>(max_raw()), -frac_bits_); }
  double min_value() const noexcept { return std::ldexp(static_cast<double>(min_raw()), -frac_bits_); }
  // Value of one raw unit.
  double ulp() const noexcept { return std::ldexp(1.0, -frac_bits_); }

  std::string to_string() const {
    return std::string(is_signed() ? "Q" : "UQ") + std::to_string(int_bits_) + "." +
           std::to_string(frac_bits_);
  }

  friend constexpr bool operator==(const QFormat&, const QFormat&) = default;

 private:
  int int_bits_ = 0;
  int frac_bits_ = 1;
  Signedness signedness_ = Signedness::kSigned;
};

namespace detail {

using wide_int = __int128;

// num / den rounded half-to-even; den > 0.
constexpr wide_int div_round_even(wide_int num, wide_int den) {
  if (num < 0) return -div_round_even(-num, den);
  const wide_int q = num / den;
  const wide_int r = num % den;
  const wide_int twice = 2 * r;
  if (twice > den) return q + 1;
  if (twice < den) return q;
  return (q % 2 == 0) ? q : q + 1;
}

constexpr wide_int pow2(int e) { return wide_int{1} << e; }

// raw at from_frac fraction bits -> raw at to_frac fraction bits.
constexpr wide_int rescale(wide_int raw, int from_frac, int to_frac) {
  if (to_frac >= from_frac) return raw * pow2(to_frac - from_frac);
  return div_round_even(raw, pow2(from_frac - to_frac));
}

constexpr std::int64_t saturate(wide_int raw, const QFormat& fmt) {
  if (raw > fmt.max_raw()) return fmt.max_raw();
  if (raw < fmt.min_raw()) return fmt.min_raw();
  return static_cast<std::int64_t>(raw);
}

}  // namespace detail

class QValue {
 public:
  constexpr QValue() = default;

  // Throws ContractViolation when raw lies outside the format range.
  constexpr QValue(std::int64_t raw, QFormat format) : raw_(raw), format_(format) {
    if (raw < format.min_raw() || raw > format.max_raw()) {
      throw ContractViolation("QValue: raw " + std::to_string(raw) + " outside " +
                              format.to_string());
    }
  }

  constexpr std::int64_t raw() const noexcept { return raw_; }
  constexpr const QFormat& format() const noexcept { return format_; }

  friend constexpr bool operator==(const QValue&, const QValue&) = default;

 private:
  std::int64_t raw_ = 0;
  QFormat format_{};
};

inline double to_real(const QValue& v) noexcept {
  return std::ldexp(static_cast<double>(v.raw()), -v.format().frac_bits());
}

inline QValue quantize(double x, const QFormat& fmt) {
  if (!std::isfinite(x)) throw InputError("quantize: non-finite input");
  const double scaled = std::ldexp(x, fmt.frac_bits());
  if (scaled >= static_cast<double>(fmt.max_raw())) return QValue(fmt.max_raw(), fmt);
  if (scaled <= static_cast<double>(fmt.min_raw())) return QValue(fmt.min_raw(), fmt);
  // Default floating-point environment rounds half to even.
  return QValue(static_cast<std::int64_t>(std::nearbyint(scaled)), fmt);
}

// Re-express v in out, rounding and saturating as needed.
inline QValue q_convert(const QValue& v, const QFormat& out) {
  const auto r = detail::rescale(v.raw(), v.format().frac_bits(), out.frac_bits());
  return QValue(detail::saturate(r, out), out);
}

inline QValue q_add(const QValue& a, const QValue& b, const QFormat& out) {
  const int frac = std::max(a.format().frac_bits(), b.format().frac_bits());
  const auto sum = detail::rescale(a.raw(), a.format().frac_bits(), frac) +
                   detail::rescale(b.raw(), b.format().frac_bits(), frac);
  return QValue(detail::saturate(detail::rescale(sum, frac, out.frac_bits()), out), out);
}

inline QValue q_sub(const QValue& a, const QValue& b, const QFormat& out) {
  const int frac = std::max(a.format().frac_bits(), b.format().frac_bits());
  const auto diff = detail::rescale(a.raw(), a.format().frac_bits(), frac) -
                    detail::rescale(b.raw(), b.format().frac_bits(), frac);
  return QValue(detail::saturate(detail::rescale(diff, frac, out.frac_bits()), out), out);
}

// The exact product carries the sum of the operand fraction widths before
// the single rounding into out.
inline QValue q_mul(const QValue& a, const QValue& b, const QFormat& out) {
  const detail::wide_int product = detail::wide_int{a.raw()} * b.raw();
  const int frac = a.format().frac_bits() + b.format().frac_bits();
  return QValue(detail::saturate(detail::rescale(product, frac, out.frac_bits()), out), out);
}

// Exact rational quotient rounded once into out. The divisor must be >= 1.
inline QValue q_div(const QValue& a, const QValue& b, const QFormat& out) {
  const int bf = b.format().frac_bits();
  if (b.raw() < (std::int64_t{1} << bf)) {
    throw ContractViolation("q_div: divisor " + std::to_string(to_real(b)) + " is below 1");
  }
  // a.raw * 2^-af / (b.raw * 2^-bf) * 2^of = a.raw * 2^(of + bf - af) / b.raw
  const int shift = out.frac_bits() + bf - a.format().frac_bits();
  detail::wide_int num = a.raw();
  detail::wide_int den = b.raw();
  if (shift >= 0) {
    num *= detail::pow2(shift);
  } else {
    den *= detail::pow2(-shift);
  }
  return QValue(detail::saturate(detail::div_round_even(num, den), out), out);
}

// ceil(log2(x)), with log2(1) = 0.
constexpr int ceil_log2(std::size_t x) {
  int bits = 0;
  while ((std::size_t{1} << bits) < x) ++bits;
  return bits;
}

// Widths for every pipeline stage given n rows, d columns and an input
// format of i integer / f fraction bits. n and d are rounded up to powers
// of two for width purposes only.
struct PrecisionSchedule {
  std::size_t n = 0;
  std::size_t d = 0;
  int i = 0;
  int f = 0;

  QFormat input;
  QFormat temp;
  QFormat dot_product;
  QFormat dot_product_shifted;
  QFormat score;
  QFormat expsum;
  QFormat weight;
  QFormat output;
};

inline PrecisionSchedule make_schedule(std::size_t n, std::size_t d, int i, int f) {
  if (n < 1 || d < 1) throw InputError("make_schedule: n and d must be >= 1");
  if (i < 1 || f < 1) throw InputError("make_schedule: i and f must be >= 1");
  const int log_n = ceil_log2(n);
  const int log_d = ceil_log2(d);
  PrecisionSchedule s;
  s.n = n;
  s.d = d;
  s.i = i;
  s.f = f;
  s.input = QFormat(i, f);
  s.temp = QFormat(2 * i, 2 * f);
  s.dot_product = QFormat(log_d + 2 * i, 2 * f);
  s.dot_product_shifted = QFormat(log_d + 2 * i + 1, 2 * f);
  s.score = QFormat(0, 2 * f, Signedness::kUnsigned);
  s.expsum = QFormat(log_n, 2 * f, Signedness::kUnsigned);
  s.weight = QFormat(0, 2 * f, Signedness::kUnsigned);
  s.output = QFormat(i + log_n, 3 * f);
  return s;
}

}  // namespace a3
