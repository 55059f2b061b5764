#pragma once

// Independent integer re-derivation of the quantized pipeline, written from
// the width and rounding rules alone. Shares no arithmetic with the library:
// plain 128-bit integers, its own rounding, and exponent entries computed on
// the fly instead of read from built tables.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "a3/matrix.hpp"

namespace a3::support {

using i128 = __int128;

inline i128 oracle_round_div(i128 num, i128 den) {
  const bool neg = num < 0;
  if (neg) num = -num;
  i128 q = num / den;
  const i128 r2 = 2 * (num % den);
  if (r2 > den || (r2 == den && (q & 1))) ++q;
  return neg ? -q : q;
}

inline i128 oracle_clamp(i128 v, i128 lo, i128 hi) { return std::min(std::max(v, lo), hi); }

inline int oracle_log2_ceil(std::size_t x) {
  int b = 0;
  while ((std::size_t{1} << b) < x) ++b;
  return b;
}

inline std::int64_t oracle_quantize(double x, int frac, i128 max_raw, i128 min_raw) {
  const double s = std::nearbyint(x * std::pow(2.0, frac));
  if (s >= static_cast<double>(max_raw)) return static_cast<std::int64_t>(max_raw);
  if (s <= static_cast<double>(min_raw)) return static_cast<std::int64_t>(min_raw);
  return static_cast<std::int64_t>(s);
}

struct OraclePipeline {
  std::vector<std::int64_t> dp;
  std::int64_t dp_max = 0;
  std::vector<std::int64_t> score;
  std::int64_t expsum = 0;
  std::vector<std::int64_t> weight;
  std::vector<std::int64_t> output;  // 3f fraction bits
  int f = 0;

  Vector output_real() const {
    Vector out;
    for (auto v : output) out.push_back(std::ldexp(static_cast<double>(v), -3 * f));
    return out;
  }
};

struct OracleWidths {
  int i, f, log_n, log_d;
  i128 lim(int ib, int fb) const { return (i128{1} << (ib + fb)) - 1; }
  i128 input_max() const { return lim(i, f); }
  i128 temp_max() const { return lim(2 * i, 2 * f); }
  i128 dp_max() const { return lim(log_d + 2 * i, 2 * f); }
  i128 shifted_bits() const { return log_d + 2 * i + 1 + 2 * f; }
  i128 unit_max() const { return (i128{1} << (2 * f + 1)) - 1; }           // unsigned, 0 int bits
  i128 expsum_max() const { return (i128{1} << (log_n + 2 * f + 1)) - 1; }  // unsigned
  i128 output_max() const { return lim(i + log_n, 3 * f); }
};

// e^-x, x given in 2f-fraction units, via a split at lo_bits: entries are
// rounded separately, multiplied exactly, rounded once.
inline std::int64_t oracle_exp(std::int64_t x, int lo_bits, const OracleWidths& w) {
  const std::int64_t hi_part = (x >> lo_bits) << lo_bits;
  const std::int64_t lo_part = x & ((std::int64_t{1} << lo_bits) - 1);
  const i128 umax = w.unit_max();
  const double scale = std::pow(2.0, -2 * w.f);
  const i128 h = oracle_quantize(std::exp(-static_cast<double>(hi_part) * scale), 2 * w.f, umax, 0);
  const i128 l = oracle_quantize(std::exp(-static_cast<double>(lo_part) * scale), 2 * w.f, umax, 0);
  return static_cast<std::int64_t>(oracle_clamp(oracle_round_div(h * l, i128{1} << (2 * w.f)), 0, umax));
}

// Default split: low half of the shifted width (rounded down).
inline int oracle_default_lo_bits(std::size_t n, std::size_t d, int i, int f) {
  (void)n;
  const int total = oracle_log2_ceil(d) + 2 * i + 1 + 2 * f;
  return total / 2;
}

// rows: which key/value rows take part (all rows when empty).
inline OraclePipeline oracle_attention(const Matrix& key, const Matrix& value, const Vector& query, int i,
                                       int f, std::vector<std::size_t> rows = {}, int lo_bits = -1) {
  const std::size_t n = key.rows();
  const std::size_t d = key.cols();
  if (rows.empty()) {
    for (std::size_t r = 0; r < n; ++r) rows.push_back(r);
  }
  const OracleWidths w{i, f, oracle_log2_ceil(n), oracle_log2_ceil(d)};
  if (lo_bits < 0) lo_bits = oracle_default_lo_bits(n, d, i, f);
  auto qin = [&](double x) { return i128{oracle_quantize(x, f, w.input_max(), -w.input_max())}; };

  OraclePipeline out;
  out.f = f;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    i128 acc = 0;
    for (std::size_t c = 0; c < d; ++c) {
      const i128 prod = oracle_clamp(qin(key(rows[k], c)) * qin(query[c]), -w.temp_max(), w.temp_max());
      acc = oracle_clamp(acc + prod, -w.dp_max(), w.dp_max());
    }
    out.dp.push_back(static_cast<std::int64_t>(acc));
  }
  out.dp_max = *std::max_element(out.dp.begin(), out.dp.end());

  i128 sum = 0;
  for (auto v : out.dp) {
    const std::int64_t s = oracle_exp(out.dp_max - v, lo_bits, w);
    out.score.push_back(s);
    sum = oracle_clamp(sum + s, 0, w.expsum_max());
  }
  out.expsum = static_cast<std::int64_t>(sum);

  std::vector<i128> acc(d, 0);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const i128 wt = oracle_clamp(oracle_round_div(i128{out.score[k]} << (2 * f), sum), 0, w.unit_max());
    out.weight.push_back(static_cast<std::int64_t>(wt));
    for (std::size_t c = 0; c < d; ++c) {
      const i128 term = oracle_clamp(wt * qin(value(rows[k], c)), -w.output_max(), w.output_max());
      acc[c] = oracle_clamp(acc[c] + term, -w.output_max(), w.output_max());
    }
  }
  for (auto v : acc) out.output.push_back(static_cast<std::int64_t>(v));
  return out;
}

}  // namespace a3::support
