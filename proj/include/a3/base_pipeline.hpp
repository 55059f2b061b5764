#pragma once

// Quantized three-stage attention: dot product with running max, exponent
// via two lookup tables after max subtraction, then normalized weighted sum.
// Stages are pure functions; cycle accounting lives in cycle_model.hpp.

#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "a3/error.hpp"
#include "a3/fixedpoint.hpp"
#include "a3/matrix.hpp"

namespace a3 {

// Raw values sharing one format.
struct QVector {
  QFormat format;
  std::vector<std::int64_t> raw;

  std::size_t size() const noexcept { return raw.size(); }
  QValue operator[](std::size_t k) const { return QValue(raw[k], format); }
  Vector to_real() const {
    Vector out(raw.size());
    for (std::size_t k = 0; k < raw.size(); ++k) out[k] = a3::to_real(QValue(raw[k], format));
    return out;
  }

  friend bool operator==(const QVector&, const QVector&) = default;
};

struct QMatrix {
  QFormat format;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::int64_t> raw;

  QValue at(std::size_t r, std::size_t c) const { return QValue(raw[r * cols + c], format); }
  std::span<const std::int64_t> row(std::size_t r) const { return {raw.data() + r * cols, cols}; }
};

inline QVector quantize_vector(std::span<const double> v, const QFormat& fmt) {
  QVector out{fmt, std::vector<std::int64_t>(v.size())};
  for (std::size_t k = 0; k < v.size(); ++k) out.raw[k] = quantize(v[k], fmt).raw();
  return out;
}

inline QMatrix quantize_matrix(const Matrix& m, const QFormat& fmt) {
  QMatrix out{fmt, m.rows(), m.cols(), std::vector<std::int64_t>(m.data().size())};
  for (std::size_t k = 0; k < m.data().size(); ++k) out.raw[k] = quantize(m.data()[k], fmt).raw();
  return out;
}

inline std::vector<RowId> all_rows(std::size_t n) {
  std::vector<RowId> rows(n);
  std::iota(rows.begin(), rows.end(), RowId{0});
  return rows;
}

// ---------------------------------------------------------------------------
// Exponent lookup tables

struct LutSplit {
  int hi_bits = 0;
  int lo_bits = 0;
  friend bool operator==(const LutSplit&, const LutSplit&) = default;
};

// Equal halves of the shifted dot-product bit budget (hi takes the odd bit).
inline LutSplit default_lut_split(const PrecisionSchedule& sched) {
  const int total = sched.dot_product_shifted.int_bits() + sched.dot_product_shifted.frac_bits();
  return {total - total / 2, total / 2};
}

// e^-x for x = (hi_index << lo_bits | lo_index) units of the shifted format,
// computed as hi_table[hi_index] * lo_table[lo_index].
//
// hi_table is stored up to its last nonzero entry; the exponent is monotone,
// so every index past the stored prefix reads as zero.
struct ExpLutPair {
  LutSplit split;
  QFormat input;
  QFormat score;
  std::vector<std::int64_t> hi_table;
  std::vector<std::int64_t> lo_table;

  int total_bits() const noexcept { return split.hi_bits + split.lo_bits; }
  std::size_t hi_entries() const noexcept { return std::size_t{1} << split.hi_bits; }
  std::size_t lo_entries() const noexcept { return std::size_t{1} << split.lo_bits; }

  std::int64_t hi(std::uint64_t index) const noexcept {
    return index < hi_table.size() ? hi_table[index] : 0;
  }
  std::int64_t lo(std::uint64_t index) const noexcept { return lo_table[index]; }
};

inline constexpr int kMaxLutBits = 26;

inline ExpLutPair build_exp_luts(const PrecisionSchedule& sched, LutSplit split) {
  const QFormat& in = sched.dot_product_shifted;
  if (split.hi_bits < 0 || split.lo_bits < 0 ||
      split.hi_bits + split.lo_bits != in.int_bits() + in.frac_bits()) {
    throw InputError("build_exp_luts: split " + std::to_string(split.hi_bits) + "+" +
                     std::to_string(split.lo_bits) + " does not cover the " +
                     std::to_string(in.int_bits() + in.frac_bits()) + "-bit shifted input");
  }
  if (split.lo_bits > kMaxLutBits) {
    throw InputError("build_exp_luts: low table of 2^" + std::to_string(split.lo_bits) +
                     " entries is too large");
  }
  ExpLutPair luts{split, in, sched.score, {}, {}};
  const int frac = in.frac_bits();

  luts.lo_table.resize(luts.lo_entries());
  for (std::size_t v = 0; v < luts.lo_table.size(); ++v) {
    luts.lo_table[v] = quantize(std::exp(-std::ldexp(static_cast<double>(v), -frac)), luts.score).raw();
  }
  const std::uint64_t hi_count = luts.hi_entries();
  for (std::uint64_t u = 0; u < hi_count; ++u) {
    const double x = std::ldexp(static_cast<double>(u), split.lo_bits - frac);
    const std::int64_t entry = quantize(std::exp(-x), luts.score).raw();
    if (entry == 0) break;
    if (luts.hi_table.size() >= (std::size_t{1} << kMaxLutBits)) {
      throw InputError("build_exp_luts: high table needs more than 2^" +
                       std::to_string(kMaxLutBits) + " nonzero entries");
    }
    luts.hi_table.push_back(entry);
  }
  return luts;
}

inline ExpLutPair build_exp_luts(const PrecisionSchedule& sched) {
  return build_exp_luts(sched, default_lut_split(sched));
}

// x_mag: nonnegative raw magnitude of (max - dot_product) in the shifted
// format. The hi*lo product is formed exactly and rounded once.
inline QValue exp_lut_eval(std::int64_t x_mag, const ExpLutPair& luts) {
  if (x_mag < 0 || (luts.total_bits() < 63 && x_mag >> luts.total_bits() != 0)) {
    throw InputError("exp_lut_eval: magnitude " + std::to_string(x_mag) + " needs more than " +
                     std::to_string(luts.total_bits()) + " bits");
  }
  const auto bits = static_cast<std::uint64_t>(x_mag);
  const std::uint64_t lo_mask = (std::uint64_t{1} << luts.split.lo_bits) - 1;
  const detail::wide_int product =
      detail::wide_int{luts.hi(bits >> luts.split.lo_bits)} * luts.lo(bits & lo_mask);
  const int frac = luts.score.frac_bits();
  return QValue(detail::saturate(detail::rescale(product, 2 * frac, frac), luts.score), luts.score);
}

inline QValue exp_lut_eval(const QValue& x_mag, const ExpLutPair& luts) {
  if (x_mag.format().frac_bits() != luts.input.frac_bits()) {
    throw InputError("exp_lut_eval: magnitude format " + x_mag.format().to_string() +
                     " does not match table input " + luts.input.to_string());
  }
  return exp_lut_eval(x_mag.raw(), luts);
}

// ---------------------------------------------------------------------------
// Stage 1: dot products

struct DotProducts {
  QVector dp;
  QValue dp_max;
};

// Dot products for the listed key rows, in list order.
inline DotProducts dot_product_stage(const QMatrix& key, const QVector& query,
                                     const PrecisionSchedule& sched, std::span<const RowId> rows) {
  if (key.cols != query.size()) {
    throw ShapeError("dot_product_stage: key has " + std::to_string(key.cols) +
                     " columns, query has " + std::to_string(query.size()));
  }
  if (rows.empty()) throw InputError("dot_product_stage: no rows to score");
  const QFormat& acc_fmt = sched.dot_product;
  DotProducts out{QVector{acc_fmt, std::vector<std::int64_t>(rows.size())}, QValue(0, acc_fmt)};
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k] >= key.rows) throw InputError("dot_product_stage: row id out of range");
    QValue acc(0, acc_fmt);
    for (std::size_t c = 0; c < key.cols; ++c) {
      const QValue prod = q_mul(key.at(rows[k], c), query[c], sched.temp);
      acc = q_add(acc, prod, acc_fmt);
    }
    out.dp.raw[k] = acc.raw();
    if (k == 0 || acc.raw() > out.dp_max.raw()) out.dp_max = acc;
  }
  return out;
}

inline DotProducts dot_product_stage(const QMatrix& key, const QVector& query,
                                     const PrecisionSchedule& sched) {
  const auto rows = all_rows(key.rows);
  return dot_product_stage(key, query, sched, rows);
}

// ---------------------------------------------------------------------------
// Stage 2: exponent

struct ExponentResult {
  QVector score;
  QValue expsum;
};

inline ExponentResult exponent_stage(const QVector& dp, const QValue& dp_max, const ExpLutPair& luts,
                                     const PrecisionSchedule& sched) {
  if (luts.input != sched.dot_product_shifted || luts.score != sched.score) {
    throw InputError("exponent_stage: tables were built for a different schedule");
  }
  ExponentResult out{QVector{sched.score, std::vector<std::int64_t>(dp.size())},
                     QValue(0, sched.expsum)};
  for (std::size_t k = 0; k < dp.size(); ++k) {
    const QValue shifted = q_sub(dp_max, dp[k], sched.dot_product_shifted);
    if (shifted.raw() < 0) throw ContractViolation("exponent_stage: dot product above the max");
    const QValue s = exp_lut_eval(shifted, luts);
    out.score.raw[k] = s.raw();
    out.expsum = q_add(out.expsum, s, sched.expsum);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Stage 3: output

struct OutputResult {
  QVector weight;
  QVector output;
};

// score[k] weights value row rows[k].
inline OutputResult output_stage(const QVector& score, const QValue& expsum, const QMatrix& value,
                                 std::span<const RowId> rows, const PrecisionSchedule& sched) {
  if (score.size() != rows.size()) throw ShapeError("output_stage: score/row count mismatch");
  if (expsum.raw() < (std::int64_t{1} << expsum.format().frac_bits())) {
    throw ContractViolation("output_stage: expsum " + std::to_string(to_real(expsum)) + " < 1");
  }
  OutputResult out{QVector{sched.weight, std::vector<std::int64_t>(score.size())},
                   QVector{sched.output, std::vector<std::int64_t>(value.cols, 0)}};
  for (std::size_t k = 0; k < score.size(); ++k) {
    if (rows[k] >= value.rows) throw InputError("output_stage: row id out of range");
    const QValue w = q_div(score[k], expsum, sched.weight);
    out.weight.raw[k] = w.raw();
    for (std::size_t c = 0; c < value.cols; ++c) {
      const QValue term = q_mul(w, value.at(rows[k], c), sched.output);
      out.output.raw[c] = q_add(out.output[c], term, sched.output).raw();
    }
  }
  return out;
}

inline OutputResult output_stage(const QVector& score, const QValue& expsum, const QMatrix& value,
                                 const PrecisionSchedule& sched) {
  const auto rows = all_rows(value.rows);
  return output_stage(score, expsum, value, rows, sched);
}

// ---------------------------------------------------------------------------

struct PipelineResult {
  QVector dp;
  QValue dp_max;
  QVector score;
  QValue expsum;
  QVector weight;
  QVector output;
};

// Runs the three stages over the listed rows only.
inline PipelineResult attention_base(const QMatrix& key, const QMatrix& value, const QVector& query,
                                     const PrecisionSchedule& sched, const ExpLutPair& luts,
                                     std::span<const RowId> rows) {
  if (key.rows != value.rows || key.cols != value.cols) {
    throw ShapeError("attention_base: key and value shapes differ");
  }
  auto [dp, dp_max] = dot_product_stage(key, query, sched, rows);
  auto [score, expsum] = exponent_stage(dp, dp_max, luts, sched);
  auto [weight, output] = output_stage(score, expsum, value, rows, sched);
  return {std::move(dp), dp_max, std::move(score), expsum, std::move(weight), std::move(output)};
}

inline PipelineResult attention_base(const QMatrix& key, const QMatrix& value, const QVector& query,
                                     const PrecisionSchedule& sched, const ExpLutPair& luts) {
  const auto rows = all_rows(key.rows);
  return attention_base(key, value, query, sched, luts, rows);
}

// Quantizes real inputs to the schedule's input format first.
inline PipelineResult attention_base(const Matrix& key, const Matrix& value,
                                     std::span<const double> query, const PrecisionSchedule& sched,
                                     const ExpLutPair& luts) {
  return attention_base(quantize_matrix(key, sched.input), quantize_matrix(value, sched.input),
                        quantize_vector(query, sched.input), sched, luts);
}

}  // namespace a3
