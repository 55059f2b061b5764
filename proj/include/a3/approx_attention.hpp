#pragma once

// Approximate attention: greedy candidates -> quantized dot products for the
// candidates only -> post-scoring filter -> exponent and weighted sum over
// the survivors.
//
// Candidate selection reads the real-valued key and query; everything from
// the dot product onward runs in the quantized domain. The post-scoring
// threshold is quantized to the shifted dot-product format and compared
// against the same raw differences the exponent stage consumes.

#include <memory>
#include <span>
#include <vector>

#include "a3/approx_search.hpp"
#include "a3/base_pipeline.hpp"
#include "a3/cycle_model.hpp"
#include "a3/fixedpoint.hpp"
#include "a3/matrix.hpp"

namespace a3 {

struct ApproxResult {
  QVector output;
  std::size_t candidate_count = 0;  // C
  std::size_t survivor_count = 0;   // K
  CandidateSet candidates;
  std::vector<RowId> survivors;
  QVector survivor_dp;
  QValue dp_max;
  QVector score;
  QValue expsum;
  QVector weight;
  CycleReport cycles;
};

// Raw indices into dp that survive post-scoring at T percent.
inline std::vector<std::size_t> post_scoring_select_quantized(const QVector& dp, double t_percent,
                                                              const PrecisionSchedule& sched) {
  const QValue margin = quantize(post_scoring_margin(t_percent), sched.dot_product_shifted);
  return within_margin<std::int64_t>(dp.raw, margin.raw());
}

inline ApproxResult attention_approx(const SortedKey& sorted_key, const QMatrix& key,
                                     const QMatrix& value, std::span<const double> query,
                                     const PrecisionSchedule& sched, const ExpLutPair& luts,
                                     const SelectionConfig& cfg, const CycleParams& params = {}) {
  cfg.validate();
  if (key.rows != value.rows || key.cols != value.cols || key.rows != sorted_key.rows() ||
      key.cols != sorted_key.cols()) {
    throw ShapeError("attention_approx: key, value and sorted key shapes differ");
  }
  ApproxResult out;
  out.candidates = candidate_selection(sorted_key, query, cfg);
  out.candidate_count = out.candidates.rows.size();

  const QVector q = quantize_vector(query, sched.input);
  auto [dp, dp_max] = dot_product_stage(key, q, sched, out.candidates.rows);

  const auto keep = post_scoring_select_quantized(dp, cfg.t_percent, sched);
  out.survivor_dp = QVector{dp.format, {}};
  for (std::size_t k : keep) {
    out.survivors.push_back(out.candidates.rows[k]);
    out.survivor_dp.raw.push_back(dp.raw[k]);
  }
  out.survivor_count = out.survivors.size();
  out.dp_max = dp_max;

  auto [score, expsum] = exponent_stage(out.survivor_dp, dp_max, luts, sched);
  auto [weight, output] = output_stage(score, expsum, value, out.survivors, sched);
  out.score = std::move(score);
  out.expsum = expsum;
  out.weight = std::move(weight);
  out.output = std::move(output);
  out.cycles = approx_report(out.candidates.iterations, out.candidate_count, out.survivor_count,
                             key.rows, params);
  return out;
}

// Key-side state prepared once and shared read-only across queries.
class ApproxAttention {
 public:
  ApproxAttention(const Matrix& key, const Matrix& value, const PrecisionSchedule& sched,
                  std::shared_ptr<const ExpLutPair> luts, CycleParams params = {})
      : sched_(sched),
        luts_(std::move(luts)),
        params_(params),
        sorted_key_(preprocess_key(key)),
        key_(quantize_matrix(key, sched.input)),
        value_(quantize_matrix(value, sched.input)) {
    if (key.rows() != value.rows() || key.cols() != value.cols()) {
      throw ShapeError("ApproxAttention: key and value shapes differ");
    }
    if (key.rows() != sched.n || key.cols() != sched.d) {
      throw ShapeError("ApproxAttention: schedule was built for a different n x d");
    }
  }

  ApproxResult evaluate(std::span<const double> query, const SelectionConfig& cfg) const {
    return attention_approx(sorted_key_, key_, value_, query, sched_, *luts_, cfg, params_);
  }

  PipelineResult evaluate_base(std::span<const double> query) const {
    return attention_base(key_, value_, quantize_vector(query, sched_.input), sched_, *luts_);
  }

  const SortedKey& sorted_key() const noexcept { return sorted_key_; }
  const QMatrix& quantized_key() const noexcept { return key_; }
  const QMatrix& quantized_value() const noexcept { return value_; }
  const PrecisionSchedule& schedule() const noexcept { return sched_; }
  const ExpLutPair& luts() const noexcept { return *luts_; }

 private:
  PrecisionSchedule sched_;
  std::shared_ptr<const ExpLutPair> luts_;
  CycleParams params_;
  SortedKey sorted_key_;
  QMatrix key_;
  QMatrix value_;
};

}  // namespace a3
