#pragma once

// Invariant and oracle checks runnable from the command line.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <string>
#include <vector>

#include "a3/approx_search.hpp"
#include "a3/base_pipeline.hpp"
#include "a3/cycle_model.hpp"
#include "a3/harness/experiment.hpp"
#include "a3/harness/random.hpp"
#include "a3/reference.hpp"

namespace a3::harness {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

inline Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double lo = -1.0, double hi = 1.0) {
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = rng.uniform(lo, hi);
  }
  return m;
}

inline Vector random_vector(Rng& rng, std::size_t len, double lo = -1.0, double hi = 1.0) {
  Vector v(len);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

inline bool same_selection(const CandidateSet& a, const CandidateSet& b) {
  return a.rows == b.rows && a.scores == b.scores && a.greedy_score == b.greedy_score &&
         a.touched == b.touched && a.fallback == b.fallback;
}

inline std::vector<CheckResult> run_self_check(std::uint64_t seed, std::size_t trials = 200) {
  std::vector<CheckResult> out;
  auto record = [&](std::string name, const std::function<std::string()>& body) {
    std::string failure;
    try {
      failure = body();
    } catch (const std::exception& e) {
      failure = std::string("threw: ") + e.what();
    }
    out.push_back({std::move(name), failure.empty(), failure});
  };

  record("greedy search matches brute-force oracle", [&]() -> std::string {
    Rng rng(seed);
    for (std::size_t t = 0; t < trials; ++t) {
      const std::size_t n = 2 + rng.below(31);
      const std::size_t d = 2 + rng.below(7);
      const Matrix key = random_matrix(rng, n, d);
      const Vector q = random_vector(rng, d);
      const SelectionConfig cfg{rng.below(n * d + 1), 5.0, false};
      if (!same_selection(candidate_selection(SortedKey(key), q, cfg), naive_greedy_oracle(key, q, cfg))) {
        return "mismatch on trial " + std::to_string(t);
      }
    }
    return {};
  });

  record("full consumption reproduces true scores", [&]() -> std::string {
    Rng rng(seed + 1);
    for (std::size_t t = 0; t < trials; ++t) {
      const std::size_t n = 2 + rng.below(31);
      const std::size_t d = 2 + rng.below(7);
      const Matrix key = random_matrix(rng, n, d);
      const Vector q = random_vector(rng, d);
      const auto set = candidate_selection(SortedKey(key), q, {n * d, 5.0, false});
      const auto truth = reference::true_scores(key, q);
      std::vector<RowId> positive;
      for (std::size_t r = 0; r < n; ++r) {
        if (set.touched[r] && std::abs(set.greedy_score[r] - truth[r]) > 1e-12) {
          return "greedy score off on trial " + std::to_string(t);
        }
        if (truth[r] > 0) positive.push_back(static_cast<RowId>(r));
      }
      if (positive.empty() ? !set.is_fallback() : set.rows != positive) {
        return "candidate set differs on trial " + std::to_string(t);
      }
    }
    return {};
  });

  record("two-table exponent within one unit", [&]() -> std::string {
    // d=2, i=3, f=4: a 16-bit shifted input split 8/8.
    const auto sched = make_schedule(16, 2, 3, 4);
    const auto luts = build_exp_luts(sched, {8, 8});
    for (std::int64_t x = 0; x < (1 << 16); ++x) {
      const auto direct = quantize(std::exp(-std::ldexp(static_cast<double>(x), -8)), sched.score);
      if (std::llabs(exp_lut_eval(x, luts).raw() - direct.raw()) > 1) return "x=" + std::to_string(x);
    }
    return {};
  });

  record("cycle formulas", [&]() -> std::string {
    for (std::uint64_t n : {1u, 16u, 50u, 320u}) {
      if (base_latency(n) != 3 * n + 27 || base_throughput(n) != n + 9) return "n=" + std::to_string(n);
    }
    return {};
  });

  record("post-scoring weight bound", [&]() -> std::string {
    Rng rng(seed + 2);
    for (std::size_t t = 0; t < trials; ++t) {
      const Vector s = random_vector(rng, 2 + rng.below(30), -8.0, 8.0);
      std::vector<ScoredRow> rows;
      for (std::size_t k = 0; k < s.size(); ++k) rows.push_back({static_cast<RowId>(k), s[k]});
      const double tp = 5.0;
      const auto kept = post_scoring_select(rows, tp);
      const auto w = reference::softmax(s);
      const double wmax = *std::max_element(w.begin(), w.end());
      for (std::size_t k = 0; k < s.size(); ++k) {
        const bool is_kept = std::find(kept.begin(), kept.end(), rows[k]) != kept.end();
        if (!is_kept && !(w[k] < tp / 100.0 * wmax)) return "excluded row too heavy";
      }
    }
    return {};
  });

  record("report determinism", [&]() -> std::string {
    ExperimentConfig cfg;
    cfg.n = 64;
    cfg.d = 16;
    cfg.queries = 4;
    cfg.seed = seed;
    const auto data = make_experiment_data(cfg);
    const auto first = report_text(run_experiment(cfg, data));
    cfg.threads = 3;
    if (report_text(run_experiment(cfg, data)) != first) return "reports differ";
    return {};
  });

  return out;
}

}  // namespace a3::harness
