#include <algorithm>
#include <cmath>
#include <map>

#include <gtest/gtest.h>

#include "a3/approx_attention.hpp"
#include "a3/reference.hpp"
#include "support/instances.hpp"
#include "support/oracle_pipeline.hpp"

using namespace a3;

namespace {

const Matrix kHandKey{{2, -1}, {-3, 4}, {1, 1}};

void expect_same(const CandidateSet& a, const CandidateSet& b) {
  EXPECT_EQ(a.rows, b.rows);
  EXPECT_EQ(a.scores, b.scores);
  EXPECT_EQ(a.greedy_score, b.greedy_score);
  EXPECT_EQ(a.touched, b.touched);
  EXPECT_EQ(a.fallback, b.fallback);
  EXPECT_EQ(a.max_trace, b.max_trace);
  EXPECT_EQ(a.min_trace, b.min_trace);
  EXPECT_EQ(a.iterations, b.iterations);
}

// Instances with deliberate ties: entries drawn from a small grid.
Matrix grid_matrix(support::SplitMix64& rng, std::size_t n, std::size_t d) {
  Matrix m(n, d);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < d; ++c) m(r, c) = static_cast<double>(rng.below(5)) - 2.0;
  }
  return m;
}

}  // namespace

TEST(SortedKey, HandExample) {
  const SortedKey sk(kHandKey);
  const auto c0 = sk.column(0);
  const auto c1 = sk.column(1);
  EXPECT_EQ(std::vector<SortedEntry>(c0.begin(), c0.end()),
            (std::vector<SortedEntry>{{-3, 1}, {1, 2}, {2, 0}}));
  EXPECT_EQ(std::vector<SortedEntry>(c1.begin(), c1.end()),
            (std::vector<SortedEntry>{{-1, 0}, {1, 2}, {4, 1}}));
}

TEST(SortedKey, SingleRowAndEqualColumns) {
  const SortedKey one(Matrix{{3.0, -2.0}});
  EXPECT_EQ(one.column(0)[0], (SortedEntry{3.0, 0}));
  EXPECT_EQ(one.column(1)[0], (SortedEntry{-2.0, 0}));

  const SortedKey flat(Matrix{{1.0}, {1.0}, {1.0}, {1.0}});
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_EQ(flat.column(0)[k].row, k);
    EXPECT_EQ(flat.column_descending(0)[k].row, k);
  }
}

TEST(SortedKey, DescendingKeepsRowsAscendingWithinRuns) {
  const SortedKey sk(Matrix{{1.0}, {2.0}, {1.0}, {2.0}, {0.0}});
  const auto desc = sk.column_descending(0);
  EXPECT_EQ(std::vector<SortedEntry>(desc.begin(), desc.end()),
            (std::vector<SortedEntry>{{2, 1}, {2, 3}, {1, 0}, {1, 2}, {0, 4}}));
}

TEST(CandidateSelection, HandExample) {
  const Vector q{1.0, 1.0};
  const SelectionConfig cfg{2, 5.0, false};
  const auto set = candidate_selection(SortedKey(kHandKey), q, cfg);
  EXPECT_EQ(set.rows, (std::vector<RowId>{0, 1}));
  EXPECT_EQ(set.greedy_score[0], 1.0);
  EXPECT_EQ(set.greedy_score[1], 1.0);
  EXPECT_EQ(set.greedy_score[2], 0.0);
  EXPECT_FALSE(set.is_fallback());
  expect_same(set, naive_greedy_oracle(kHandKey, q, cfg));
}

TEST(CandidateSelection, ZeroIterationsFallsBackToAllRows) {
  const auto set = candidate_selection(SortedKey(kHandKey), Vector{1.0, 1.0}, {0, 5.0, false});
  EXPECT_EQ(set.fallback, Fallback::kAllRows);
  EXPECT_EQ(set.rows, (std::vector<RowId>{0, 1, 2}));
}

TEST(CandidateSelection, NoPositiveScoreKeepsBestTouchedRow) {
  // Every product is negative: the max pop touches nothing, the min pop
  // drives rows negative.
  const Matrix key{{-1.0}, {-2.0}, {-3.0}};
  const auto set = candidate_selection(SortedKey(key), Vector{1.0}, {2, 5.0, false});
  EXPECT_EQ(set.fallback, Fallback::kBestGreedy);
  // Min pops hit rows 2 then 1; row 1 is the better of the touched rows.
  EXPECT_EQ(set.rows, (std::vector<RowId>{1}));
}

TEST(CandidateSelection, ZeroQueryComponentNeverScores) {
  const Matrix key{{1.0, 5.0}, {2.0, -5.0}};
  const auto set = candidate_selection(SortedKey(key), Vector{1.0, 0.0}, {4, 5.0, false});
  EXPECT_EQ(set.greedy_score[0], 1.0);
  EXPECT_EQ(set.greedy_score[1], 2.0);
}

TEST(CandidateSelection, ShapeMismatch) {
  EXPECT_THROW(candidate_selection(SortedKey(kHandKey), Vector{1.0}, {1, 5.0, false}), ShapeError);
}

TEST(CandidateSelection, HeuristicSkipsMinPopsWhileSumNegative) {
  // Query points away from every row: the max pops are small, the running
  // sum goes negative after the first min pop, and later min pops are skipped.
  const Matrix key{{-4.0, -4.0}, {-3.0, -3.0}, {0.1, 0.1}};
  const Vector q{1.0, 1.0};
  const auto on = candidate_selection(SortedKey(key), q, {4, 5.0, true});
  const auto off = candidate_selection(SortedKey(key), q, {4, 5.0, false});
  EXPECT_GT(on.min_skips, 0u);
  EXPECT_EQ(off.min_skips, 0u);
  EXPECT_LT(on.min_pops, off.min_pops);
  EXPECT_EQ(on.max_pops, off.max_pops);
  expect_same(on, naive_greedy_oracle(key, q, {4, 5.0, true}));
}

TEST(CandidateSelection, MatchesOracleOnRandomInstances) {
  support::SplitMix64 rng(41);
  for (int t = 0; t < 500; ++t) {
    const std::size_t n = 2 + rng.below(31);
    const std::size_t d = 2 + rng.below(7);
    const bool ties = t % 3 == 0;
    const Matrix key = ties ? grid_matrix(rng, n, d) : support::random_matrix(rng, n, d);
    Vector q = support::random_vector(rng, d);
    if (t % 5 == 0) q[rng.below(d)] = 0.0;
    const SelectionConfig cfg{rng.below(n * d + 3), 5.0, t % 2 == 0};
    SCOPED_TRACE("trial " + std::to_string(t));
    expect_same(candidate_selection(SortedKey(key), q, cfg), naive_greedy_oracle(key, q, cfg));
  }
}

TEST(CandidateSelection, FullConsumptionIdentity) {
  support::SplitMix64 rng(42);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 2 + rng.below(31);
    const std::size_t d = 2 + rng.below(7);
    const Matrix key = support::random_matrix(rng, n, d);
    const Vector q = support::random_vector(rng, d);
    const auto set = candidate_selection(SortedKey(key), q, {n * d, 5.0, false});
    const auto truth = reference::true_scores(key, q);
    std::vector<RowId> positive;
    for (std::size_t r = 0; r < n; ++r) {
      if (set.touched[r]) {
        EXPECT_NEAR(set.greedy_score[r], truth[r], 1e-12);
      }
      if (truth[r] > 0) positive.push_back(static_cast<RowId>(r));
    }
    if (!positive.empty()) {
      EXPECT_EQ(set.rows, positive);
    }
  }
}

TEST(CandidateSelection, BudgetPastExhaustionIsTruncated) {
  const Vector q{1.0, -1.0};
  const auto a = candidate_selection(SortedKey(kHandKey), q, {6, 5.0, false});
  const auto b = candidate_selection(SortedKey(kHandKey), q, {100, 5.0, false});
  expect_same(a, b);
  EXPECT_EQ(b.iterations, 6u);
}

TEST(CandidateSelection, PopsAreMonotoneAndPointersAdvance) {
  support::SplitMix64 rng(43);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 2 + rng.below(31);
    const std::size_t d = 2 + rng.below(7);
    const SortedKey sk(support::random_matrix(rng, n, d));
    const Vector q = support::random_vector(rng, d);
    GreedyState state(sk, q);
    std::vector<std::size_t> prev_max(d, 0), prev_min(d, 0);
    while (state.step(t % 2 == 0)) {
      for (std::size_t c = 0; c < d; ++c) {
        ASSERT_GE(state.max_ptr()[c], prev_max[c]);
        ASSERT_GE(state.min_ptr()[c], prev_min[c]);
        prev_max[c] = state.max_ptr()[c];
        prev_min[c] = state.min_ptr()[c];
      }
    }
    const auto set = std::move(state).finish();
    ASSERT_TRUE(std::is_sorted(set.max_trace.rbegin(), set.max_trace.rend()));
    ASSERT_TRUE(std::is_sorted(set.min_trace.begin(), set.min_trace.end()));
    for (std::size_t k = 0; k < set.rows.size() && !set.is_fallback(); ++k) ASSERT_GT(set.scores[k], 0.0);
  }
}

TEST(CandidateSelection, Deterministic) {
  support::SplitMix64 rng(44);
  const Matrix key = support::random_matrix(rng, 30, 8);
  const Vector q = support::random_vector(rng, 8);
  expect_same(candidate_selection(SortedKey(key), q, {40, 5.0, true}),
              candidate_selection(SortedKey(key), q, {40, 5.0, true}));
}

TEST(PostScoring, Examples) {
  const std::vector<ScoredRow> rows{{0, 5.0}, {1, 4.0}, {2, 1.0}};
  EXPECT_NEAR(post_scoring_margin(5.0), 2.9957, 1e-4);
  EXPECT_EQ(post_scoring_select(rows, 5.0), (std::vector<ScoredRow>{{0, 5.0}, {1, 4.0}}));

  const std::vector<ScoredRow> tied{{3, 2.0}, {4, 1.0}, {5, 2.0}};
  EXPECT_EQ(post_scoring_select(tied, 100.0), (std::vector<ScoredRow>{{3, 2.0}, {5, 2.0}}));

  const std::vector<ScoredRow> single{{7, -50.0}};
  EXPECT_EQ(post_scoring_select(single, 1.0), single);
}

TEST(PostScoring, Errors) {
  EXPECT_THROW(post_scoring_select({}, 5.0), InputError);
  const std::vector<ScoredRow> rows{{0, NAN}};
  EXPECT_THROW(post_scoring_select(rows, 5.0), InputError);
  const std::vector<ScoredRow> ok{{0, 1.0}};
  EXPECT_THROW(post_scoring_select(ok, 0.0), InputError);
  EXPECT_THROW(post_scoring_select(ok, 101.0), InputError);
}

TEST(PostScoring, WeightGuarantee) {
  support::SplitMix64 rng(45);
  for (double tp : {1.0, 5.0, 10.0, 50.0, 100.0}) {
    for (int t = 0; t < 300; ++t) {
      const Vector s = support::random_vector(rng, 1 + rng.below(40), 6.0);
      std::vector<ScoredRow> rows;
      for (std::size_t k = 0; k < s.size(); ++k) rows.push_back({static_cast<RowId>(k), s[k]});
      const auto kept = post_scoring_select(rows, tp);
      const auto w = reference::softmax(s);
      const double wmax = *std::max_element(w.begin(), w.end());
      const double smax = *std::max_element(s.begin(), s.end());
      for (std::size_t k = 0; k < s.size(); ++k) {
        const bool in = std::find(kept.begin(), kept.end(), rows[k]) != kept.end();
        if (in) {
          EXPECT_LE(smax - s[k], std::log(100.0 / tp));
        } else {
          EXPECT_LT(w[k], tp / 100.0 * wmax);
        }
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Composition

namespace {

struct Fixture {
  Matrix key;
  Matrix value;
  PrecisionSchedule sched;
  std::shared_ptr<const ExpLutPair> luts;
};

Fixture make_fixture(support::SplitMix64& rng, std::size_t n, std::size_t d) {
  Fixture fx{support::random_matrix(rng, n, d), support::random_matrix(rng, n, d), make_schedule(n, d, 4, 4),
             nullptr};
  fx.luts = std::make_shared<const ExpLutPair>(build_exp_luts(fx.sched));
  return fx;
}

}  // namespace

TEST(ApproxAttention, FullConsumptionKeepAllMatchesBaseOnPositiveRows) {
  support::SplitMix64 rng(46);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 2 + rng.below(40);
    const std::size_t d = 2 + rng.below(12);
    const auto fx = make_fixture(rng, n, d);
    const Vector q = support::random_vector(rng, d);
    const ApproxAttention attn(fx.key, fx.value, fx.sched, fx.luts);
    // T tiny keeps every candidate (margin ln(1e6) ~ 13.8 exceeds any spread here).
    const auto res = attn.evaluate(q, {n * d, 1e-4, false});
    const auto truth = reference::true_scores(fx.key, q);
    std::vector<RowId> positive;
    for (std::size_t r = 0; r < n; ++r) {
      if (truth[r] > 0) positive.push_back(static_cast<RowId>(r));
    }
    if (positive.empty()) continue;
    ASSERT_EQ(res.candidates.rows, positive);
    ASSERT_EQ(res.survivors, positive);
    const auto base = attention_base(attn.quantized_key(), attn.quantized_value(),
                                     quantize_vector(q, fx.sched.input), fx.sched, *fx.luts, positive);
    ASSERT_EQ(res.output, base.output);
    ASSERT_EQ(res.expsum, base.expsum);
  }
}

TEST(ApproxAttention, SingleRow) {
  const auto sched = make_schedule(1, 2, 4, 4);
  auto luts = std::make_shared<const ExpLutPair>(build_exp_luts(sched));
  const ApproxAttention attn(Matrix{{0.5, 0.5}}, Matrix{{0.25, -0.75}}, sched, luts);
  const auto res = attn.evaluate(Vector{1.0, 1.0}, {1, 5.0, true});
  EXPECT_EQ(res.candidates.rows, (std::vector<RowId>{0}));
  EXPECT_EQ(res.output.to_real(), (Vector{0.25, -0.75}));
}

TEST(ApproxAttention, ConservativeConfigMatchesOraclePipeline) {
  support::SplitMix64 rng(47);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 4 + rng.below(60);
    const std::size_t d = 2 + rng.below(15);
    const auto fx = make_fixture(rng, n, d);
    const Vector q = support::random_vector(rng, d);
    const SelectionConfig cfg{n / 2, 5.0, true};
    const auto res = ApproxAttention(fx.key, fx.value, fx.sched, fx.luts).evaluate(q, cfg);

    // Oracle: brute-force candidates, independent integer dot products,
    // direct threshold, independent pipeline over survivors.
    const auto cand = naive_greedy_oracle(fx.key, q, cfg);
    std::vector<std::size_t> rows(cand.rows.begin(), cand.rows.end());
    const auto dp = support::oracle_attention(fx.key, fx.value, q, 4, 4, rows).dp;
    const std::int64_t top = *std::max_element(dp.begin(), dp.end());
    const auto margin = static_cast<std::int64_t>(std::nearbyint(std::log(100.0 / 5.0) * 256.0));
    std::vector<std::size_t> survivors;
    for (std::size_t k = 0; k < rows.size(); ++k) {
      if (top - dp[k] <= margin) survivors.push_back(rows[k]);
    }
    const auto want = support::oracle_attention(fx.key, fx.value, q, 4, 4, survivors,
                                                support::oracle_default_lo_bits(n, d, 4, 4));
    ASSERT_EQ(res.candidate_count, rows.size());
    ASSERT_EQ(res.survivor_count, survivors.size());
    ASSERT_EQ(std::vector<std::size_t>(res.survivors.begin(), res.survivors.end()), survivors);
    ASSERT_EQ(res.output.raw, want.output);
  }
}

TEST(ApproxAttention, SmallerTNeverLosesSurvivors) {
  support::SplitMix64 rng(48);
  for (int t = 0; t < 100; ++t) {
    const auto fx = make_fixture(rng, 48, 8);
    const Vector q = support::random_vector(rng, 8);
    const ApproxAttention attn(fx.key, fx.value, fx.sched, fx.luts);
    const auto loose = attn.evaluate(q, {24, 1.0, true});
    const auto tight = attn.evaluate(q, {24, 10.0, true});
    for (RowId r : tight.survivors) {
      ASSERT_NE(std::find(loose.survivors.begin(), loose.survivors.end(), r), loose.survivors.end());
    }
    ASSERT_GE(loose.survivor_count, tight.survivor_count);
    ASSERT_GE(loose.candidate_count, loose.survivor_count);
  }
}

TEST(ApproxAttention, ShapeChecks) {
  const auto sched = make_schedule(3, 2, 4, 4);
  auto luts = std::make_shared<const ExpLutPair>(build_exp_luts(sched));
  EXPECT_THROW(ApproxAttention(kHandKey, Matrix(2, 2), sched, luts), ShapeError);
  EXPECT_THROW(ApproxAttention(Matrix(4, 2), Matrix(4, 2), sched, luts), ShapeError);
}
