#pragma once

// Candidate selection over a column-sorted key matrix.
//
// Each column of the key is sorted once. For a query, every column exposes
// two frontiers: the next-largest and next-smallest component product. A
// max-queue and a min-queue merge those frontiers across columns, so the
// k-th max pop is the k-th largest of all n*d component products. Popped
// positive products (from the max side) and negative products (from the
// min side) accumulate into per-row greedy scores; rows ending positive are
// the candidates.
//
// Queue ties are broken by (column, row) ascending. Within a column, equal
// key values are visited in ascending row order in both directions, and a
// zero query component visits rows in index order.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <queue>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "a3/error.hpp"
#include "a3/matrix.hpp"

namespace a3 {

struct SortedEntry {
  double value = 0.0;
  RowId row = 0;
  friend bool operator==(const SortedEntry&, const SortedEntry&) = default;
};

class SortedKey {
 public:
  SortedKey() = default;

  explicit SortedKey(const Matrix& key) : rows_(key.rows()), cols_(key.cols()), values_(key.data()) {
    ascending_.resize(rows_ * cols_);
    descending_.resize(rows_ * cols_);
    for (std::size_t c = 0; c < cols_; ++c) {
      auto asc = std::span(ascending_).subspan(c * rows_, rows_);
      for (std::size_t r = 0; r < rows_; ++r) asc[r] = {key(r, c), static_cast<RowId>(r)};
      std::sort(asc.begin(), asc.end(), [](const SortedEntry& a, const SortedEntry& b) {
        return std::tie(a.value, a.row) < std::tie(b.value, b.row);
      });
      // Reverse by runs of equal value so rows stay ascending inside a run.
      auto desc = std::span(descending_).subspan(c * rows_, rows_);
      std::size_t out = 0;
      std::size_t end = rows_;
      while (end > 0) {
        std::size_t begin = end - 1;
        while (begin > 0 && asc[begin - 1].value == asc[end - 1].value) --begin;
        for (std::size_t k = begin; k < end; ++k) desc[out++] = asc[k];
        end = begin;
      }
    }
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  // Ascending by (value, row).
  std::span<const SortedEntry> column(std::size_t c) const {
    return std::span(ascending_).subspan(c * rows_, rows_);
  }
  // Descending by value, ascending by row within equal values.
  std::span<const SortedEntry> column_descending(std::size_t c) const {
    return std::span(descending_).subspan(c * rows_, rows_);
  }
  double value(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
  std::vector<SortedEntry> ascending_;
  std::vector<SortedEntry> descending_;
};

inline SortedKey preprocess_key(const Matrix& key) { return SortedKey(key); }

struct SelectionConfig {
  std::size_t iterations = 0;  // M
  double t_percent = 5.0;      // T
  bool heuristic = true;       // skip the min pop while the running sum is negative

  void validate() const {
    if (!(t_percent > 0.0 && t_percent <= 100.0)) {
      throw InputError("SelectionConfig: T must lie in (0, 100], got " + std::to_string(t_percent));
    }
  }
};

enum class Fallback : std::uint8_t {
  kNone,
  kBestGreedy,  // no positive greedy score; kept the single best touched row
  kAllRows,     // no row was touched at all
};

struct CandidateSet {
  std::vector<RowId> rows;    // ascending row ids
  std::vector<double> scores;  // greedy score of each selected row
  Fallback fallback = Fallback::kNone;

  // Full working state at the end of the search.
  std::vector<double> greedy_score;
  std::vector<std::uint8_t> touched;
  double cum_sum = 0.0;
  std::size_t iterations = 0;  // iterations that popped anything
  std::size_t max_pops = 0;
  std::size_t min_pops = 0;
  std::size_t min_skips = 0;
  std::vector<double> max_trace;  // popped max-queue scores, in order
  std::vector<double> min_trace;

  bool is_fallback() const noexcept { return fallback != Fallback::kNone; }
};

struct FrontierEntry {
  double score = 0.0;
  RowId row = 0;
  ColId col = 0;
};

namespace detail {

// Priority order: higher score first for the max queue, lower for the min
// queue; then lower column, then lower row.
struct MaxQueueLess {
  bool operator()(const FrontierEntry& a, const FrontierEntry& b) const {
    if (a.score != b.score) return a.score < b.score;
    return std::tie(a.col, a.row) > std::tie(b.col, b.row);
  }
};
struct MinQueueLess {
  bool operator()(const FrontierEntry& a, const FrontierEntry& b) const {
    if (a.score != b.score) return a.score > b.score;
    return std::tie(a.col, a.row) > std::tie(b.col, b.row);
  }
};

enum class ColumnOrder : std::uint8_t { kAscending, kDescending, kRowIndex };

// Shared finishing step: positive rows, or the documented fallback.
inline void select_candidates(CandidateSet& set) {
  const std::size_t n = set.greedy_score.size();
  for (std::size_t r = 0; r < n; ++r) {
    if (set.touched[r] && set.greedy_score[r] > 0.0) {
      set.rows.push_back(static_cast<RowId>(r));
      set.scores.push_back(set.greedy_score[r]);
    }
  }
  if (!set.rows.empty()) return;
  std::size_t best = n;
  for (std::size_t r = 0; r < n; ++r) {
    if (set.touched[r] && (best == n || set.greedy_score[r] > set.greedy_score[best])) best = r;
  }
  if (best != n) {
    set.fallback = Fallback::kBestGreedy;
    set.rows.push_back(static_cast<RowId>(best));
    set.scores.push_back(set.greedy_score[best]);
    return;
  }
  set.fallback = Fallback::kAllRows;
  for (std::size_t r = 0; r < n; ++r) {
    set.rows.push_back(static_cast<RowId>(r));
    set.scores.push_back(0.0);
  }
}

}  // namespace detail

// Working state of one greedy search. Owns its pointers and queues; reads
// the SortedKey and query it was built from, which must outlive it.
class GreedyState {
 public:
  GreedyState(const SortedKey& sk, std::span<const double> query) : sk_(sk), query_(query) {
    if (query.size() != sk.cols()) {
      throw ShapeError("candidate_selection: query has " + std::to_string(query.size()) +
                       " entries, key has " + std::to_string(sk.cols()) + " columns");
    }
    const std::size_t d = sk.cols();
    max_order_.resize(d);
    min_order_.resize(d);
    max_ptr_.assign(d, 0);
    min_ptr_.assign(d, 0);
    set_.greedy_score.assign(sk.rows(), 0.0);
    set_.touched.assign(sk.rows(), 0);
    for (std::size_t c = 0; c < d; ++c) {
      using detail::ColumnOrder;
      if (query[c] > 0.0) {
        max_order_[c] = ColumnOrder::kDescending;
        min_order_[c] = ColumnOrder::kAscending;
      } else if (query[c] < 0.0) {
        max_order_[c] = ColumnOrder::kAscending;
        min_order_[c] = ColumnOrder::kDescending;
      } else {
        max_order_[c] = ColumnOrder::kRowIndex;
        min_order_[c] = ColumnOrder::kRowIndex;
      }
      max_q_.push(frontier(c, max_order_[c], 0));
      min_q_.push(frontier(c, min_order_[c], 0));
    }
  }

  // One iteration: a max pop, then a min pop unless the heuristic skips it.
  // Returns false when nothing could be popped.
  bool step(bool heuristic) {
    bool popped = false;
    if (!max_q_.empty()) {
      const FrontierEntry e = max_q_.top();
      max_q_.pop();
      set_.cum_sum += e.score;
      set_.max_trace.push_back(e.score);
      ++set_.max_pops;
      if (e.score > 0.0) add(e);
      if (++max_ptr_[e.col] < sk_.rows()) max_q_.push(frontier(e.col, max_order_[e.col], max_ptr_[e.col]));
      popped = true;
    }
    if (heuristic && set_.cum_sum < 0.0) {
      ++set_.min_skips;
    } else if (!min_q_.empty()) {
      const FrontierEntry e = min_q_.top();
      min_q_.pop();
      set_.cum_sum += e.score;
      set_.min_trace.push_back(e.score);
      ++set_.min_pops;
      if (e.score < 0.0) add(e);
      if (++min_ptr_[e.col] < sk_.rows()) min_q_.push(frontier(e.col, min_order_[e.col], min_ptr_[e.col]));
      popped = true;
    }
    if (popped) ++set_.iterations;
    return popped;
  }

  // Position of each column's max / min frontier in its traversal order;
  // rows() means the column is exhausted.
  std::span<const std::size_t> max_ptr() const noexcept { return max_ptr_; }
  std::span<const std::size_t> min_ptr() const noexcept { return min_ptr_; }

  CandidateSet finish() && {
    detail::select_candidates(set_);
    return std::move(set_);
  }

 private:
  FrontierEntry frontier(std::size_t c, detail::ColumnOrder order, std::size_t pos) const {
    SortedEntry e;
    switch (order) {
      case detail::ColumnOrder::kAscending: e = sk_.column(c)[pos]; break;
      case detail::ColumnOrder::kDescending: e = sk_.column_descending(c)[pos]; break;
      case detail::ColumnOrder::kRowIndex: e = {sk_.value(pos, c), static_cast<RowId>(pos)}; break;
    }
    return {e.value * query_[c], e.row, static_cast<ColId>(c)};
  }

  void add(const FrontierEntry& e) {
    set_.greedy_score[e.row] += e.score;
    set_.touched[e.row] = 1;
  }

  const SortedKey& sk_;
  std::span<const double> query_;
  std::vector<detail::ColumnOrder> max_order_;
  std::vector<detail::ColumnOrder> min_order_;
  std::vector<std::size_t> max_ptr_;
  std::vector<std::size_t> min_ptr_;
  std::priority_queue<FrontierEntry, std::vector<FrontierEntry>, detail::MaxQueueLess> max_q_;
  std::priority_queue<FrontierEntry, std::vector<FrontierEntry>, detail::MinQueueLess> min_q_;
  CandidateSet set_;
};

// M iterations of the greedy search; stops early once both queues drain.
inline CandidateSet candidate_selection(const SortedKey& sk, std::span<const double> query,
                                        const SelectionConfig& cfg) {
  GreedyState state(sk, query);
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    if (!state.step(cfg.heuristic)) break;
  }
  return std::move(state).finish();
}

// Same search by brute force: materialize all n*d component products, sort
// them globally, and walk the k-th largest / k-th smallest directly.
inline CandidateSet naive_greedy_oracle(const Matrix& key, std::span<const double> query,
                                        const SelectionConfig& cfg) {
  if (query.size() != key.cols()) throw ShapeError("naive_greedy_oracle: query/key width mismatch");
  const std::size_t n = key.rows();
  const std::size_t d = key.cols();
  std::vector<FrontierEntry> by_max;
  by_max.reserve(n * d);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < d; ++c) {
      by_max.push_back({key(r, c) * query[c], static_cast<RowId>(r), static_cast<ColId>(c)});
    }
  }
  std::vector<FrontierEntry> by_min = by_max;
  std::sort(by_max.begin(), by_max.end(), [](const FrontierEntry& a, const FrontierEntry& b) {
    if (a.score != b.score) return a.score > b.score;
    return std::tie(a.col, a.row) < std::tie(b.col, b.row);
  });
  std::sort(by_min.begin(), by_min.end(), [](const FrontierEntry& a, const FrontierEntry& b) {
    if (a.score != b.score) return a.score < b.score;
    return std::tie(a.col, a.row) < std::tie(b.col, b.row);
  });

  CandidateSet set;
  set.greedy_score.assign(n, 0.0);
  set.touched.assign(n, 0);
  std::size_t next_max = 0;
  std::size_t next_min = 0;
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    bool popped = false;
    if (next_max < by_max.size()) {
      const FrontierEntry& e = by_max[next_max++];
      set.cum_sum += e.score;
      set.max_trace.push_back(e.score);
      ++set.max_pops;
      if (e.score > 0.0) {
        set.greedy_score[e.row] += e.score;
        set.touched[e.row] = 1;
      }
      popped = true;
    }
    if (cfg.heuristic && set.cum_sum < 0.0) {
      ++set.min_skips;
    } else if (next_min < by_min.size()) {
      const FrontierEntry& e = by_min[next_min++];
      set.cum_sum += e.score;
      set.min_trace.push_back(e.score);
      ++set.min_pops;
      if (e.score < 0.0) {
        set.greedy_score[e.row] += e.score;
        set.touched[e.row] = 1;
      }
      popped = true;
    }
    if (!popped) break;
    ++set.iterations;
  }
  detail::select_candidates(set);
  return set;
}

// ---------------------------------------------------------------------------
// Post-scoring selection

struct ScoredRow {
  RowId row = 0;
  double score = 0.0;
  friend bool operator==(const ScoredRow&, const ScoredRow&) = default;
};

// t = ln(100 / T): rows trailing the best by more than t have softmax weight
// below T% of the best row's.
inline double post_scoring_margin(double t_percent) {
  SelectionConfig{0, t_percent, false}.validate();
  return std::log(100.0 / t_percent);
}

// Positions of scores within margin of the maximum, in input order.
template <class Score>
std::vector<std::size_t> within_margin(std::span<const Score> scores, Score margin) {
  if (scores.empty()) throw InputError("post_scoring_select: empty candidate list");
  const Score best = *std::max_element(scores.begin(), scores.end());
  std::vector<std::size_t> keep;
  for (std::size_t k = 0; k < scores.size(); ++k) {
    if (best - scores[k] <= margin) keep.push_back(k);
  }
  return keep;
}

inline std::vector<ScoredRow> post_scoring_select(std::span<const ScoredRow> rows, double t_percent) {
  const double margin = post_scoring_margin(t_percent);
  std::vector<double> scores;
  scores.reserve(rows.size());
  for (const auto& r : rows) {
    if (!std::isfinite(r.score)) throw InputError("post_scoring_select: non-finite score");
    scores.push_back(r.score);
  }
  std::vector<ScoredRow> kept;
  for (std::size_t k : within_margin<double>(scores, margin)) kept.push_back(rows[k]);
  return kept;
}

}  // namespace a3
