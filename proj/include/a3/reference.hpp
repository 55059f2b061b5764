#pragma once

// Double-precision attention used as ground truth for the quantized and
// approximate paths.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "a3/error.hpp"
#include "a3/matrix.hpp"

namespace a3::reference {

inline Vector true_scores(const Matrix& key, std::span<const double> query) {
  if (key.cols() != query.size()) {
    throw ShapeError("true_scores: key has " + std::to_string(key.cols()) +
                     " columns, query has " + std::to_string(query.size()));
  }
  Vector scores(key.rows(), 0.0);
  for (std::size_t r = 0; r < key.rows(); ++r) {
    const auto row = key.row(r);
    double acc = 0.0;
    for (std::size_t c = 0; c < row.size(); ++c) acc += row[c] * query[c];
    scores[r] = acc;
  }
  return scores;
}

// Max-subtracted softmax.
inline Vector softmax(std::span<const double> v) {
  if (v.empty()) return {};
  const double top = *std::max_element(v.begin(), v.end());
  Vector out(v.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < v.size(); ++k) {
    out[k] = std::exp(v[k] - top);
    sum += out[k];
  }
  for (double& x : out) x /= sum;
  return out;
}

inline Vector attention_exact(const Matrix& key, const Matrix& value, std::span<const double> query) {
  if (key.rows() != value.rows() || key.cols() != value.cols()) {
    throw ShapeError("attention_exact: key and value shapes differ");
  }
  const Vector weights = softmax(true_scores(key, query));
  Vector out(value.cols(), 0.0);
  for (std::size_t r = 0; r < value.rows(); ++r) {
    const auto row = value.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) out[c] += weights[r] * row[c];
  }
  return out;
}

// Indices of the k largest scores, best first; equal scores keep index order.
inline std::vector<RowId> top_k(std::span<const double> scores, std::size_t k) {
  if (k < 1 || k > scores.size()) {
    throw InputError("top_k: k=" + std::to_string(k) + " outside [1, " +
                     std::to_string(scores.size()) + "]");
  }
  std::vector<RowId> idx(scores.size());
  std::iota(idx.begin(), idx.end(), RowId{0});
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    [&](RowId a, RowId b) {
                      if (scores[a] != scores[b]) return scores[a] > scores[b];
                      return a < b;
                    });
  idx.resize(k);
  return idx;
}

}  // namespace a3::reference
