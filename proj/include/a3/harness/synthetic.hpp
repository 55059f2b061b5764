#pragma once

// Seeded synthetic workloads with planted high-similarity rows.
//
// Background key/value entries are uniform in [-1, 1]. When planted > 0 the
// rows are split into groups of `planted`, and query m is aligned with group
// m mod G. Each group gets a sign pattern and a band of w = max(1, d / G')
// emphasized columns, G' being the number of groups in use. A planted row is
// sign * (1.75 + u) on its band and sign * (1.25 + u) elsewhere, u in
// [0, 1/64). The query is sign * [1.25, 1.5) on the band and sign * [0.5, 1)
// elsewhere. On the band the target rows are the largest products in the
// whole key, so greedy search touches them first; off the band they still
// agree in sign with the query, so they clear the background by a wide
// margin. All values fit a format with one integer bit. With planted == 0,
// queries are sign * [0.5, 1.5) with random signs.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "a3/error.hpp"
#include "a3/harness/random.hpp"
#include "a3/matrix.hpp"
#include "a3/reference.hpp"

namespace a3::harness {

struct SyntheticData {
  Matrix key;
  Matrix value;
  Matrix queries;
  // planted[m]: rows planted for query m, ascending; empty when planted == 0.
  std::vector<std::vector<RowId>> planted;
};

// Minimum gap between the weakest planted row and the best other row.
inline constexpr double kPlantedMargin = 1.0;
inline constexpr int kMaxResamples = 1000;

inline SyntheticData gen_synthetic(std::size_t n, std::size_t d, std::size_t planted,
                                   std::size_t queries, std::uint64_t seed) {
  if (n < 1 || d < 1 || queries < 1) throw InputError("gen_synthetic: n, d and queries must be >= 1");
  if (planted > n) throw InputError("gen_synthetic: planted exceeds n");
  Rng rng(seed);
  SyntheticData out{Matrix(n, d), Matrix(n, d), Matrix(queries, d), {}};
  auto background_row = [&](std::size_t r) {
    for (std::size_t c = 0; c < d; ++c) out.key(r, c) = rng.uniform(-1.0, 1.0);
  };
  for (std::size_t r = 0; r < n; ++r) background_row(r);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < d; ++c) out.value(r, c) = rng.uniform(-1.0, 1.0);
  }

  if (planted == 0) {
    for (std::size_t m = 0; m < queries; ++m) {
      for (std::size_t c = 0; c < d; ++c) {
        out.queries(m, c) = (rng.coin() ? 1.0 : -1.0) * rng.uniform(0.5, 1.5);
      }
    }
    return out;
  }

  const std::size_t groups = n / planted;
  std::vector<RowId> order(n);
  std::iota(order.begin(), order.end(), RowId{0});
  for (std::size_t k = n; k > 1; --k) std::swap(order[k - 1], order[rng.below(k)]);

  std::vector<std::vector<RowId>> group_rows(groups);
  std::vector<std::uint8_t> is_planted(n, 0);
  std::vector<std::vector<double>> signs(groups, std::vector<double>(d));
  const std::size_t used_groups = std::min(groups, queries);
  const std::size_t band = std::max<std::size_t>(1, d / used_groups);
  auto on_band = [&](std::size_t g, std::size_t c) { return (c + d - (g * band) % d) % d < band; };
  for (std::size_t g = 0; g < used_groups; ++g) {
    for (double& s : signs[g]) s = rng.coin() ? 1.0 : -1.0;
    group_rows[g].assign(order.begin() + static_cast<std::ptrdiff_t>(g * planted),
                         order.begin() + static_cast<std::ptrdiff_t>((g + 1) * planted));
    std::sort(group_rows[g].begin(), group_rows[g].end());
    for (RowId r : group_rows[g]) {
      is_planted[r] = 1;
      for (std::size_t c = 0; c < d; ++c) {
        const double base = on_band(g, c) ? 1.75 : 1.25;
        out.key(r, c) = signs[g][c] * (base + rng.uniform(0.0, 1.0 / 64));
      }
    }
  }
  for (std::size_t m = 0; m < queries; ++m) {
    const std::size_t g = m % groups;
    for (std::size_t c = 0; c < d; ++c) {
      const double mag = on_band(g, c) ? rng.uniform(1.25, 1.5) : rng.uniform(0.5, 1.0);
      out.queries(m, c) = signs[g][c] * mag;
    }
    out.planted.push_back(group_rows[g]);
  }

  // Resample background rows until every query clears the margin.
  for (int attempt = 0;; ++attempt) {
    bool clean = true;
    for (std::size_t m = 0; m < queries; ++m) {
      const auto scores = reference::true_scores(out.key, out.queries.row(m));
      double weakest = scores[out.planted[m].front()];
      for (RowId r : out.planted[m]) weakest = std::min(weakest, scores[r]);
      for (std::size_t r = 0; r < n; ++r) {
        if (std::binary_search(out.planted[m].begin(), out.planted[m].end(), static_cast<RowId>(r))) continue;
        if (scores[r] > weakest - kPlantedMargin) {
          if (is_planted[r]) {
            throw InputError("gen_synthetic: planted groups collide at d=" + std::to_string(d) +
                             "; use a larger d or fewer queries");
          }
          clean = false;
          background_row(r);
        }
      }
    }
    if (clean) break;
    if (attempt == kMaxResamples) {
      throw InputError("gen_synthetic: could not separate planted rows at d=" + std::to_string(d));
    }
  }
  return out;
}

}  // namespace a3::harness
