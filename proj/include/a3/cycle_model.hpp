#pragma once

// Closed-form cycle accounting for the base and approximate pipelines.

#include <cstdint>
#include <string>
#include <vector>

#include "a3/error.hpp"

namespace a3 {

struct CycleParams {
  std::uint64_t alpha = 27;          // constant overhead of the approximate pipeline
  std::uint64_t refill_depth = 4;    // c: critical path of the selector loop body
  std::uint64_t scan_width = 16;     // greedy-score entries scanned per cycle
  std::uint64_t div_cycles = 7;
  std::uint64_t mul_acc_cycles = 2;

  void validate() const {
    if (refill_depth < 1 || scan_width < 1 || div_cycles < 1 || mul_acc_cycles < 1) {
      throw InputError("CycleParams: refill_depth, scan_width, div_cycles and mul_acc_cycles must be >= 1");
    }
  }
};

struct StageCycles {
  std::string stage;
  std::uint64_t cycles = 0;
  // False for terms reported for reference but not summed into latency.
  bool in_latency = true;

  friend bool operator==(const StageCycles&, const StageCycles&) = default;
};

struct CycleReport {
  std::uint64_t latency_cycles = 0;
  std::uint64_t throughput_cycles_per_query = 0;
  std::vector<StageCycles> breakdown;

  friend bool operator==(const CycleReport&, const CycleReport&) = default;
};

// Each base module takes n cycles plus the divide and multiply-accumulate
// latencies of the slowest (output) module.
inline std::uint64_t base_throughput(std::uint64_t n, const CycleParams& p = {}) {
  if (n < 1) throw InputError("base_throughput: n must be >= 1");
  return n + p.div_cycles + p.mul_acc_cycles;
}

inline std::uint64_t base_latency(std::uint64_t n, const CycleParams& p = {}) {
  return 3 * base_throughput(n, p);
}

inline CycleReport base_report(std::uint64_t n, const CycleParams& p = {}) {
  const std::uint64_t per_module = base_throughput(n, p);
  return {base_latency(n, p),
          per_module,
          {{"dot_product", per_module, true},
           {"exponent", per_module, true},
           {"output", per_module, true}}};
}

inline std::uint64_t approx_latency(std::uint64_t m, std::uint64_t c, std::uint64_t k,
                                    const CycleParams& p = {}) {
  if (k > c) {
    throw InputError("approx_latency: K=" + std::to_string(k) + " exceeds C=" + std::to_string(c));
  }
  return m + c + 2 * k + p.alpha;
}

inline std::uint64_t greedy_scan_cycles(std::uint64_t n, const CycleParams& p = {}) {
  p.validate();
  return (n + p.scan_width - 1) / p.scan_width;
}

// The selector issues one iteration per cycle, then scans the greedy scores.
inline std::uint64_t approx_throughput(std::uint64_t m, std::uint64_t n, const CycleParams& p = {}) {
  return m + greedy_scan_cycles(n, p);
}

// Latency is M + C + 2K + alpha. When the greedy-score scan is longer than
// everything after the selector (C + 2K + alpha), the excess is charged as a
// separate "scan_excess" term so latency never drops below throughput.
inline CycleReport approx_report(std::uint64_t m, std::uint64_t c, std::uint64_t k, std::uint64_t n,
                                 const CycleParams& p = {}) {
  p.validate();
  const std::uint64_t formula = approx_latency(m, c, k, p);
  const std::uint64_t scan = greedy_scan_cycles(n, p);
  const std::uint64_t tail = c + 2 * k + p.alpha;
  const std::uint64_t excess = scan > tail ? scan - tail : 0;
  CycleReport r;
  r.latency_cycles = formula + excess;
  r.throughput_cycles_per_query = approx_throughput(m, n, p);
  r.breakdown = {{"candidate_selection", m, true},
                 {"dot_product", c, true},
                 {"exponent", k, true},
                 {"output", k, true},
                 {"alpha", p.alpha, true},
                 {"scan_excess", excess, true},
                 {"greedy_scan", scan, false},
                 {"refill_init", p.refill_depth, false}};
  return r;
}

inline bool approx_is_faster(const CycleReport& approx, const CycleReport& base) {
  return approx.latency_cycles < base.latency_cycles;
}

}  // namespace a3
