#pragma once

// Runs exact, base-quantized and approximate attention side by side and
// reduces per-query metrics into a report.

#include <algorithm>
#include <cmath>
#include <exception>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "a3/approx_attention.hpp"
#include "a3/base_pipeline.hpp"
#include "a3/cycle_model.hpp"
#include "a3/error.hpp"
#include "a3/harness/config.hpp"
#include "a3/harness/synthetic.hpp"
#include "a3/reference.hpp"

namespace a3::harness {

struct ExperimentData {
  Matrix key;
  Matrix value;
  Matrix queries;
};

struct AccuracyMetrics {
  double recall = 0.0;            // exact top-k found among post-scoring survivors
  double candidate_recall = 0.0;  // exact top-k found among greedy candidates
  double linf = 0.0;
  double l2 = 0.0;
};

inline double recall_at_k(std::span<const RowId> exact_top_k, std::span<const RowId> selected) {
  if (exact_top_k.empty()) throw InputError("recall_at_k: empty top-k");
  std::size_t hits = 0;
  for (RowId r : exact_top_k) {
    if (std::find(selected.begin(), selected.end(), r) != selected.end()) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(exact_top_k.size());
}

inline AccuracyMetrics compute_metrics(std::span<const RowId> exact_top_k, std::span<const RowId> survivors,
                                       std::span<const RowId> candidates, std::span<const double> exact_output,
                                       std::span<const double> approx_output) {
  if (exact_output.size() != approx_output.size()) {
    throw ShapeError("compute_metrics: output lengths " + std::to_string(exact_output.size()) + " and " +
                     std::to_string(approx_output.size()) + " differ");
  }
  AccuracyMetrics m;
  m.recall = recall_at_k(exact_top_k, survivors);
  m.candidate_recall = recall_at_k(exact_top_k, candidates);
  double sq = 0.0;
  for (std::size_t k = 0; k < exact_output.size(); ++k) {
    const double e = std::abs(exact_output[k] - approx_output[k]);
    m.linf = std::max(m.linf, e);
    sq += e * e;
  }
  m.l2 = std::sqrt(sq);
  return m;
}

struct QueryReport {
  std::size_t query = 0;
  std::size_t candidates = 0;  // C
  std::size_t survivors = 0;   // K
  AccuracyMetrics approx;
  double base_linf = 0.0;
  double base_l2 = 0.0;
  Fallback fallback = Fallback::kNone;
  double base_expsum = 0.0;
  double approx_expsum = 0.0;
  CycleReport base_cycles;
  CycleReport approx_cycles;
};

struct AggregateReport {
  double mean_candidates = 0.0;
  double mean_survivors = 0.0;
  double mean_recall = 0.0;
  double min_recall = 1.0;
  double mean_candidate_recall = 0.0;
  double max_approx_linf = 0.0;
  double mean_approx_l2 = 0.0;
  double max_base_linf = 0.0;
  double mean_base_l2 = 0.0;
  std::size_t fallbacks = 0;
  double mean_base_latency = 0.0;
  double mean_approx_latency = 0.0;
  double mean_approx_throughput = 0.0;
  std::size_t approx_faster = 0;
};

struct RunReport {
  ExperimentConfig config;
  std::vector<QueryReport> queries;
  AggregateReport aggregate;
};

inline ExperimentData make_experiment_data(const ExperimentConfig& cfg) {
  auto syn = gen_synthetic(cfg.n, cfg.d, cfg.planted, cfg.queries, cfg.seed);
  return {std::move(syn.key), std::move(syn.value), std::move(syn.queries)};
}

namespace detail {

inline QueryReport run_query(const ExperimentConfig& cfg, const ExperimentData& data,
                             const ApproxAttention& approx, std::size_t q) {
  const auto query = data.queries.row(q);
  const Vector exact = reference::attention_exact(data.key, data.value, query);
  const Vector scores = reference::true_scores(data.key, query);
  const auto top = reference::top_k(scores, cfg.top_k);

  const PipelineResult base = approx.evaluate_base(query);
  const ApproxResult res = approx.evaluate(query, cfg.selection());

  QueryReport r;
  r.query = q;
  r.candidates = res.candidate_count;
  r.survivors = res.survivor_count;
  r.approx = compute_metrics(top, res.survivors, res.candidates.rows, exact, res.output.to_real());
  const auto base_err = compute_metrics(top, all_rows(data.key.rows()), all_rows(data.key.rows()), exact,
                                        base.output.to_real());
  r.base_linf = base_err.linf;
  r.base_l2 = base_err.l2;
  r.fallback = res.candidates.fallback;
  r.base_expsum = to_real(base.expsum);
  r.approx_expsum = to_real(res.expsum);
  if (r.base_expsum < 1.0 || r.approx_expsum < 1.0) {
    throw ContractViolation("expsum below 1");
  }
  r.base_cycles = base_report(data.key.rows(), cfg.cycle_params());
  r.approx_cycles = res.cycles;
  return r;
}

template <class E>
[[noreturn]] void rethrow_with_prefix(const E& e, const std::string& prefix) {
  throw E(prefix + e.what());
}

}  // namespace detail

// Rethrows a failure from query q with the index prepended, keeping its
// category (parse, shape, other input, contract, anything else).
[[noreturn]] inline void rethrow_for_query(std::exception_ptr error, std::size_t q) {
  const std::string prefix = "query " + std::to_string(q) + ": ";
  try {
    std::rethrow_exception(error);
  } catch (const ParseError& e) {
    throw ParseError(prefix + e.what(), e.row(), e.col());
  } catch (const FileError& e) {
    detail::rethrow_with_prefix(e, prefix);
  } catch (const ShapeError& e) {
    detail::rethrow_with_prefix(e, prefix);
  } catch (const InputError& e) {
    detail::rethrow_with_prefix(e, prefix);
  } catch (const ContractViolation& e) {
    detail::rethrow_with_prefix(e, prefix);
  } catch (const std::exception& e) {
    throw std::runtime_error(prefix + e.what());
  }
}

inline RunReport run_experiment(const ExperimentConfig& cfg, const ExperimentData& data) {
  cfg.validate();
  if (data.key.rows() != cfg.n || data.key.cols() != cfg.d) {
    throw ShapeError("run_experiment: key is " + std::to_string(data.key.rows()) + "x" +
                     std::to_string(data.key.cols()) + ", config says " + std::to_string(cfg.n) + "x" +
                     std::to_string(cfg.d));
  }
  if (data.value.rows() != cfg.n || data.value.cols() != cfg.d || data.queries.cols() != cfg.d) {
    throw ShapeError("run_experiment: value or query shape does not match the key");
  }

  const auto sched = make_schedule(cfg.n, cfg.d, cfg.i_bits, cfg.f_bits);
  auto luts = std::make_shared<const ExpLutPair>(
      build_exp_luts(sched, cfg.lut_split.value_or(default_lut_split(sched))));
  const ApproxAttention approx(data.key, data.value, sched, luts, cfg.cycle_params());

  const std::size_t count = data.queries.rows();
  std::vector<std::optional<QueryReport>> results(count);
  std::vector<std::exception_ptr> errors(count);
  auto worker = [&](std::size_t first, std::size_t stride) {
    for (std::size_t q = first; q < count; q += stride) {
      try {
        results[q] = detail::run_query(cfg, data, approx, q);
      } catch (...) {
        errors[q] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::min(cfg.threads, count);
  if (threads <= 1) {
    worker(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker, t, threads);
  }
  for (std::size_t q = 0; q < count; ++q) {
    if (errors[q]) rethrow_for_query(errors[q], q);
  }

  RunReport report{cfg, {}, {}};
  AggregateReport& a = report.aggregate;
  for (auto& r : results) {
    const QueryReport& q = *r;
    a.mean_candidates += static_cast<double>(q.candidates);
    a.mean_survivors += static_cast<double>(q.survivors);
    a.mean_recall += q.approx.recall;
    a.min_recall = std::min(a.min_recall, q.approx.recall);
    a.mean_candidate_recall += q.approx.candidate_recall;
    a.max_approx_linf = std::max(a.max_approx_linf, q.approx.linf);
    a.mean_approx_l2 += q.approx.l2;
    a.max_base_linf = std::max(a.max_base_linf, q.base_linf);
    a.mean_base_l2 += q.base_l2;
    if (q.fallback != Fallback::kNone) ++a.fallbacks;
    a.mean_base_latency += static_cast<double>(q.base_cycles.latency_cycles);
    a.mean_approx_latency += static_cast<double>(q.approx_cycles.latency_cycles);
    a.mean_approx_throughput += static_cast<double>(q.approx_cycles.throughput_cycles_per_query);
    if (approx_is_faster(q.approx_cycles, q.base_cycles)) ++a.approx_faster;
    report.queries.push_back(q);
  }
  const double inv = 1.0 / static_cast<double>(count);
  for (double* field : {&a.mean_candidates, &a.mean_survivors, &a.mean_recall, &a.mean_candidate_recall,
                        &a.mean_approx_l2, &a.mean_base_l2, &a.mean_base_latency, &a.mean_approx_latency,
                        &a.mean_approx_throughput}) {
    *field *= inv;
  }
  return report;
}

// ---------------------------------------------------------------------------
// JSON

inline const char* fallback_name(Fallback f) {
  switch (f) {
    case Fallback::kNone: return "none";
    case Fallback::kBestGreedy: return "best_greedy";
    case Fallback::kAllRows: return "all_rows";
  }
  return "unknown";
}

inline json cycles_to_json(const CycleReport& c) {
  json breakdown = json::array();
  for (const auto& s : c.breakdown) {
    breakdown.push_back({{"stage", s.stage}, {"cycles", s.cycles}, {"in_latency", s.in_latency}});
  }
  return {{"latency_cycles", c.latency_cycles},
          {"throughput_cycles_per_query", c.throughput_cycles_per_query},
          {"breakdown", breakdown}};
}

inline json report_to_json(const RunReport& r) {
  json j;
  j["config"] = config_to_json(r.config);
  const auto& a = r.aggregate;
  j["aggregate"] = {{"queries", r.queries.size()},
                    {"mean_candidates", a.mean_candidates},
                    {"mean_survivors", a.mean_survivors},
                    {"mean_recall", a.mean_recall},
                    {"min_recall", a.min_recall},
                    {"mean_candidate_recall", a.mean_candidate_recall},
                    {"max_approx_linf", a.max_approx_linf},
                    {"mean_approx_l2", a.mean_approx_l2},
                    {"max_base_linf", a.max_base_linf},
                    {"mean_base_l2", a.mean_base_l2},
                    {"fallbacks", a.fallbacks},
                    {"mean_base_latency", a.mean_base_latency},
                    {"mean_approx_latency", a.mean_approx_latency},
                    {"mean_approx_throughput", a.mean_approx_throughput},
                    {"approx_faster", a.approx_faster}};
  json queries = json::array();
  for (const auto& q : r.queries) {
    queries.push_back({{"query", q.query},
                       {"candidates", q.candidates},
                       {"survivors", q.survivors},
                       {"recall", q.approx.recall},
                       {"candidate_recall", q.approx.candidate_recall},
                       {"approx_linf", q.approx.linf},
                       {"approx_l2", q.approx.l2},
                       {"base_linf", q.base_linf},
                       {"base_l2", q.base_l2},
                       {"fallback", fallback_name(q.fallback)},
                       {"base_expsum", q.base_expsum},
                       {"approx_expsum", q.approx_expsum},
                       {"base_cycles", cycles_to_json(q.base_cycles)},
                       {"approx_cycles", cycles_to_json(q.approx_cycles)}});
  }
  j["queries"] = std::move(queries);
  return j;
}

inline std::string report_text(const RunReport& r) { return report_to_json(r).dump(2) + "\n"; }

}  // namespace a3::harness
