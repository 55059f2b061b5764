#pragma once

// Experiment configuration, read from and written back to JSON.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "a3/approx_search.hpp"
#include "a3/base_pipeline.hpp"
#include "a3/cycle_model.hpp"
#include "a3/error.hpp"

namespace a3::harness {

using json = nlohmann::ordered_json;

struct SweepGrid {
  std::vector<double> m_fractions{1.0, 0.5, 0.25, 0.125};
  std::vector<double> t_percents{1.0, 5.0, 10.0};
};

struct ExperimentConfig {
  std::size_t n = 320;
  std::size_t d = 64;
  int i_bits = 4;
  int f_bits = 4;
  // M is either absolute or a fraction of n (floor(fraction * n)).
  std::optional<std::size_t> m;
  double m_fraction = 0.5;
  double t_percent = 5.0;
  bool heuristic = true;
  std::optional<LutSplit> lut_split;
  std::uint64_t alpha = 27;
  std::uint64_t seed = 1;
  std::size_t queries = 32;
  std::size_t top_k = 5;
  std::size_t planted = 5;
  std::size_t threads = 1;
  SweepGrid sweep;

  std::size_t resolved_m() const {
    if (m) return *m;
    return static_cast<std::size_t>(std::floor(m_fraction * static_cast<double>(n)));
  }

  SelectionConfig selection() const { return {resolved_m(), t_percent, heuristic}; }

  CycleParams cycle_params() const {
    CycleParams p;
    p.alpha = alpha;
    return p;
  }

  void validate() const {
    if (n < 1 || d < 1) throw InputError("config: n and d must be >= 1");
    if (i_bits < 1 || f_bits < 1) throw InputError("config: i_bits and f_bits must be >= 1");
    if (!m && !(m_fraction >= 0.0 && std::isfinite(m_fraction))) {
      throw InputError("config: m_fraction must be finite and >= 0");
    }
    selection().validate();
    if (top_k < 1 || top_k > n) throw InputError("config: top_k must lie in [1, n]");
    if (planted > n) throw InputError("config: planted exceeds n");
    if (queries < 1) throw InputError("config: queries must be >= 1");
    if (threads < 1) throw InputError("config: threads must be >= 1");
  }
};

namespace detail {

template <class T>
T read_field(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("config: field '") + key + "': " + e.what());
  }
}

template <class T>
void read_optional(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = read_field<T>(j, key);
}

}  // namespace detail

inline ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) throw InputError("config: top level must be an object");
  static const std::set<std::string> known = {
      "n",     "d",     "i_bits", "f_bits",  "m",       "m_fraction", "m_resolved", "t_percent",
      "heuristic", "lut_split", "alpha", "seed", "queries", "top_k", "planted", "threads", "sweep"};
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw InputError("config: unknown field '" + key + "'");
  }
  ExperimentConfig c;
  detail::read_optional(j, "n", c.n);
  detail::read_optional(j, "d", c.d);
  detail::read_optional(j, "i_bits", c.i_bits);
  detail::read_optional(j, "f_bits", c.f_bits);
  if (j.contains("m") && !j.at("m").is_null()) c.m = detail::read_field<std::size_t>(j, "m");
  detail::read_optional(j, "m_fraction", c.m_fraction);
  detail::read_optional(j, "t_percent", c.t_percent);
  detail::read_optional(j, "heuristic", c.heuristic);
  if (j.contains("lut_split") && !j.at("lut_split").is_null()) {
    const auto split = detail::read_field<std::vector<int>>(j, "lut_split");
    if (split.size() != 2) throw InputError("config: lut_split must be [hi_bits, lo_bits]");
    c.lut_split = LutSplit{split[0], split[1]};
  }
  detail::read_optional(j, "alpha", c.alpha);
  detail::read_optional(j, "seed", c.seed);
  detail::read_optional(j, "queries", c.queries);
  detail::read_optional(j, "top_k", c.top_k);
  detail::read_optional(j, "planted", c.planted);
  detail::read_optional(j, "threads", c.threads);
  if (j.contains("sweep")) {
    const json& s = j.at("sweep");
    detail::read_optional(s, "m_fractions", c.sweep.m_fractions);
    detail::read_optional(s, "t_percents", c.sweep.t_percents);
  }
  c.validate();
  return c;
}

// Resolved form: every default is written out, including the effective M.
// Thread count is left out so reports do not depend on it.
inline json config_to_json(const ExperimentConfig& c) {
  json j;
  j["n"] = c.n;
  j["d"] = c.d;
  j["i_bits"] = c.i_bits;
  j["f_bits"] = c.f_bits;
  j["m"] = c.m ? json(*c.m) : json(nullptr);
  j["m_fraction"] = c.m_fraction;
  j["m_resolved"] = c.resolved_m();
  j["t_percent"] = c.t_percent;
  j["heuristic"] = c.heuristic;
  j["lut_split"] = c.lut_split ? json::array({c.lut_split->hi_bits, c.lut_split->lo_bits}) : json(nullptr);
  j["alpha"] = c.alpha;
  j["seed"] = c.seed;
  j["queries"] = c.queries;
  j["top_k"] = c.top_k;
  j["planted"] = c.planted;
  j["sweep"] = {{"m_fractions", c.sweep.m_fractions}, {"t_percents", c.sweep.t_percents}};
  return j;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FileError("cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError("config '" + path + "': " + e.what());
  }
  return config_from_json(j);
}

}  // namespace a3::harness
