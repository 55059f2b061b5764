// a3sim: synthetic data generation, experiment runs, parameter sweeps and
// self-checks for the approximate attention pipeline.
//
// Exit codes: 0 success, 1 usage, 2 bad input (file, parse, shape, config),
// 3 internal contract violation or failed check, 4 anything else.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "a3/harness/config.hpp"
#include "a3/harness/csv.hpp"
#include "a3/harness/experiment.hpp"
#include "a3/harness/self_check.hpp"
#include "a3/harness/synthetic.hpp"

namespace fs = std::filesystem;
using namespace a3;
using namespace a3::harness;

namespace {

enum ExitCode : int { kOk = 0, kUsage = 1, kInput = 2, kContract = 3, kOther = 4 };

struct DataPaths {
  std::string key;
  std::string value;
  std::string queries;

  bool any() const { return !key.empty() || !value.empty() || !queries.empty(); }
  bool all() const { return !key.empty() && !value.empty() && !queries.empty(); }
};

ExperimentConfig resolve_config(const std::string& path, std::optional<std::uint64_t> seed) {
  ExperimentConfig cfg = path.empty() ? ExperimentConfig{} : load_config(path);
  if (seed) cfg.seed = *seed;
  cfg.validate();
  return cfg;
}

// Loads the three CSVs when given, otherwise generates data from the config.
ExperimentData resolve_data(ExperimentConfig& cfg, const DataPaths& paths) {
  if (!paths.any()) return make_experiment_data(cfg);
  if (!paths.all()) throw InputError("--key, --value and --queries must be given together");
  ExperimentData data{load_matrix(paths.key, Shape{cfg.n, cfg.d}),
                      load_matrix(paths.value, Shape{cfg.n, cfg.d}), load_matrix(paths.queries)};
  if (data.queries.cols() != cfg.d) {
    throw ShapeError(paths.queries + ": " + std::to_string(data.queries.cols()) + " columns, expected " +
                     std::to_string(cfg.d));
  }
  cfg.queries = data.queries.rows();
  return data;
}

void emit(const std::string& out, const std::string& text) {
  if (out.empty() || out == "-") {
    std::cout << text;
  } else {
    write_text(out, text);
  }
}

void add_data_options(CLI::App* cmd, DataPaths& paths) {
  cmd->add_option("--key", paths.key, "Key matrix CSV (n x d)");
  cmd->add_option("--value", paths.value, "Value matrix CSV (n x d)");
  cmd->add_option("--queries", paths.queries, "Query matrix CSV (one query per row)");
}

int cmd_gen(const std::string& config_path, std::optional<std::uint64_t> seed,
            std::optional<std::size_t> n, std::optional<std::size_t> d, std::optional<std::size_t> planted,
            std::optional<std::size_t> queries, const std::string& out_dir) {
  ExperimentConfig cfg = config_path.empty() ? ExperimentConfig{} : load_config(config_path);
  if (seed) cfg.seed = *seed;
  if (n) cfg.n = *n;
  if (d) cfg.d = *d;
  if (planted) cfg.planted = *planted;
  if (queries) cfg.queries = *queries;
  cfg.validate();
  const auto data = gen_synthetic(cfg.n, cfg.d, cfg.planted, cfg.queries, cfg.seed);
  fs::create_directories(out_dir);
  write_matrix((fs::path(out_dir) / "key.csv").string(), data.key);
  write_matrix((fs::path(out_dir) / "value.csv").string(), data.value);
  write_matrix((fs::path(out_dir) / "queries.csv").string(), data.queries);
  if (!data.planted.empty()) {
    std::string text;
    for (const auto& rows : data.planted) {
      for (std::size_t k = 0; k < rows.size(); ++k) text += (k ? "," : "") + std::to_string(rows[k]);
      text += '\n';
    }
    write_text((fs::path(out_dir) / "planted.csv").string(), text);
  }
  std::fprintf(stderr, "wrote %zux%zu key/value and %zu queries to %s\n", cfg.n, cfg.d, cfg.queries,
               out_dir.c_str());
  return kOk;
}

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed, const DataPaths& paths,
            const std::string& out) {
  ExperimentConfig cfg = resolve_config(config_path, seed);
  const ExperimentData data = resolve_data(cfg, paths);
  emit(out, report_text(run_experiment(cfg, data)));
  return kOk;
}

int cmd_sweep(const std::string& config_path, std::optional<std::uint64_t> seed, const DataPaths& paths,
              const std::string& out_dir) {
  ExperimentConfig cfg = resolve_config(config_path, seed);
  const ExperimentData data = resolve_data(cfg, paths);
  fs::create_directories(out_dir);
  json summary = json::array();
  std::size_t cell = 0;
  for (double mf : cfg.sweep.m_fractions) {
    for (double tp : cfg.sweep.t_percents) {
      ExperimentConfig c = cfg;
      c.m.reset();
      c.m_fraction = mf;
      c.t_percent = tp;
      const RunReport report = run_experiment(c, data);
      char name[32];
      std::snprintf(name, sizeof name, "cell_%03zu.json", cell++);
      write_text((fs::path(out_dir) / name).string(), report_text(report));
      summary.push_back({{"file", name},
                         {"m_fraction", mf},
                         {"m", c.resolved_m()},
                         {"t_percent", tp},
                         {"mean_candidates", report.aggregate.mean_candidates},
                         {"mean_survivors", report.aggregate.mean_survivors},
                         {"mean_recall", report.aggregate.mean_recall},
                         {"mean_approx_latency", report.aggregate.mean_approx_latency}});
    }
  }
  write_text((fs::path(out_dir) / "sweep.json").string(), summary.dump(2) + "\n");
  std::cout << summary.dump(2) << "\n";
  return kOk;
}

int cmd_check(std::uint64_t seed, std::size_t trials) {
  bool ok = true;
  for (const auto& r : run_self_check(seed, trials)) {
    std::printf("%s  %s%s%s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.passed ? "" : ": ",
                r.detail.c_str());
    ok = ok && r.passed;
  }
  return ok ? kOk : kContract;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Approximate attention simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  DataPaths paths;
  std::string out;

  auto* gen = app.add_subcommand("gen", "Write synthetic key/value/query CSVs");
  std::optional<std::size_t> n, d, planted, queries;
  gen->add_option("--config", config_path, "Experiment config (JSON)");
  gen->add_option("--seed", seed, "RNG seed");
  gen->add_option("--n", n, "Rows");
  gen->add_option("--d", d, "Dimensions");
  gen->add_option("--planted", planted, "Planted rows per query");
  gen->add_option("--num-queries", queries, "Number of queries");
  gen->add_option("--out", out, "Output directory")->required();

  auto* run = app.add_subcommand("run", "Run one experiment and write a JSON report");
  run->add_option("--config", config_path, "Experiment config (JSON)");
  run->add_option("--seed", seed, "RNG seed (overrides config)");
  add_data_options(run, paths);
  run->add_option("--out", out, "Report path (default stdout)");

  auto* sweep = app.add_subcommand("sweep", "Grid over M fractions and T values");
  sweep->add_option("--config", config_path, "Experiment config (JSON)");
  sweep->add_option("--seed", seed, "RNG seed (overrides config)");
  add_data_options(sweep, paths);
  sweep->add_option("--out", out, "Output directory")->required();

  auto* check = app.add_subcommand("check", "Run the invariant and oracle checks");
  std::uint64_t check_seed = 1;
  std::size_t trials = 200;
  check->add_option("--seed", check_seed, "RNG seed");
  check->add_option("--trials", trials, "Random trials per check");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*gen) return cmd_gen(config_path, seed, n, d, planted, queries, out);
    if (*run) return cmd_run(config_path, seed, paths, out);
    if (*sweep) return cmd_sweep(config_path, seed, paths, out);
    if (*check) return cmd_check(check_seed, trials);
  } catch (const InputError& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return kInput;
  } catch (const ContractViolation& e) {
    std::fprintf(stderr, "contract violation: %s\n", e.what());
    return kContract;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kOther;
  }
  return kUsage;
}
