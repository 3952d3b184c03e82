#pragma once

#include <atomic>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "empathic/agent.hpp"
#include "empathic/coexistence.hpp"
#include "empathic/config.hpp"
#include "empathic/csv.hpp"
#include "empathic/plot.hpp"
#include "empathic/sharing.hpp"

namespace empathic {

/// Per-run CSV columns, in file order. Stable across versions.
inline const std::vector<std::string>& metrics_columns() {
  static const std::vector<std::string> cols = {
      "run_index",       "episode",        "steps_survived", "cat_harms",   "robot_harmed",
      "batteries_robot", "batteries_human", "return_robot",  "return_human", "equality_final",
      "epsilon",         "mean_loss_self", "mean_loss_emp"};
  return cols;
}

/// One CSV row. Environment-inapplicable fields are empty.
struct MetricsRow {
  int run_index = 0;
  int episode = 0;
  int steps_survived = 0;
  std::optional<int> cat_harms;
  std::optional<int> robot_harmed;
  std::optional<int> batteries_robot;
  std::optional<int> batteries_human;
  double return_robot = 0.0;
  std::optional<double> return_human;
  std::optional<double> equality_final;
  double epsilon = 0.0;
  std::optional<double> mean_loss_self;
  std::optional<double> mean_loss_emp;

  static MetricsRow from(int run_index, int episode, const EpisodeMetrics& m) {
    MetricsRow r;
    r.run_index = run_index;
    r.episode = episode;
    // a harmed robot earns nothing on its last step, so this is the operative step count
    r.steps_survived = m.steps - m.robot_harmed.value_or(0);
    r.cat_harms = m.cat_harms;
    r.robot_harmed = m.robot_harmed;
    r.batteries_robot = m.batteries_robot;
    r.batteries_human = m.batteries_human;
    r.return_robot = m.env_return;
    r.return_human = m.return_human;
    r.equality_final = m.equality_final;
    r.epsilon = m.epsilon;
    r.mean_loss_self = m.mean_loss_self;
    r.mean_loss_emp = m.mean_loss_emp;
    return r;
  }

  std::vector<std::string> cells() const {
    using csv::format_double;
    using csv::format_optional;
    return {std::to_string(run_index),      std::to_string(episode),        std::to_string(steps_survived),
            format_optional(cat_harms),     format_optional(robot_harmed),  format_optional(batteries_robot),
            format_optional(batteries_human), format_double(return_robot),  format_optional(return_human),
            format_optional(equality_final), format_double(epsilon),        format_optional(mean_loss_self),
            format_optional(mean_loss_emp)};
  }
};

/// Observer hook for long runs: (run index, episode index, metrics).
using EpisodeCallback = std::function<void(int, int, const EpisodeMetrics&)>;

/// Trains one agent for config.episodes episodes with seed base_seed + run.
/// Sequential and deterministic given (config, run).
inline std::vector<MetricsRow> run_single(const RunConfig& config, int run, const EpisodeCallback& on_episode = {}) {
  config.validate();
  const std::uint64_t seed = config.seed_for_run(run);
  AgentRuntime agent(config.agent, seed);
  Rng env_rng = Rng::stream(seed, 2);
  std::vector<MetricsRow> rows;
  rows.reserve(static_cast<std::size_t>(config.episodes));
  auto loop = [&](const auto& env) {
    for (int ep = 0; ep < config.episodes; ++ep) {
      const EpisodeMetrics m = train_episode(agent, env, env_rng);
      if (on_episode) on_episode(run, ep, m);
      rows.push_back(MetricsRow::from(run, ep, m));
    }
  };
  if (config.environment == EnvironmentKind::Coexistence) {
    loop(CoexistenceEnv(config.grid(), config.max_steps_per_episode));
  } else {
    loop(SharingEnv(config.grid(), config.max_steps_per_episode,
                    SharingOptions{config.battery_count, config.agent_encoding_offset}));
  }
  return rows;
}

inline void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows) {
  csv::Table t;
  t.header = metrics_columns();
  for (const auto& r : rows) t.rows.push_back(r.cells());
  csv::write(path, t);
}

/// Per-episode means across runs plus their trailing means, computed from
/// per-run CSV files only. Columns: episode, runs, then <metric>_mean and
/// <metric>_smoothed for every metric column.
inline csv::Table aggregate_runs(const std::vector<std::filesystem::path>& run_files, std::size_t window) {
  std::vector<csv::Table> tables;
  for (const auto& f : run_files) tables.push_back(csv::read(f));
  csv::Table out;
  out.header = {"episode", "runs"};
  std::vector<std::string> metrics;
  for (const auto& c : metrics_columns())
    if (c != "run_index" && c != "episode") metrics.push_back(c);
  for (const auto& m : metrics) {
    out.header.push_back(m + "_mean");
    out.header.push_back(m + "_smoothed");
  }
  if (tables.empty()) return out;

  std::size_t episodes = tables.front().rows.size();
  for (const auto& t : tables) episodes = std::min(episodes, t.rows.size());

  std::vector<std::vector<std::optional<double>>> means(metrics.size());
  for (std::size_t m = 0; m < metrics.size(); ++m) {
    std::vector<std::vector<std::optional<double>>> columns;
    for (const auto& t : tables) columns.push_back(t.numbers(metrics[m]));
    means[m].resize(episodes);
    for (std::size_t e = 0; e < episodes; ++e) {
      double sum = 0.0;
      int n = 0;
      for (const auto& col : columns) {
        if (!col[e]) continue;
        sum += *col[e];
        ++n;
      }
      if (n > 0) means[m][e] = sum / n;
    }
  }
  std::vector<std::vector<std::optional<double>>> smoothed;
  for (const auto& series : means) smoothed.push_back(trailing_mean(series, window));

  const auto first_episodes = tables.front().strings("episode");
  for (std::size_t e = 0; e < episodes; ++e) {
    std::vector<std::string> row = {first_episodes[e], std::to_string(tables.size())};
    for (std::size_t m = 0; m < metrics.size(); ++m) {
      row.push_back(csv::format_optional(means[m][e]));
      row.push_back(csv::format_optional(smoothed[m][e]));
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

struct RunFailure {
  int run = 0;
  std::uint64_t seed = 0;
  std::string message;
};

struct ExperimentResult {
  std::vector<std::filesystem::path> run_files;  // successful runs, in run order
  std::filesystem::path aggregate_file;
  std::vector<RunFailure> failures;
};

inline std::filesystem::path run_file_name(const std::filesystem::path& dir, int run) {
  return dir / ("run_" + std::to_string(run) + ".csv");
}

/// Executes config.runs independent runs (up to config.jobs at a time), writes
/// run_<i>.csv for each and aggregate.csv across them. A failing run is
/// reported with its seed in failures.txt; the others are unaffected.
inline ExperimentResult run_experiment(const RunConfig& config, const std::filesystem::path& out_dir,
                                       const EpisodeCallback& on_episode = {}) {
  config.validate();
  std::filesystem::create_directories(out_dir);
  save_config(config, out_dir / "config.json");

  std::vector<std::optional<std::string>> errors(static_cast<std::size_t>(config.runs));
  std::atomic<int> next{0};
  std::mutex callback_mutex;
  EpisodeCallback guarded;
  if (on_episode)
    guarded = [&](int r, int e, const EpisodeMetrics& m) {
      std::lock_guard lock(callback_mutex);
      on_episode(r, e, m);
    };
  auto worker = [&] {
    for (int run = next++; run < config.runs; run = next++) {
      try {
        write_metrics_csv(run_file_name(out_dir, run), run_single(config, run, guarded));
      } catch (const std::exception& e) {
        errors[static_cast<std::size_t>(run)] = e.what();
        std::filesystem::remove(run_file_name(out_dir, run));
      }
    }
  };
  const int jobs = std::min(config.jobs, config.runs);
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }

  ExperimentResult result;
  for (int run = 0; run < config.runs; ++run) {
    if (errors[static_cast<std::size_t>(run)])
      result.failures.push_back({run, config.seed_for_run(run), *errors[static_cast<std::size_t>(run)]});
    else
      result.run_files.push_back(run_file_name(out_dir, run));
  }
  const auto failures_path = out_dir / "failures.txt";
  std::filesystem::remove(failures_path);
  if (!result.failures.empty()) {
    std::ofstream f(failures_path);
    for (const auto& fail : result.failures)
      f << "run " << fail.run << " seed " << fail.seed << ": " << fail.message << '\n';
  }
  result.aggregate_file = out_dir / "aggregate.csv";
  csv::write(result.aggregate_file, aggregate_runs(result.run_files, static_cast<std::size_t>(config.smoothing_window)));
  return result;
}

/// One (beta, baseline) combination of a sweep.
struct SweepCell {
  double beta = 1.0;
  BaselineMode baseline = BaselineMode::None;

  std::string beta_text() const { return csv::format_double(beta); }
  std::string directory_name() const { return "beta_" + beta_text() + "_" + std::string(to_string(baseline)); }
};

/// Baseline "none" pairs with every beta; the shaped-reward baselines are
/// plain DQN comparators and run once each at beta = 1.
inline std::vector<SweepCell> sweep_cells(const std::vector<double>& betas, const std::vector<BaselineMode>& baselines) {
  if (betas.empty() || baselines.empty()) throw std::invalid_argument("sweep: betas and baselines must be nonempty");
  std::vector<SweepCell> cells;
  std::set<BaselineMode> seen;
  for (BaselineMode b : baselines) {
    if (!seen.insert(b).second) continue;
    if (b == BaselineMode::None)
      for (double beta : betas) cells.push_back({beta, b});
    else
      cells.push_back({1.0, b});
  }
  return cells;
}

inline std::vector<std::string> default_plot_metrics(EnvironmentKind env) {
  if (env == EnvironmentKind::Coexistence) return {"steps_survived", "cat_harms"};
  return {"batteries_robot", "batteries_human", "equality_final"};
}

struct SweepResult {
  std::vector<SweepCell> cells;
  std::vector<ExperimentResult> experiments;
  std::filesystem::path comparison_file;
  std::vector<std::filesystem::path> charts;
};

/// run_experiment for every cell under out_dir/<cell>/, then a long-format
/// comparison.csv (beta, baseline, run, episode, metrics...) and one SVG
/// chart per metric under out_dir/plots/.
inline SweepResult sweep(const RunConfig& base, const std::vector<double>& betas,
                         const std::vector<BaselineMode>& baselines, const std::filesystem::path& out_dir,
                         const EpisodeCallback& on_episode = {}) {
  SweepResult result;
  result.cells = sweep_cells(betas, baselines);
  std::filesystem::create_directories(out_dir);

  csv::Table comparison;
  comparison.header = {"beta", "baseline", "run"};
  for (const auto& c : metrics_columns())
    if (c != "run_index") comparison.header.push_back(c);

  for (const auto& cell : result.cells) {
    RunConfig config = base;
    config.agent.beta = cell.beta;
    config.agent.baseline_mode = cell.baseline;
    auto exp = run_experiment(config, out_dir / cell.directory_name(), on_episode);
    for (const auto& file : exp.run_files) {
      const csv::Table t = csv::read(file);
      for (const auto& row : t.rows) {
        std::vector<std::string> out = {cell.beta_text(), std::string(to_string(cell.baseline)), row.at(0)};
        out.insert(out.end(), row.begin() + 1, row.end());
        comparison.rows.push_back(std::move(out));
      }
    }
    result.experiments.push_back(std::move(exp));
  }
  result.comparison_file = out_dir / "comparison.csv";
  csv::write(result.comparison_file, comparison);

  std::filesystem::create_directories(out_dir / "plots");
  for (const auto& metric : default_plot_metrics(base.environment)) {
    const auto path = out_dir / "plots" / (metric + ".svg");
    plot(result.comparison_file, metric, path, static_cast<std::size_t>(base.smoothing_window));
    result.charts.push_back(path);
  }
  return result;
}

}  // namespace empathic
