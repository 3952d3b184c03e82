// Command-line front end: train one cell, sweep a beta x baseline grid, or
// chart a metrics CSV.

#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "empathic/config.hpp"
#include "empathic/experiment.hpp"
#include "empathic/plot.hpp"

namespace {

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> items;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ','))
    if (!item.empty()) items.push_back(item);
  return items;
}

empathic::RunConfig resolve_config(const std::string& path, const std::optional<std::int64_t>& seed,
                                   const std::string& out) {
  empathic::RunConfig config = path.empty() ? empathic::RunConfig{} : empathic::load_config(path);
  if (seed) config.base_seed = *seed;
  if (!out.empty()) config.output_dir = out;
  config.validate();
  return config;
}

empathic::EpisodeCallback progress(int episodes, bool quiet) {
  if (quiet) return {};
  return [episodes](int run, int ep, const empathic::EpisodeMetrics& m) {
    if ((ep + 1) % 100 != 0 && ep + 1 != episodes) return;
    std::cerr << "run " << run << " episode " << ep + 1 << "/" << episodes << " steps " << m.steps
              << " epsilon " << m.epsilon << '\n';
  };
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Empathic DQN gridworld experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::int64_t> seed;
  std::string out;
  bool quiet = false;

  auto* train = app.add_subcommand("train", "Train one (beta, baseline) cell for every configured run");
  train->add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
  train->add_option("--seed", seed, "Override base_seed");
  train->add_option("--out", out, "Override output_dir");
  train->add_flag("--quiet", quiet, "No progress output");

  std::string betas_text = "1.0,0.5,0.25";
  std::string baselines_text = "none";
  auto* sweep = app.add_subcommand("sweep", "Run every (beta, baseline) cell and chart the comparison");
  sweep->add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
  sweep->add_option("--seed", seed, "Override base_seed");
  sweep->add_option("--out", out, "Override output_dir");
  sweep->add_option("--betas", betas_text, "Comma-separated selfishness values")->capture_default_str();
  sweep->add_option("--baselines", baselines_text, "Comma-separated: none, harm_penalty, equality_modulated")
      ->capture_default_str();
  sweep->add_flag("--quiet", quiet, "No progress output");

  std::string csv_path;
  std::string metric;
  std::string svg_path;
  std::size_t window = 100;
  auto* plot = app.add_subcommand("plot", "Render a smoothed metric from a metrics CSV as SVG");
  plot->add_option("--csv", csv_path, "Per-run, aggregate or comparison CSV")->required()->check(CLI::ExistingFile);
  plot->add_option("--metric", metric, "Metric column")->required();
  plot->add_option("--out", svg_path, "Output SVG path")->required();
  plot->add_option("--window", window, "Trailing-mean window")->capture_default_str()->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      const auto config = resolve_config(config_path, seed, out);
      const auto result = empathic::run_experiment(config, config.output_dir, progress(config.episodes, quiet));
      std::cout << "wrote " << result.run_files.size() << " run file(s) and " << result.aggregate_file.string()
                << '\n';
      for (const auto& f : result.failures)
        std::cerr << "run " << f.run << " (seed " << f.seed << ") failed: " << f.message << '\n';
      return result.failures.empty() ? EXIT_SUCCESS : EXIT_FAILURE;
    }
    if (*sweep) {
      const auto config = resolve_config(config_path, seed, out);
      std::vector<double> betas;
      for (const auto& b : split_list(betas_text)) betas.push_back(std::stod(b));
      std::vector<empathic::BaselineMode> baselines;
      for (const auto& b : split_list(baselines_text)) baselines.push_back(empathic::parse_baseline_mode(b));
      const auto result =
          empathic::sweep(config, betas, baselines, config.output_dir, progress(config.episodes, quiet));
      std::cout << "wrote " << result.comparison_file.string() << " and " << result.charts.size() << " chart(s)\n";
      bool ok = true;
      for (const auto& e : result.experiments)
        for (const auto& f : e.failures) {
          ok = false;
          std::cerr << "run " << f.run << " (seed " << f.seed << ") failed: " << f.message << '\n';
        }
      return ok ? EXIT_SUCCESS : EXIT_FAILURE;
    }
    if (*plot) {
      empathic::plot(csv_path, metric, svg_path, window);
      std::cout << "wrote " << svg_path << '\n';
      return EXIT_SUCCESS;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return EXIT_FAILURE;
  }
  return EXIT_SUCCESS;
}
