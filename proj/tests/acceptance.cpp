// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits nonzero if any criterion fails.
//
// Criteria 5-7 and 9 train the desk-scale sweeps from scratch (hours on one
// core). `--results DIR` scores a previous `sweep` output instead; criterion 9
// still retrains one run and compares it byte for byte with DIR.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "empathic/agent.hpp"
#include "empathic/coexistence.hpp"
#include "empathic/config.hpp"
#include "empathic/experiment.hpp"
#include "empathic/neural_net.hpp"
#include "empathic/sharing.hpp"

namespace fs = std::filesystem;
using namespace empathic;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream o;
  o << std::setprecision(precision) << v;
  return o.str();
}

// Desk-scale budget shared by criteria 5-9.
RunConfig desk_config(EnvironmentKind env) {
  RunConfig c;
  c.environment = env;
  c.grid_width = 8;
  c.grid_height = 8;
  c.episodes = 1500;
  c.max_steps_per_episode = 500;
  c.runs = 5;
  c.base_seed = 0;
  c.smoothing_window = 100;
  c.agent.gamma = 0.99;
  c.agent.epsilon_decay_steps = 50'000;
  c.agent.replay_capacity = 50'000;
  c.agent.warm_start = 1'000;
  c.agent.target_sync_steps = 2'000;
  return c;
}

// ---- criterion 1 ----------------------------------------------------------

double min_hidden_preactivation(const QNetwork& net, const Matrix& inputs) {
  double smallest = std::numeric_limits<double>::infinity();
  Matrix a = inputs;
  for (std::size_t l = 0; l + 1 < net.num_layers(); ++l) {
    Matrix z = net.weight(l) * a;
    z.colwise() += net.bias(l);
    smallest = std::min(smallest, z.cwiseAbs().minCoeff());
    a = z.cwiseMax(0.0);
  }
  return smallest;
}

Verdict gradient_correctness() {
  const auto start = std::chrono::steady_clock::now();
  Rng rng(20240607);
  double worst = 0.0;
  int instances = 0;
  while (instances < 20) {
    const int in = 2 + static_cast<int>(rng.uniform_index(24));
    const int hidden = 2 + static_cast<int>(rng.uniform_index(16));
    const int out = 1 + static_cast<int>(rng.uniform_index(5));
    const int batch = 1 + static_cast<int>(rng.uniform_index(8));
    QNetwork net = QNetwork::initialized({in, hidden, hidden, out}, rng);
    for (std::size_t l = 0; l < net.num_layers(); ++l)
      for (Eigen::Index i = 0; i < net.bias(l).size(); ++i) net.bias(l)(i) = rng.uniform(-0.1, 0.1);
    Matrix x(in, batch);
    for (Eigen::Index r = 0; r < x.rows(); ++r)
      for (Eigen::Index c = 0; c < x.cols(); ++c) x(r, c) = rng.uniform(-1.0, 1.0);
    std::vector<int> actions;
    std::vector<double> targets;
    for (int j = 0; j < batch; ++j) {
      actions.push_back(static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(out))));
      targets.push_back(rng.uniform(-2.0, 2.0));
    }
    // central differences straddling a ReLU kink measure the kink, not the gradient
    if (min_hidden_preactivation(net, x) < 1e-3) continue;
    worst = std::max(worst, finite_difference_check(net, x, actions, targets, 1e-5));
    ++instances;
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {worst <= 1e-4 && seconds < 5.0,
          "20 instances, worst relative error " + fmt(worst, 3) + ", " + fmt(seconds, 3) + " s"};
}

// ---- criterion 2 ----------------------------------------------------------

Verdict target_formulas() {
  int failures = 0, checks = 0;
  auto near = [&](double got, double want) {
    ++checks;
    if (std::abs(got - want) > 1e-12 * std::max(1.0, std::abs(want))) ++failures;
  };
  near(self_target(1.0, 5.0, true, 0.9), 1.0);
  near(self_target(1.0, 2.0, false, 0.9), 2.8);
  near(self_target(0.4, 9.0, false, 0.0), 0.4);
  const double y = self_target(1.0, 2.0, false, 0.9);
  near(empathic_target(y, 1.0, false, 0.9, 1.0), y);
  near(empathic_target(y, 1.0, false, 0.9, 0.5), 1.85);
  near(empathic_target(y, 1.0, false, 0.9, 0.0), 0.9);
  near(empathic_target(y, 1.0, true, 0.9, 1.0), y);
  near(empathic_target(y, 1.0, true, 0.9, 0.5), 1.4);
  near(empathic_target(y, 1.0, true, 0.9, 0.0), 0.0);
  // network-backed forms against hand arithmetic on a constant-output network
  QNetwork net({kFieldSize, 3, kNumActions});
  const std::size_t n = net.parameter_count();
  const double outs[] = {0.5, 2.0, -1.0, 1.0, 0.0};
  for (int a = 0; a < kNumActions; ++a) net.set_parameter(n - kNumActions + static_cast<std::size_t>(a), outs[a]);
  const PerceptiveField s{};
  near(self_target(1.0, s, false, net, 0.9), 2.8);
  near(empathic_target(2.8, s, false, net, 0.9, 0.5), 0.5 * 2.8 + 0.5 * 0.9 * 2.0);
  return {failures == 0, std::to_string(checks - failures) + "/" + std::to_string(checks) + " target checks exact"};
}

// ---- criterion 3 ----------------------------------------------------------

Verdict collision_oracle() {
  const GridSpec grid(4, 4);
  const CoexistenceEnv env(grid, 500);
  long cases = 0, disagreements = 0;
  for (int i = 0; i < grid.cells(); ++i)
    for (int j = 0; j < grid.cells(); ++j) {
      if (i == j) continue;
      const CoexistenceState s{grid.at(i), grid.at(j), 0, true, false};
      for (Action ra : kAllActions)
        for (Action ca : kAllActions) {
          ++cases;
          const Position r0 = s.robot, c0 = *s.cat;
          const Position r1 = apply_move(grid, r0, ra), c1 = apply_move(grid, c0, ca);
          // straight-line motion over t in (0, 1]; unit moves meet only at t = 1/2 or 1
          bool meet = false;
          for (double t : {0.5, 1.0}) {
            const double dr = (r0.row - c0.row) + t * ((r1.row - r0.row) - (c1.row - c0.row));
            const double dc = (r0.col - c0.col) + t * ((r1.col - r0.col) - (c1.col - c0.col));
            meet = meet || (dr == 0.0 && dc == 0.0);
          }
          const bool robot_harms = r0.row < c0.row || (r0.row == c0.row && r0.col > c0.col);
          const auto [next, out] = env.step_with(s, ra, ca);
          const bool ok = out.cat_harmed_this_step == (meet && robot_harms) &&
                          out.robot_harmed_this_step == (meet && !robot_harms) &&
                          out.terminal == (meet && !robot_harms) && next.cat.has_value() == !(meet && robot_harms);
          if (!ok) ++disagreements;
        }
    }
  return {disagreements == 0,
          std::to_string(cases) + " position/action cases, " + std::to_string(disagreements) + " disagreements"};
}

// ---- criterion 4 ----------------------------------------------------------

Verdict equality_and_schedule() {
  int failures = 0;
  auto exact = [&](double got, double want) { failures += got != want; };
  exact(diminishing_reward(0), 1.0);
  exact(diminishing_reward(1), 0.9);
  exact(diminishing_reward(2), 0.8);
  exact(diminishing_reward(12), 0.0);
  exact(equality(4.0, 4.0), 1.0);
  exact(equality(1.0, 0.0), 0.0);
  exact(equality(3.0, 1.0), 0.5);
  exact(equality(0.0, 0.0), 1.0);

  int best_group = -1, best_split = -1;
  double best_eq = -1.0;
  int best_eq_split = -1;
  bool maximisers_even = true;
  for (int r = 0; r <= 9; ++r) {
    int tenths = 0;  // group return in tenths, exact
    for (int k = 0; k < r; ++k) tenths += 10 - k;
    for (int k = 0; k < 9 - r; ++k) tenths += 10 - k;
    const double eq = equality(diminishing_return_sum(r), diminishing_return_sum(9 - r));
    if (tenths > best_group) best_group = tenths, best_split = r;
    if (eq > best_eq) best_eq = eq, best_eq_split = r;
  }
  for (int r = 0; r <= 9; ++r) {
    int tenths = 0;
    for (int k = 0; k < r; ++k) tenths += 10 - k;
    for (int k = 0; k < 9 - r; ++k) tenths += 10 - k;
    if (tenths == best_group && r != 4 && r != 5) maximisers_even = false;
  }
  const bool ok = failures == 0 && maximisers_even && (best_split == 4 || best_split == 5) &&
                  (best_eq_split == 4 || best_eq_split == 5);
  return {ok, "examples exact, group return maximised by the 5/4 split (" + fmt(best_group / 10.0) +
                  "), which also maximises equality (" + fmt(best_eq) + ")"};
}

// ---- criteria 5-7 ---------------------------------------------------------

// Mean of `metric` over the final `tail` episodes of every run CSV in `dir`.
double final_mean(const fs::path& dir, const std::string& metric, int runs, std::size_t tail) {
  double sum = 0.0;
  std::size_t n = 0;
  for (int run = 0; run < runs; ++run) {
    const auto values = csv::read(run_file_name(dir, run)).numbers(metric);
    if (values.size() < tail) throw std::runtime_error(dir.string() + ": fewer episodes than the scoring tail");
    for (std::size_t i = values.size() - tail; i < values.size(); ++i) {
      if (!values[i]) throw std::runtime_error(dir.string() + ": empty " + metric + " cell");
      sum += *values[i];
      ++n;
    }
  }
  return sum / static_cast<double>(n);
}

fs::path cell_dir(const fs::path& root, double beta, BaselineMode mode) {
  return root / SweepCell{beta, mode}.directory_name();
}

EpisodeCallback progress(const std::string& tag) {
  return [tag](int run, int ep, const EpisodeMetrics&) {
    if ((ep + 1) % 500 == 0) std::cerr << "  [" << tag << "] run " << run << " episode " << ep + 1 << '\n';
  };
}

// ---- criterion 8 ----------------------------------------------------------

Verdict selfish_recovers_dqn() {
  RunConfig c = desk_config(EnvironmentKind::Coexistence);
  c.agent.beta = 1.0;
  AgentRuntime agent(c.agent, 0);
  long batches = 0, mismatches = 0;
  agent.set_target_probe([&](std::span<const double> y, std::span<const double> y_emp) {
    ++batches;
    for (std::size_t j = 0; j < y.size(); ++j)
      if (y[j] != y_emp[j]) ++mismatches;
  });
  const CoexistenceEnv env(c.grid(), c.max_steps_per_episode);
  Rng env_rng = Rng::stream(0, 2);
  for (int e = 0; e < 50; ++e) train_episode(agent, env, env_rng);
  return {batches > 0 && mismatches == 0,
          std::to_string(batches) + " batches, " + std::to_string(mismatches) + " differing targets"};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria for the empathic DQN build"};
  std::string out_text = "acceptance_out";
  std::string results_text;
  app.add_option("--out", out_text, "Directory for training output")->capture_default_str();
  app.add_option("--results", results_text, "Score an existing sweep directory (with coexistence/ and sharing/)")
      ->check(CLI::ExistingDirectory);
  CLI11_PARSE(app, argc, argv);

  const fs::path out = out_text;
  const bool reuse = !results_text.empty();
  const fs::path root = reuse ? fs::path(results_text) : out;
  const fs::path coex_root = root / "coexistence";
  const fs::path share_root = root / "sharing";
  const std::size_t tail = 200;

  std::vector<std::pair<std::string, std::function<Verdict()>>> criteria;
  criteria.emplace_back("gradient correctness", gradient_correctness);
  criteria.emplace_back("target formulas", target_formulas);
  criteria.emplace_back("collision oracle", collision_oracle);
  criteria.emplace_back("equality metric and diminishing schedule", equality_and_schedule);

  const RunConfig coex = desk_config(EnvironmentKind::Coexistence);
  const RunConfig share = desk_config(EnvironmentKind::Sharing);
  bool coex_ready = reuse, share_ready = reuse;
  auto ensure_coex = [&] {
    if (coex_ready) return;
    std::cerr << "training coexistence sweep into " << coex_root << '\n';
    sweep(coex, {1.0, 0.5, 0.25}, {BaselineMode::None, BaselineMode::HarmPenalty}, coex_root, progress("coexistence"));
    coex_ready = true;
  };
  auto ensure_share = [&] {
    if (share_ready) return;
    std::cerr << "training sharing sweep into " << share_root << '\n';
    sweep(share, {1.0, 0.5, 0.25}, {BaselineMode::None}, share_root, progress("sharing"));
    share_ready = true;
  };

  criteria.emplace_back("coexistence harms ordered by selfishness", [&]() -> Verdict {
    ensure_coex();
    const double h1 = final_mean(cell_dir(coex_root, 1.0, BaselineMode::None), "cat_harms", coex.runs, tail);
    const double h5 = final_mean(cell_dir(coex_root, 0.5, BaselineMode::None), "cat_harms", coex.runs, tail);
    const double h25 = final_mean(cell_dir(coex_root, 0.25, BaselineMode::None), "cat_harms", coex.runs, tail);
    return {h1 > h5 && h5 > h25 && h1 >= 2.0 * h25,
            "final-200 harms/episode beta=1: " + fmt(h1) + ", beta=0.5: " + fmt(h5) + ", beta=0.25: " + fmt(h25) +
                " (need strict order and beta=1 >= 2x beta=0.25)"};
  });
  criteria.emplace_back("harm penalty baseline", [&]() -> Verdict {
    ensure_coex();
    const double h1 = final_mean(cell_dir(coex_root, 1.0, BaselineMode::None), "cat_harms", coex.runs, tail);
    const double hp = final_mean(cell_dir(coex_root, 1.0, BaselineMode::HarmPenalty), "cat_harms", coex.runs, tail);
    return {2.0 * hp <= h1, "final-200 harms/episode penalty: " + fmt(hp) + ", plain DQN: " + fmt(h1) +
                                " (need penalty <= half)"};
  });
  criteria.emplace_back("sharing batteries and equality", [&]() -> Verdict {
    ensure_share();
    double bat[3], eq[3];
    const double betas[3] = {0.25, 0.5, 1.0};
    for (int i = 0; i < 3; ++i) {
      const auto dir = cell_dir(share_root, betas[i], BaselineMode::None);
      bat[i] = final_mean(dir, "batteries_robot", share.runs, tail);
      eq[i] = final_mean(dir, "equality_final", share.runs, tail);
    }
    const bool ok = bat[0] <= bat[1] && bat[1] <= bat[2] && eq[1] > eq[0] && eq[1] > eq[2];
    return {ok, "final-200 robot batteries beta=0.25/0.5/1: " + fmt(bat[0]) + "/" + fmt(bat[1]) + "/" + fmt(bat[2]) +
                    ", equality: " + fmt(eq[0]) + "/" + fmt(eq[1]) + "/" + fmt(eq[2])};
  });
  criteria.emplace_back("beta = 1 recovers standard DQN", selfish_recovers_dqn);
  criteria.emplace_back("byte-identical reruns", [&]() -> Verdict {
    ensure_coex();
    RunConfig cell = coex;
    cell.agent.beta = 0.25;
    const fs::path recorded = run_file_name(cell_dir(coex_root, 0.25, BaselineMode::None), 0);
    if (!fs::exists(recorded)) return {false, "no recorded run at " + recorded.string()};
    const fs::path rerun = out / "rerun" / "run_0.csv";
    fs::create_directories(rerun.parent_path());
    std::cerr << "re-running beta=0.25 run 0 for the determinism check\n";
    write_metrics_csv(rerun, run_single(cell, 0));
    const bool same = slurp(recorded) == slurp(rerun);
    return {same, "beta=0.25 run 0 rerun vs " + recorded.string() + (same ? ": identical" : ": differs")};
  });

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    failed += !v.pass;
    std::cout << (v.pass ? "PASS" : "FAIL") << "  criterion " << i + 1 << ": " << criteria[i].first << " -- "
              << v.detail << std::endl;
  }
  std::cout << criteria.size() - static_cast<std::size_t>(failed) << "/" << criteria.size() << " criteria passed"
            << std::endl;
  return failed == 0 ? 0 : 1;
}
