#pragma once

#include <algorithm>
#include <stdexcept>
#include <utility>
#include <vector>

#include "empathic/gridworld.hpp"
#include "empathic/random.hpp"

namespace empathic {

/// Reward for the next battery an agent collects after `count_before` others:
/// 1.0, 0.9, 0.8, ... clamped at zero. Computed as a single division so the
/// schedule values are the correctly rounded decimals.
inline double diminishing_reward(int count_before) {
  return static_cast<double>(std::max(10 - count_before, 0)) / 10.0;
}

/// Sum of the first `count` schedule values, accumulated in collection order.
inline double diminishing_return_sum(int count) {
  double sum = 0.0;
  for (int k = 0; k < count; ++k) sum += diminishing_reward(k);
  return sum;
}

/// 2 * min(a, b) / (a + b); 1 when nothing has been collected yet.
inline double equality(double robot_sum, double human_sum) {
  if (robot_sum < 0.0 || human_sum < 0.0) throw std::invalid_argument("equality: negative return sum");
  const double total = robot_sum + human_sum;
  if (total == 0.0) return 1.0;
  return 2.0 * std::min(robot_sum, human_sum) / total;
}

struct SharingState {
  Position robot;
  Position human;
  int robot_count = 0;
  int human_count = 0;
  std::vector<Position> batteries;
  double robot_return_sum = 0.0;
  double human_return_sum = 0.0;
  int step = 0;
  bool terminal = false;

  bool has_battery(Position p) const { return std::find(batteries.begin(), batteries.end(), p) != batteries.end(); }

  bool has_counterpart() const { return true; }
  Position counterpart_position() const { return human; }
  /// Trades positions and collected counts (and the matching return sums).
  SharingState with_agents_swapped() const {
    SharingState s = *this;
    std::swap(s.robot, s.human);
    std::swap(s.robot_count, s.human_count);
    std::swap(s.robot_return_sum, s.human_return_sum);
    return s;
  }

  friend bool operator==(const SharingState&, const SharingState&) = default;
};

struct SharingOutcome {
  double robot_reward = 0.0;
  double human_reward = 0.0;
  bool terminal = false;
};

struct SharingOptions {
  int battery_count = 9;
  /// Added to agent cell values so an agent with zero batteries is not
  /// indistinguishable from floor. Zero reproduces the plain count encoding.
  double agent_encoding_offset = 0.0;
};

class SharingEnv {
 public:
  using State = SharingState;
  using Outcome = SharingOutcome;

  explicit SharingEnv(GridSpec grid = {}, int max_steps = 500, SharingOptions options = {})
      : grid_(grid), max_steps_(max_steps), options_(options) {
    if (max_steps < 1) throw std::invalid_argument("SharingEnv: max_steps must be positive");
    if (options.battery_count < 0) throw std::invalid_argument("SharingEnv: negative battery count");
    if (grid.cells() < options.battery_count + 2)
      throw std::invalid_argument("SharingEnv: grid too small for the agents and batteries");
  }

  const GridSpec& grid() const { return grid_; }
  int max_steps() const { return max_steps_; }
  const SharingOptions& options() const { return options_; }

  /// Robot, human and batteries on distinct uniformly random cells (a partial
  /// Fisher-Yates shuffle of the cell indices).
  State reset(Rng& rng) const {
    std::vector<int> cells(static_cast<std::size_t>(grid_.cells()));
    for (int i = 0; i < grid_.cells(); ++i) cells[static_cast<std::size_t>(i)] = i;
    const int needed = options_.battery_count + 2;
    for (int i = 0; i < needed; ++i) {
      const auto remaining = static_cast<std::uint64_t>(grid_.cells() - i);
      const auto j = static_cast<std::size_t>(i) + static_cast<std::size_t>(rng.uniform_index(remaining));
      std::swap(cells[static_cast<std::size_t>(i)], cells[j]);
    }
    State s;
    s.robot = grid_.at(cells[0]);
    s.human = grid_.at(cells[1]);
    for (int i = 2; i < needed; ++i) s.batteries.push_back(grid_.at(cells[static_cast<std::size_t>(i)]));
    s.terminal = s.batteries.empty();
    return s;
  }

  /// The human takes a random-walk action; a simultaneous grab of one
  /// battery is settled by a fair coin from the same generator.
  std::pair<State, Outcome> step(const State& state, Action robot_action, Rng& rng) const {
    if (state.terminal) throw std::logic_error("SharingEnv::step on a terminal state");
    const Action human_action = random_walk(rng);
    return step_with(state, robot_action, human_action, [&] { return rng.coin(); });
  }

  /// `robot_wins_tie()` is consulted only when both agents reach the same
  /// battery on the same step.
  template <class TieBreak>
  std::pair<State, Outcome> step_with(const State& state, Action robot_action, Action human_action,
                                      TieBreak&& robot_wins_tie) const {
    if (state.terminal) throw std::logic_error("SharingEnv::step on a terminal state");
    State next = state;
    Outcome out;

    next.robot = apply_move(grid_, state.robot, robot_action);
    next.human = apply_move(grid_, state.human, human_action);

    bool robot_collects = next.has_battery(next.robot);
    bool human_collects = next.has_battery(next.human);
    if (robot_collects && human_collects && next.robot == next.human) {
      if (robot_wins_tie())
        human_collects = false;
      else
        robot_collects = false;
    }
    if (robot_collects) {
      out.robot_reward = diminishing_reward(next.robot_count);
      ++next.robot_count;
      next.robot_return_sum += out.robot_reward;
      remove_battery(next, next.robot);
    }
    if (human_collects) {
      out.human_reward = diminishing_reward(next.human_count);
      ++next.human_count;
      next.human_return_sum += out.human_reward;
      remove_battery(next, next.human);
    }

    next.step = state.step + 1;
    out.terminal = next.batteries.empty() || next.step >= max_steps_;
    next.terminal = out.terminal;
    return {next, out};
  }

  /// Floor 0, battery -1, agents carry their collected count.
  PerceptiveField observe(const State& state) const {
    return encode_field(grid_, [&](Position p) { return cell_value(state, p); }, state.robot);
  }

  PerceptiveField observe_empathic(const State& state) const {
    const auto imagined = swap_perspective(state);
    if (!imagined) return observe(state);
    return encode_field(grid_, [&](Position p) { return cell_value(imagined->world, p); }, imagined->center);
  }

 private:
  double cell_value(const State& s, Position p) const {
    // the observer wins when both agents share a cell
    if (p == s.robot) return static_cast<double>(s.robot_count) + options_.agent_encoding_offset;
    if (p == s.human) return static_cast<double>(s.human_count) + options_.agent_encoding_offset;
    if (s.has_battery(p)) return -1.0;
    return 0.0;
  }

  static void remove_battery(State& s, Position p) {
    s.batteries.erase(std::remove(s.batteries.begin(), s.batteries.end(), p), s.batteries.end());
  }

  GridSpec grid_;
  int max_steps_;
  SharingOptions options_;
};

}  // namespace empathic
