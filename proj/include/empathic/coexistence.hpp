#pragma once

#include <optional>
#include <stdexcept>
#include <utility>

#include "empathic/gridworld.hpp"
#include "empathic/random.hpp"

namespace empathic {

/// Robot (the learner) and a randomly walking cat. Either can harm the other
/// in a collision; a harmed robot ends the episode, a harmed cat leaves.
struct CoexistenceState {
  Position robot;
  std::optional<Position> cat;
  int step = 0;
  bool robot_operative = true;
  bool terminal = false;

  bool has_counterpart() const { return cat.has_value(); }
  Position counterpart_position() const { return cat.value(); }
  CoexistenceState with_agents_swapped() const {
    CoexistenceState s = *this;
    s.robot = cat.value();
    s.cat = robot;
    return s;
  }

  friend bool operator==(const CoexistenceState&, const CoexistenceState&) = default;
};

struct StepOutcome {
  double reward = 0.0;
  bool terminal = false;
  bool cat_harmed_this_step = false;
  bool robot_harmed_this_step = false;
};

enum class Harmed { First, Second };

/// Which of two colliding agents gets harmed, judged on their positions before
/// the move: the one above (smaller row) harms the other; on equal rows the
/// one to the right (larger column) does. Rows dominate for diagonal priors.
inline Harmed harm_winner(Position prior_first, Position prior_second) {
  if (prior_first == prior_second) throw std::invalid_argument("harm_winner: agents share a cell");
  bool first_harms;
  if (prior_first.row != prior_second.row)
    first_harms = prior_first.row < prior_second.row;
  else
    first_harms = prior_first.col > prior_second.col;
  return first_harms ? Harmed::Second : Harmed::First;
}

/// Simultaneous moves collide when both end on the same cell or the agents
/// trade cells. Landing on an unmoved agent is the same-cell case.
inline bool collides(Position prior_a, Position next_a, Position prior_b, Position next_b) {
  return next_a == next_b || (next_a == prior_b && next_b == prior_a);
}

class CoexistenceEnv {
 public:
  using State = CoexistenceState;
  using Outcome = StepOutcome;

  explicit CoexistenceEnv(GridSpec grid = {}, int max_steps = 500) : grid_(grid), max_steps_(max_steps) {
    if (max_steps < 1) throw std::invalid_argument("CoexistenceEnv: max_steps must be positive");
    if (grid.cells() < 2) throw std::invalid_argument("CoexistenceEnv: grid needs at least two cells");
  }

  const GridSpec& grid() const { return grid_; }
  int max_steps() const { return max_steps_; }

  State reset(Rng& rng) const {
    const auto [robot, cat] = place_two(grid_, rng);
    return State{robot, cat, 0, true, false};
  }

  /// The cat (if present) takes a random-walk action.
  std::pair<State, Outcome> step(const State& state, Action robot_action, Rng& rng) const {
    if (state.terminal) throw std::logic_error("CoexistenceEnv::step on a terminal state");
    const Action cat_action = state.cat ? random_walk(rng) : Action::NoOp;
    return step_with(state, robot_action, cat_action);
  }

  /// Simultaneous move with a given cat action, then collision resolution.
  std::pair<State, Outcome> step_with(const State& state, Action robot_action, Action cat_action) const {
    if (state.terminal) throw std::logic_error("CoexistenceEnv::step on a terminal state");
    State next = state;
    Outcome out;

    next.robot = apply_move(grid_, state.robot, robot_action);
    if (state.cat) {
      const Position cat_prior = *state.cat;
      const Position cat_next = apply_move(grid_, cat_prior, cat_action);
      next.cat = cat_next;
      if (collides(state.robot, next.robot, cat_prior, cat_next)) {
        if (harm_winner(state.robot, cat_prior) == Harmed::Second) {
          out.cat_harmed_this_step = true;
          next.cat.reset();
        } else {
          out.robot_harmed_this_step = true;
          next.robot_operative = false;
        }
      }
    }

    next.step = state.step + 1;
    out.reward = next.robot_operative ? 1.0 : 0.0;
    out.terminal = !next.robot_operative || next.step >= max_steps_;
    next.terminal = out.terminal;
    return {next, out};
  }

  /// Robot 1, cat -1, floor 0, centred on the robot.
  PerceptiveField observe(const State& state) const {
    return encode_field(grid_, [&](Position p) { return cell_value(state, p); }, state.robot);
  }

  /// The robot's view after trading places with the cat; the robot's own view
  /// when the cat is gone.
  PerceptiveField observe_empathic(const State& state) const {
    const auto imagined = swap_perspective(state);
    if (!imagined) return observe(state);
    return encode_field(grid_, [&](Position p) { return cell_value(imagined->world, p); }, imagined->center);
  }

 private:
  static double cell_value(const State& s, Position p) {
    if (p == s.robot) return 1.0;
    if (s.cat && p == *s.cat) return -1.0;
    return 0.0;
  }

  GridSpec grid_;
  int max_steps_;
};

}  // namespace empathic
