#pragma once

#include <concepts>
#include <optional>
#include <utility>

#include "empathic/coexistence.hpp"
#include "empathic/gridworld.hpp"
#include "empathic/random.hpp"
#include "empathic/sharing.hpp"

namespace empathic {

/// Per-episode record produced by a training episode. Fields that do not
/// apply to an environment stay empty.
struct EpisodeMetrics {
  int steps = 0;
  double env_return = 0.0;     // unshaped learner reward
  double shaped_return = 0.0;  // what the learner was trained on
  std::optional<int> cat_harms;
  std::optional<int> robot_harmed;
  std::optional<int> batteries_robot;
  std::optional<int> batteries_human;
  std::optional<double> return_human;
  std::optional<double> equality_final;
  double epsilon = 1.0;
  std::optional<double> mean_loss_self;
  std::optional<double> mean_loss_emp;
  long gradient_steps = 0;
};

/// What the training loop needs to know about one environment step.
struct StepView {
  double reward = 0.0;
  bool terminal = false;
  bool counterpart_harmed = false;
  double equality_now = 1.0;
};

inline StepView view_step(const CoexistenceState&, const StepOutcome& out) {
  return {out.reward, out.terminal, out.cat_harmed_this_step, 1.0};
}

inline StepView view_step(const SharingState& next, const SharingOutcome& out) {
  return {out.robot_reward, out.terminal, false, equality(next.robot_return_sum, next.human_return_sum)};
}

inline void tally_step(EpisodeMetrics& m, const CoexistenceState&, const StepOutcome& out) {
  if (!m.cat_harms) m.cat_harms = 0;
  if (!m.robot_harmed) m.robot_harmed = 0;
  if (out.cat_harmed_this_step) ++*m.cat_harms;
  if (out.robot_harmed_this_step) m.robot_harmed = 1;
}

inline void tally_step(EpisodeMetrics& m, const SharingState& next, const SharingOutcome&) {
  m.batteries_robot = next.robot_count;
  m.batteries_human = next.human_count;
  m.return_human = next.human_return_sum;
  m.equality_final = equality(next.robot_return_sum, next.human_return_sum);
}

inline void tally_start(EpisodeMetrics& m, const CoexistenceState&) {
  m.cat_harms = 0;
  m.robot_harmed = 0;
}

inline void tally_start(EpisodeMetrics& m, const SharingState& s) {
  m.batteries_robot = s.robot_count;
  m.batteries_human = s.human_count;
  m.return_human = s.human_return_sum;
  m.equality_final = equality(s.robot_return_sum, s.human_return_sum);
}

/// A two-agent gridworld the training loop can drive.
template <class Env>
concept GridEnvironment = requires(const Env& env, const typename Env::State& s, Action a, Rng& rng,
                                   EpisodeMetrics& m) {
  { env.reset(rng) } -> std::same_as<typename Env::State>;
  { env.step(s, a, rng) } -> std::same_as<std::pair<typename Env::State, typename Env::Outcome>>;
  { env.observe(s) } -> std::same_as<PerceptiveField>;
  { env.observe_empathic(s) } -> std::same_as<PerceptiveField>;
  { view_step(s, std::declval<const typename Env::Outcome&>()) } -> std::same_as<StepView>;
  tally_start(m, s);
  tally_step(m, s, std::declval<const typename Env::Outcome&>());
};

}  // namespace empathic
