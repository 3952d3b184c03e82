#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "empathic/environment.hpp"
#include "empathic/gridworld.hpp"
#include "empathic/neural_net.hpp"
#include "empathic/random.hpp"
#include "empathic/replay_memory.hpp"

namespace empathic {

enum class BaselineMode { None, HarmPenalty, EqualityModulated };

inline std::string_view to_string(BaselineMode mode) {
  switch (mode) {
    case BaselineMode::None: return "none";
    case BaselineMode::HarmPenalty: return "harm_penalty";
    case BaselineMode::EqualityModulated: return "equality_modulated";
  }
  return "?";
}

inline BaselineMode parse_baseline_mode(std::string_view name) {
  if (name == "none") return BaselineMode::None;
  if (name == "harm_penalty") return BaselineMode::HarmPenalty;
  if (name == "equality_modulated") return BaselineMode::EqualityModulated;
  throw std::invalid_argument("unknown baseline mode '" + std::string(name) +
                              "' (expected none, harm_penalty or equality_modulated)");
}

/// What happens to the empathic bootstrap on the step the counterpart is
/// harmed and leaves.
enum class CounterpartLoss {
  /// The imagined (swapped) situation ended for good: bootstrap is zero, just
  /// as the learner's own value is zero once it is harmed.
  Terminal,
  /// Substitute the learner's own next state for the missing swapped state.
  OwnState,
};

inline std::string_view to_string(CounterpartLoss mode) {
  return mode == CounterpartLoss::Terminal ? "terminal" : "own_state";
}

inline CounterpartLoss parse_counterpart_loss(std::string_view name) {
  if (name == "terminal") return CounterpartLoss::Terminal;
  if (name == "own_state") return CounterpartLoss::OwnState;
  throw std::invalid_argument("unknown counterpart_loss '" + std::string(name) +
                              "' (expected terminal or own_state)");
}

struct AgentConfig {
  double beta = 1.0;  // selfishness; 1 is plain DQN
  double gamma = 0.99;
  double learning_rate = 1e-3;
  int batch_size = 32;
  std::size_t replay_capacity = 500'000;
  long target_sync_steps = 10'000;
  double epsilon_start = 1.0;
  double epsilon_end = 0.01;
  long epsilon_decay_steps = 1'000'000;
  long warm_start = 1'000;
  BaselineMode baseline_mode = BaselineMode::None;
  double harm_penalty_value = -100.0;
  std::vector<int> hidden_layers = {128, 128};
  CounterpartLoss counterpart_loss = CounterpartLoss::Terminal;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const {
    auto fail = [](const std::string& msg) { throw std::invalid_argument(msg); };
    if (!(beta >= 0.0 && beta <= 1.0)) fail("agent.beta must lie in [0, 1], got " + std::to_string(beta));
    if (!(gamma >= 0.0 && gamma < 1.0)) fail("agent.gamma must lie in [0, 1), got " + std::to_string(gamma));
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) fail("agent.learning_rate must be positive");
    if (batch_size < 1) fail("agent.batch_size must be positive");
    if (replay_capacity < 1) fail("agent.replay_capacity must be positive");
    if (target_sync_steps < 1) fail("agent.target_sync_steps must be positive");
    if (epsilon_decay_steps < 1) fail("agent.epsilon_decay_steps must be positive");
    if (warm_start < 1) fail("agent.warm_start must be positive");
    if (!(epsilon_end >= 0.0 && epsilon_start >= epsilon_end && epsilon_start <= 1.0))
      fail("agent.epsilon_start/epsilon_end must satisfy 1 >= start >= end >= 0");
    if (!std::isfinite(harm_penalty_value)) fail("agent.harm_penalty_value must be finite");
    for (int h : hidden_layers)
      if (h < 1) fail("agent.hidden_layers entries must be positive");
  }

  std::vector<int> layer_dims() const {
    std::vector<int> dims{kFieldSize};
    dims.insert(dims.end(), hidden_layers.begin(), hidden_layers.end());
    dims.push_back(kNumActions);
    return dims;
  }

  std::size_t warm_threshold() const {
    return static_cast<std::size_t>(std::max<long>(batch_size, warm_start));
  }
};

/// Linear decay from epsilon_start (step 0) to epsilon_end (decay_steps), flat after.
inline double epsilon_at(const AgentConfig& config, long global_step) {
  if (global_step >= config.epsilon_decay_steps) return config.epsilon_end;
  const double frac = static_cast<double>(global_step) / static_cast<double>(config.epsilon_decay_steps);
  return config.epsilon_start + frac * (config.epsilon_end - config.epsilon_start);
}

/// Index of the largest value; the lowest index wins ties.
inline int greedy_action(std::span<const double> q) {
  int best = 0;
  for (int a = 1; a < static_cast<int>(q.size()); ++a)
    if (q[static_cast<std::size_t>(a)] > q[static_cast<std::size_t>(best)]) best = a;
  return best;
}

/// y = r at terminal transitions, r + gamma * max_a Q^(s') otherwise.
inline double self_target(double reward, double max_next_q, bool terminal, double gamma) {
  return terminal ? reward : reward + gamma * max_next_q;
}

inline double self_target(double reward, const PerceptiveField& next_state, bool terminal, const QNetwork& q_target,
                          double gamma) {
  if (terminal) return reward;
  const Vector q = q_target.forward(next_state);
  return self_target(reward, q.maxCoeff(), false, gamma);
}

/// y_emp = beta * y + (1 - beta) * gamma * max_a Q^(s_emp'), with the
/// bootstrap dropped at terminal transitions.
inline double empathic_target(double y, double max_empathic_q, bool terminal, double gamma, double beta) {
  if (terminal) return beta * y;
  return beta * y + (1.0 - beta) * gamma * max_empathic_q;
}

inline double empathic_target(double y, const PerceptiveField& empathic_next, bool terminal, const QNetwork& q_target,
                              double gamma, double beta) {
  if (terminal) return empathic_target(y, 0.0, true, gamma, beta);
  const Vector q = q_target.forward(empathic_next);
  return empathic_target(y, q.maxCoeff(), false, gamma, beta);
}

/// Reward actually learned from under each baseline.
inline double shape_reward(BaselineMode mode, double raw_reward, bool harmed_counterpart, double equality_now,
                           double harm_penalty_value = -100.0) {
  switch (mode) {
    case BaselineMode::None: return raw_reward;
    case BaselineMode::HarmPenalty: return harmed_counterpart ? raw_reward + harm_penalty_value : raw_reward;
    case BaselineMode::EqualityModulated: return raw_reward * equality_now;
  }
  throw std::invalid_argument("shape_reward: unknown baseline mode");
}

struct LearnReport {
  double loss_self = 0.0;
  double loss_emp = 0.0;
};

/// Called once per gradient step with the self and empathic targets of the batch.
using TargetProbe = std::function<void(std::span<const double> self_targets, std::span<const double> empathic_targets)>;

/// Networks, replay memory and counters of one training run.
///
/// Randomness: `init_seed` drives weight initialisation; exploration and
/// replay sampling share the agent stream.
class AgentRuntime {
 public:
  AgentRuntime(AgentConfig config, Rng init_rng, Rng agent_rng)
      : config_((config.validate(), std::move(config))),
        q_self_(QNetwork::initialized(config_.layer_dims(), init_rng)),
        q_target_(q_self_),
        q_emp_(QNetwork::initialized(config_.layer_dims(), init_rng)),
        memory_(config_.replay_capacity),
        rng_(agent_rng) {}

  AgentRuntime(AgentConfig config, std::uint64_t seed)
      : AgentRuntime(std::move(config), Rng::stream(seed, 0), Rng::stream(seed, 1)) {}

  const AgentConfig& config() const { return config_; }
  const QNetwork& q_self() const { return q_self_; }
  const QNetwork& q_target() const { return q_target_; }
  const QNetwork& q_emp() const { return q_emp_; }
  QNetwork& q_emp_mutable() { return q_emp_; }
  const ReplayMemory& memory() const { return memory_; }
  long global_step() const { return global_step_; }
  double epsilon() const { return epsilon_at(config_, global_step_); }

  void set_target_probe(TargetProbe probe) { probe_ = std::move(probe); }

  /// Epsilon-greedy over the empathic network's action values.
  int select_action(const PerceptiveField& state, double epsilon) {
    if (rng_.uniform01() < epsilon) return static_cast<int>(rng_.uniform_index(kNumActions));
    const Vector q = q_emp_.forward(state);
    return greedy_action(std::span<const double>(q.data(), static_cast<std::size_t>(q.size())));
  }

  int select_action(const PerceptiveField& state) { return select_action(state, epsilon()); }

  /// Store the transition, take one gradient step on each network once the
  /// memory is warm, advance the step counter and sync the target network
  /// every target_sync_steps steps.
  std::optional<LearnReport> record(const Transition& t) {
    memory_.push(t);
    std::optional<LearnReport> report = learn();
    ++global_step_;
    if (global_step_ % config_.target_sync_steps == 0) copy_weights(q_self_, q_target_);
    return report;
  }

  /// One gradient step on q_self toward y and on q_emp toward y_emp, both
  /// bootstrapped from the target network. Empty while the memory is cold.
  std::optional<LearnReport> learn() {
    const auto batch = static_cast<std::size_t>(config_.batch_size);
    const auto indices = memory_.sample_indices(batch, rng_, config_.warm_threshold());
    if (!indices) return std::nullopt;

    const auto b = static_cast<Eigen::Index>(batch);
    states_.resize(kFieldSize, b);
    bootstrap_.resize(kFieldSize, 2 * b);
    actions_.resize(batch);
    for (Eigen::Index j = 0; j < b; ++j) {
      const Transition& t = memory_.slot((*indices)[static_cast<std::size_t>(j)]);
      states_.col(j) = Eigen::Map<const Vector>(t.state.data(), kFieldSize);
      bootstrap_.col(j) = Eigen::Map<const Vector>(t.next_state.data(), kFieldSize);
      bootstrap_.col(b + j) = Eigen::Map<const Vector>(t.empathic_next_state.data(), kFieldSize);
      actions_[static_cast<std::size_t>(j)] = t.action;
    }
    const Matrix next_q = q_target_.forward_batch(bootstrap_);

    self_targets_.resize(batch);
    empathic_targets_.resize(batch);
    for (Eigen::Index j = 0; j < b; ++j) {
      const Transition& t = memory_.slot((*indices)[static_cast<std::size_t>(j)]);
      const double y = self_target(t.reward, next_q.col(j).maxCoeff(), t.terminal, config_.gamma);
      const bool empathic_ends =
          t.terminal || (t.counterpart_terminal && config_.counterpart_loss == CounterpartLoss::Terminal);
      self_targets_[static_cast<std::size_t>(j)] = y;
      empathic_targets_[static_cast<std::size_t>(j)] =
          empathic_target(y, next_q.col(b + j).maxCoeff(), empathic_ends, config_.gamma, config_.beta);
    }
    if (probe_) probe_(self_targets_, empathic_targets_);

    LearnReport report;
    report.loss_self = q_self_.train_step(states_, actions_, self_targets_, config_.learning_rate).mean_loss;
    report.loss_emp = q_emp_.train_step(states_, actions_, empathic_targets_, config_.learning_rate).mean_loss;
    return report;
  }

 private:
  AgentConfig config_;
  QNetwork q_self_;
  QNetwork q_target_;
  QNetwork q_emp_;
  ReplayMemory memory_;
  Rng rng_;
  long global_step_ = 0;
  TargetProbe probe_;

  Matrix states_;
  Matrix bootstrap_;
  std::vector<int> actions_;
  std::vector<double> self_targets_;
  std::vector<double> empathic_targets_;
};

/// Runs one episode from a fresh reset of `env`, learning after every step.
template <GridEnvironment Env>
EpisodeMetrics train_episode(AgentRuntime& agent, const Env& env, Rng& env_rng) {
  EpisodeMetrics metrics;
  auto state = env.reset(env_rng);
  tally_start(metrics, state);
  PerceptiveField obs = env.observe(state);

  double loss_self = 0.0;
  double loss_emp = 0.0;
  bool terminal = state.terminal;
  while (!terminal) {
    const int action = agent.select_action(obs);
    auto [next, outcome] = env.step(state, action_from_index(action), env_rng);
    const StepView view = view_step(next, outcome);
    const double reward = shape_reward(agent.config().baseline_mode, view.reward, view.counterpart_harmed,
                                       view.equality_now, agent.config().harm_penalty_value);

    Transition t;
    t.state = obs;
    t.action = action;
    t.reward = reward;
    t.next_state = env.observe(next);
    // observe_empathic falls back to the own view once no counterpart remains
    t.empathic_next_state = env.observe_empathic(next);
    t.terminal = view.terminal;
    t.counterpart_terminal = view.counterpart_harmed;

    std::optional<LearnReport> report;
    try {
      report = agent.record(t);
    } catch (const NumericalError& e) {
      throw NumericalError(std::string(e.what()) + " at global step " + std::to_string(agent.global_step()));
    }
    if (report) {
      loss_self += report->loss_self;
      loss_emp += report->loss_emp;
      ++metrics.gradient_steps;
    }

    ++metrics.steps;
    metrics.env_return += view.reward;
    metrics.shaped_return += reward;
    tally_step(metrics, next, outcome);

    obs = t.next_state;
    state = std::move(next);
    terminal = view.terminal;
  }

  metrics.epsilon = agent.epsilon();
  if (metrics.gradient_steps > 0) {
    metrics.mean_loss_self = loss_self / static_cast<double>(metrics.gradient_steps);
    metrics.mean_loss_emp = loss_emp / static_cast<double>(metrics.gradient_steps);
  }
  return metrics;
}

}  // namespace empathic
