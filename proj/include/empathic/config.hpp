#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>

#include <json.hpp>

#include "empathic/agent.hpp"
#include "empathic/gridworld.hpp"

namespace empathic {

enum class EnvironmentKind { Coexistence, Sharing };

inline std::string_view to_string(EnvironmentKind kind) {
  return kind == EnvironmentKind::Coexistence ? "coexistence" : "sharing";
}

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Everything needed to reproduce an experiment. Run i uses seed base_seed + i.
struct RunConfig {
  EnvironmentKind environment = EnvironmentKind::Coexistence;
  int grid_width = 8;
  int grid_height = 8;
  AgentConfig agent;
  int episodes = 1500;
  int max_steps_per_episode = 500;
  int runs = 5;
  std::int64_t base_seed = 0;
  std::filesystem::path output_dir = "out";
  int smoothing_window = 100;
  int battery_count = 9;
  double agent_encoding_offset = 0.0;
  int jobs = 1;

  void validate() const {
    auto fail = [](const std::string& msg) { throw ConfigError(msg); };
    if (grid_width < 1 || grid_height < 1) fail("grid_width/grid_height must be positive");
    if (grid_width * grid_height < 2) fail("grid must have at least two cells");
    if (episodes < 1) fail("episodes must be positive");
    if (max_steps_per_episode < 1) fail("max_steps_per_episode must be positive");
    if (runs < 1) fail("runs must be positive");
    if (smoothing_window < 1) fail("smoothing_window must be positive");
    if (battery_count < 0) fail("battery_count must be nonnegative");
    if (environment == EnvironmentKind::Sharing && grid_width * grid_height < battery_count + 2)
      fail("battery_count: grid too small for the agents and batteries");
    if (!std::isfinite(agent_encoding_offset)) fail("agent_encoding_offset must be finite");
    if (jobs < 1) fail("jobs must be positive");
    try {
      agent.validate();
    } catch (const std::invalid_argument& e) {
      fail(e.what());
    }
  }

  GridSpec grid() const { return GridSpec(grid_width, grid_height); }
  std::uint64_t seed_for_run(int run) const { return static_cast<std::uint64_t>(base_seed + run); }
};

namespace detail {

using nlohmann::json;

inline void reject_unknown(const json& obj, const std::set<std::string>& known, const std::string& prefix) {
  for (const auto& [key, value] : obj.items())
    if (!known.contains(key)) throw ConfigError("unknown config key '" + prefix + key + "'");
}

template <class T>
void read_key(const json& obj, const char* key, T& out, const std::string& prefix) {
  if (!obj.contains(key)) return;
  const json& v = obj.at(key);
  if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) throw ConfigError("config key '" + prefix + key + "': expected an integer");
    if (std::is_unsigned_v<T> && v.get<std::int64_t>() < 0)
      throw ConfigError("config key '" + prefix + key + "': must be nonnegative");
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) throw ConfigError("config key '" + prefix + key + "': expected a number");
  }
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("config key '" + prefix + key + "': " + e.what());
  }
}

inline AgentConfig agent_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config key 'agent' must be an object");
  static const std::set<std::string> known = {
      "beta",          "gamma",         "learning_rate",      "batch_size",    "replay_capacity",
      "target_sync_steps", "epsilon_start", "epsilon_end",     "epsilon_decay_steps", "warm_start",
      "baseline_mode", "harm_penalty_value", "hidden_layers",   "counterpart_loss"};
  reject_unknown(j, known, "agent.");
  AgentConfig a;
  const std::string p = "agent.";
  read_key(j, "beta", a.beta, p);
  read_key(j, "gamma", a.gamma, p);
  read_key(j, "learning_rate", a.learning_rate, p);
  read_key(j, "batch_size", a.batch_size, p);
  read_key(j, "replay_capacity", a.replay_capacity, p);
  read_key(j, "target_sync_steps", a.target_sync_steps, p);
  read_key(j, "epsilon_start", a.epsilon_start, p);
  read_key(j, "epsilon_end", a.epsilon_end, p);
  read_key(j, "epsilon_decay_steps", a.epsilon_decay_steps, p);
  read_key(j, "warm_start", a.warm_start, p);
  read_key(j, "harm_penalty_value", a.harm_penalty_value, p);
  read_key(j, "hidden_layers", a.hidden_layers, p);
  std::string mode;
  read_key(j, "baseline_mode", mode, p);
  if (!mode.empty()) {
    try {
      a.baseline_mode = parse_baseline_mode(mode);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("config key 'agent.baseline_mode': ") + e.what());
    }
  }
  std::string loss;
  read_key(j, "counterpart_loss", loss, p);
  if (!loss.empty()) {
    try {
      a.counterpart_loss = parse_counterpart_loss(loss);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("config key 'agent.counterpart_loss': ") + e.what());
    }
  }
  return a;
}

}  // namespace detail

/// Parses and validates a JSON config. Missing keys take their defaults;
/// unknown keys are errors.
inline RunConfig config_from_json(const nlohmann::json& j) {
  using detail::read_key;
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const std::set<std::string> known = {
      "environment", "grid_width",     "grid_height",    "agent",         "episodes",
      "max_steps_per_episode", "runs", "base_seed",      "output_dir",    "smoothing_window",
      "battery_count", "agent_encoding_offset", "jobs"};
  detail::reject_unknown(j, known, "");
  RunConfig c;
  std::string env = "coexistence";
  read_key(j, "environment", env, "");
  if (env == "coexistence")
    c.environment = EnvironmentKind::Coexistence;
  else if (env == "sharing")
    c.environment = EnvironmentKind::Sharing;
  else
    throw ConfigError("config key 'environment': expected coexistence or sharing, got '" + env + "'");
  read_key(j, "grid_width", c.grid_width, "");
  read_key(j, "grid_height", c.grid_height, "");
  read_key(j, "episodes", c.episodes, "");
  read_key(j, "max_steps_per_episode", c.max_steps_per_episode, "");
  read_key(j, "runs", c.runs, "");
  read_key(j, "base_seed", c.base_seed, "");
  std::string out = c.output_dir.string();
  read_key(j, "output_dir", out, "");
  c.output_dir = out;
  read_key(j, "smoothing_window", c.smoothing_window, "");
  read_key(j, "battery_count", c.battery_count, "");
  read_key(j, "agent_encoding_offset", c.agent_encoding_offset, "");
  read_key(j, "jobs", c.jobs, "");
  if (j.contains("agent")) c.agent = detail::agent_from_json(j.at("agent"));
  c.validate();
  return c;
}

inline nlohmann::json to_json(const RunConfig& c) {
  const AgentConfig& a = c.agent;
  return {
      {"environment", std::string(to_string(c.environment))},
      {"grid_width", c.grid_width},
      {"grid_height", c.grid_height},
      {"episodes", c.episodes},
      {"max_steps_per_episode", c.max_steps_per_episode},
      {"runs", c.runs},
      {"base_seed", c.base_seed},
      {"output_dir", c.output_dir.string()},
      {"smoothing_window", c.smoothing_window},
      {"battery_count", c.battery_count},
      {"agent_encoding_offset", c.agent_encoding_offset},
      {"jobs", c.jobs},
      {"agent",
       {{"beta", a.beta},
        {"gamma", a.gamma},
        {"learning_rate", a.learning_rate},
        {"batch_size", a.batch_size},
        {"replay_capacity", a.replay_capacity},
        {"target_sync_steps", a.target_sync_steps},
        {"epsilon_start", a.epsilon_start},
        {"epsilon_end", a.epsilon_end},
        {"epsilon_decay_steps", a.epsilon_decay_steps},
        {"warm_start", a.warm_start},
        {"baseline_mode", std::string(to_string(a.baseline_mode))},
        {"harm_penalty_value", a.harm_penalty_value},
        {"hidden_layers", a.hidden_layers},
        {"counterpart_loss", std::string(to_string(a.counterpart_loss))}}},
  };
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

inline void save_config(const RunConfig& c, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open " + path.string() + " for writing");
  out << to_json(c).dump(2) << '\n';
}

}  // namespace empathic
