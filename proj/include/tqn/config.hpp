#pragma once

// Experiment configuration: every knob of an environment + agent + run
// bundle, its defaults, derived network shapes, a canonical text form
// (re-loadable as a config file), and a stable fingerprint used to name
// artifacts.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "tqn/agent.hpp"
#include "tqn/envs.hpp"
#include "tqn/network.hpp"
#include "tqn/text.hpp"

namespace tqn {

inline const char* env_kind_name(EnvKind kind) {
  switch (kind) {
    case EnvKind::cartpole: return "cartpole";
    case EnvKind::mountain_car: return "mountaincar";
  }
  throw std::invalid_argument("env_kind_name: unknown environment");
}

inline EnvKind env_kind_from_name(const std::string& name) {
  if (name == "cartpole") return EnvKind::cartpole;
  if (name == "mountaincar") return EnvKind::mountain_car;
  throw std::invalid_argument("env_kind_from_name: unknown environment '" + name + "'");
}

inline const std::vector<std::string>& architecture_menu() {
  static const std::vector<std::string> menu{"small", "medium", "large"};
  return menu;
}

inline const std::vector<int>& architecture_layers(const std::string& name) {
  static const std::vector<int> small{32, 16, 8};
  static const std::vector<int> medium{64, 32, 16};
  static const std::vector<int> large{128, 64, 32};
  if (name == "small") return small;
  if (name == "medium") return medium;
  if (name == "large") return large;
  throw std::invalid_argument("architecture_layers: unknown architecture '" + name + "'");
}

inline long long default_episode_cap(EnvKind kind) {
  return kind == EnvKind::cartpole ? 5000 : 10000;
}

struct RunConfig {
  // environment
  EnvKind env_kind = EnvKind::cartpole;
  int dt_max = 0;       // 0 = per-environment default (4 / 32)
  int substep_cap = 0;  // 0 = per-environment default (200 / 2000)

  // agent
  Variant variant = Variant::tqn;
  bool double_dqn = false;
  bool dueling = false;
  bool prioritized = false;
  int history = 3;             // menu {2, 3}
  std::string arch = "medium"; // menu {small, medium, large}
  double gamma = 0.99;
  TemporalDiscountSpec discount;
  EpsilonSchedule epsilon;
  double soft_update_rate = 0.2;
  double learning_rate = 0.01;
  int batch_size = 32;
  long long replay_capacity = 50000;
  long long replay_start = 5000;

  // run
  long long episode_cap = -1;  // -1 = per-environment default (5000 / 10000); 0 = no episodes
  int eval_episodes = 100;
  int seeds = 1;
  std::uint64_t seed_base = 1;
  std::string out_dir = "runs";
  long long log_interval = 100;

  bool operator==(const RunConfig&) const = default;
};

inline int resolved_dt_max(const RunConfig& c) {
  return c.dt_max > 0 ? c.dt_max : default_dt_max(c.env_kind);
}

inline int resolved_substep_cap(const RunConfig& c) {
  return c.substep_cap > 0 ? c.substep_cap : default_substep_cap(c.env_kind);
}

inline long long resolved_episode_cap(const RunConfig& c) {
  return c.episode_cap >= 0 ? c.episode_cap : default_episode_cap(c.env_kind);
}

inline AgentConfig agent_config(const RunConfig& c) {
  AgentConfig agent;
  agent.variant = c.variant;
  agent.double_dqn = c.double_dqn;
  agent.dueling = c.dueling;
  agent.prioritized = c.prioritized;
  agent.history = c.history;
  agent.gamma = c.gamma;
  agent.discount = c.discount;
  agent.epsilon = c.epsilon;
  agent.soft_update_rate = c.soft_update_rate;
  agent.learning_rate = c.learning_rate;
  agent.batch_size = c.batch_size;
  return agent;
}

inline NetworkConfig network_config(const RunConfig& c) {
  NetworkConfig net;
  net.input_size = static_cast<int>(
      state_vector_size(c.history, observation_size(c.env_kind), time_aware_state(c.variant)));
  net.hidden = architecture_layers(c.arch);
  net.output_size = action_count(c.env_kind);
  net.dueling = c.dueling;
  net.stream_hidden = 64;
  return net;
}

inline void validate(const RunConfig& c) {
  if (c.dt_max < 0) throw std::invalid_argument("config: dt-max must be >= 0");
  if (c.substep_cap < 0) throw std::invalid_argument("config: substep-cap must be >= 0");
  if (c.history != 2 && c.history != 3)
    throw std::invalid_argument("config: history must be 2 or 3");
  architecture_layers(c.arch);  // throws on unknown names
  validate(agent_config(c));
  if (c.replay_capacity < 1) throw std::invalid_argument("config: replay-capacity must be >= 1");
  if (c.replay_start < c.batch_size)
    throw std::invalid_argument("config: replay-start must be >= batch");
  if (c.replay_start > c.replay_capacity)
    throw std::invalid_argument("config: replay-start must be <= replay-capacity");
  if (c.episode_cap < -1) throw std::invalid_argument("config: episode-cap must be >= -1");
  if (c.eval_episodes < 1) throw std::invalid_argument("config: eval-episodes must be >= 1");
  if (c.seeds < 1) throw std::invalid_argument("config: seeds must be >= 1");
  if (c.log_interval < 1) throw std::invalid_argument("config: log-interval must be >= 1");
  if (c.out_dir.empty()) throw std::invalid_argument("config: out must be non-empty");
}

namespace detail {

// The experiment-identity lines: everything that changes training behavior.
// Seed, output location, and logging cadence are provenance, not identity.
inline std::string identity_text(const RunConfig& c) {
  std::string text;
  const auto line = [&text](const std::string& key, const std::string& value) {
    text += key;
    text += " = ";
    text += value;
    text += "\n";
  };
  text += "[env]\n";
  line("kind", env_kind_name(c.env_kind));
  line("dt-max", format_number(static_cast<long long>(resolved_dt_max(c))));
  line("substep-cap", format_number(static_cast<long long>(resolved_substep_cap(c))));
  text += "\n[agent]\n";
  line("variant", variant_name(c.variant));
  line("double", c.double_dqn ? "true" : "false");
  line("dueling", c.dueling ? "true" : "false");
  line("per", c.prioritized ? "true" : "false");
  line("history", format_number(static_cast<long long>(c.history)));
  line("arch", c.arch);
  line("gamma", format_number(c.gamma));
  line("tau", format_number(c.discount.tau));
  line("belief", format_number(c.discount.belief));
  line("epsilon-initial", format_number(c.epsilon.initial));
  line("epsilon-final", format_number(c.epsilon.final_value));
  line("epsilon-final-iteration", format_number(c.epsilon.final_iteration));
  line("soft-update", format_number(c.soft_update_rate));
  line("lr", format_number(c.learning_rate));
  line("batch", format_number(static_cast<long long>(c.batch_size)));
  line("replay-capacity", format_number(c.replay_capacity));
  line("replay-start", format_number(c.replay_start));
  text += "\n[run]\n";
  line("episode-cap", format_number(resolved_episode_cap(c)));
  line("eval-episodes", format_number(static_cast<long long>(c.eval_episodes)));
  return text;
}

}  // namespace detail

// Resolved configuration in the config-file grammar; loading this text back
// reproduces the same behavior.
inline std::string canonical_text(const RunConfig& c) {
  std::string text = detail::identity_text(c);
  const auto line = [&text](const std::string& key, const std::string& value) {
    text += key;
    text += " = ";
    text += value;
    text += "\n";
  };
  line("seeds", format_number(static_cast<long long>(c.seeds)));
  line("seed-base", format_number(static_cast<unsigned long long>(c.seed_base)));
  line("out", c.out_dir);
  line("log-interval", format_number(c.log_interval));
  return text;
}

// 16-hex-digit fingerprint of the experiment identity, used in artifact names.
inline std::string config_hash(const RunConfig& c) {
  return hex16(fnv1a64(detail::identity_text(c)));
}

}  // namespace tqn
