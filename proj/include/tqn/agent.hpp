#pragma once

// Q-learning agent tying the pieces together: the four time-awareness
// variants, epsilon-greedy action selection, TD target construction
// (vanilla or double), and the per-decision learning step over a replay
// store with soft target-network updates.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tqn/core.hpp"
#include "tqn/network.hpp"
#include "tqn/replay.hpp"
#include "tqn/rng.hpp"

namespace tqn {

// The 2x2 grid of time handling: interval-aware inputs (state) and
// interval-dependent discounting can be toggled independently.
enum class Variant { dqn, tstate, tdiscount, tqn };

constexpr bool time_aware_state(Variant v) {
  return v == Variant::tstate || v == Variant::tqn;
}

constexpr bool temporal_discounting(Variant v) {
  return v == Variant::tdiscount || v == Variant::tqn;
}

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::dqn: return "dqn";
    case Variant::tstate: return "tstate";
    case Variant::tdiscount: return "tdiscount";
    case Variant::tqn: return "tqn";
  }
  throw std::invalid_argument("variant_name: unknown variant");
}

inline Variant variant_from_name(const std::string& name) {
  if (name == "dqn") return Variant::dqn;
  if (name == "tstate") return Variant::tstate;
  if (name == "tdiscount") return Variant::tdiscount;
  if (name == "tqn") return Variant::tqn;
  throw std::invalid_argument("variant_from_name: unknown variant '" + name + "'");
}

// Linear decay from `initial` to `final_value` over `final_iteration`
// learning steps, then flat.
struct EpsilonSchedule {
  double initial = 1.0;
  double final_value = 0.001;
  long long final_iteration = 6904;

  bool operator==(const EpsilonSchedule&) const = default;
};

inline void validate(const EpsilonSchedule& s) {
  if (!(s.initial >= 0.0 && s.initial <= 1.0))
    throw std::invalid_argument("epsilon schedule: initial outside [0, 1]");
  if (!(s.final_value >= 0.0 && s.final_value <= 1.0))
    throw std::invalid_argument("epsilon schedule: final outside [0, 1]");
  if (s.final_iteration < 1)
    throw std::invalid_argument("epsilon schedule: final_iteration must be >= 1");
}

inline double epsilon_at(const EpsilonSchedule& s, long long iteration) {
  if (iteration < 0) throw std::invalid_argument("epsilon_at: iteration must be >= 0");
  if (iteration >= s.final_iteration) return s.final_value;
  const double fraction =
      static_cast<double>(iteration) / static_cast<double>(s.final_iteration);
  return s.initial + (s.final_value - s.initial) * fraction;
}

struct AgentConfig {
  Variant variant = Variant::dqn;
  bool double_dqn = false;
  bool dueling = false;
  bool prioritized = false;
  int history = 3;                            // observations per state window
  double gamma = 0.99;                        // static per-decision discount
  TemporalDiscountSpec discount;              // interval-dependent discount
  EpsilonSchedule epsilon;
  double soft_update_rate = 0.2;
  double learning_rate = 0.01;
  int batch_size = 32;

  bool operator==(const AgentConfig&) const = default;
};

inline void validate(const AgentConfig& config) {
  if (config.history < 1) throw std::invalid_argument("agent config: history must be >= 1");
  if (!(config.gamma > 0.0 && config.gamma < 1.0))
    throw std::invalid_argument("agent config: gamma outside (0, 1)");
  validate(config.discount);
  validate(config.epsilon);
  if (!(config.soft_update_rate >= 0.0 && config.soft_update_rate <= 1.0))
    throw std::invalid_argument("agent config: soft update rate outside [0, 1]");
  if (!(config.learning_rate > 0.0) || !std::isfinite(config.learning_rate))
    throw std::invalid_argument("agent config: learning rate must be positive");
  if (config.batch_size < 1) throw std::invalid_argument("agent config: batch size must be >= 1");
}

// State window -> network input under the variant's awareness flag.
inline Vector state_input(const StateWindow& window, bool aware) {
  const std::vector<double> flat = build_state_vector(window, aware);
  return Eigen::Map<const Vector>(flat.data(), static_cast<Eigen::Index>(flat.size()));
}

// Index of the maximum entry; ties resolve to the lowest index.
inline int argmax_lowest(const Vector& values) {
  if (values.size() == 0) throw std::invalid_argument("argmax_lowest: empty vector");
  int best = 0;
  for (int i = 1; i < values.size(); ++i) {
    if (values(i) > values(best)) best = i;
  }
  return best;
}

// Epsilon-greedy over the network's action values. epsilon = 0 consumes no
// randomness; epsilon = 1 never evaluates the network.
inline int select_action(const QNetworkParams& params, const Vector& input, double epsilon,
                         Rng& rng) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0))
    throw std::invalid_argument("select_action: epsilon outside [0, 1]");
  const int actions = params.config.output_size;
  if (epsilon > 0.0 && uniform_real(rng) < epsilon) {
    return uniform_int(rng, 0, actions - 1);
  }
  const Vector q = forward_q(params, input);
  if (!q.allFinite()) throw TrainingError("select_action: non-finite action values");
  return argmax_lowest(q);
}

// One-step TD target. Terminal transitions stop the return; truncated ones
// bootstrap. The discount per decision is either the static gamma or the
// interval-dependent factor for the consumed interval.
inline double compute_td_target(const AgentConfig& config, const QNetworkParams& online,
                                const QNetworkParams& target, const Transition& t) {
  if (t.terminal && !t.truncated) return t.reward;
  const double discount = temporal_discounting(config.variant)
                              ? temporal_discount(config.discount, t.dt)
                              : config.gamma;
  const Vector next = state_input(t.next_state, time_aware_state(config.variant));
  const Vector q_target = forward_q(target, next);
  if (!q_target.allFinite()) throw TrainingError("td target: non-finite target-network values");
  double next_value = 0.0;
  if (config.double_dqn) {
    const Vector q_online = forward_q(online, next);
    if (!q_online.allFinite()) throw TrainingError("td target: non-finite online-network values");
    next_value = q_target(argmax_lowest(q_online));
  } else {
    next_value = q_target.maxCoeff();
  }
  return t.reward + discount * next_value;
}

struct AgentStepInfo {
  double loss = 0.0;
  double mean_abs_td = 0.0;
};

class Agent {
 public:
  Agent(AgentConfig config, const NetworkConfig& net_config, std::uint64_t init_seed)
      : config_(std::move(config)) {
    validate(config_);
    check_network(net_config);
    Rng rng(init_seed);
    online_ = make_network(net_config, rng);
    target_ = online_;
    adam_ = make_adam(online_, config_.learning_rate);
  }

  Agent(AgentConfig config, QNetworkParams params)
      : config_(std::move(config)), online_(std::move(params)) {
    validate(config_);
    check_network(online_.config);
    target_ = online_;
    adam_ = make_adam(online_, config_.learning_rate);
  }

  const AgentConfig& config() const { return config_; }
  const QNetworkParams& online() const { return online_; }
  const QNetworkParams& target() const { return target_; }
  long long iterations() const { return iterations_; }
  double epsilon() const { return epsilon_at(config_.epsilon, iterations_); }
  bool time_aware() const { return time_aware_state(config_.variant); }

  int act(const Vector& input, double epsilon, Rng& rng) const {
    return select_action(online_, input, epsilon, rng);
  }

  // One learning iteration: sample, regress onto TD targets, refresh
  // priorities, soft-update the target network.
  AgentStepInfo learn(ReplayStore& replay, Rng& rng) {
    if (replay.prioritized() != config_.prioritized)
      throw std::logic_error("Agent::learn: replay store prioritization does not match config");
    const double beta = config_.prioritized ? anneal_beta(iterations_) : 0.0;
    SampleBatch batch = replay.sample(static_cast<std::size_t>(config_.batch_size), rng, beta);

    const bool aware = time_aware_state(config_.variant);
    std::vector<Vector> inputs;
    std::vector<int> actions;
    std::vector<double> targets;
    inputs.reserve(batch.items.size());
    actions.reserve(batch.items.size());
    targets.reserve(batch.items.size());
    for (const Transition& t : batch.items) {
      inputs.push_back(state_input(t.state, aware));
      actions.push_back(t.action);
      targets.push_back(compute_td_target(config_, online_, target_, t));
    }

    StepDiagnostics diag = gradient_step(online_, adam_, inputs, actions, targets, batch.is_weights);
    if (config_.prioritized) replay.update_priorities(batch.indices, diag.abs_td_errors);
    soft_update(target_, online_, config_.soft_update_rate);
    ++iterations_;

    double mean_abs_td = 0.0;
    for (const double td : diag.abs_td_errors) mean_abs_td += td;
    mean_abs_td /= static_cast<double>(diag.abs_td_errors.size());
    return {diag.loss, mean_abs_td};
  }

 private:
  void check_network(const NetworkConfig& net_config) const {
    validate(net_config);
    if (net_config.dueling != config_.dueling)
      throw std::invalid_argument("Agent: network dueling flag does not match agent config");
    if (net_config.output_size < 2)
      throw std::invalid_argument("Agent: need at least two actions");
  }

  AgentConfig config_;
  QNetworkParams online_;
  QNetworkParams target_;
  AdamState adam_;
  long long iterations_ = 0;
};

}  // namespace tqn
