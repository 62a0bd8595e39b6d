#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <utility>
#include <variant>
#include <vector>

#include "tqn/core.hpp"
#include "tqn/rng.hpp"

namespace tqn {

enum class EnvKind { cartpole, mountain_car };

// ---------------------------------------------------------------------------
// CartPole: balance a pole on a force-controlled cart. +1 per physics step,
// episode ends when the cart leaves ±2.4 units, the pole tips past 15°, or
// 200 steps elapse.
// ---------------------------------------------------------------------------

struct CartPoleState {
  double x = 0.0;
  double x_dot = 0.0;
  double theta = 0.0;
  double theta_dot = 0.0;

  bool operator==(const CartPoleState&) const = default;
};

class CartPole {
 public:
  static constexpr int observation_size = 4;
  static constexpr int action_count = 2;  // 0 = push left, 1 = push right
  static constexpr int default_substep_cap = 200;

  static constexpr double gravity = 9.8;
  static constexpr double cart_mass = 1.0;
  static constexpr double pole_mass = 0.1;
  static constexpr double total_mass = cart_mass + pole_mass;
  static constexpr double half_length = 0.5;
  static constexpr double pole_mass_length = pole_mass * half_length;
  static constexpr double force_mag = 10.0;
  static constexpr double time_step = 0.02;
  static constexpr double x_threshold = 2.4;
  static constexpr double theta_threshold = 15.0 * std::numbers::pi / 180.0;

  explicit CartPole(int substep_cap = default_substep_cap) : substep_cap_(substep_cap) {
    if (substep_cap < 1) throw std::invalid_argument("CartPole: substep cap must be >= 1");
  }

  void reset(Rng& rng) {
    state_ = {uniform_real(rng, -0.05, 0.05), uniform_real(rng, -0.05, 0.05),
              uniform_real(rng, -0.05, 0.05), uniform_real(rng, -0.05, 0.05)};
    substeps_ = 0;
    terminal_ = false;
  }

  // One Euler step of the standard cart-pole equations. Returns the substep
  // reward (+1 for every executed step, including the one that ends the
  // episode); check terminal() afterwards.
  double substep(int action) {
    if (action < 0 || action >= action_count)
      throw std::invalid_argument("CartPole: action out of range");
    if (terminal_) throw std::logic_error("CartPole: stepping a finished episode");
    const double force = action == 1 ? force_mag : -force_mag;
    const double cos_t = std::cos(state_.theta);
    const double sin_t = std::sin(state_.theta);
    const double temp =
        (force + pole_mass_length * state_.theta_dot * state_.theta_dot * sin_t) / total_mass;
    const double theta_acc = (gravity * sin_t - cos_t * temp) /
                             (half_length * (4.0 / 3.0 - pole_mass * cos_t * cos_t / total_mass));
    const double x_acc = temp - pole_mass_length * theta_acc * cos_t / total_mass;
    state_.x += time_step * state_.x_dot;
    state_.x_dot += time_step * x_acc;
    state_.theta += time_step * state_.theta_dot;
    state_.theta_dot += time_step * theta_acc;
    ++substeps_;
    const bool out_of_bounds =
        std::abs(state_.x) > x_threshold || std::abs(state_.theta) > theta_threshold;
    if (out_of_bounds || substeps_ >= substep_cap_) terminal_ = true;
    return 1.0;
  }

  std::vector<double> observation() const {
    return {state_.x, state_.x_dot, state_.theta, state_.theta_dot};
  }
  const CartPoleState& state() const { return state_; }
  // Places the cart in a chosen configuration (controlled starts); clears the
  // finished flag but keeps the substep count.
  void set_state(const CartPoleState& state) {
    state_ = state;
    terminal_ = false;
  }
  bool terminal() const { return terminal_; }
  bool truncated() const { return false; }  // the 200-step cap is a true terminal
  int substeps() const { return substeps_; }

  bool operator==(const CartPole&) const = default;

 private:
  CartPoleState state_;
  int substep_cap_;
  int substeps_ = 0;
  bool terminal_ = false;
};

// ---------------------------------------------------------------------------
// MountainCar: drive an underpowered car out of a valley. -1 per physics
// step, +100 extra on reaching the goal position. Episodes that exhaust the
// step cap without reaching the goal are truncated, not terminal, so learners
// still bootstrap from the final state.
// ---------------------------------------------------------------------------

struct MountainCarState {
  double position = -0.5;
  double velocity = 0.0;

  bool operator==(const MountainCarState&) const = default;
};

class MountainCar {
 public:
  static constexpr int observation_size = 2;
  static constexpr int action_count = 3;  // 0 = push left, 1 = no push, 2 = push right
  static constexpr int default_substep_cap = 2000;

  static constexpr double force = 0.001;
  static constexpr double gravity_scale = 0.0025;
  static constexpr double min_position = -1.2;
  static constexpr double max_position = 0.6;
  static constexpr double max_speed = 0.07;
  static constexpr double goal_position = 0.5;

  explicit MountainCar(int substep_cap = default_substep_cap) : substep_cap_(substep_cap) {
    if (substep_cap < 1) throw std::invalid_argument("MountainCar: substep cap must be >= 1");
  }

  void reset(Rng& rng) {
    state_ = {uniform_real(rng, -0.6, -0.4), 0.0};
    substeps_ = 0;
    terminal_ = false;
    truncated_ = false;
  }

  double substep(int action) {
    if (action < 0 || action >= action_count)
      throw std::invalid_argument("MountainCar: action out of range");
    if (terminal_ || truncated_) throw std::logic_error("MountainCar: stepping a finished episode");
    state_.velocity += force * (action - 1) - gravity_scale * std::cos(3.0 * state_.position);
    state_.velocity = std::clamp(state_.velocity, -max_speed, max_speed);
    state_.position += state_.velocity;
    state_.position = std::clamp(state_.position, min_position, max_position);
    ++substeps_;
    double reward = -1.0;
    if (state_.position >= goal_position) {
      terminal_ = true;
      reward += 100.0;
    } else if (substeps_ >= substep_cap_) {
      truncated_ = true;
    }
    return reward;
  }

  std::vector<double> observation() const { return {state_.position, state_.velocity}; }
  const MountainCarState& state() const { return state_; }
  void set_state(const MountainCarState& state) {
    state_ = state;
    terminal_ = false;
    truncated_ = false;
  }
  bool terminal() const { return terminal_; }
  bool truncated() const { return truncated_; }
  int substeps() const { return substeps_; }

  bool operator==(const MountainCar&) const = default;

 private:
  MountainCarState state_;
  int substep_cap_;
  int substeps_ = 0;
  bool terminal_ = false;
  bool truncated_ = false;
};

inline int observation_size(EnvKind kind) {
  return kind == EnvKind::cartpole ? CartPole::observation_size : MountainCar::observation_size;
}
inline int action_count(EnvKind kind) {
  return kind == EnvKind::cartpole ? CartPole::action_count : MountainCar::action_count;
}
inline int default_dt_max(EnvKind kind) { return kind == EnvKind::cartpole ? 4 : 32; }
inline int default_substep_cap(EnvKind kind) {
  return kind == EnvKind::cartpole ? CartPole::default_substep_cap
                                   : MountainCar::default_substep_cap;
}

// Uniform integer interval in {1, ..., dt_max}. dt_max == 1 consumes no
// entropy, which keeps the wrapped environment stream-compatible with the
// unwrapped one.
inline int draw_interval(Rng& rng, int dt_max) {
  if (dt_max < 1) throw std::domain_error("draw_interval: dt_max must be >= 1");
  return uniform_int(rng, 1, dt_max);
}

// ---------------------------------------------------------------------------
// Irregular-interval wrapper: the interval for the upcoming action is drawn
// before the decision and exposed to the agent as dt_next; the action is then
// held for that many substeps with rewards summed, stopping early if the
// episode ends.
// ---------------------------------------------------------------------------

struct IntervalStepResult {
  TimedObservation observation;  // dt_prev = substeps actually consumed
  double reward = 0.0;
  bool terminal = false;
  bool truncated = false;
  int dt_consumed = 0;
  // Pre-drawn interval for the following decision; 0 once the episode is
  // terminal. Truncated episodes still carry a draw so bootstrapped targets
  // see a typical dt_next rather than a sentinel.
  int dt_next = 0;
};

class IntervalEnv {
 public:
  IntervalEnv(EnvKind kind, int dt_max, int substep_cap = 0)
      : kind_(kind), dt_max_(dt_max), env_(make_env(kind, substep_cap)) {
    if (dt_max < 1) throw std::domain_error("IntervalEnv: dt_max must be >= 1");
  }

  std::pair<TimedObservation, int> reset(Rng& rng) {
    std::visit([&rng](auto& env) { env.reset(rng); }, env_);
    pending_dt_ = draw_interval(rng, dt_max_);
    return {TimedObservation{observation(), 0.0}, pending_dt_};
  }

  IntervalStepResult step(int action, Rng& rng) {
    if (pending_dt_ < 1)
      throw std::logic_error("IntervalEnv: no pending interval (call reset first)");
    const int budget = pending_dt_;
    pending_dt_ = 0;
    IntervalStepResult result;
    for (int i = 0; i < budget && !finished(); ++i) {
      result.reward += std::visit([action](auto& env) { return env.substep(action); }, env_);
      ++result.dt_consumed;
    }
    result.terminal = std::visit([](const auto& env) { return env.terminal(); }, env_);
    result.truncated = std::visit([](const auto& env) { return env.truncated(); }, env_);
    result.observation = {observation(), static_cast<double>(result.dt_consumed)};
    if (!result.terminal) {
      result.dt_next = draw_interval(rng, dt_max_);
      if (!result.truncated) pending_dt_ = result.dt_next;
    }
    return result;
  }

  std::vector<double> observation() const {
    return std::visit([](const auto& env) { return env.observation(); }, env_);
  }
  bool finished() const {
    return std::visit([](const auto& env) { return env.terminal() || env.truncated(); }, env_);
  }
  int pending_dt() const { return pending_dt_; }
  EnvKind kind() const { return kind_; }
  int dt_max() const { return dt_max_; }
  int observation_size() const { return tqn::observation_size(kind_); }
  int action_count() const { return tqn::action_count(kind_); }
  // Read access to the wrapped environment, e.g. to replay substeps on a copy.
  const std::variant<CartPole, MountainCar>& base() const { return env_; }

 private:
  static std::variant<CartPole, MountainCar> make_env(EnvKind kind, int substep_cap) {
    const int cap = substep_cap > 0 ? substep_cap : default_substep_cap(kind);
    if (kind == EnvKind::cartpole) return CartPole(cap);
    return MountainCar(cap);
  }

  EnvKind kind_;
  int dt_max_;
  std::variant<CartPole, MountainCar> env_;
  int pending_dt_ = 0;
};

}  // namespace tqn
