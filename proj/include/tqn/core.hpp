#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace tqn {

// ---------------------------------------------------------------------------
// Temporal discounting
// ---------------------------------------------------------------------------

// Discounting driven by the real time elapsed between decisions instead of a
// fixed per-step constant. `belief` is the fraction of value that survives
// after `tau` time units, so a gap of dt units discounts by belief^(dt/tau).
struct TemporalDiscountSpec {
  double tau = 1.0;
  double belief = 0.99;

  bool operator==(const TemporalDiscountSpec&) const = default;
};

inline void validate(const TemporalDiscountSpec& spec) {
  if (!(spec.tau > 0.0) || !std::isfinite(spec.tau))
    throw std::domain_error("temporal discount: tau must be finite and > 0");
  if (!(spec.belief > 0.0 && spec.belief < 1.0))
    throw std::domain_error("temporal discount: belief must lie strictly in (0, 1)");
}

// belief^(dt/tau), evaluated as exp((dt/tau) * ln(belief)).
inline double temporal_discount(const TemporalDiscountSpec& spec, double dt) {
  validate(spec);
  if (!(dt >= 0.0) || !std::isfinite(dt))
    throw std::domain_error("temporal discount: dt must be finite and >= 0");
  return std::exp((dt / spec.tau) * std::log(spec.belief));
}

// The constant per-decision discount that matches temporal discounting when
// every interval equals mean_dt. Shares the exact evaluation path of
// temporal_discount so the two agree bitwise at constant intervals.
inline double equivalent_static_discount(const TemporalDiscountSpec& spec, double mean_dt) {
  if (!(mean_dt > 0.0) || !std::isfinite(mean_dt))
    throw std::domain_error("equivalent static discount: mean_dt must be finite and > 0");
  return temporal_discount(spec, mean_dt);
}

// Rate k of the equivalent exponential decay exp(-k * dt).
inline double exponential_rate(const TemporalDiscountSpec& spec) {
  validate(spec);
  return -std::log(spec.belief) / spec.tau;
}

// ---------------------------------------------------------------------------
// Time-aware state windows
// ---------------------------------------------------------------------------

// One observation plus the time elapsed since the previous one (0 for the
// first observation of an episode and for padded slots).
struct TimedObservation {
  std::vector<double> features;
  double dt_prev = 0.0;

  bool operator==(const TimedObservation&) const = default;
};

// Decision-time input: the c most recent observations (oldest first) together
// with the already-drawn duration of the upcoming action.
struct StateWindow {
  std::vector<TimedObservation> observations;
  double dt_next = 0.0;

  bool operator==(const StateWindow&) const = default;
};

inline std::size_t state_vector_size(std::size_t c, std::size_t d, bool time_aware) {
  return c * d + (time_aware ? c : 0);
}

// Flattens a window to a network input. Time-aware layout is
//   [features of all c observations, dt_prev of observations 1..c-1, dt_next];
// the time-unaware layout is the pure feature prefix, so both agree on the
// first c*d entries.
inline std::vector<double> build_state_vector(const StateWindow& window, bool time_aware) {
  if (window.observations.empty())
    throw std::invalid_argument("build_state_vector: window holds no observations");
  const std::size_t d = window.observations.front().features.size();
  std::vector<double> out;
  out.reserve(state_vector_size(window.observations.size(), d, time_aware));
  for (const TimedObservation& obs : window.observations) {
    if (obs.features.size() != d)
      throw std::invalid_argument("build_state_vector: ragged feature vectors");
    out.insert(out.end(), obs.features.begin(), obs.features.end());
  }
  if (!time_aware) return out;
  for (std::size_t i = 1; i < window.observations.size(); ++i) {
    const double dt = window.observations[i].dt_prev;
    if (!(dt >= 0.0) || !std::isfinite(dt))
      throw std::domain_error("build_state_vector: dt_prev must be finite and >= 0");
    out.push_back(dt);
  }
  if (!(window.dt_next >= 0.0) || !std::isfinite(window.dt_next))
    throw std::domain_error("build_state_vector: dt_next must be finite and >= 0");
  out.push_back(window.dt_next);
  return out;
}

// Builds the window for the latest decision from an episode's observation
// history. Histories shorter than c are front-padded by repeating the
// earliest observation with dt_prev = 0.
inline StateWindow make_window(std::span<const TimedObservation> history, std::size_t c,
                               double dt_next) {
  if (c == 0) throw std::invalid_argument("make_window: history length c must be >= 1");
  if (history.empty()) throw std::invalid_argument("make_window: empty history");
  StateWindow window;
  window.dt_next = dt_next;
  window.observations.reserve(c);
  if (history.size() >= c) {
    window.observations.assign(history.end() - c, history.end());
  } else {
    for (std::size_t i = history.size(); i < c; ++i)
      window.observations.push_back({history.front().features, 0.0});
    window.observations.insert(window.observations.end(), history.begin(), history.end());
  }
  return window;
}

}  // namespace tqn
