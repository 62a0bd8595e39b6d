#pragma once

// Offline path: newline-delimited-JSON episode logs (write/load with exact
// double round-trip), behavior-policy dataset generation, training purely
// from a dataset (no environment parameter exists, so the no-interaction
// guarantee is structural), and the agreement-vs-outcome curve.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "tqn/harness.hpp"

namespace tqn {

struct OfflineEpisode {
  EpisodeRecord record;
  bool good = false;  // outcome label: solve-threshold-level score
};

namespace detail {

inline nlohmann::ordered_json episode_to_json(const EpisodeRecord& record, bool good) {
  if (record.transitions.empty()) {
    throw std::invalid_argument("offline write: episode has no transitions");
  }
  nlohmann::ordered_json j;
  j["seed"] = record.seed;
  j["outcome"] = good ? "good" : "bad";
  const Transition& last = record.transitions.back();
  j["final_obs"] = last.next_state.observations.back().features;
  j["final_dt_next"] = last.next_state.dt_next;
  nlohmann::ordered_json transitions = nlohmann::ordered_json::array();
  for (const Transition& t : record.transitions) {
    nlohmann::ordered_json tj;
    tj["obs"] = t.state.observations.back().features;
    tj["dt_prev"] = t.state.observations.back().dt_prev;
    tj["action"] = t.action;
    tj["reward"] = t.reward;
    tj["dt"] = t.dt;
    tj["dt_next"] = t.state.dt_next;
    tj["terminal"] = t.terminal;
    tj["truncated"] = t.truncated;
    transitions.push_back(std::move(tj));
  }
  j["transitions"] = std::move(transitions);
  return j;
}

}  // namespace detail

inline std::string offline_dataset_text(const std::vector<OfflineEpisode>& episodes) {
  std::string text;
  for (const OfflineEpisode& episode : episodes) {
    text += detail::episode_to_json(episode.record, episode.good).dump();
    text += '\n';
  }
  return text;
}

inline void write_offline_dataset(const std::string& path,
                                  const std::vector<OfflineEpisode>& episodes) {
  write_file(path, offline_dataset_text(episodes));
}

// Labels episodes by the environment's solve-level score threshold.
inline std::vector<OfflineEpisode> label_episodes(std::vector<EpisodeRecord> records,
                                                  EnvKind kind) {
  std::vector<OfflineEpisode> episodes;
  episodes.reserve(records.size());
  const double threshold = solve_threshold(kind);
  for (EpisodeRecord& record : records) {
    const bool good = record.score >= threshold;
    episodes.push_back({std::move(record), good});
  }
  return episodes;
}

// Parses an episode log and rebuilds decision windows with the given history
// length. Reconstructed transitions chain exactly as online-built ones do.
inline std::vector<OfflineEpisode> load_offline_dataset(const std::string& path, int history) {
  if (history < 1) throw std::invalid_argument("offline load: history must be >= 1");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("offline load: cannot open " + path);

  std::vector<OfflineEpisode> episodes;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    const std::string where = " (line " + std::to_string(line_number) + ")";

    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& error) {
      throw std::invalid_argument("offline load: malformed JSON" + where + ": " + error.what());
    }

    try {
      OfflineEpisode episode;
      episode.record.seed = j.at("seed").get<std::uint64_t>();
      const std::string outcome = j.at("outcome").get<std::string>();
      if (outcome != "good" && outcome != "bad") {
        throw std::invalid_argument("offline load: unknown outcome '" + outcome + "'" + where);
      }
      episode.good = outcome == "good";

      const auto& transitions = j.at("transitions");
      if (!transitions.is_array() || transitions.empty()) {
        throw std::invalid_argument("offline load: episode has no transitions" + where);
      }
      const std::size_t n = transitions.size();

      // Observation sequence: one per decision, plus the final observation.
      std::vector<TimedObservation> observations;
      observations.reserve(n + 1);
      for (const auto& tj : transitions) {
        observations.push_back(
            {tj.at("obs").get<std::vector<double>>(), tj.at("dt_prev").get<double>()});
      }
      observations.push_back({j.at("final_obs").get<std::vector<double>>(),
                              transitions.at(n - 1).at("dt").get<double>()});
      const double final_dt_next = j.at("final_dt_next").get<double>();

      for (std::size_t i = 0; i < n; ++i) {
        const auto& tj = transitions.at(i);
        Transition t;
        t.action = tj.at("action").get<int>();
        t.reward = tj.at("reward").get<double>();
        t.dt = tj.at("dt").get<double>();
        t.terminal = tj.at("terminal").get<bool>();
        t.truncated = tj.at("truncated").get<bool>();
        const bool last = i + 1 == n;
        if (!last && (t.terminal || t.truncated)) {
          throw std::invalid_argument("offline load: episode continues past its end" + where);
        }
        if (last && !t.terminal && !t.truncated) {
          throw std::invalid_argument("offline load: episode does not end" + where);
        }
        t.state = make_window({observations.data(), i + 1}, history, tj.at("dt_next").get<double>());
        const double next_dt =
            last ? final_dt_next : transitions.at(i + 1).at("dt_next").get<double>();
        t.next_state = make_window({observations.data(), i + 2}, history, next_dt);
        episode.record.score += t.reward;
        episode.record.substeps += std::llround(t.dt);
        episode.record.transitions.push_back(std::move(t));
      }
      episode.record.truncated = episode.record.transitions.back().truncated;
      episodes.push_back(std::move(episode));
    } catch (const nlohmann::json::exception& error) {
      throw std::invalid_argument("offline load: bad episode" + where + ": " + error.what());
    }
  }
  return episodes;
}

// Behavior policy for dataset generation: uniform random, or epsilon-greedy
// around fixed parameters.
struct BehaviorPolicy {
  std::optional<QNetworkParams> params;
  double epsilon = 0.0;
};

inline std::vector<OfflineEpisode> generate_offline(const RunConfig& config,
                                                    const BehaviorPolicy& policy, int episodes,
                                                    std::uint64_t seed) {
  validate(config);
  if (episodes < 1) throw std::invalid_argument("generate_offline: need at least one episode");
  QNetworkParams params;
  double epsilon = 1.0;
  if (policy.params.has_value()) {
    if (!(policy.params->config == network_config(config))) {
      throw std::invalid_argument("generate_offline: checkpoint does not match the configuration");
    }
    params = *policy.params;
    epsilon = policy.epsilon;
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
      throw std::invalid_argument("generate_offline: epsilon outside [0, 1]");
    }
  } else {
    params = make_zero_network(network_config(config));
  }

  const bool aware = time_aware_state(config.variant);
  std::vector<EpisodeRecord> records;
  records.reserve(static_cast<std::size_t>(episodes));
  for (int e = 0; e < episodes; ++e) {
    const std::uint64_t episode_seed =
        derive_seed(seed, kOfflineStream + static_cast<std::uint64_t>(e));
    Rng rng(episode_seed);
    IntervalEnv env(config.env_kind, resolved_dt_max(config), resolved_substep_cap(config));
    EpisodeRecord record = rollout_episode(env, params, config.history, aware, epsilon, rng);
    record.seed = episode_seed;
    records.push_back(std::move(record));
  }
  return label_episodes(std::move(records), config.env_kind);
}

struct OfflineDiagRow {
  long long iteration = 0;
  double mean_loss = 0.0;
  double mean_abs_td = 0.0;
};

struct OfflineTrainResult {
  QNetworkParams params;
  std::vector<OfflineDiagRow> diagnostics;  // one row per logging interval
  long long iterations = 0;
};

// Trains purely from logged transitions. There is no environment anywhere in
// this code path.
inline OfflineTrainResult train_offline(const RunConfig& config,
                                        const std::vector<OfflineEpisode>& episodes,
                                        long long iterations, std::uint64_t seed) {
  validate(config);
  if (iterations < 0) throw std::invalid_argument("train_offline: iterations must be >= 0");
  std::size_t total = 0;
  for (const OfflineEpisode& episode : episodes) total += episode.record.transitions.size();
  if (total == 0) throw std::invalid_argument("train_offline: empty dataset");
  if (total < static_cast<std::size_t>(config.batch_size)) {
    throw std::invalid_argument("train_offline: dataset smaller than one batch");
  }

  // The dataset is fully present up front, so sampling is gated only on the
  // batch size (replay-start is an online-collection knob).
  ReplayStore store(static_cast<std::size_t>(config.replay_capacity), config.prioritized,
                    static_cast<std::size_t>(config.batch_size));
  for (const OfflineEpisode& episode : episodes) {
    for (const Transition& t : episode.record.transitions) store.push(t);
  }

  Agent agent(agent_config(config), network_config(config), derive_seed(seed, 1));
  Rng rng(derive_seed(seed, 0));

  OfflineTrainResult result;
  result.iterations = iterations;
  double block_loss = 0.0;
  double block_td = 0.0;
  long long block_count = 0;
  for (long long k = 1; k <= iterations; ++k) {
    const AgentStepInfo info = agent.learn(store, rng);
    block_loss += info.loss;
    block_td += info.mean_abs_td;
    ++block_count;
    if (k % config.log_interval == 0) {
      result.diagnostics.push_back({k, block_loss / static_cast<double>(block_count),
                                    block_td / static_cast<double>(block_count)});
      block_loss = block_td = 0.0;
      block_count = 0;
    }
  }
  result.params = agent.online();
  return result;
}

// Per-episode fraction of logged decisions whose action matches the
// parameters' greedy choice on the logged state.
inline std::vector<double> agreement_rates(const std::vector<OfflineEpisode>& episodes,
                                           const QNetworkParams& params, bool aware) {
  std::vector<double> rates;
  rates.reserve(episodes.size());
  for (const OfflineEpisode& episode : episodes) {
    if (episode.record.transitions.empty()) {
      throw std::invalid_argument("agreement_rates: episode has no transitions");
    }
    std::size_t matches = 0;
    for (const Transition& t : episode.record.transitions) {
      const Vector q = forward_q(params, state_input(t.state, aware));
      if (argmax_lowest(q) == t.action) ++matches;
    }
    rates.push_back(static_cast<double>(matches) /
                    static_cast<double>(episode.record.transitions.size()));
  }
  return rates;
}

struct CurvePoint {
  double threshold = 0.0;
  std::size_t episodes = 0;  // episodes with agreement >= threshold
  double bad_rate = 0.0;     // bad-outcome rate in that bucket; NaN if empty
};

inline std::vector<CurvePoint> outcome_curve(const std::vector<double>& agreements,
                                             const std::vector<bool>& good,
                                             const std::vector<double>& thresholds) {
  if (thresholds.empty()) throw std::invalid_argument("outcome_curve: empty threshold list");
  if (agreements.size() != good.size()) {
    throw std::invalid_argument("outcome_curve: agreement/outcome length mismatch");
  }
  std::vector<CurvePoint> points;
  points.reserve(thresholds.size());
  for (const double threshold : thresholds) {
    CurvePoint point;
    point.threshold = threshold;
    std::size_t bad = 0;
    for (std::size_t i = 0; i < agreements.size(); ++i) {
      if (agreements[i] >= threshold) {
        ++point.episodes;
        if (!good[i]) ++bad;
      }
    }
    point.bad_rate = point.episodes == 0
                         ? std::numeric_limits<double>::quiet_NaN()
                         : static_cast<double>(bad) / static_cast<double>(point.episodes);
    points.push_back(point);
  }
  return points;
}

inline std::vector<CurvePoint> agreement_outcome_curve(const RunConfig& config,
                                                       const std::vector<OfflineEpisode>& episodes,
                                                       const QNetworkParams& params,
                                                       const std::vector<double>& thresholds) {
  validate(config);
  if (!(params.config == network_config(config))) {
    throw std::invalid_argument(
        "agreement_outcome_curve: checkpoint does not match the configuration");
  }
  const std::vector<double> agreements =
      agreement_rates(episodes, params, time_aware_state(config.variant));
  std::vector<bool> good;
  good.reserve(episodes.size());
  for (const OfflineEpisode& episode : episodes) good.push_back(episode.good);
  return outcome_curve(agreements, good, thresholds);
}

inline std::string curve_csv_text(const std::vector<CurvePoint>& points) {
  std::string text = "threshold,episodes,bad_rate\n";
  for (const CurvePoint& point : points) {
    text += format_number(point.threshold);
    text += ',';
    text += format_number(static_cast<long long>(point.episodes));
    text += ',';
    text += format_number(point.bad_rate);
    text += '\n';
  }
  return text;
}

inline std::string diagnostics_csv_text(const std::vector<OfflineDiagRow>& rows) {
  std::string text = "iteration,mean_loss,mean_abs_td\n";
  for (const OfflineDiagRow& row : rows) {
    text += format_number(row.iteration);
    text += ',';
    text += format_number(row.mean_loss);
    text += ',';
    text += format_number(row.mean_abs_td);
    text += '\n';
  }
  return text;
}

}  // namespace tqn
