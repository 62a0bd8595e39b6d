#pragma once

// Training and evaluation loops: the decision-level episode pump (window
// maintenance + transition recording), online training with solve detection,
// greedy/random policy evaluation on fresh per-episode seeds, and the CSV
// artifact writers.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tqn/agent.hpp"
#include "tqn/config.hpp"
#include "tqn/envs.hpp"
#include "tqn/replay.hpp"
#include "tqn/text.hpp"

namespace tqn {

inline constexpr std::size_t kSolveWindow = 100;

inline double solve_threshold(EnvKind kind) {
  return kind == EnvKind::cartpole ? 195.0 : -110.0;
}

// First index i >= 99 whose trailing-100 mean reaches the threshold.
inline std::optional<std::size_t> solved_at(const std::vector<double>& scores, double threshold) {
  if (scores.size() < kSolveWindow) return std::nullopt;
  for (std::size_t i = kSolveWindow - 1; i < scores.size(); ++i) {
    double sum = 0.0;
    for (std::size_t j = i + 1 - kSolveWindow; j <= i; ++j) sum += scores[j];
    if (sum / static_cast<double>(kSolveWindow) >= threshold) return i;
  }
  return std::nullopt;
}

inline std::optional<std::size_t> is_solved(const std::vector<double>& scores, EnvKind kind) {
  return solved_at(scores, solve_threshold(kind));
}

struct EpisodeRecord {
  std::vector<Transition> transitions;
  double score = 0.0;      // sum of decision rewards
  long long substeps = 0;  // base-environment steps actually consumed
  bool truncated = false;  // ended by step cap rather than a true terminal
  std::uint64_t seed = 0;  // RNG seed that produced the episode
};

namespace detail {

// One episode at decision granularity. Maintains the recent-observation
// window, asks `select` for an action, and hands every finished transition
// to `on_transition` (which may learn). Consecutive transitions chain:
// t.next_state is bitwise the following transition's state.
template <class SelectFn, class OnTransition>
EpisodeRecord episode_loop(IntervalEnv& env, int history, bool aware, Rng& rng, SelectFn&& select,
                           OnTransition&& on_transition) {
  EpisodeRecord record;
  auto [first_obs, first_dt] = env.reset(rng);
  std::vector<TimedObservation> recent{std::move(first_obs)};
  int dt_next = first_dt;
  while (true) {
    StateWindow window = make_window(recent, history, static_cast<double>(dt_next));
    const Vector input = state_input(window, aware);
    const int action = select(input);
    const IntervalStepResult step = env.step(action, rng);

    recent.push_back(step.observation);
    if (recent.size() > static_cast<std::size_t>(history)) recent.erase(recent.begin());

    Transition t;
    t.state = std::move(window);
    t.action = action;
    t.reward = step.reward;
    t.dt = static_cast<double>(step.dt_consumed);
    t.next_state = make_window(recent, history, static_cast<double>(step.dt_next));
    t.terminal = step.terminal;
    t.truncated = step.truncated;

    record.score += step.reward;
    record.substeps += step.dt_consumed;
    record.transitions.push_back(std::move(t));
    on_transition(record.transitions.back());

    if (step.terminal || step.truncated) {
      record.truncated = step.truncated;
      break;
    }
    dt_next = step.dt_next;
  }
  return record;
}

}  // namespace detail

// Greedy/exploratory rollout of fixed parameters; no learning.
inline EpisodeRecord rollout_episode(IntervalEnv& env, const QNetworkParams& params, int history,
                                     bool aware, double epsilon, Rng& rng) {
  return detail::episode_loop(
      env, history, aware, rng,
      [&](const Vector& input) { return select_action(params, input, epsilon, rng); },
      [](const Transition&) {});
}

// One training episode: transitions feed the replay store and, once the
// store reaches `replay_start`, every decision triggers one learning step.
inline EpisodeRecord train_episode(IntervalEnv& env, Agent& agent, ReplayStore& replay,
                                   std::size_t replay_start, Rng& rng,
                                   std::vector<AgentStepInfo>* learn_log = nullptr) {
  return detail::episode_loop(
      env, agent.config().history, agent.time_aware(), rng,
      [&](const Vector& input) { return agent.act(input, agent.epsilon(), rng); },
      [&](const Transition& t) {
        replay.push(t);
        if (replay.size() >= replay_start) {
          const AgentStepInfo info = agent.learn(replay, rng);
          if (learn_log) learn_log->push_back(info);
        }
      });
}

struct RunSummary {
  std::vector<double> scores;       // per episode
  std::vector<double> epsilons;     // exploration rate at episode start
  std::vector<double> mean_losses;  // mean loss across the episode's learn steps (0 if none)
  std::optional<std::size_t> solved_episode;
  long long learn_iterations = 0;
  double wall_clock_seconds = 0.0;
  std::string config_hash;
  std::uint64_t seed = 0;
  bool aborted = false;      // training stopped on a non-finite loss
  std::string abort_reason;
};

struct TrainResult {
  RunSummary summary;
  QNetworkParams params;  // final online network
};

// splitmix64 of (seed, stream): decorrelated deterministic sub-seeds so the
// environment stream, initializer, and per-episode evaluation streams never
// alias.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + stream * 0x9E3779B97F4A7C15ULL + 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t kEvalStream = 1ULL << 32;
inline constexpr std::uint64_t kOfflineStream = 2ULL << 32;

// Runs episodes until the trailing-100 mean crosses the solve threshold or
// the episode cap is reached. Fully deterministic for a fixed (config, seed).
inline TrainResult train_online(const RunConfig& config, std::uint64_t seed) {
  validate(config);
  const auto started = std::chrono::steady_clock::now();

  IntervalEnv env(config.env_kind, resolved_dt_max(config), resolved_substep_cap(config));
  Agent agent(agent_config(config), network_config(config), derive_seed(seed, 1));
  ReplayStore replay(static_cast<std::size_t>(config.replay_capacity), config.prioritized,
                     static_cast<std::size_t>(config.replay_start));
  Rng rng(derive_seed(seed, 0));

  RunSummary summary;
  summary.config_hash = config_hash(config);
  summary.seed = seed;
  const double threshold = solve_threshold(config.env_kind);
  const long long cap = resolved_episode_cap(config);

  for (long long episode = 0; episode < cap; ++episode) {
    summary.epsilons.push_back(agent.epsilon());
    std::vector<AgentStepInfo> infos;
    EpisodeRecord record;
    try {
      record = train_episode(env, agent, replay, static_cast<std::size_t>(config.replay_start),
                             rng, &infos);
    } catch (const TrainingError& error) {
      summary.aborted = true;
      summary.abort_reason = error.what();
      summary.epsilons.pop_back();  // the episode never completed
      break;
    }
    summary.scores.push_back(record.score);
    double mean_loss = 0.0;
    for (const AgentStepInfo& info : infos) mean_loss += info.loss;
    summary.mean_losses.push_back(infos.empty() ? 0.0
                                                : mean_loss / static_cast<double>(infos.size()));

    // Only the newest window can newly satisfy the solve rule.
    if (summary.scores.size() >= kSolveWindow) {
      double sum = 0.0;
      for (std::size_t j = summary.scores.size() - kSolveWindow; j < summary.scores.size(); ++j) {
        sum += summary.scores[j];
      }
      if (sum / static_cast<double>(kSolveWindow) >= threshold) {
        summary.solved_episode = summary.scores.size() - 1;
        break;
      }
    }
  }

  summary.learn_iterations = agent.iterations();
  summary.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return {std::move(summary), agent.online()};
}

struct EvalSummary {
  std::vector<double> scores;
  double mean = 0.0;
  double stddev = 0.0;  // population standard deviation
};

inline EvalSummary summarize_scores(std::vector<double> scores) {
  EvalSummary summary;
  summary.scores = std::move(scores);
  if (summary.scores.empty()) return summary;
  for (const double s : summary.scores) summary.mean += s;
  summary.mean /= static_cast<double>(summary.scores.size());
  for (const double s : summary.scores) {
    const double d = s - summary.mean;
    summary.stddev += d * d;
  }
  summary.stddev = std::sqrt(summary.stddev / static_cast<double>(summary.scores.size()));
  return summary;
}

// Greedy evaluation: `episodes` rollouts, each on its own fresh seed stream.
inline EvalSummary evaluate_policy(const RunConfig& config, const QNetworkParams& params,
                                   int episodes, std::uint64_t seed) {
  validate(config);
  if (episodes < 1) throw std::invalid_argument("evaluate_policy: need at least one episode");
  if (!(params.config == network_config(config))) {
    throw std::invalid_argument("evaluate_policy: checkpoint does not match the configuration");
  }
  const bool aware = time_aware_state(config.variant);
  std::vector<double> scores;
  scores.reserve(static_cast<std::size_t>(episodes));
  for (int e = 0; e < episodes; ++e) {
    Rng rng(derive_seed(seed, kEvalStream + static_cast<std::uint64_t>(e)));
    IntervalEnv env(config.env_kind, resolved_dt_max(config), resolved_substep_cap(config));
    scores.push_back(
        rollout_episode(env, params, config.history, aware, 0.0, rng).score);
  }
  return summarize_scores(std::move(scores));
}

// Uniform-random baseline under the same interval dynamics.
inline EvalSummary evaluate_random(const RunConfig& config, int episodes, std::uint64_t seed) {
  validate(config);
  if (episodes < 1) throw std::invalid_argument("evaluate_random: need at least one episode");
  const QNetworkParams params = make_zero_network(network_config(config));
  const bool aware = time_aware_state(config.variant);
  std::vector<double> scores;
  scores.reserve(static_cast<std::size_t>(episodes));
  for (int e = 0; e < episodes; ++e) {
    Rng rng(derive_seed(seed, kEvalStream + static_cast<std::uint64_t>(e)));
    IntervalEnv env(config.env_kind, resolved_dt_max(config), resolved_substep_cap(config));
    scores.push_back(
        rollout_episode(env, params, config.history, aware, 1.0, rng).score);
  }
  return summarize_scores(std::move(scores));
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << content;
  out.flush();
  if (!out) throw std::runtime_error("failed while writing: " + path);
}

inline std::string training_csv_text(const RunSummary& summary) {
  std::string text = "episode,score,epsilon,mean_loss\n";
  for (std::size_t i = 0; i < summary.scores.size(); ++i) {
    text += format_number(static_cast<long long>(i));
    text += ',';
    text += format_number(summary.scores[i]);
    text += ',';
    text += format_number(summary.epsilons[i]);
    text += ',';
    text += format_number(summary.mean_losses[i]);
    text += '\n';
  }
  return text;
}

inline void write_training_csv(const std::string& path, const RunSummary& summary) {
  write_file(path, training_csv_text(summary));
}

inline std::string eval_csv_text(const EvalSummary& summary) {
  std::string text = "episode,score\n";
  for (std::size_t i = 0; i < summary.scores.size(); ++i) {
    text += format_number(static_cast<long long>(i));
    text += ',';
    text += format_number(summary.scores[i]);
    text += '\n';
  }
  return text;
}

inline void write_eval_csv(const std::string& path, const EvalSummary& summary) {
  write_file(path, eval_csv_text(summary));
}

}  // namespace tqn
