// tqn: train, evaluate, log, and analyze time-aware Q-learning agents on
// irregular-interval classic-control tasks.
//
// Artifacts land in the output directory named by config fingerprint + seed;
// rerunning with the same pair reproduces them byte for byte. Exit codes:
// 0 success, 1 usage/config error, 2 runtime or training failure.

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "tqn/checkpoint.hpp"
#include "tqn/cli_config.hpp"
#include "tqn/harness.hpp"
#include "tqn/offline.hpp"

namespace fs = std::filesystem;

namespace {

std::string seed_tag(std::uint64_t seed) {
  return "_seed" + tqn::format_number(static_cast<unsigned long long>(seed));
}

// Creates the output directory and drops the resolved-config echo into it.
fs::path prepare_out_dir(const tqn::RunConfig& config) {
  const fs::path dir(config.out_dir);
  fs::create_directories(dir);
  const std::string hash = tqn::config_hash(config);
  tqn::write_file((dir / ("config_" + hash + ".ini")).string(), tqn::canonical_text(config));
  std::cout << "config " << hash << " -> " << dir.string() << "\n";
  return dir;
}

int cmd_train(const tqn::RunConfig& config) {
  const fs::path dir = prepare_out_dir(config);
  const std::string hash = tqn::config_hash(config);

  nlohmann::ordered_json per_seed = nlohmann::ordered_json::array();
  std::vector<double> solve_episodes;
  std::vector<double> eval_means;
  std::vector<std::uint64_t> aborted_seeds;

  for (int i = 0; i < config.seeds; ++i) {
    const std::uint64_t seed = config.seed_base + static_cast<std::uint64_t>(i);
    const tqn::TrainResult result = tqn::train_online(config, seed);
    tqn::write_training_csv((dir / ("train_" + hash + seed_tag(seed) + ".csv")).string(),
                            result.summary);
    tqn::save_checkpoint(dir / ("checkpoint_" + hash + seed_tag(seed) + ".ckpt"), result.params,
                         seed, result.summary.learn_iterations);

    nlohmann::ordered_json row{{"seed", seed}};
    if (result.summary.aborted) {
      aborted_seeds.push_back(seed);
      row["solved_episode"] = nullptr;
      row["eval_mean"] = nullptr;
      row["eval_stddev"] = nullptr;
      row["aborted"] = result.summary.abort_reason;
      std::cout << "seed " << seed << ": aborted: " << result.summary.abort_reason << "\n";
    } else {
      const tqn::EvalSummary eval =
          tqn::evaluate_policy(config, result.params, config.eval_episodes, seed);
      tqn::write_eval_csv((dir / ("eval_" + hash + seed_tag(seed) + ".csv")).string(), eval);
      eval_means.push_back(eval.mean);
      if (result.summary.solved_episode.has_value()) {
        const auto episode = static_cast<std::uint64_t>(*result.summary.solved_episode);
        row["solved_episode"] = episode;
        solve_episodes.push_back(static_cast<double>(episode));
        std::cout << "seed " << seed << ": solved at episode " << episode;
      } else {
        row["solved_episode"] = nullptr;
        std::cout << "seed " << seed << ": unsolved after " << result.summary.scores.size()
                  << " episodes";
      }
      row["eval_mean"] = eval.mean;
      row["eval_stddev"] = eval.stddev;
      std::cout << ", eval " << eval.mean << " +- " << eval.stddev << "\n";
    }
    per_seed.push_back(std::move(row));
  }

  const tqn::EvalSummary solve_stats = tqn::summarize_scores(solve_episodes);
  const tqn::EvalSummary score_stats = tqn::summarize_scores(eval_means);
  nlohmann::ordered_json aggregate{
      {"config_hash", hash},
      {"environment", env_kind_name(config.env_kind)},
      {"variant", variant_name(config.variant)},
      {"seeds", per_seed},
      {"solve_episode",
       {{"count", solve_episodes.size()},
        {"mean", solve_episodes.empty() ? nlohmann::ordered_json(nullptr)
                                        : nlohmann::ordered_json(solve_stats.mean)},
        {"stddev", solve_episodes.empty() ? nlohmann::ordered_json(nullptr)
                                          : nlohmann::ordered_json(solve_stats.stddev)}}},
      {"eval_score",
       {{"count", eval_means.size()},
        {"mean", eval_means.empty() ? nlohmann::ordered_json(nullptr)
                                    : nlohmann::ordered_json(score_stats.mean)},
        {"stddev", eval_means.empty() ? nlohmann::ordered_json(nullptr)
                                      : nlohmann::ordered_json(score_stats.stddev)}}},
      {"aborted_seeds", aborted_seeds}};
  const fs::path aggregate_path = dir / ("aggregate_" + hash + ".json");
  tqn::write_file(aggregate_path.string(), aggregate.dump(2) + "\n");
  std::cout << "aggregate: " << aggregate_path.string() << "\n";

  if (!aborted_seeds.empty()) {
    std::cerr << "training failure: " << aborted_seeds.size()
              << " seed(s) aborted; artifacts above are partial\n";
    return 2;
  }
  return 0;
}

int cmd_eval(const tqn::RunConfig& config, const std::string& checkpoint_path) {
  // Load and evaluate before creating any output, so a bad checkpoint or a
  // config mismatch leaves no partial artifacts behind.
  const tqn::Checkpoint checkpoint = tqn::load_checkpoint(checkpoint_path);
  const tqn::EvalSummary eval =
      tqn::evaluate_policy(config, checkpoint.params, config.eval_episodes, config.seed_base);

  const fs::path dir = prepare_out_dir(config);
  const std::string hash = tqn::config_hash(config);
  const fs::path csv = dir / ("eval_" + hash + seed_tag(config.seed_base) + ".csv");
  tqn::write_eval_csv(csv.string(), eval);
  std::cout << "eval over " << eval.scores.size() << " episodes: mean " << eval.mean << ", stddev "
            << eval.stddev << "\n"
            << "eval csv: " << csv.string() << "\n";
  return 0;
}

int cmd_gen_offline(const tqn::RunConfig& config, int episodes,
                    const std::string& checkpoint_path, double behavior_epsilon) {
  tqn::BehaviorPolicy policy;
  policy.epsilon = behavior_epsilon;
  if (!checkpoint_path.empty()) policy.params = tqn::load_checkpoint(checkpoint_path).params;
  const std::vector<tqn::OfflineEpisode> dataset =
      tqn::generate_offline(config, policy, episodes, config.seed_base);

  const fs::path dir = prepare_out_dir(config);
  const std::string hash = tqn::config_hash(config);
  const fs::path path = dir / ("offline_" + hash + seed_tag(config.seed_base) + ".ndjson");
  tqn::write_offline_dataset(path.string(), dataset);
  std::size_t good = 0;
  for (const tqn::OfflineEpisode& episode : dataset) good += episode.good ? 1 : 0;
  std::cout << dataset.size() << " episodes (" << good << " good) -> " << path.string() << "\n";
  return 0;
}

int cmd_train_offline(const tqn::RunConfig& config, const std::string& data_path,
                      long long iterations) {
  const std::vector<tqn::OfflineEpisode> dataset =
      tqn::load_offline_dataset(data_path, config.history);
  const tqn::OfflineTrainResult result =
      tqn::train_offline(config, dataset, iterations, config.seed_base);

  const fs::path dir = prepare_out_dir(config);
  const std::string hash = tqn::config_hash(config);
  const fs::path diag = dir / ("offline_train_" + hash + seed_tag(config.seed_base) + ".csv");
  tqn::write_file(diag.string(), tqn::diagnostics_csv_text(result.diagnostics));
  const fs::path ckpt = dir / ("checkpoint_offline_" + hash + seed_tag(config.seed_base) + ".ckpt");
  tqn::save_checkpoint(ckpt, result.params, config.seed_base, result.iterations);
  std::cout << iterations << " iterations over " << dataset.size() << " logged episodes\n"
            << "diagnostics: " << diag.string() << "\n"
            << "checkpoint: " << ckpt.string() << "\n";
  return 0;
}

int cmd_curve(const tqn::RunConfig& config, const std::string& data_path,
              const std::string& checkpoint_path, const std::vector<double>& thresholds) {
  const std::vector<tqn::OfflineEpisode> dataset =
      tqn::load_offline_dataset(data_path, config.history);
  const tqn::Checkpoint checkpoint = tqn::load_checkpoint(checkpoint_path);
  const std::vector<tqn::CurvePoint> points =
      tqn::agreement_outcome_curve(config, dataset, checkpoint.params, thresholds);

  const fs::path dir = prepare_out_dir(config);
  const fs::path path = dir / ("curve_" + tqn::config_hash(config) + ".csv");
  tqn::write_file(path.string(), tqn::curve_csv_text(points));
  for (const tqn::CurvePoint& point : points) {
    std::cout << "threshold " << point.threshold << ": " << point.episodes
              << " episodes, bad rate " << point.bad_rate << "\n";
  }
  std::cout << "curve csv: " << path.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Time-aware Q-learning on irregular-interval classic control"};
  app.require_subcommand(1);

  // Config options live on the top-level app (the only place CLI11 processes
  // a config file); subcommands use fallthrough so the shared flags can be
  // written after the subcommand name.
  tqn::CliOptions opts;
  tqn::attach_config_options(app, opts);
  int status = 0;

  CLI::App* train = app.add_subcommand(
      "train", "Train one agent per seed; writes CSVs, checkpoints, and an aggregate JSON");
  train->fallthrough();
  train->callback([&] { status = cmd_train(tqn::finalize_config(opts)); });

  CLI::App* eval = app.add_subcommand("eval", "Greedy evaluation of a saved checkpoint");
  eval->fallthrough();
  std::string eval_checkpoint;
  eval->add_option("--checkpoint", eval_checkpoint, "Checkpoint file to evaluate")->required();
  eval->callback([&] { status = cmd_eval(tqn::finalize_config(opts), eval_checkpoint); });

  CLI::App* gen = app.add_subcommand(
      "gen-offline", "Roll out a behavior policy and write an NDJSON transition log");
  gen->fallthrough();
  int gen_episodes = 1000;
  std::string gen_checkpoint;
  double behavior_epsilon = 0.5;
  gen->add_option("--episodes", gen_episodes, "Episodes to roll out");
  gen->add_option("--checkpoint", gen_checkpoint,
                  "Behavior-policy checkpoint (omit for uniform random)");
  gen->add_option("--behavior-epsilon", behavior_epsilon,
                  "Exploration mixed into the checkpoint policy");
  gen->callback([&] {
    status = cmd_gen_offline(tqn::finalize_config(opts), gen_episodes, gen_checkpoint,
                             behavior_epsilon);
  });

  CLI::App* offline = app.add_subcommand(
      "train-offline", "Train from a logged NDJSON dataset; no environment contact");
  offline->fallthrough();
  std::string offline_data;
  long long offline_iterations = 10000;
  offline->add_option("--data", offline_data, "NDJSON dataset to train from")->required();
  offline->add_option("--iterations", offline_iterations, "Gradient steps to run");
  offline->callback([&] {
    status = cmd_train_offline(tqn::finalize_config(opts), offline_data, offline_iterations);
  });

  CLI::App* curve = app.add_subcommand(
      "curve", "Agreement-vs-outcome table for a checkpoint against a logged dataset");
  curve->fallthrough();
  std::string curve_data;
  std::string curve_checkpoint;
  std::vector<double> thresholds{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  curve->add_option("--data", curve_data, "NDJSON dataset to score")->required();
  curve->add_option("--checkpoint", curve_checkpoint, "Checkpoint whose greedy policy is compared")
      ->required();
  curve->add_option("--thresholds", thresholds, "Comma-separated agreement thresholds")
      ->delimiter(',');
  curve->callback([&] {
    status = cmd_curve(tqn::finalize_config(opts), curve_data, curve_checkpoint, thresholds);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const tqn::TrainingError& e) {
    std::cerr << "training failure: " << e.what() << "\n";
    return 2;
  } catch (const std::logic_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return status;
}
