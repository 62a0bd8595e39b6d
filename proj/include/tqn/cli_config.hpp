#pragma once

// CLI11 bindings for RunConfig: one option per config key, a sectioned
// key-value config file (same grammar canonical_text() emits), and the
// precedence chain flags > config file > environment variable > defaults.

#include <istream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tqn/config.hpp"

namespace tqn {

// Config files group keys under [env]/[agent]/[run] for readability. Keys are
// globally unique, so the section headers carry no routing information; this
// reader accepts the sectioned grammar by flattening section paths before
// option lookup (CLI11 would otherwise route sections to subcommands).
class SectionedConfigReader : public CLI::ConfigBase {
 public:
  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    std::vector<CLI::ConfigItem> items = CLI::ConfigBase::from_config(input);
    for (CLI::ConfigItem& item : items) item.parents.clear();
    return items;
  }
};

// Parse target: enums are bound through their CLI spellings and converted in
// finalize(), everything else binds straight into the RunConfig.
struct CliOptions {
  RunConfig config;
  std::string kind = env_kind_name(RunConfig{}.env_kind);
  std::string variant = variant_name(RunConfig{}.variant);
};

inline void attach_config_options(CLI::App& app, CliOptions& opts) {
  app.set_config("--config", "", "Config file (sectioned key = value; see README)");
  app.config_formatter(std::make_shared<SectionedConfigReader>());
  app.allow_config_extras(false);

  CLI::App* env = app.add_option_group("env", "Environment");
  env->add_option("--kind", opts.kind, "Environment: cartpole or mountaincar")
      ->transform(CLI::IsMember({"cartpole", "mountaincar"}));
  env->add_option("--dt-max", opts.config.dt_max,
                  "Largest drawable interval in substeps (0 = env default: 4 / 32)");
  env->add_option("--substep-cap", opts.config.substep_cap,
                  "Episode length limit in substeps (0 = env default: 200 / 2000)");

  CLI::App* agent = app.add_option_group("agent", "Agent");
  agent->add_option("--variant", opts.variant, "dqn, tstate, tdiscount, or tqn")
      ->transform(CLI::IsMember({"dqn", "tstate", "tdiscount", "tqn"}));
  agent->add_flag("--double", opts.config.double_dqn, "Double Q-learning targets");
  agent->add_flag("--dueling", opts.config.dueling, "Dueling value/advantage streams");
  agent->add_flag("--per", opts.config.prioritized, "Prioritized replay sampling");
  agent->add_option("--history", opts.config.history, "Observations per state window (2 or 3)");
  agent->add_option("--arch", opts.config.arch, "Hidden layers: small, medium, or large")
      ->transform(CLI::IsMember(architecture_menu()));
  agent->add_option("--gamma", opts.config.gamma, "Static per-transition discount");
  agent->add_option("--tau", opts.config.discount.tau, "Temporal discount half-life scale");
  agent->add_option("--belief", opts.config.discount.belief,
                    "Temporal discount base, in open (0, 1)");
  agent->add_option("--epsilon-initial", opts.config.epsilon.initial, "Exploration start");
  agent->add_option("--epsilon-final", opts.config.epsilon.final_value, "Exploration floor");
  agent->add_option("--epsilon-final-iteration", opts.config.epsilon.final_iteration,
                    "Learn iteration where the floor is reached");
  agent->add_option("--soft-update", opts.config.soft_update_rate,
                    "Target-network blend per learn step");
  agent->add_option("--lr", opts.config.learning_rate, "Adam learning rate");
  agent->add_option("--batch", opts.config.batch_size, "Minibatch size");
  agent->add_option("--replay-capacity", opts.config.replay_capacity, "Replay buffer slots");
  agent->add_option("--replay-start", opts.config.replay_start,
                    "Stored transitions required before learning starts");

  CLI::App* run = app.add_option_group("run", "Run");
  run->add_option("--episode-cap", opts.config.episode_cap,
                  "Training episode limit (-1 = env default: 5000 / 10000)");
  run->add_option("--eval-episodes", opts.config.eval_episodes, "Greedy evaluation episodes");
  run->add_option("--seeds", opts.config.seeds, "Number of seeds to train");
  run->add_option("--seed-base", opts.config.seed_base, "First seed; seed i is seed-base + i");
  run->add_option("--out", opts.config.out_dir, "Output directory for artifacts")
      ->envname("TQN_OUTPUT_ROOT");
  run->add_option("--log-interval", opts.config.log_interval,
                  "Offline diagnostics cadence, in learn iterations");
}

// Converts the string-bound enums and checks every invariant; call after parse.
inline RunConfig finalize_config(CliOptions& opts) {
  opts.config.env_kind = env_kind_from_name(opts.kind);
  opts.config.variant = variant_from_name(opts.variant);
  validate(opts.config);
  return opts.config;
}

}  // namespace tqn
