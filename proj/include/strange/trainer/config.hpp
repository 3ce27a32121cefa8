#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "strange/envs/env.hpp"
#include "strange/exploration/bonus.hpp"
#include "strange/marl/networks.hpp"
#include "strange/nn/optim.hpp"

namespace strange::trainer {

struct EnvConfig {
  std::string kind = "matrix_game";  ///< matrix_game | pressure_plate
  int k = 16;                        ///< matrix game horizon
  std::string layout = "small2";     ///< pressure plate layout name or file
  int max_steps = 250;               ///< pressure plate episode limit

  void validate() const;
};

std::unique_ptr<envs::Environment> make_env(const EnvConfig& config);

/// Exploration scheme. `sim_wo_eq` trains the goal function on the mixed
/// reward and never allocates the exploration function.
enum class Exploration { none, sim, sim_wo_eq, rnd, icm };

std::string to_string(Exploration e);
Exploration exploration_from_string(const std::string& name);
exploration::BonusKind bonus_kind(Exploration e);

struct TrainConfig {
  EnvConfig env;
  marl::MixerKind mixer = marl::MixerKind::qmix;
  Exploration exploration = Exploration::sim;
  /// Collect with ε-greedy over a separate exploration function ω trained
  /// on the mixed reward. When false the goal function collects and, if a
  /// bonus is active, is itself trained on the mixed reward.
  bool use_exploration_q = true;
  exploration::BonusConfig bonus;
  bool shared_sim = true;

  double alpha = 5e-4;
  double gamma = 0.99;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  std::int64_t epsilon_anneal_steps = 50000;
  int batch_size = 32;
  int target_sync_interval = 200;  ///< gradient phases between θ⁻ syncs
  int train_interval = 1;          ///< gradient phases per collected episode
  std::int64_t total_env_steps = 200000;
  std::int64_t eval_interval = 2000;
  int eval_episodes = 1;
  std::uint64_t seed = 1;
  int buffer_capacity = 5000;
  double grad_clip = 10.0;
  nn::OptimizerKind optimizer = nn::OptimizerKind::adam;
  int agent_hidden = 32;
  int mixer_embed = 32;
  /// Env-step period of automatic checkpoints; 0 disables them.
  std::int64_t checkpoint_interval = 0;

  /// Throws ConfigError naming the first offending field.
  void validate() const;
  /// Whether a separate exploration function ω is allocated.
  bool has_exploration_q() const;
  /// Whether the goal function's TD target uses the mixed reward.
  bool goal_uses_mixed_reward() const;
  nn::OptimizerSettings optimizer_settings() const;
};

/// Defaults for an environment kind: β = 0.1 and capacity 5000 for the
/// matrix game, β = 1.0 and capacity 2000 for pressure plate.
TrainConfig default_config(const std::string& env_kind);

/// Linear anneal from ε_start to ε_end over the anneal steps, then ε_end.
double epsilon_at(const TrainConfig& config, std::int64_t env_steps);

}  // namespace strange::trainer
