#include "strange/trainer/config.hpp"

#include <cmath>

#include "strange/envs/matrix_game.hpp"
#include "strange/envs/pressure_plate.hpp"
#include "strange/errors.hpp"

namespace strange::trainer {

void EnvConfig::validate() const {
  if (kind == "matrix_game") {
    if (k < 1) throw ConfigError("env.k must be positive");
  } else if (kind == "pressure_plate") {
    if (max_steps < 1) throw ConfigError("env.max_steps must be positive");
    if (layout.empty()) throw ConfigError("env.layout must not be empty");
  } else {
    throw ConfigError("unknown env.kind '" + kind + "' (expected matrix_game or pressure_plate)");
  }
}

std::unique_ptr<envs::Environment> make_env(const EnvConfig& config) {
  config.validate();
  if (config.kind == "matrix_game") {
    envs::MatrixGameConfig mg;
    mg.k = config.k;
    return std::make_unique<envs::MatrixGame>(mg);
  }
  return std::make_unique<envs::PressurePlate>(envs::PressurePlateLayout::named(config.layout), config.max_steps);
}

std::string to_string(Exploration e) {
  switch (e) {
    case Exploration::none: return "none";
    case Exploration::sim: return "sim";
    case Exploration::sim_wo_eq: return "sim_wo_eq";
    case Exploration::rnd: return "rnd";
    case Exploration::icm: return "icm";
  }
  return "none";
}

Exploration exploration_from_string(const std::string& name) {
  for (Exploration e : {Exploration::none, Exploration::sim, Exploration::sim_wo_eq, Exploration::rnd,
                        Exploration::icm}) {
    if (to_string(e) == name) return e;
  }
  throw ConfigError("unknown exploration '" + name + "' (expected none, sim, sim_wo_eq, rnd or icm)");
}

exploration::BonusKind bonus_kind(Exploration e) {
  switch (e) {
    case Exploration::none: return exploration::BonusKind::none;
    case Exploration::sim:
    case Exploration::sim_wo_eq: return exploration::BonusKind::sim;
    case Exploration::rnd: return exploration::BonusKind::rnd;
    case Exploration::icm: return exploration::BonusKind::icm;
  }
  return exploration::BonusKind::none;
}

void TrainConfig::validate() const {
  env.validate();
  bonus.validate();
  auto positive = [](auto v, const char* name) {
    if (!(v > 0)) throw ConfigError(std::string(name) + " must be positive");
  };
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ConfigError("alpha must be positive");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in [0, 1)");
  if (!(epsilon_start >= 0.0 && epsilon_start <= 1.0)) throw ConfigError("epsilon_start must lie in [0, 1]");
  if (!(epsilon_end >= 0.0 && epsilon_end <= epsilon_start)) throw ConfigError("epsilon_end must lie in [0, epsilon_start]");
  positive(epsilon_anneal_steps, "epsilon_anneal_steps");
  positive(batch_size, "batch_size");
  positive(target_sync_interval, "target_sync_interval");
  positive(train_interval, "train_interval");
  positive(total_env_steps, "total_env_steps");
  positive(eval_interval, "eval_interval");
  positive(eval_episodes, "eval_episodes");
  positive(buffer_capacity, "buffer_capacity");
  positive(grad_clip, "grad_clip");
  positive(agent_hidden, "agent_hidden");
  positive(mixer_embed, "mixer_embed");
  if (checkpoint_interval < 0) throw ConfigError("checkpoint_interval must be non-negative");
  if (buffer_capacity < batch_size) throw ConfigError("buffer_capacity must be at least batch_size");
  if (exploration == Exploration::sim_wo_eq && use_exploration_q) {
    throw ConfigError("sim_wo_eq has no exploration function; set use_exploration_q = false");
  }
}

bool TrainConfig::has_exploration_q() const { return use_exploration_q && exploration != Exploration::sim_wo_eq; }

bool TrainConfig::goal_uses_mixed_reward() const {
  return !has_exploration_q() && exploration != Exploration::none;
}

nn::OptimizerSettings TrainConfig::optimizer_settings() const {
  nn::OptimizerSettings s;
  s.kind = optimizer;
  s.lr = static_cast<float>(alpha);
  return s;
}

TrainConfig default_config(const std::string& env_kind) {
  TrainConfig c;
  c.env.kind = env_kind;
  if (env_kind == "pressure_plate") {
    c.bonus.beta = 1.0;
    c.buffer_capacity = 2000;
  } else if (env_kind != "matrix_game") {
    throw ConfigError("unknown env.kind '" + env_kind + "' (expected matrix_game or pressure_plate)");
  }
  return c;
}

double epsilon_at(const TrainConfig& config, std::int64_t env_steps) {
  if (env_steps < 0) throw UsageError("epsilon_at: negative step count");
  if (env_steps >= config.epsilon_anneal_steps) return config.epsilon_end;
  const double frac = static_cast<double>(env_steps) / static_cast<double>(config.epsilon_anneal_steps);
  return config.epsilon_start + frac * (config.epsilon_end - config.epsilon_start);
}

}  // namespace strange::trainer
