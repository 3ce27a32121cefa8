#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <vector>

#include "strange/envs/env.hpp"
#include "strange/exploration/bonus.hpp"
#include "strange/marl/networks.hpp"
#include "strange/nn/optim.hpp"
#include "strange/replay/replay.hpp"
#include "strange/trainer/config.hpp"

namespace strange::trainer {

/// One evaluation point. Optional fields are absent when the quantity does
/// not exist for the run (no bonus, no exploration function) or no gradient
/// phase happened since the previous row.
struct MetricsRow {
  std::int64_t env_steps = 0;
  std::int64_t episodes = 0;
  std::optional<double> train_loss_goal;
  std::optional<double> train_loss_exp;
  std::optional<double> mean_r_int;
  double epsilon = 0.0;
  double eval_return_mean = 0.0;
  double eval_episode_length_mean = 0.0;
  double eval_win_or_solve_rate = 0.0;
  /// Batch mean of Q_tot at the taken actions for θ and ω.
  std::optional<double> q_goal_mean;
  std::optional<double> q_exp_mean;
};

struct EvalResult {
  double mean_return = 0.0;
  double mean_length = 0.0;
  double solve_rate = 0.0;
};

/// Greedy rollouts of the goal function; touches neither parameters nor
/// any training state.
EvalResult evaluate(const marl::JointQ& goal, envs::Environment& env, int n_episodes, nn::Rng& rng);

struct PhaseStats {
  double loss_goal = 0.0;
  std::optional<double> loss_exp;
  std::optional<double> mean_r_int;
  double q_goal = 0.0;
  std::optional<double> q_exp;
};

/// Networks, optimizers and the gradient phase.
class Learner {
 public:
  Learner(const envs::EnvSpec& spec, const TrainConfig& config, nn::Rng& init_rng);

  /// One gradient phase on a sampled batch. With an exploration function:
  /// θ step on r_ext, bonus computed and ψ step, ω step on r_ext + β·r_int.
  /// Without: bonus and ψ step first (if any), then θ step on the mixed
  /// (or extrinsic) reward. Syncs θ⁻ every `target_sync_interval` phases.
  /// Throws DivergenceError when a loss is not finite.
  PhaseStats train_phase(const replay::MiniBatch& batch);

  /// Network that collects experience: ω when allocated, else θ.
  const marl::JointQ& behavior() const { return exploration ? *exploration : goal; }

  void save(nn::CheckpointWriter& out) const;
  void load(nn::CheckpointReader& in);

  marl::JointQ goal;
  marl::JointQ target;
  std::optional<marl::JointQ> exploration;
  std::unique_ptr<exploration::BonusModule> bonus;
  nn::Optimizer goal_optimizer;
  nn::Optimizer exp_optimizer;
  std::uint64_t train_steps = 0;
  std::uint64_t target_syncs = 0;

 private:
  TrainConfig config_;
};

/// Collected episode plus its return and whether it solved the task.
struct Rollout {
  replay::EpisodeRecord episode;
  double episode_return = 0.0;
  bool solved = false;
};

/// Runs one episode with ε-greedy actions from `policy`.
Rollout collect_episode(const marl::JointQ& policy, envs::Environment& env, double epsilon, nn::Rng& env_rng,
                        nn::Rng& action_rng);

/// Whole training run state: learner, replay memory, random streams,
/// counters and pending metric accumulators.
class Trainer {
 public:
  explicit Trainer(TrainConfig config);

  bool done() const { return env_steps_ >= config_.total_env_steps; }
  /// Collects one episode, runs its gradient phases and any evaluation
  /// points it crossed.
  void run_episode();
  /// Runs until the step budget is spent. `on_row` sees every new row;
  /// `on_checkpoint` is called whenever a checkpoint is due.
  void run(const std::function<void(const MetricsRow&)>& on_row = {},
           const std::function<void(const Trainer&)>& on_checkpoint = {});

  const std::vector<MetricsRow>& rows() const { return rows_; }
  const TrainConfig& config() const { return config_; }
  const Learner& learner() const { return learner_; }
  Learner& learner() { return learner_; }
  const replay::ReplayMemory& memory() const { return memory_; }
  std::int64_t env_steps() const { return env_steps_; }
  std::int64_t episodes() const { return episodes_; }

  /// Full run state; loading requires a Trainer built from the same config.
  void save(std::ostream& os) const;
  void load(std::istream& is);

 private:
  void emit_row();

  TrainConfig config_;
  std::unique_ptr<envs::Environment> env_;
  std::unique_ptr<envs::Environment> eval_env_;
  envs::EnvSpec spec_;
  nn::Rng init_rng_;
  Learner learner_;
  replay::ReplayMemory memory_;
  nn::Rng env_rng_;
  nn::Rng action_rng_;
  nn::Rng sample_rng_;
  nn::Rng eval_rng_;
  std::int64_t env_steps_ = 0;
  std::int64_t episodes_ = 0;
  std::int64_t next_eval_ = 0;
  std::int64_t next_checkpoint_ = 0;
  bool checkpoint_due_ = false;

  struct Accumulator {
    double sum = 0.0;
    std::int64_t count = 0;
    void add(double v) { sum += v; ++count; }
    std::optional<double> mean() const { return count ? std::optional<double>(sum / count) : std::nullopt; }
  };
  Accumulator loss_goal_, loss_exp_, r_int_, q_goal_, q_exp_;
  std::vector<MetricsRow> rows_;
};

/// Convenience wrapper: a fresh Trainer run to completion.
std::vector<MetricsRow> run_training(const TrainConfig& config);

}  // namespace strange::trainer
