#include "strange/trainer/trainer.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>

#include "strange/errors.hpp"
#include "strange/marl/policy.hpp"
#include "strange/marl/td.hpp"

namespace strange::trainer {

namespace {

void check_finite(double v, const char* what, std::uint64_t step) {
  if (!std::isfinite(v)) {
    throw DivergenceError(std::string(what) + " is not finite at gradient phase " + std::to_string(step) +
                          "; lower alpha or check the reward scale");
  }
}

double masked_mean(const nn::Tensor& values, const nn::Tensor& mask) {
  double sum = 0.0, count = 0.0;
  for (std::size_t k = 0; k < values.size(); ++k) {
    sum += static_cast<double>(values[k]) * mask[k];
    count += mask[k];
  }
  return count > 0 ? sum / count : 0.0;
}

std::string hex(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

double unhex(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw IoError("checkpoint: malformed number '" + s + "'");
  return v;
}

std::string opt_hex(const std::optional<double>& v) { return v ? hex(*v) : "-"; }
std::optional<double> opt_unhex(const std::string& s) {
  if (s == "-") return std::nullopt;
  return unhex(s);
}

}  // namespace

// ---- evaluation and collection --------------------------------------------

EvalResult evaluate(const marl::JointQ& goal, envs::Environment& env, int n_episodes, nn::Rng& rng) {
  if (n_episodes < 1) throw UsageError("evaluate: n_episodes must be positive");
  const int n = env.spec().n_agents;
  EvalResult out;
  for (int e = 0; e < n_episodes; ++e) {
    envs::StepResult step = env.reset(rng);
    nn::Tensor hidden = marl::initial_hidden(goal.agent);
    std::vector<int> last(static_cast<std::size_t>(n), -1);
    double ret = 0.0;
    int length = 0;
    while (!step.terminal) {
      marl::JointAction ja = marl::greedy_joint_action(goal, step.observations, last, hidden);
      step = env.step(ja.actions);
      ret += step.reward;
      ++length;
      last = std::move(ja.actions);
      hidden = std::move(ja.hidden);
    }
    out.mean_return += ret;
    out.mean_length += length;
    out.solve_rate += env.solved() ? 1.0 : 0.0;
  }
  out.mean_return /= n_episodes;
  out.mean_length /= n_episodes;
  out.solve_rate /= n_episodes;
  return out;
}

Rollout collect_episode(const marl::JointQ& policy, envs::Environment& env, double epsilon, nn::Rng& env_rng,
                        nn::Rng& action_rng) {
  Rollout out;
  envs::StepResult step = env.reset(env_rng);
  nn::Tensor hidden = marl::initial_hidden(policy.agent);
  std::vector<int> last(static_cast<std::size_t>(env.spec().n_agents), -1);
  while (!step.terminal) {
    marl::JointAction ja = marl::epsilon_greedy_joint_action(policy, step.observations, last, hidden, epsilon, action_rng);
    replay::Transition tr;
    tr.obs = step.observations;
    tr.state = step.state;
    tr.actions = ja.actions;
    step = env.step(ja.actions);
    tr.r_ext = step.reward;
    tr.next_obs = step.observations;
    tr.next_state = step.state;
    tr.terminal = step.terminal;
    out.episode.push_back(std::move(tr));
    out.episode_return += step.reward;
    last = std::move(ja.actions);
    hidden = std::move(ja.hidden);
  }
  out.solved = env.solved();
  return out;
}

// ---- learner ---------------------------------------------------------------

Learner::Learner(const envs::EnvSpec& spec, const TrainConfig& config, nn::Rng& init_rng)
    : goal_optimizer(config.optimizer_settings()), exp_optimizer(config.optimizer_settings()), config_(config) {
  config.validate();
  const marl::NetworkSizes sizes{config.agent_hidden, config.mixer_embed};
  goal = marl::JointQ(marl::QRole::goal, spec, config.mixer, sizes, init_rng);
  target = marl::JointQ(marl::QRole::goal_target, spec, config.mixer, sizes, init_rng);
  marl::sync_target(goal, target);
  if (config.has_exploration_q()) {
    exploration.emplace(marl::QRole::exploration, spec, config.mixer, sizes, init_rng);
  }
  bonus = exploration::make_bonus(bonus_kind(config.exploration), spec, config.bonus, config.shared_sim,
                                  config.optimizer_settings(), config.grad_clip, init_rng);
}

PhaseStats Learner::train_phase(const replay::MiniBatch& batch) {
  const float gamma = static_cast<float>(config_.gamma);
  PhaseStats stats;
  const nn::ParameterList theta = goal.parameters();
  // θ⁻ is fixed within a phase, so both targets share one unroll.
  const marl::TargetUnroll target_q = marl::unroll_target(target, batch);

  auto bonus_rewards = [&]() {
    if (!bonus) return batch.reward;
    const exploration::BonusResult b = bonus->update(batch);
    check_finite(b.loss, "bonus loss", train_steps);
    stats.mean_r_int = masked_mean(b.r_int, batch.mask);
    return exploration::mixed_reward(batch.reward, b.r_int, config_.bonus.beta);
  };
  auto goal_step = [&](const nn::Tensor* rewards) {
    nn::zero_grads(theta);
    const marl::TdResult r = marl::goal_td_loss(goal, target, batch, gamma, rewards, true, &target_q);
    check_finite(r.loss, "goal TD loss", train_steps);
    nn::clip_grad_norm(theta, config_.grad_clip);
    goal_optimizer.step(theta);
    stats.loss_goal = r.loss;
    stats.q_goal = r.mean_q;
  };

  if (exploration) {
    goal_step(nullptr);
    const nn::Tensor mixed = bonus_rewards();
    const nn::ParameterList omega = exploration->parameters();
    nn::zero_grads(omega);
    const marl::TdResult r = marl::exp_td_loss(*exploration, target, batch, gamma, mixed, true, &target_q);
    check_finite(r.loss, "exploration TD loss", train_steps);
    nn::clip_grad_norm(omega, config_.grad_clip);
    exp_optimizer.step(omega);
    stats.loss_exp = r.loss;
    stats.q_exp = r.mean_q;
  } else {
    const nn::Tensor rewards = bonus_rewards();
    goal_step(&rewards);
  }

  ++train_steps;
  if (train_steps % static_cast<std::uint64_t>(config_.target_sync_interval) == 0) {
    marl::sync_target(goal, target);
    ++target_syncs;
  }
  return stats;
}

void Learner::save(nn::CheckpointWriter& out) const {
  out.text("learner.counters", std::to_string(train_steps) + " " + std::to_string(target_syncs));
  out.params("q." + marl::to_string(goal.role), goal.parameters());
  out.params("q." + marl::to_string(target.role), target.parameters());
  nn::save_optimizer_state(out, "optim.goal", goal_optimizer.state());
  if (exploration) {
    out.params("q." + marl::to_string(exploration->role), exploration->parameters());
    nn::save_optimizer_state(out, "optim.exploration", exp_optimizer.state());
  }
  if (bonus) bonus->save(out, "bonus." + exploration::to_string(bonus->kind()));
}

void Learner::load(nn::CheckpointReader& in) {
  std::istringstream cs(in.expect("text", "learner.counters").text);
  if (!(cs >> train_steps >> target_syncs)) throw IoError("checkpoint: malformed learner counters");
  in.load_params("q." + marl::to_string(goal.role), goal.parameters());
  in.load_params("q." + marl::to_string(target.role), target.parameters());
  nn::load_optimizer_state(in, "optim.goal", goal_optimizer.state());
  if (exploration) {
    in.load_params("q." + marl::to_string(exploration->role), exploration->parameters());
    nn::load_optimizer_state(in, "optim.exploration", exp_optimizer.state());
  }
  if (bonus) bonus->load(in, "bonus." + exploration::to_string(bonus->kind()));
}

// ---- trainer ---------------------------------------------------------------

namespace {

nn::Rng stream(std::uint64_t seed, std::uint64_t tag) { return nn::Rng(seed).fork(tag); }

}  // namespace

Trainer::Trainer(TrainConfig config)
    : config_((config.validate(), std::move(config))),
      env_(make_env(config_.env)),
      eval_env_(env_->clone()),
      spec_(env_->spec()),
      init_rng_(stream(config_.seed, 1)),
      learner_(spec_, config_, init_rng_),
      memory_(spec_, config_.buffer_capacity),
      env_rng_(stream(config_.seed, 2)),
      action_rng_(stream(config_.seed, 3)),
      sample_rng_(stream(config_.seed, 4)),
      eval_rng_(stream(config_.seed, 5)),
      next_eval_(config_.eval_interval),
      next_checkpoint_(config_.checkpoint_interval) {}

void Trainer::run_episode() {
  if (done()) throw UsageError("run_episode: step budget already spent");
  const double epsilon = epsilon_at(config_, env_steps_);
  Rollout r = collect_episode(learner_.behavior(), *env_, epsilon, env_rng_, action_rng_);
  env_steps_ += static_cast<std::int64_t>(r.episode.size());
  ++episodes_;
  memory_.push_episode(r.episode);

  if (memory_.size() >= config_.batch_size) {
    for (int i = 0; i < config_.train_interval; ++i) {
      const std::optional<replay::MiniBatch> batch = memory_.sample(config_.batch_size, sample_rng_);
      const PhaseStats s = learner_.train_phase(*batch);
      loss_goal_.add(s.loss_goal);
      q_goal_.add(s.q_goal);
      if (s.loss_exp) loss_exp_.add(*s.loss_exp);
      if (s.q_exp) q_exp_.add(*s.q_exp);
      if (s.mean_r_int) r_int_.add(*s.mean_r_int);
    }
  }

  while (env_steps_ >= next_eval_) {
    emit_row();
    next_eval_ += config_.eval_interval;
  }
  if (config_.checkpoint_interval > 0) {
    while (env_steps_ >= next_checkpoint_) {
      checkpoint_due_ = true;
      next_checkpoint_ += config_.checkpoint_interval;
    }
  }
}

void Trainer::emit_row() {
  MetricsRow row;
  row.env_steps = env_steps_;
  row.episodes = episodes_;
  row.train_loss_goal = loss_goal_.mean();
  row.train_loss_exp = loss_exp_.mean();
  row.mean_r_int = r_int_.mean();
  row.q_goal_mean = q_goal_.mean();
  row.q_exp_mean = q_exp_.mean();
  row.epsilon = epsilon_at(config_, env_steps_);
  const EvalResult e = evaluate(learner_.goal, *eval_env_, config_.eval_episodes, eval_rng_);
  row.eval_return_mean = e.mean_return;
  row.eval_episode_length_mean = e.mean_length;
  row.eval_win_or_solve_rate = e.solve_rate;
  loss_goal_ = loss_exp_ = r_int_ = q_goal_ = q_exp_ = Accumulator{};
  rows_.push_back(row);
}

void Trainer::run(const std::function<void(const MetricsRow&)>& on_row,
                  const std::function<void(const Trainer&)>& on_checkpoint) {
  while (!done()) {
    const std::size_t before = rows_.size();
    run_episode();
    if (on_row) {
      for (std::size_t i = before; i < rows_.size(); ++i) on_row(rows_[i]);
    }
    if (checkpoint_due_) {
      checkpoint_due_ = false;
      if (on_checkpoint) on_checkpoint(*this);
    }
  }
}

void Trainer::save(std::ostream& os) const {
  nn::CheckpointWriter out(os);
  std::ostringstream fp;
  fp << env_->name() << ' ' << spec_.n_agents << ' ' << spec_.obs_dim << ' ' << spec_.state_dim << ' '
     << spec_.n_actions << ' ' << to_string(config_.exploration) << ' ' << marl::to_string(config_.mixer) << ' '
     << config_.has_exploration_q();
  out.text("trainer.fingerprint", fp.str());
  out.text("trainer.counters", std::to_string(env_steps_) + " " + std::to_string(episodes_) + " " +
                                   std::to_string(next_eval_) + " " + std::to_string(next_checkpoint_) + " " +
                                   (checkpoint_due_ ? "1" : "0"));
  out.text("trainer.rng.init", init_rng_.serialize());
  out.text("trainer.rng.env", env_rng_.serialize());
  out.text("trainer.rng.action", action_rng_.serialize());
  out.text("trainer.rng.sample", sample_rng_.serialize());
  out.text("trainer.rng.eval", eval_rng_.serialize());
  std::ostringstream acc;
  for (const Accumulator* a : {&loss_goal_, &loss_exp_, &r_int_, &q_goal_, &q_exp_}) {
    acc << hex(a->sum) << ' ' << a->count << '\n';
  }
  out.text("trainer.accumulators", acc.str());
  std::ostringstream rows;
  for (const MetricsRow& r : rows_) {
    rows << r.env_steps << ' ' << r.episodes << ' ' << opt_hex(r.train_loss_goal) << ' ' << opt_hex(r.train_loss_exp)
         << ' ' << opt_hex(r.mean_r_int) << ' ' << hex(r.epsilon) << ' ' << hex(r.eval_return_mean) << ' '
         << hex(r.eval_episode_length_mean) << ' ' << hex(r.eval_win_or_solve_rate) << ' ' << opt_hex(r.q_goal_mean)
         << ' ' << opt_hex(r.q_exp_mean) << '\n';
  }
  out.text("trainer.rows", rows.str());
  learner_.save(out);
  memory_.save(out, "replay");
  if (!os) throw IoError("checkpoint: write failed");
}

void Trainer::load(std::istream& is) {
  nn::CheckpointReader in(is);
  std::ostringstream fp;
  fp << env_->name() << ' ' << spec_.n_agents << ' ' << spec_.obs_dim << ' ' << spec_.state_dim << ' '
     << spec_.n_actions << ' ' << to_string(config_.exploration) << ' ' << marl::to_string(config_.mixer) << ' '
     << config_.has_exploration_q();
  const std::string stored = in.expect("text", "trainer.fingerprint").text;
  if (stored != fp.str()) {
    throw IoError("checkpoint was written for a different setup ('" + stored + "' vs '" + fp.str() + "')");
  }
  {
    std::istringstream cs(in.expect("text", "trainer.counters").text);
    int due = 0;
    if (!(cs >> env_steps_ >> episodes_ >> next_eval_ >> next_checkpoint_ >> due)) {
      throw IoError("checkpoint: malformed trainer counters");
    }
    checkpoint_due_ = due != 0;
  }
  init_rng_ = nn::Rng::deserialize(in.expect("text", "trainer.rng.init").text);
  env_rng_ = nn::Rng::deserialize(in.expect("text", "trainer.rng.env").text);
  action_rng_ = nn::Rng::deserialize(in.expect("text", "trainer.rng.action").text);
  sample_rng_ = nn::Rng::deserialize(in.expect("text", "trainer.rng.sample").text);
  eval_rng_ = nn::Rng::deserialize(in.expect("text", "trainer.rng.eval").text);
  {
    std::istringstream as(in.expect("text", "trainer.accumulators").text);
    for (Accumulator* a : {&loss_goal_, &loss_exp_, &r_int_, &q_goal_, &q_exp_}) {
      std::string sum;
      if (!(as >> sum >> a->count)) throw IoError("checkpoint: malformed accumulators");
      a->sum = unhex(sum);
    }
  }
  {
    rows_.clear();
    std::istringstream rs(in.expect("text", "trainer.rows").text);
    std::string line;
    while (std::getline(rs, line)) {
      std::istringstream ls(line);
      MetricsRow r;
      std::string f[9];
      if (!(ls >> r.env_steps >> r.episodes >> f[0] >> f[1] >> f[2] >> f[3] >> f[4] >> f[5] >> f[6] >> f[7] >> f[8])) {
        throw IoError("checkpoint: malformed metrics row");
      }
      r.train_loss_goal = opt_unhex(f[0]);
      r.train_loss_exp = opt_unhex(f[1]);
      r.mean_r_int = opt_unhex(f[2]);
      r.epsilon = unhex(f[3]);
      r.eval_return_mean = unhex(f[4]);
      r.eval_episode_length_mean = unhex(f[5]);
      r.eval_win_or_solve_rate = unhex(f[6]);
      r.q_goal_mean = opt_unhex(f[7]);
      r.q_exp_mean = opt_unhex(f[8]);
      rows_.push_back(r);
    }
  }
  learner_.load(in);
  memory_.load(in, "replay");
}

std::vector<MetricsRow> run_training(const TrainConfig& config) {
  Trainer t(config);
  t.run();
  return t.rows();
}

}  // namespace strange::trainer
