#include "strange/envs/matrix_game.hpp"

#include "strange/errors.hpp"

namespace strange::envs {

void MatrixGameConfig::validate() const {
  if (k < 1) throw ValidationError("matrix game horizon k must be >= 1");
  bool has_one = false;
  bool has_zero = false;
  for (const auto& row : payoff) {
    for (int v : row) {
      if (v != 0 && v != 1) throw ValidationError("matrix game payoff entries must be 0 or 1");
      has_one = has_one || v == 1;
      has_zero = has_zero || v == 0;
    }
  }
  if (!has_one || !has_zero) throw ValidationError("matrix game payoff needs at least one 1 and one 0 entry");
}

MatrixGame::MatrixGame(MatrixGameConfig config) : config_(config) {
  config_.validate();
  spec_ = EnvSpec{2, config_.k + 1, config_.k + 1, 2, config_.k};
}

std::vector<float> MatrixGame::state() const {
  std::vector<float> s(static_cast<std::size_t>(config_.k) + 1, 0.0f);
  s[static_cast<std::size_t>(step_)] = 1.0f;
  return s;
}

StepResult MatrixGame::observe(float reward) const {
  StepResult r;
  r.state = state();
  r.observations.assign(2, r.state);
  r.reward = reward;
  r.terminal = terminal_;
  r.step_index = step_;
  return r;
}

StepResult MatrixGame::reset(nn::Rng&) {
  step_ = 0;
  episode_return_ = 0;
  terminal_ = false;
  return observe(0.0f);
}

StepResult MatrixGame::step(std::span<const int> joint_action) {
  if (terminal_) throw UsageError("matrix game: step() after terminal; call reset()");
  if (joint_action.size() != 2) throw DimensionError("matrix game: expected 2 actions");
  for (int a : joint_action) {
    if (a < 0 || a > 1) throw DimensionError("matrix game: action out of range");
  }
  const int reward = config_.payoff[static_cast<std::size_t>(joint_action[0])][static_cast<std::size_t>(joint_action[1])];
  ++step_;
  episode_return_ += reward;
  terminal_ = reward == 0 || step_ >= config_.k;
  return observe(static_cast<float>(reward));
}

}  // namespace strange::envs
