#pragma once

#include <array>

#include "strange/envs/env.hpp"

namespace strange::envs {

/// K-step 2x2 payoff matrix game for two agents.
struct MatrixGameConfig {
  int k = 16;
  /// payoff[row action][column action]; only [0][0] pays by default.
  std::array<std::array<int, 2>, 2> payoff{{{1, 0}, {0, 0}}};

  void validate() const;
};

/// Two agents repeatedly pick a row and a column. A joint action paying 1
/// advances the game; a 0 ends it. The game also ends after K steps.
/// Observations and state are the one-hot step counter (length K + 1).
class MatrixGame final : public Environment {
 public:
  explicit MatrixGame(MatrixGameConfig config = {});

  std::string name() const override { return "matrix_game"; }
  const EnvSpec& spec() const override { return spec_; }
  StepResult reset(nn::Rng& rng) override;
  StepResult step(std::span<const int> joint_action) override;
  std::vector<float> state() const override;
  bool solved() const override { return step_ == config_.k && episode_return_ == config_.k; }
  std::unique_ptr<Environment> clone() const override { return std::make_unique<MatrixGame>(*this); }

  const MatrixGameConfig& config() const { return config_; }
  int step_count() const { return step_; }

 private:
  StepResult observe(float reward) const;

  MatrixGameConfig config_;
  EnvSpec spec_;
  int step_ = 0;
  int episode_return_ = 0;
  bool terminal_ = true;
};

}  // namespace strange::envs
