#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "strange/nn/rng.hpp"

namespace strange::envs {

/// Dimensions of a cooperative Dec-POMDP instance.
struct EnvSpec {
  int n_agents = 1;
  int obs_dim = 1;
  int state_dim = 1;
  int n_actions = 1;
  int max_steps = 1;

  void validate() const;
  friend bool operator==(const EnvSpec&, const EnvSpec&) = default;
};

/// Outcome of reset() or step(): the joint observation and global state
/// after the transition, the shared extrinsic reward and termination flag.
struct StepResult {
  std::vector<std::vector<float>> observations;
  std::vector<float> state;
  float reward = 0.0f;
  bool terminal = false;
  int step_index = 0;
};

/// Single-owner environment state machine.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::string name() const = 0;
  virtual const EnvSpec& spec() const = 0;
  /// Starts a new episode. Neither built-in environment draws from `rng`,
  /// it is there for layouts with randomized starts.
  virtual StepResult reset(nn::Rng& rng) = 0;
  /// Advances one step. Throws UsageError once the episode is terminal.
  virtual StepResult step(std::span<const int> joint_action) = 0;
  virtual std::vector<float> state() const = 0;
  /// Whether the current (or just finished) episode reached the task goal.
  virtual bool solved() const = 0;
  virtual std::unique_ptr<Environment> clone() const = 0;
};

}  // namespace strange::envs
