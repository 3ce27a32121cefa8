#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "strange/nn/checkpoint.hpp"
#include "strange/nn/parameter.hpp"

namespace strange::nn {

enum class OptimizerKind { adam, rmsprop };

std::string to_string(OptimizerKind kind);
OptimizerKind optimizer_kind_from_string(const std::string& name);

/// Moment accumulators mirroring a parameter list. For Adam `first` and
/// `second` hold the raw moments; RMSProp uses only `second`.
struct OptimizerState {
  std::vector<Tensor> first;
  std::vector<Tensor> second;
  std::uint64_t step = 0;
};

struct OptimizerSettings {
  OptimizerKind kind = OptimizerKind::adam;
  float lr = 5e-4f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float adam_eps = 1e-8f;
  float rms_alpha = 0.99f;
  float rms_eps = 1e-5f;
};

/// Applies one update to every parameter from its `grad` and bumps the step
/// counter. The state is allocated on first use.
void optimizer_step(const OptimizerSettings& settings, const ParameterList& params, OptimizerState& state);

/// Optimizer bound to one network's parameter list.
class Optimizer {
 public:
  Optimizer() = default;
  explicit Optimizer(OptimizerSettings settings) : settings_(settings) {}

  void step(const ParameterList& params) { optimizer_step(settings_, params, state_); }
  const OptimizerSettings& settings() const { return settings_; }
  OptimizerState& state() { return state_; }
  const OptimizerState& state() const { return state_; }

 private:
  OptimizerSettings settings_;
  OptimizerState state_;
};

/// Writes the step counter (text block "<module>.step") and the moments
/// (tensor block "<module>.moments").
void save_optimizer_state(CheckpointWriter& out, const std::string& module, const OptimizerState& state);
void load_optimizer_state(CheckpointReader& in, const std::string& module, OptimizerState& state);

}  // namespace strange::nn
