#include "strange/nn/optim.hpp"

#include <cmath>
#include <sstream>

#include "strange/errors.hpp"

namespace strange::nn {

std::string to_string(OptimizerKind kind) { return kind == OptimizerKind::adam ? "adam" : "rmsprop"; }

OptimizerKind optimizer_kind_from_string(const std::string& name) {
  if (name == "adam") return OptimizerKind::adam;
  if (name == "rmsprop") return OptimizerKind::rmsprop;
  throw ConfigError("unknown optimizer '" + name + "' (expected adam or rmsprop)");
}

void optimizer_step(const OptimizerSettings& s, const ParameterList& params, OptimizerState& state) {
  if (state.second.empty()) {
    for (const auto& p : params) {
      state.first.emplace_back(p.param->value.shape());
      state.second.emplace_back(p.param->value.shape());
    }
  }
  if (state.second.size() != params.size()) throw DimensionError("optimizer state does not match parameter list");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Parameter& p = *params[i].param;
    if (!p.grad.same_shape(p.value) || !state.second[i].same_shape(p.value)) {
      throw DimensionError("optimizer: gradient/state shape mismatch for " + params[i].name);
    }
  }
  ++state.step;

  if (s.kind == OptimizerKind::adam) {
    const double t = static_cast<double>(state.step);
    const auto c1 = static_cast<float>(1.0 - std::pow(static_cast<double>(s.beta1), t));
    const auto c2 = static_cast<float>(1.0 - std::pow(static_cast<double>(s.beta2), t));
    for (std::size_t i = 0; i < params.size(); ++i) {
      Parameter& p = *params[i].param;
      float* w = p.value.data();
      const float* g = p.grad.data();
      float* m = state.first[i].data();
      float* v = state.second[i].data();
      for (std::size_t k = 0; k < p.value.size(); ++k) {
        m[k] = s.beta1 * m[k] + (1.0f - s.beta1) * g[k];
        v[k] = s.beta2 * v[k] + (1.0f - s.beta2) * g[k] * g[k];
        const float mhat = m[k] / c1;
        const float vhat = v[k] / c2;
        w[k] -= s.lr * mhat / (std::sqrt(vhat) + s.adam_eps);
      }
    }
  } else {
    for (std::size_t i = 0; i < params.size(); ++i) {
      Parameter& p = *params[i].param;
      float* w = p.value.data();
      const float* g = p.grad.data();
      float* v = state.second[i].data();
      for (std::size_t k = 0; k < p.value.size(); ++k) {
        v[k] = s.rms_alpha * v[k] + (1.0f - s.rms_alpha) * g[k] * g[k];
        w[k] -= s.lr * g[k] / (std::sqrt(v[k]) + s.rms_eps);
      }
    }
  }
}

}  // namespace strange::nn

namespace strange::nn {

void save_optimizer_state(CheckpointWriter& out, const std::string& module, const OptimizerState& state) {
  out.text(module + ".step", std::to_string(state.step) + " " + std::to_string(state.first.size()) + " " +
                                 std::to_string(state.second.size()));
  std::vector<std::pair<std::string, const Tensor*>> items;
  for (std::size_t i = 0; i < state.first.size(); ++i) items.emplace_back("m" + std::to_string(i), &state.first[i]);
  for (std::size_t i = 0; i < state.second.size(); ++i) items.emplace_back("v" + std::to_string(i), &state.second[i]);
  out.tensors(module + ".moments", items);
}

void load_optimizer_state(CheckpointReader& in, const std::string& module, OptimizerState& state) {
  const CheckpointBlock head = in.expect("text", module + ".step");
  std::istringstream hs(head.text);
  std::uint64_t step = 0;
  std::size_t n_first = 0, n_second = 0;
  if (!(hs >> step >> n_first >> n_second)) throw IoError("checkpoint: malformed optimizer header for " + module);
  CheckpointBlock block = in.expect("tensors", module + ".moments");
  if (block.tensors.size() != n_first + n_second) throw IoError("checkpoint: optimizer moment count mismatch");
  OptimizerState loaded;
  loaded.step = step;
  for (std::size_t i = 0; i < block.tensors.size(); ++i) {
    (i < n_first ? loaded.first : loaded.second).push_back(std::move(block.tensors[i].second));
  }
  state = std::move(loaded);
}

}  // namespace strange::nn
