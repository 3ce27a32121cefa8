#pragma once

#include <span>
#include <vector>

#include "strange/marl/networks.hpp"
#include "strange/replay/replay.hpp"

namespace strange::marl {

/// Unrolls the agent network over steps 0..steps-1 from a zero hidden state,
/// on every episode of the batch. Returns per-step Q-values [B*N x A].
std::vector<nn::Var> unroll_agent_q(nn::Graph& g, const AgentNet& net, const replay::MiniBatch& batch, int steps);

/// Unroll restricted to the first rows[s] episodes at step s (rows must be
/// non-increasing; the batch's length ordering makes the running episodes a
/// prefix). Returns per-step Q-values [rows[s]*N x A].
std::vector<nn::Var> unroll_agent_q(nn::Graph& g, const AgentNet& net, const replay::MiniBatch& batch,
                                    std::span<const int> rows);
std::vector<nn::Var> unroll_agent_q(nn::Graph& g, AgentNet& net, const replay::MiniBatch& batch,
                                    std::span<const int> rows);

/// Episodes needing a value at steps 0..T: B at step 0, then those whose
/// next observation exists (length >= s).
std::vector<int> bootstrap_rows(const replay::MiniBatch& batch);

/// θ⁻ agent Q-values over steps 0..T on bootstrap_rows(); shared by the goal
/// and exploration targets of one gradient phase.
struct TargetUnroll {
  std::vector<nn::Tensor> q;
};
TargetUnroll unroll_target(const JointQ& target, const replay::MiniBatch& batch);

struct TdResult {
  double loss = 0.0;    ///< mean squared TD error over valid steps
  double mean_q = 0.0;  ///< mean of Q_tot at the taken actions over valid steps
};

/// y = r + γ(1 - terminal)·max_u' Q(τ', u'; θ⁻) per (t, b): [T x B], zero on
/// padded steps.
nn::Tensor goal_td_target(const JointQ& target, const replay::MiniBatch& batch, float gamma,
                          const nn::Tensor& rewards, const TargetUnroll* cache = nullptr);

/// Squared TD error of the goal function against `goal_td_target`.
/// Gradients (when `backward`) accumulate into `goal` only. `rewards`
/// defaults to the batch's extrinsic rewards.
TdResult goal_td_loss(JointQ& goal, const JointQ& target, const replay::MiniBatch& batch, float gamma,
                      const nn::Tensor* rewards = nullptr, bool backward = true, const TargetUnroll* cache = nullptr);

/// Decoupled target: next actions are the per-agent argmax of the
/// exploration function, evaluated and mixed by the goal target.
/// y_exp = r + γ(1 - terminal)·Q(τ', û'; θ⁻). [T x B], zero on padded steps.
nn::Tensor exp_td_target(const JointQ& target, const JointQ& exploration, const replay::MiniBatch& batch, float gamma,
                         const nn::Tensor& rewards, const TargetUnroll* cache = nullptr);

/// Squared TD error of the exploration function against `exp_td_target`
/// with the given (mixed) rewards. Gradients go into `exploration` only.
TdResult exp_td_loss(JointQ& exploration, const JointQ& target, const replay::MiniBatch& batch, float gamma,
                     const nn::Tensor& rewards, bool backward = true, const TargetUnroll* cache = nullptr);

}  // namespace strange::marl
