#pragma once

#include <span>
#include <vector>

#include "strange/marl/networks.hpp"
#include "strange/nn/rng.hpp"

namespace strange::marl {

/// Index of the largest value; ties go to the lowest index.
int argmax(std::span<const float> values);

struct JointAction {
  std::vector<int> actions;
  nn::Tensor hidden;  ///< [N x d] after this step
  nn::Tensor q;       ///< [N x n_actions]
};

/// Zero hidden state [N x d] for the start of an episode.
nn::Tensor initial_hidden(const AgentNet& net);

/// Decentralized greedy action: each agent takes the argmax of its own
/// Q-values given its observation, last action (-1 at episode start) and
/// hidden state.
JointAction greedy_joint_action(const JointQ& jq, const std::vector<std::vector<float>>& observations,
                                std::span<const int> last_actions, const nn::Tensor& hidden);

/// Each agent independently explores uniformly with probability `epsilon`.
/// One uniform draw per agent is always consumed, plus one action draw per
/// exploring agent.
JointAction epsilon_greedy_joint_action(const JointQ& jq, const std::vector<std::vector<float>>& observations,
                                        std::span<const int> last_actions, const nn::Tensor& hidden, double epsilon,
                                        nn::Rng& rng);

}  // namespace strange::marl
