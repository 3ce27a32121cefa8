#include "strange/marl/policy.hpp"

#include <numeric>

#include "strange/errors.hpp"

namespace strange::marl {

int argmax(std::span<const float> values) {
  if (values.empty()) throw DimensionError("argmax of an empty range");
  int best = 0;
  for (int i = 1; i < static_cast<int>(values.size()); ++i) {
    if (values[static_cast<std::size_t>(i)] > values[static_cast<std::size_t>(best)]) best = i;
  }
  return best;
}

nn::Tensor initial_hidden(const AgentNet& net) { return nn::Tensor({net.n_agents, net.hidden}); }

JointAction greedy_joint_action(const JointQ& jq, const std::vector<std::vector<float>>& observations,
                                std::span<const int> last_actions, const nn::Tensor& hidden) {
  const AgentNet& net = jq.agent;
  const int n = net.n_agents;
  if (static_cast<int>(observations.size()) != n) throw DimensionError("greedy_joint_action: wrong agent count");
  nn::Tensor obs({n, net.obs_dim});
  for (int i = 0; i < n; ++i) {
    const auto& o = observations[static_cast<std::size_t>(i)];
    if (static_cast<int>(o.size()) != net.obs_dim) throw DimensionError("greedy_joint_action: observation size");
    std::copy(o.begin(), o.end(), obs.row(i).begin());
  }
  std::vector<int> ids(static_cast<std::size_t>(n));
  std::iota(ids.begin(), ids.end(), 0);
  nn::Graph g(false);
  const auto out = net.step(g, g.input(agent_inputs(net, obs, last_actions, ids)), g.input(hidden));
  JointAction ja;
  ja.q = g.value(out.q);
  ja.hidden = g.value(out.hidden);
  for (int i = 0; i < n; ++i) ja.actions.push_back(argmax(ja.q.row(i)));
  return ja;
}

JointAction epsilon_greedy_joint_action(const JointQ& jq, const std::vector<std::vector<float>>& observations,
                                        std::span<const int> last_actions, const nn::Tensor& hidden, double epsilon,
                                        nn::Rng& rng) {
  if (epsilon < 0.0 || epsilon > 1.0) throw UsageError("epsilon must lie in [0, 1]");
  JointAction ja = greedy_joint_action(jq, observations, last_actions, hidden);
  for (int& a : ja.actions) {
    if (rng.uniform() < epsilon) a = static_cast<int>(rng.below(static_cast<std::uint64_t>(jq.agent.n_actions)));
  }
  return ja;
}

}  // namespace strange::marl
