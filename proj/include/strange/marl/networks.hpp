#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "strange/envs/env.hpp"
#include "strange/nn/graph.hpp"
#include "strange/nn/layers.hpp"

namespace strange::marl {

/// Recurrent per-agent Q network shared by all agents.
///
/// Input row: [observation, one-hot last action, one-hot agent id]. The
/// history τⁱ is carried by the GRU hidden state.
struct AgentNet {
  int obs_dim = 0;
  int n_actions = 0;
  int n_agents = 0;
  int hidden = 0;
  nn::Linear embed;
  nn::GruCell gru;
  nn::Linear head;

  AgentNet() = default;
  AgentNet(const envs::EnvSpec& spec, int hidden_dim, nn::Rng& rng);

  int input_dim() const { return obs_dim + n_actions + n_agents; }

  struct Step {
    nn::Var q;
    nn::Var hidden;
  };
  Step step(nn::Graph& g, nn::Var input, nn::Var h) const;
  Step step(nn::Graph& g, nn::Var input, nn::Var h);

  void collect(nn::ParameterList& out, const std::string& prefix);
};

/// Builds agent-net input rows. `last_actions[r] < 0` means "no previous
/// action" (first step of an episode).
nn::Tensor agent_inputs(const AgentNet& net, const nn::Tensor& obs, std::span<const int> last_actions,
                        std::span<const int> agent_ids);

struct AgentQStep {
  nn::Tensor q;       ///< [n_actions]
  nn::Tensor hidden;  ///< [hidden]
};

/// Single-agent step on plain tensors: observation, one-hot last action,
/// one-hot agent id, previous hidden state.
AgentQStep agent_q_step(const AgentNet& net, const nn::Tensor& obs, const nn::Tensor& last_action_onehot,
                        const nn::Tensor& agent_onehot, const nn::Tensor& hidden);

enum class MixerKind { vdn, qmix };

std::string to_string(MixerKind kind);
MixerKind mixer_kind_from_string(const std::string& name);

/// VDN sum or QMIX monotone mixing of the agents' chosen-action values.
///
/// QMIX: hypernetworks map the state to W1 = |H1(s)| [N x E], b1 = B1(s),
/// w2 = |H2(s)| [E] and V(s) (one relu hidden layer), and
/// Q_tot = elu(q·W1 + b1)·w2 + V(s).
struct Mixer {
  MixerKind kind = MixerKind::vdn;
  int n_agents = 0;
  int state_dim = 0;
  int embed = 0;
  nn::Linear hyper_w1;
  nn::Linear hyper_b1;
  nn::Linear hyper_w2;
  nn::Mlp value;

  Mixer() = default;
  Mixer(MixerKind mixer_kind, const envs::EnvSpec& spec, int embed_dim, nn::Rng& rng);

  /// chosen [R x N], state [R x S] (may be invalid for VDN) -> [R x 1].
  nn::Var mix(nn::Graph& g, nn::Var chosen, std::optional<nn::Var> state) const;
  nn::Var mix(nn::Graph& g, nn::Var chosen, std::optional<nn::Var> state);

  void collect(nn::ParameterList& out, const std::string& prefix);

 private:
  template <class Self>
  static nn::Var mix_impl(Self& self, nn::Graph& g, nn::Var chosen, std::optional<nn::Var> state);
};

/// Eager mixing of a batch of chosen values [R x N] with states [R x S].
nn::Tensor mix(const Mixer& mixer, const nn::Tensor& chosen, const nn::Tensor* state);

enum class QRole { goal, goal_target, exploration };

std::string to_string(QRole role);

struct NetworkSizes {
  int agent_hidden = 32;
  int mixer_embed = 32;
};

/// Per-agent recurrent Q networks plus a mixer.
struct JointQ {
  QRole role = QRole::goal;
  AgentNet agent;
  Mixer mixer;

  JointQ() = default;
  JointQ(QRole q_role, const envs::EnvSpec& spec, MixerKind mixer_kind, NetworkSizes sizes, nn::Rng& rng);

  /// Parameters in declaration order (agent first, then mixer).
  nn::ParameterList parameters();
  nn::ParameterList parameters() const;
};

/// θ⁻ ← θ, bitwise.
void sync_target(const JointQ& source, JointQ& target);

}  // namespace strange::marl
