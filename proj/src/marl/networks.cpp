#include "strange/marl/networks.hpp"

#include <array>

#include "strange/errors.hpp"

namespace strange::marl {

AgentNet::AgentNet(const envs::EnvSpec& spec, int hidden_dim, nn::Rng& rng)
    : obs_dim(spec.obs_dim),
      n_actions(spec.n_actions),
      n_agents(spec.n_agents),
      hidden(hidden_dim),
      embed(spec.obs_dim + spec.n_actions + spec.n_agents, hidden_dim, rng),
      gru(hidden_dim, hidden_dim, rng),
      head(hidden_dim, spec.n_actions, rng) {}

AgentNet::Step AgentNet::step(nn::Graph& g, nn::Var input, nn::Var h) const {
  const nn::Var x = g.relu(embed(g, input));
  const nn::Var h_next = gru(g, x, h);
  return {head(g, h_next), h_next};
}

AgentNet::Step AgentNet::step(nn::Graph& g, nn::Var input, nn::Var h) {
  const nn::Var x = g.relu(embed(g, input));
  const nn::Var h_next = gru(g, x, h);
  return {head(g, h_next), h_next};
}

void AgentNet::collect(nn::ParameterList& out, const std::string& prefix) {
  embed.collect(out, prefix + ".embed");
  gru.collect(out, prefix + ".gru");
  head.collect(out, prefix + ".head");
}

nn::Tensor agent_inputs(const AgentNet& net, const nn::Tensor& obs, std::span<const int> last_actions,
                        std::span<const int> agent_ids) {
  const int rows = obs.rows();
  if (obs.cols() != net.obs_dim || last_actions.size() != static_cast<std::size_t>(rows) ||
      agent_ids.size() != static_cast<std::size_t>(rows)) {
    throw DimensionError("agent_inputs: observation " + nn::shape_string(obs.shape()) + " does not match the agent net");
  }
  nn::Tensor x({rows, net.input_dim()});
  for (int r = 0; r < rows; ++r) {
    auto dst = x.row(r);
    const auto src = obs.row(r);
    std::copy(src.begin(), src.end(), dst.begin());
    const int a = last_actions[static_cast<std::size_t>(r)];
    if (a >= net.n_actions) throw DimensionError("agent_inputs: last action out of range");
    if (a >= 0) dst[static_cast<std::size_t>(net.obs_dim + a)] = 1.0f;
    const int id = agent_ids[static_cast<std::size_t>(r)];
    if (id < 0 || id >= net.n_agents) throw DimensionError("agent_inputs: agent id out of range");
    dst[static_cast<std::size_t>(net.obs_dim + net.n_actions + id)] = 1.0f;
  }
  return x;
}

AgentQStep agent_q_step(const AgentNet& net, const nn::Tensor& obs, const nn::Tensor& last_action_onehot,
                        const nn::Tensor& agent_onehot, const nn::Tensor& hidden) {
  if (static_cast<int>(obs.size()) != net.obs_dim || static_cast<int>(last_action_onehot.size()) != net.n_actions ||
      static_cast<int>(agent_onehot.size()) != net.n_agents || static_cast<int>(hidden.size()) != net.hidden) {
    throw DimensionError("agent_q_step: input sizes do not match the agent net");
  }
  nn::Tensor x({1, net.input_dim()});
  std::copy(obs.values().begin(), obs.values().end(), x.data());
  std::copy(last_action_onehot.values().begin(), last_action_onehot.values().end(), x.data() + net.obs_dim);
  std::copy(agent_onehot.values().begin(), agent_onehot.values().end(), x.data() + net.obs_dim + net.n_actions);
  nn::Graph g(false);
  const auto out = net.step(g, g.input(std::move(x)), g.input(hidden.reshaped({1, net.hidden})));
  return {g.value(out.q).reshaped({net.n_actions}), g.value(out.hidden).reshaped({net.hidden})};
}

std::string to_string(MixerKind kind) { return kind == MixerKind::vdn ? "vdn" : "qmix"; }

MixerKind mixer_kind_from_string(const std::string& name) {
  if (name == "vdn") return MixerKind::vdn;
  if (name == "qmix") return MixerKind::qmix;
  throw ConfigError("unknown mixer '" + name + "' (expected vdn or qmix)");
}

Mixer::Mixer(MixerKind mixer_kind, const envs::EnvSpec& spec, int embed_dim, nn::Rng& rng)
    : kind(mixer_kind), n_agents(spec.n_agents), state_dim(spec.state_dim), embed(embed_dim) {
  if (kind == MixerKind::qmix) {
    hyper_w1 = nn::Linear(state_dim, n_agents * embed, rng);
    hyper_b1 = nn::Linear(state_dim, embed, rng);
    hyper_w2 = nn::Linear(state_dim, embed, rng);
    value = nn::Mlp(state_dim, embed, 1, rng);
  }
}

template <class Self>
nn::Var Mixer::mix_impl(Self& self, nn::Graph& g, nn::Var chosen, std::optional<nn::Var> state) {
  const nn::Tensor& q = g.value(chosen);
  if (q.cols() != self.n_agents) {
    throw DimensionError("mix: expected " + std::to_string(self.n_agents) + " chosen values per row, got " +
                         std::to_string(q.cols()));
  }
  if (self.kind == MixerKind::vdn) return g.sum_cols(chosen);
  if (!state || !state->valid()) throw UsageError("mix: QMIX needs the global state");
  const nn::Tensor& s = g.value(*state);
  if (s.cols() != self.state_dim || s.rows() != q.rows()) {
    throw DimensionError("mix: state " + nn::shape_string(s.shape()) + " does not match " + nn::shape_string(q.shape()));
  }
  const nn::Var w1 = g.abs(self.hyper_w1(g, *state));
  const nn::Var b1 = self.hyper_b1(g, *state);
  const nn::Var hidden = g.elu(g.add(g.rowwise_matvec(chosen, w1, self.embed), b1));
  const nn::Var w2 = g.abs(self.hyper_w2(g, *state));
  const nn::Var v = self.value(g, *state);
  return g.add(g.rowwise_matvec(hidden, w2, 1), v);
}

nn::Var Mixer::mix(nn::Graph& g, nn::Var chosen, std::optional<nn::Var> state) const {
  return mix_impl(*this, g, chosen, state);
}

nn::Var Mixer::mix(nn::Graph& g, nn::Var chosen, std::optional<nn::Var> state) {
  return mix_impl(*this, g, chosen, state);
}

void Mixer::collect(nn::ParameterList& out, const std::string& prefix) {
  if (kind != MixerKind::qmix) return;
  hyper_w1.collect(out, prefix + ".hyper_w1");
  hyper_b1.collect(out, prefix + ".hyper_b1");
  hyper_w2.collect(out, prefix + ".hyper_w2");
  value.collect(out, prefix + ".value");
}

nn::Tensor mix(const Mixer& mixer, const nn::Tensor& chosen, const nn::Tensor* state) {
  nn::Graph g(false);
  const nn::Var q = g.input(chosen.rank() == 1 ? chosen.reshaped({1, chosen.dim(0)}) : chosen);
  std::optional<nn::Var> s;
  if (state) s = g.input(state->rank() == 1 ? state->reshaped({1, state->dim(0)}) : *state);
  return g.value(mixer.mix(g, q, s));
}

std::string to_string(QRole role) {
  switch (role) {
    case QRole::goal: return "goal";
    case QRole::goal_target: return "goal_target";
    case QRole::exploration: return "exploration";
  }
  return "goal";
}

JointQ::JointQ(QRole q_role, const envs::EnvSpec& spec, MixerKind mixer_kind, NetworkSizes sizes, nn::Rng& rng)
    : role(q_role), agent(spec, sizes.agent_hidden, rng), mixer(mixer_kind, spec, sizes.mixer_embed, rng) {}

nn::ParameterList JointQ::parameters() {
  nn::ParameterList out;
  agent.collect(out, "agent");
  mixer.collect(out, "mixer");
  return out;
}

nn::ParameterList JointQ::parameters() const { return const_cast<JointQ*>(this)->parameters(); }

void sync_target(const JointQ& source, JointQ& target) {
  if (source.mixer.kind != target.mixer.kind) throw DimensionError("sync_target: mixer kinds differ");
  nn::copy_values(source.parameters(), target.parameters());
}

}  // namespace strange::marl
