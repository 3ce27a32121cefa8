#pragma once

// Test fixtures and independent reference implementations. The oracles
// here work in double on plain vectors and share no code with the library
// kernels.

#include <cmath>
#include <vector>

#include "strange/envs/env.hpp"
#include "strange/marl/networks.hpp"
#include "strange/nn/layers.hpp"
#include "strange/nn/rng.hpp"
#include "strange/replay/replay.hpp"

namespace testing {

using Vec = std::vector<double>;

inline strange::envs::EnvSpec toy_spec(int n_agents, int obs_dim, int state_dim, int n_actions, int max_steps = 8) {
  strange::envs::EnvSpec s;
  s.n_agents = n_agents;
  s.obs_dim = obs_dim;
  s.state_dim = state_dim;
  s.n_actions = n_actions;
  s.max_steps = max_steps;
  return s;
}

inline std::vector<float> random_vec(strange::nn::Rng& rng, int n, double lo = -1.0, double hi = 1.0) {
  std::vector<float> v(static_cast<std::size_t>(n));
  for (float& x : v) x = static_cast<float>(rng.uniform(lo, hi));
  return v;
}

inline strange::nn::Tensor random_tensor(strange::nn::Rng& rng, strange::nn::Shape shape, double lo = -1.0,
                                         double hi = 1.0) {
  strange::nn::Tensor t(shape);
  for (float& x : t.values()) x = static_cast<float>(rng.uniform(lo, hi));
  return t;
}

/// Random chained episode; the last transition is terminal when asked.
inline strange::replay::EpisodeRecord random_episode(const strange::envs::EnvSpec& spec, int length,
                                                     strange::nn::Rng& rng, bool terminal_last = true) {
  strange::replay::EpisodeRecord ep;
  std::vector<std::vector<float>> obs;
  for (int i = 0; i < spec.n_agents; ++i) obs.push_back(random_vec(rng, spec.obs_dim));
  std::vector<float> state = random_vec(rng, spec.state_dim);
  for (int t = 0; t < length; ++t) {
    strange::replay::Transition tr;
    tr.obs = obs;
    tr.state = state;
    for (int i = 0; i < spec.n_agents; ++i) tr.actions.push_back(static_cast<int>(rng.below(spec.n_actions)));
    tr.r_ext = static_cast<float>(rng.uniform(-1.0, 1.0));
    for (int i = 0; i < spec.n_agents; ++i) tr.next_obs.push_back(random_vec(rng, spec.obs_dim));
    tr.next_state = random_vec(rng, spec.state_dim);
    tr.terminal = terminal_last && t + 1 == length;
    obs = tr.next_obs;
    state = tr.next_state;
    ep.push_back(tr);
  }
  return ep;
}

inline strange::replay::MiniBatch batch_of(const strange::envs::EnvSpec& spec,
                                           const std::vector<strange::replay::EpisodeRecord>& episodes) {
  std::vector<strange::replay::StoredEpisode> stored;
  for (const auto& e : episodes) stored.push_back(strange::replay::compact_episode(spec, e));
  std::vector<const strange::replay::StoredEpisode*> ptrs;
  for (const auto& s : stored) ptrs.push_back(&s);
  return strange::replay::make_batch(spec, ptrs);
}

/// Makes the agent network output `bias` for every input.
inline void constant_q(strange::marl::AgentNet& net, const std::vector<float>& bias) {
  net.head.weight.value.fill(0.0f);
  for (std::size_t a = 0; a < bias.size(); ++a) net.head.bias.value[a] = bias[a];
}

// ---- scalar oracles --------------------------------------------------------

inline Vec to_vec(std::span<const float> v) { return Vec(v.begin(), v.end()); }

inline Vec linear_ref(const strange::nn::Linear& l, const Vec& x) {
  Vec y(static_cast<std::size_t>(l.out));
  for (int o = 0; o < l.out; ++o) {
    double s = l.bias.value[static_cast<std::size_t>(o)];
    for (int k = 0; k < l.in; ++k) s += l.weight.value.at(o, k) * x[static_cast<std::size_t>(k)];
    y[static_cast<std::size_t>(o)] = s;
  }
  return y;
}

inline Vec relu_ref(Vec v) {
  for (double& x : v) x = x > 0 ? x : 0;
  return v;
}

inline Vec mlp_ref(const strange::nn::Mlp& m, const Vec& x) { return linear_ref(m.second, relu_ref(linear_ref(m.first, x))); }

inline double sigmoid_ref(double v) { return 1.0 / (1.0 + std::exp(-v)); }

inline Vec gru_ref(const strange::nn::GruCell& c, const Vec& x, const Vec& h) {
  const int d = c.hidden;
  const int in = c.in;
  auto gate = [&](const strange::nn::Parameter& w, const strange::nn::Parameter& b, int j, const Vec& hpart) {
    double s = b.value[static_cast<std::size_t>(j)];
    for (int k = 0; k < in; ++k) s += w.value.at(j, k) * x[static_cast<std::size_t>(k)];
    for (int k = 0; k < d; ++k) s += w.value.at(j, in + k) * hpart[static_cast<std::size_t>(k)];
    return s;
  };
  Vec z(static_cast<std::size_t>(d)), r(static_cast<std::size_t>(d)), rh(static_cast<std::size_t>(d)), out(z.size());
  for (int j = 0; j < d; ++j) {
    z[static_cast<std::size_t>(j)] = sigmoid_ref(gate(c.w_update, c.b_update, j, h));
    r[static_cast<std::size_t>(j)] = sigmoid_ref(gate(c.w_reset, c.b_reset, j, h));
  }
  for (int j = 0; j < d; ++j) rh[static_cast<std::size_t>(j)] = r[static_cast<std::size_t>(j)] * h[static_cast<std::size_t>(j)];
  for (int j = 0; j < d; ++j) {
    const double n = std::tanh(gate(c.w_cand, c.b_cand, j, rh));
    const double zj = z[static_cast<std::size_t>(j)];
    out[static_cast<std::size_t>(j)] = (1 - zj) * n + zj * h[static_cast<std::size_t>(j)];
  }
  return out;
}

inline double elu_ref(double v) { return v > 0 ? v : std::expm1(v); }

/// Q_tot = elu(q·|W1(s)| + b1(s))·|w2(s)| + V(s).
inline double qmix_ref(const strange::marl::Mixer& m, const Vec& q, const Vec& s) {
  const Vec w1 = linear_ref(m.hyper_w1, s);
  const Vec b1 = linear_ref(m.hyper_b1, s);
  const Vec w2 = linear_ref(m.hyper_w2, s);
  const Vec v = mlp_ref(m.value, s);
  double total = v[0];
  for (int e = 0; e < m.embed; ++e) {
    double h = b1[static_cast<std::size_t>(e)];
    for (int i = 0; i < m.n_agents; ++i) {
      h += q[static_cast<std::size_t>(i)] * std::fabs(w1[static_cast<std::size_t>(i * m.embed + e)]);
    }
    total += elu_ref(h) * std::fabs(w2[static_cast<std::size_t>(e)]);
  }
  return total;
}

}  // namespace testing
