#include "strange/marl/td.hpp"

#include "strange/errors.hpp"
#include "strange/marl/policy.hpp"

namespace strange::marl {

namespace {

template <class Net>
std::vector<nn::Var> unroll_impl(nn::Graph& g, Net& net, const replay::MiniBatch& batch, std::span<const int> rows) {
  const int steps = static_cast<int>(rows.size());
  if (steps < 1 || steps > batch.max_len + 1) throw UsageError("unroll_agent_q: step count out of range");
  if (batch.obs_dim != net.obs_dim || batch.n_agents != net.n_agents || batch.n_actions != net.n_actions) {
    throw DimensionError("unroll_agent_q: batch does not match the agent network");
  }
  const int N = batch.n_agents;
  std::vector<int> ids(static_cast<std::size_t>(batch.batch * N));
  for (std::size_t r = 0; r < ids.size(); ++r) ids[r] = static_cast<int>(r) % N;
  const std::vector<int> none(ids.size(), -1);

  std::vector<nn::Var> qs;
  qs.reserve(rows.size());
  int current = rows[0];
  if (current < 1 || current > batch.batch) throw UsageError("unroll_agent_q: row count out of range");
  nn::Var h = g.input(nn::Tensor({current * N, net.hidden}));
  for (int t = 0; t < steps; ++t) {
    const int n = rows[static_cast<std::size_t>(t)];
    if (n < 1 || n > current) throw UsageError("unroll_agent_q: row counts must be positive and non-increasing");
    if (n < current) h = g.slice_rows(h, n * N);
    current = n;
    const std::size_t used = static_cast<std::size_t>(n * N);
    const nn::Tensor& all = batch.obs[static_cast<std::size_t>(t)];
    const nn::Tensor obs = used == static_cast<std::size_t>(all.rows())
                               ? all
                               : nn::Tensor({n * N, all.cols()},
                                            std::vector<float>(all.data(), all.data() + used * all.cols()));
    const std::span<const int> last =
        std::span<const int>(t == 0 ? none : batch.actions[static_cast<std::size_t>(t - 1)]).first(used);
    const nn::Var x = g.input(agent_inputs(net, obs, last, std::span<const int>(ids).first(used)));
    const auto out = net.step(g, x, h);
    qs.push_back(out.q);
    h = out.hidden;
  }
  return qs;
}

void check_batch(const replay::MiniBatch& batch, const nn::Tensor& rewards) {
  if (batch.batch < 1 || batch.max_len < 1 || batch.valid_steps() == 0) throw UsageError("TD loss on an empty batch");
  if (rewards.rows() != batch.max_len || rewards.cols() != batch.batch) {
    throw DimensionError("rewards must be [T x B], got " + nn::shape_string(rewards.shape()));
  }
}

/// First active(t) rows of the per-step tensors for t = 0..T-1, stacked:
/// the valid (t, b) pairs in step-major order.
nn::Tensor stack_valid(const replay::MiniBatch& batch, const std::vector<nn::Tensor>& per_step, int offset) {
  const int V = batch.valid_steps();
  const int cols = per_step.front().cols();
  nn::Tensor out({V, cols});
  float* dst = out.data();
  for (int t = 0; t < batch.max_len; ++t) {
    const std::size_t n = static_cast<std::size_t>(batch.active(t)) * cols;
    dst = std::copy_n(per_step[static_cast<std::size_t>(t + offset)].data(), n, dst);
  }
  return out;
}

/// Mixes stacked per-agent values [V*N x 1] with the states s_{t+offset}.
template <class Mixer>
nn::Var mix_valid(nn::Graph& g, Mixer& mixer, nn::Var per_agent, const replay::MiniBatch& batch, int offset) {
  const nn::Var chosen = g.reshape(per_agent, {batch.valid_steps(), batch.n_agents});
  std::optional<nn::Var> state;
  if (mixer.kind == MixerKind::qmix) state = g.input(stack_valid(batch, batch.state, offset));
  return mixer.mix(g, chosen, state);
}

/// y = r + γ(1 - terminal)·next over the valid steps: [V x 1].
nn::Tensor bootstrap(const replay::MiniBatch& batch, const nn::Tensor& rewards, const nn::Tensor& next, float gamma) {
  nn::Tensor y({batch.valid_steps(), 1});
  std::size_t v = 0;
  for (int t = 0; t < batch.max_len; ++t) {
    for (int b = 0, n = batch.active(t); b < n; ++b, ++v) {
      y[v] = rewards.at(t, b) + gamma * (1.0f - batch.terminal.at(t, b)) * next[v];
    }
  }
  return y;
}

nn::Tensor scatter(const replay::MiniBatch& batch, const nn::Tensor& valid) {
  nn::Tensor out({batch.max_len, batch.batch});
  std::size_t v = 0;
  for (int t = 0; t < batch.max_len; ++t) {
    for (int b = 0, n = batch.active(t); b < n; ++b) out.at(t, b) = valid[v++];
  }
  return out;
}

TdResult squared_td(nn::Graph& g, nn::Var q_tot, const nn::Tensor& y, bool backward) {
  const double count = y.size();
  const nn::Var loss = g.scale(g.sum(g.square(g.sub(q_tot, g.input(y)))), static_cast<float>(1.0 / count));
  TdResult result;
  result.loss = g.value(loss).item();
  double qs = 0.0;
  for (float q : g.value(q_tot).values()) qs += q;
  result.mean_q = qs / count;
  if (backward) g.backward(loss);
  return result;
}

/// Chosen-action values of the valid steps from an unroll whose step t holds
/// at least active(t) episodes: [V*N x 1].
nn::Var taken_values(nn::Graph& g, const std::vector<nn::Var>& qs, const replay::MiniBatch& batch) {
  std::vector<nn::Var> parts;
  parts.reserve(static_cast<std::size_t>(batch.max_len));
  for (int t = 0; t < batch.max_len; ++t) {
    const int used = batch.active(t) * batch.n_agents;
    const nn::Var q = g.slice_rows(qs[static_cast<std::size_t>(t)], used);
    parts.push_back(g.gather_cols(q, std::span<const int>(batch.actions[static_cast<std::size_t>(t)]).first(
                                         static_cast<std::size_t>(used))));
  }
  return g.concat_rows(parts);
}

/// θ⁻ values at step t+1 of the valid steps, for next actions chosen per
/// agent row by `choose(t, row, target_row)`: [V*N x 1].
template <class Choose>
nn::Tensor next_agent_values(const replay::MiniBatch& batch, const TargetUnroll& target, Choose choose) {
  const int N = batch.n_agents;
  nn::Tensor out({batch.valid_steps() * N, 1});
  std::size_t v = 0;
  for (int t = 0; t < batch.max_len; ++t) {
    const nn::Tensor& q = target.q[static_cast<std::size_t>(t + 1)];
    for (int r = 0, n = batch.active(t) * N; r < n; ++r) {
      const auto row = q.row(r);
      out[v++] = row[static_cast<std::size_t>(choose(t, r, row))];
    }
  }
  return out;
}

nn::Tensor mixed_next(const JointQ& target, const replay::MiniBatch& batch, nn::Tensor per_agent) {
  nn::Graph g(false);
  return g.value(mix_valid(g, target.mixer, g.input(std::move(per_agent)), batch, 1));
}

}  // namespace

std::vector<nn::Var> unroll_agent_q(nn::Graph& g, const AgentNet& net, const replay::MiniBatch& batch, int steps) {
  if (steps < 1) throw UsageError("unroll_agent_q: step count out of range");
  const std::vector<int> rows(static_cast<std::size_t>(steps), batch.batch);
  return unroll_impl(g, net, batch, rows);
}

std::vector<nn::Var> unroll_agent_q(nn::Graph& g, const AgentNet& net, const replay::MiniBatch& batch,
                                    std::span<const int> rows) {
  return unroll_impl(g, net, batch, rows);
}

std::vector<nn::Var> unroll_agent_q(nn::Graph& g, AgentNet& net, const replay::MiniBatch& batch,
                                    std::span<const int> rows) {
  return unroll_impl(g, net, batch, rows);
}

std::vector<int> bootstrap_rows(const replay::MiniBatch& batch) {
  std::vector<int> rows{batch.batch};
  for (int s = 1; s <= batch.max_len; ++s) rows.push_back(batch.active(s - 1));
  return rows;
}

TargetUnroll unroll_target(const JointQ& target, const replay::MiniBatch& batch) {
  nn::Graph g(false);
  const std::vector<int> rows = bootstrap_rows(batch);
  TargetUnroll out;
  for (nn::Var v : unroll_agent_q(g, target.agent, batch, rows)) out.q.push_back(g.value(v));
  return out;
}

namespace {

nn::Tensor goal_target_valid(const JointQ& target, const replay::MiniBatch& batch, float gamma,
                             const nn::Tensor& rewards, const TargetUnroll* cache) {
  check_batch(batch, rewards);
  const TargetUnroll local = cache ? TargetUnroll{} : unroll_target(target, batch);
  const TargetUnroll& tq = cache ? *cache : local;
  nn::Tensor best = next_agent_values(batch, tq, [](int, int, std::span<const float> row) { return argmax(row); });
  return bootstrap(batch, rewards, mixed_next(target, batch, std::move(best)), gamma);
}

nn::Tensor exp_target_valid(const JointQ& target, const replay::MiniBatch& batch, float gamma,
                            const nn::Tensor& rewards, const TargetUnroll* cache,
                            const std::vector<const nn::Tensor*>& selector) {
  const TargetUnroll local = cache ? TargetUnroll{} : unroll_target(target, batch);
  const TargetUnroll& tq = cache ? *cache : local;
  nn::Tensor picked = next_agent_values(batch, tq, [&](int t, int r, std::span<const float>) {
    return argmax(selector[static_cast<std::size_t>(t)]->row(r));
  });
  return bootstrap(batch, rewards, mixed_next(target, batch, std::move(picked)), gamma);
}

}  // namespace

nn::Tensor goal_td_target(const JointQ& target, const replay::MiniBatch& batch, float gamma, const nn::Tensor& rewards,
                          const TargetUnroll* cache) {
  return scatter(batch, goal_target_valid(target, batch, gamma, rewards, cache));
}

TdResult goal_td_loss(JointQ& goal, const JointQ& target, const replay::MiniBatch& batch, float gamma,
                      const nn::Tensor* rewards, bool backward, const TargetUnroll* cache) {
  const nn::Tensor y = goal_target_valid(target, batch, gamma, rewards ? *rewards : batch.reward, cache);
  nn::Graph g(backward);
  std::vector<int> rows;
  for (int t = 0; t < batch.max_len; ++t) rows.push_back(batch.active(t));
  const auto qs = unroll_agent_q(g, goal.agent, batch, rows);
  const nn::Var q_tot = mix_valid(g, goal.mixer, taken_values(g, qs, batch), batch, 0);
  return squared_td(g, q_tot, y, backward);
}

nn::Tensor exp_td_target(const JointQ& target, const JointQ& exploration, const replay::MiniBatch& batch, float gamma,
                         const nn::Tensor& rewards, const TargetUnroll* cache) {
  check_batch(batch, rewards);
  nn::Graph g(false);
  const auto qs = unroll_agent_q(g, exploration.agent, batch, bootstrap_rows(batch));
  std::vector<const nn::Tensor*> selector;
  for (int t = 1; t <= batch.max_len; ++t) selector.push_back(&g.value(qs[static_cast<std::size_t>(t)]));
  return scatter(batch, exp_target_valid(target, batch, gamma, rewards, cache, selector));
}

TdResult exp_td_loss(JointQ& exploration, const JointQ& target, const replay::MiniBatch& batch, float gamma,
                     const nn::Tensor& rewards, bool backward, const TargetUnroll* cache) {
  check_batch(batch, rewards);
  nn::Graph g(backward);
  // One unroll serves both the online values (steps 0..T-1) and the
  // next-action selection (steps 1..T); selection reads values only.
  const auto qs = unroll_agent_q(g, exploration.agent, batch, bootstrap_rows(batch));
  std::vector<const nn::Tensor*> selector;
  for (int t = 1; t <= batch.max_len; ++t) selector.push_back(&g.value(qs[static_cast<std::size_t>(t)]));
  const nn::Tensor y = exp_target_valid(target, batch, gamma, rewards, cache, selector);
  const nn::Var q_tot = mix_valid(g, exploration.mixer, taken_values(g, qs, batch), batch, 0);
  return squared_td(g, q_tot, y, backward);
}

}  // namespace strange::marl
