#include "strange/exploration/bonus.hpp"

#include <cmath>
#include <utility>

#include "strange/errors.hpp"

namespace strange::exploration {

void BonusConfig::validate() const {
  if (!(rho >= 0.0 && rho <= 1.0)) throw ConfigError("rho must lie in [0, 1]");
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw ConfigError("beta must be finite and non-negative");
  if (d < 1) throw ConfigError("bonus width d must be positive");
}

double mixed_reward(double r_ext, double r_int, double beta) {
  if (beta < 0.0) throw UsageError("mixed_reward: beta must be non-negative");
  return r_ext + beta * r_int;
}

nn::Tensor mixed_reward(const nn::Tensor& r_ext, const nn::Tensor& r_int, double beta) {
  if (beta < 0.0) throw UsageError("mixed_reward: beta must be non-negative");
  if (!r_ext.same_shape(r_int)) throw DimensionError("mixed_reward: reward shapes differ");
  nn::Tensor out(r_ext.shape());
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = static_cast<float>(static_cast<double>(r_ext[k]) + beta * static_cast<double>(r_int[k]));
  }
  return out;
}

double strangeness(double rho, std::span<const double> obs_sq_errors, double state_sq_error) {
  if (obs_sq_errors.empty()) throw DimensionError("strangeness: no agents");
  double mean = 0.0;
  for (double e : obs_sq_errors) mean += e;
  mean /= static_cast<double>(obs_sq_errors.size());
  return rho * mean + (1.0 - rho) * state_sq_error;
}

namespace {

void check_batch(const replay::MiniBatch& batch, int n_agents, int obs_dim, int state_dim) {
  if (batch.batch < 1 || batch.max_len < 1) throw UsageError("bonus on an empty batch");
  if (batch.n_agents != n_agents || batch.obs_dim != obs_dim || (state_dim > 0 && batch.state_dim != state_dim)) {
    throw DimensionError("bonus: batch does not match the network dimensions");
  }
}

/// Per-step values, step t holding the active(t) running episodes, into a
/// [T x B] tensor that is zero on padded steps. When requested, `loss` gets
/// the mean over valid steps of `loss_terms` (default: the values).
nn::Tensor finish(nn::Graph& g, const std::vector<nn::Var>& per_step, const replay::MiniBatch& batch, nn::Var* loss,
                  const std::vector<nn::Var>* loss_terms) {
  const nn::Var all = g.concat_rows(per_step);
  const nn::Tensor& v = g.value(all);
  nn::Tensor out({batch.max_len, batch.batch});
  std::size_t k = 0;
  for (int t = 0; t < batch.max_len; ++t) {
    for (int b = 0, n = batch.active(t); b < n; ++b) out.at(t, b) = v[k++];
  }
  if (loss) {
    const nn::Var terms = loss_terms ? g.concat_rows(*loss_terms) : all;
    const double count = batch.valid_steps();
    if (count == 0) throw UsageError("bonus loss on a batch without valid steps");
    *loss = g.scale(g.sum(terms), static_cast<float>(1.0 / count));
  }
  return out;
}

/// First `rows` rows of a batch tensor.
nn::Tensor prefix(const nn::Tensor& x, int rows) {
  if (rows == x.rows()) return x;
  const std::size_t n = static_cast<std::size_t>(rows) * x.cols();
  return nn::Tensor({rows, x.cols()}, std::vector<float>(x.data(), x.data() + n));
}

/// [R x N] per-agent column -> [B x 1] mean over agents (rows ordered b, i).
nn::Var agent_mean(nn::Graph& g, nn::Var per_row, int batch, int n_agents) {
  return g.scale(g.sum_cols(g.reshape(per_row, {batch, n_agents})), 1.0f / static_cast<float>(n_agents));
}

nn::Var squared_error(nn::Graph& g, nn::Var pred, nn::Var target) { return g.sum_cols(g.square(g.sub(pred, target))); }

nn::Tensor with_agent_ids(const nn::Tensor& obs, int n_agents) {
  const int rows = obs.rows();
  const int o = obs.cols();
  nn::Tensor x({rows, o + n_agents});
  for (int r = 0; r < rows; ++r) {
    const auto src = obs.row(r);
    auto dst = x.row(r);
    std::copy(src.begin(), src.end(), dst.begin());
    dst[static_cast<std::size_t>(o + r % n_agents)] = 1.0f;
  }
  return x;
}

nn::Tensor one_hot(std::span<const int> actions, int n_actions) {
  nn::Tensor x({static_cast<int>(actions.size()), n_actions});
  for (std::size_t r = 0; r < actions.size(); ++r) {
    const int a = actions[r];
    if (a < 0 || a >= n_actions) throw DimensionError("action index " + std::to_string(a) + " out of range");
    x.at(static_cast<int>(r), a) = 1.0f;
  }
  return x;
}

}  // namespace

// ---- SIM ------------------------------------------------------------------

SimNetwork::SimNetwork(const envs::EnvSpec& spec, int width, bool shared_agents, nn::Rng& rng)
    : n_agents(spec.n_agents), obs_dim(spec.obs_dim), state_dim(spec.state_dim), d(width), shared(shared_agents) {
  if (width < 1) throw ConfigError("SIM width must be positive");
  const int copies = shared ? 1 : n_agents;
  for (int i = 0; i < copies; ++i) {
    encoder.emplace_back(encoder_input(), d, d, rng);
    gru.emplace_back(d, d, rng);
    decoder.emplace_back(d, d, obs_dim, rng);
  }
  state_encoder = nn::Mlp(n_agents * d, d, d, rng);
  state_decoder = nn::Mlp(d, d, state_dim, rng);
}

nn::ParameterList SimNetwork::parameters() {
  nn::ParameterList out;
  for (std::size_t i = 0; i < encoder.size(); ++i) {
    const std::string tag = "sim.agent" + std::to_string(i);
    encoder[i].collect(out, tag + ".f_oe");
    gru[i].collect(out, tag + ".f_gru");
    decoder[i].collect(out, tag + ".f_og");
  }
  state_encoder.collect(out, "sim.f_se");
  state_decoder.collect(out, "sim.f_sg");
  return out;
}

nn::ParameterList SimNetwork::parameters() const { return const_cast<SimNetwork*>(this)->parameters(); }

SimObservation sim_observe_step(const SimNetwork& sim, int agent, const nn::Tensor& next_obs, const nn::Tensor& hidden) {
  if (agent < 0 || agent >= sim.n_agents) throw DimensionError("sim_observe_step: agent id out of range");
  if (static_cast<int>(next_obs.size()) != sim.obs_dim || static_cast<int>(hidden.size()) != sim.d) {
    throw DimensionError("sim_observe_step: observation or hidden size mismatch");
  }
  nn::Tensor x({1, sim.encoder_input()});
  std::copy(next_obs.values().begin(), next_obs.values().end(), x.data());
  if (sim.shared) x[static_cast<std::size_t>(sim.obs_dim + agent)] = 1.0f;
  const std::size_t k = sim.slot(agent);
  nn::Graph g(false);
  const nn::Var m = sim.encoder[k](g, g.input(std::move(x)));
  const nn::Var h = sim.gru[k](g, m, g.input(hidden.reshaped({1, sim.d})));
  const nn::Var recon = sim.decoder[k](g, h);
  return {g.value(recon).reshaped({sim.obs_dim}), g.value(h).reshaped({sim.d}), g.value(m).reshaped({sim.d})};
}

nn::Tensor sim_predict_state(const SimNetwork& sim, const nn::Tensor& hiddens) {
  if (hiddens.rank() != 2 || hiddens.dim(0) != sim.n_agents || hiddens.dim(1) != sim.d) {
    throw DimensionError("sim_predict_state: expected [" + std::to_string(sim.n_agents) + " x " +
                         std::to_string(sim.d) + "] hiddens, got " + nn::shape_string(hiddens.shape()));
  }
  nn::Graph g(false);
  const nn::Var s = sim.state_decoder(g, sim.state_encoder(g, g.input(hiddens.reshaped({1, sim.n_agents * sim.d}))));
  return g.value(s).reshaped({sim.state_dim});
}

SimBonus sim_bonus(const SimNetwork& sim, double rho, const nn::Tensor& next_obs, const nn::Tensor& next_state,
                   const nn::Tensor& hidden) {
  if (next_obs.rows() != sim.n_agents || next_obs.cols() != sim.obs_dim ||
      static_cast<int>(next_state.size()) != sim.state_dim || hidden.rows() != sim.n_agents) {
    throw DimensionError("sim_bonus: transition does not match the SIM dimensions");
  }
  SimBonus out;
  out.hidden = nn::Tensor({sim.n_agents, sim.d});
  std::vector<double> errors;
  for (int i = 0; i < sim.n_agents; ++i) {
    const nn::Tensor z = nn::Tensor::vector(next_obs.row(i));
    const SimObservation step = sim_observe_step(sim, i, z, nn::Tensor::vector(hidden.row(i)));
    errors.push_back(nn::mse(step.recon, z));
    std::copy(step.hidden.values().begin(), step.hidden.values().end(), out.hidden.row(i).begin());
  }
  const nn::Tensor s_hat = sim_predict_state(sim, out.hidden);
  out.r_int = strangeness(rho, errors, nn::mse(s_hat, next_state.reshaped({sim.state_dim})));
  return out;
}

namespace {

template <class Sim>
nn::Tensor sim_batch_impl(nn::Graph& g, Sim& sim, double rho, const replay::MiniBatch& batch, nn::Var* loss) {
  check_batch(batch, sim.n_agents, sim.obs_dim, sim.state_dim);
  if (rho < 0.0 || rho > 1.0) throw UsageError("sim: rho must lie in [0, 1]");
  const int B = batch.batch;
  const int N = sim.n_agents;
  const std::size_t groups = sim.shared ? 1 : static_cast<std::size_t>(N);
  const int rows = sim.shared ? B * N : B;
  std::vector<nn::Var> h(groups);
  for (auto& v : h) v = g.input(nn::Tensor({rows, sim.d}));

  std::vector<nn::Var> per_step;
  int current = B;
  for (int t = 0; t < batch.max_len; ++t) {
    const std::size_t next = static_cast<std::size_t>(t + 1);
    const int n = batch.active(t);
    if (n < current) {
      for (auto& v : h) v = g.slice_rows(v, sim.shared ? n * N : n);
      current = n;
    }
    nn::Var obs_err;
    for (std::size_t k = 0; k < groups; ++k) {
      const nn::Tensor target =
          sim.shared ? prefix(batch.obs[next], n * N) : prefix(batch.agent_obs(t + 1, static_cast<int>(k)), n);
      const nn::Var x = g.input(sim.shared ? with_agent_ids(target, N) : target);
      h[k] = sim.gru[k](g, sim.encoder[k](g, x), h[k]);
      const nn::Var err = squared_error(g, sim.decoder[k](g, h[k]), g.input(target));
      obs_err = obs_err.valid() ? g.add(obs_err, err) : err;
    }
    nn::Var hcat;
    if (sim.shared) {
      obs_err = agent_mean(g, obs_err, n, N);
      hcat = g.reshape(h[0], {n, N * sim.d});
    } else {
      obs_err = g.scale(obs_err, 1.0f / static_cast<float>(N));
      hcat = g.concat_cols(h);
    }
    const nn::Var s_hat = sim.state_decoder(g, sim.state_encoder(g, hcat));
    const nn::Var state_err = squared_error(g, s_hat, g.input(prefix(batch.state[next], n)));
    per_step.push_back(g.add(g.scale(obs_err, static_cast<float>(rho)), g.scale(state_err, static_cast<float>(1.0 - rho))));
  }
  return finish(g, per_step, batch, loss, nullptr);
}

}  // namespace

nn::Tensor sim_batch_bonus(nn::Graph& g, const SimNetwork& sim, double rho, const replay::MiniBatch& batch,
                           nn::Var* loss) {
  return sim_batch_impl(g, sim, rho, batch, loss);
}

nn::Tensor sim_batch_bonus(nn::Graph& g, SimNetwork& sim, double rho, const replay::MiniBatch& batch, nn::Var* loss) {
  return sim_batch_impl(g, sim, rho, batch, loss);
}

// ---- RND ------------------------------------------------------------------

RndNetwork::RndNetwork(const envs::EnvSpec& spec, int width, nn::Rng& rng)
    : target(spec.obs_dim, width, width, rng), predictor(spec.obs_dim, width, width, rng), n_agents(spec.n_agents) {}

nn::ParameterList RndNetwork::parameters() {
  nn::ParameterList out;
  predictor.collect(out, "rnd.predictor");
  return out;
}

nn::ParameterList RndNetwork::target_parameters() {
  nn::ParameterList out;
  target.collect(out, "rnd.target");
  return out;
}

double rnd_bonus(const RndNetwork& rnd, const nn::Tensor& next_obs) {
  if (next_obs.rank() != 2 || next_obs.rows() != rnd.n_agents || next_obs.cols() != rnd.target.first.in) {
    throw DimensionError("rnd_bonus: expected one observation row per agent");
  }
  nn::Graph g(false);
  const nn::Var x = g.input(next_obs);
  const nn::Tensor& err = g.value(squared_error(g, rnd.predictor(g, x), rnd.target(g, x)));
  double total = 0.0;
  for (float e : err.values()) total += e;
  return total / rnd.n_agents;
}

namespace {

template <class Rnd>
nn::Tensor rnd_batch_impl(nn::Graph& g, Rnd& rnd, const replay::MiniBatch& batch, nn::Var* loss) {
  check_batch(batch, rnd.n_agents, rnd.target.first.in, 0);
  std::vector<nn::Var> per_step;
  for (int t = 0; t < batch.max_len; ++t) {
    const int n = batch.active(t);
    const nn::Var x = g.input(prefix(batch.obs[static_cast<std::size_t>(t + 1)], n * rnd.n_agents));
    const nn::Var target = std::as_const(rnd.target)(g, x);
    const nn::Var err = squared_error(g, rnd.predictor(g, x), target);
    per_step.push_back(agent_mean(g, err, n, rnd.n_agents));
  }
  return finish(g, per_step, batch, loss, nullptr);
}

}  // namespace

nn::Tensor rnd_batch_bonus(nn::Graph& g, const RndNetwork& rnd, const replay::MiniBatch& batch, nn::Var* loss) {
  return rnd_batch_impl(g, rnd, batch, loss);
}

nn::Tensor rnd_batch_bonus(nn::Graph& g, RndNetwork& rnd, const replay::MiniBatch& batch, nn::Var* loss) {
  return rnd_batch_impl(g, rnd, batch, loss);
}

// ---- ICM ------------------------------------------------------------------

IcmNetwork::IcmNetwork(const envs::EnvSpec& spec, int width, nn::Rng& rng)
    : n_agents(spec.n_agents),
      n_actions(spec.n_actions),
      encoder(spec.obs_dim, width, width, rng),
      forward(width + spec.n_actions, width, width, rng),
      inverse(2 * width, width, spec.n_actions, rng) {}

nn::ParameterList IcmNetwork::parameters() {
  nn::ParameterList out;
  encoder.collect(out, "icm.encoder");
  forward.collect(out, "icm.forward");
  inverse.collect(out, "icm.inverse");
  return out;
}

double icm_bonus(const IcmNetwork& icm, const nn::Tensor& obs, std::span<const int> actions,
                 const nn::Tensor& next_obs) {
  if (obs.rank() != 2 || obs.rows() != icm.n_agents || !obs.same_shape(next_obs) ||
      actions.size() != static_cast<std::size_t>(icm.n_agents)) {
    throw DimensionError("icm_bonus: expected one observation row and action per agent");
  }
  nn::Graph g(false);
  const nn::Var e = icm.encoder(g, g.input(obs));
  const nn::Var e_next = icm.encoder(g, g.input(next_obs));
  const std::vector<nn::Var> parts{e, g.input(one_hot(actions, icm.n_actions))};
  const nn::Var pred = icm.forward(g, g.concat_cols(parts));
  const nn::Tensor& err = g.value(squared_error(g, pred, e_next));
  double total = 0.0;
  for (float v : err.values()) total += v;
  return total / icm.n_agents;
}

namespace {

template <class Icm>
nn::Tensor icm_batch_impl(nn::Graph& g, Icm& icm, const replay::MiniBatch& batch, nn::Var* loss) {
  check_batch(batch, icm.n_agents, icm.encoder.first.in, 0);
  if (batch.n_actions != icm.n_actions) throw DimensionError("icm: action count mismatch");
  const int N = icm.n_agents;
  const float w = static_cast<float>(icm.forward_weight);
  std::vector<nn::Var> per_step;
  std::vector<nn::Var> terms;
  nn::Var e = icm.encoder(g, g.input(batch.obs[0]));
  for (int t = 0; t < batch.max_len; ++t) {
    const int n = batch.active(t);
    const auto acts = std::span<const int>(batch.actions[static_cast<std::size_t>(t)]).first(static_cast<std::size_t>(n * N));
    e = g.slice_rows(e, n * N);
    const nn::Var e_next = icm.encoder(g, g.input(prefix(batch.obs[static_cast<std::size_t>(t + 1)], n * N)));
    const std::vector<nn::Var> fwd_in{e, g.input(one_hot(acts, icm.n_actions))};
    const nn::Var pred = icm.forward(g, g.concat_cols(fwd_in));
    // The forward target is a constant; σ learns through the inverse model
    // and through the forward model's input.
    const nn::Var fwd_err = agent_mean(g, squared_error(g, pred, g.input(g.value(e_next))), n, N);
    per_step.push_back(fwd_err);
    if (loss) {
      const std::vector<nn::Var> inv_in{e, e_next};
      const nn::Var xent = agent_mean(g, g.softmax_xent(icm.inverse(g, g.concat_cols(inv_in)), acts), n, N);
      terms.push_back(g.add(g.scale(xent, 1.0f - w), g.scale(fwd_err, w)));
    }
    e = e_next;
  }
  return finish(g, per_step, batch, loss, loss ? &terms : nullptr);
}

}  // namespace

nn::Tensor icm_batch_bonus(nn::Graph& g, IcmNetwork& icm, const replay::MiniBatch& batch, nn::Var* loss) {
  return icm_batch_impl(g, icm, batch, loss);
}

nn::Tensor icm_batch_bonus(nn::Graph& g, const IcmNetwork& icm, const replay::MiniBatch& batch, nn::Var* loss) {
  return icm_batch_impl(g, icm, batch, loss);
}

// ---- modules --------------------------------------------------------------

std::string to_string(BonusKind kind) {
  switch (kind) {
    case BonusKind::none: return "none";
    case BonusKind::sim: return "sim";
    case BonusKind::rnd: return "rnd";
    case BonusKind::icm: return "icm";
  }
  return "none";
}

void BonusModule::apply(nn::Graph& g, nn::Var loss, const nn::ParameterList& params) {
  nn::zero_grads(params);
  g.backward(loss);
  nn::clip_grad_norm(params, grad_clip_);
  optimizer_.step(params);
}

void BonusModule::save(nn::CheckpointWriter& out, const std::string& module) {
  out.params(module + ".params", parameters());
  const nn::ParameterList frozen = frozen_parameters();
  if (!frozen.empty()) out.params(module + ".frozen", frozen);
  nn::save_optimizer_state(out, module + ".optim", optimizer_.state());
}

void BonusModule::load(nn::CheckpointReader& in, const std::string& module) {
  in.load_params(module + ".params", parameters());
  const nn::ParameterList frozen = frozen_parameters();
  if (!frozen.empty()) in.load_params(module + ".frozen", frozen);
  nn::load_optimizer_state(in, module + ".optim", optimizer_.state());
}

SimModule::SimModule(const envs::EnvSpec& spec, const BonusConfig& config, bool shared, nn::Rng& rng,
                     const nn::OptimizerSettings& optimizer, double grad_clip)
    : BonusModule(optimizer, grad_clip), net(spec, config.d, shared, rng), rho(config.rho) {
  config.validate();
}

nn::Tensor SimModule::evaluate(const replay::MiniBatch& batch) const {
  nn::Graph g(false);
  return sim_batch_bonus(g, net, rho, batch, nullptr);
}

BonusResult SimModule::update(const replay::MiniBatch& batch) {
  nn::Graph g(true);
  nn::Var loss;
  BonusResult result;
  result.r_int = sim_batch_bonus(g, net, rho, batch, &loss);
  result.loss = g.value(loss).item();
  apply(g, loss, parameters());
  return result;
}

RndModule::RndModule(const envs::EnvSpec& spec, const BonusConfig& config, nn::Rng& rng,
                     const nn::OptimizerSettings& optimizer, double grad_clip)
    : BonusModule(optimizer, grad_clip), net(spec, config.d, rng) {
  config.validate();
}

nn::Tensor RndModule::evaluate(const replay::MiniBatch& batch) const {
  nn::Graph g(false);
  return rnd_batch_bonus(g, net, batch, nullptr);
}

BonusResult RndModule::update(const replay::MiniBatch& batch) {
  nn::Graph g(true);
  nn::Var loss;
  BonusResult result;
  result.r_int = rnd_batch_bonus(g, net, batch, &loss);
  result.loss = g.value(loss).item();
  apply(g, loss, parameters());
  return result;
}

IcmModule::IcmModule(const envs::EnvSpec& spec, const BonusConfig& config, nn::Rng& rng,
                     const nn::OptimizerSettings& optimizer, double grad_clip)
    : BonusModule(optimizer, grad_clip), net(spec, config.d, rng) {
  config.validate();
}

nn::Tensor IcmModule::evaluate(const replay::MiniBatch& batch) const {
  nn::Graph g(false);
  return icm_batch_bonus(g, net, batch, nullptr);
}

BonusResult IcmModule::update(const replay::MiniBatch& batch) {
  nn::Graph g(true);
  nn::Var loss;
  BonusResult result;
  result.r_int = icm_batch_bonus(g, net, batch, &loss);
  result.loss = g.value(loss).item();
  apply(g, loss, parameters());
  return result;
}

std::unique_ptr<BonusModule> make_bonus(BonusKind kind, const envs::EnvSpec& spec, const BonusConfig& config,
                                        bool shared_sim, const nn::OptimizerSettings& optimizer, double grad_clip,
                                        nn::Rng& rng) {
  switch (kind) {
    case BonusKind::none: return nullptr;
    case BonusKind::sim: return std::make_unique<SimModule>(spec, config, shared_sim, rng, optimizer, grad_clip);
    case BonusKind::rnd: return std::make_unique<RndModule>(spec, config, rng, optimizer, grad_clip);
    case BonusKind::icm: return std::make_unique<IcmModule>(spec, config, rng, optimizer, grad_clip);
  }
  return nullptr;
}

}  // namespace strange::exploration
