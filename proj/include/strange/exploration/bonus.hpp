#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "strange/envs/env.hpp"
#include "strange/nn/checkpoint.hpp"
#include "strange/nn/graph.hpp"
#include "strange/nn/layers.hpp"
#include "strange/nn/optim.hpp"
#include "strange/replay/replay.hpp"

namespace strange::exploration {

struct BonusConfig {
  double rho = 0.5;   ///< weight of the observation term against the state term
  double beta = 0.1;  ///< scale of the intrinsic reward in the mixed reward; 0 disables it
  int d = 32;         ///< hidden and embedding width of every sub-network

  void validate() const;
};

/// r_ext + β·r_int. Throws UsageError for β < 0.
double mixed_reward(double r_ext, double r_int, double beta);
/// Elementwise mixed reward over [T x B] tensors.
nn::Tensor mixed_reward(const nn::Tensor& r_ext, const nn::Tensor& r_int, double beta);

/// Strangeness index module.
///
/// Per agent: encoder f_oe (z -> m), GRU (m, h -> h'), decoder f_og (h' -> z̃).
/// Shared: f_se over the concatenated hiddens followed by f_sg (-> s̃).
/// With `shared` the per-agent networks are one set of weights whose
/// encoder also receives a one-hot agent id.
struct SimNetwork {
  int n_agents = 0;
  int obs_dim = 0;
  int state_dim = 0;
  int d = 0;
  bool shared = true;
  std::vector<nn::Mlp> encoder;
  std::vector<nn::GruCell> gru;
  std::vector<nn::Mlp> decoder;
  nn::Mlp state_encoder;
  nn::Mlp state_decoder;

  SimNetwork() = default;
  SimNetwork(const envs::EnvSpec& spec, int width, bool shared_agents, nn::Rng& rng);

  int encoder_input() const { return obs_dim + (shared ? n_agents : 0); }
  /// Index of the per-agent network used by `agent`.
  std::size_t slot(int agent) const { return shared ? 0 : static_cast<std::size_t>(agent); }

  nn::ParameterList parameters();
  nn::ParameterList parameters() const;
};

struct SimObservation {
  nn::Tensor recon;   ///< z̃ [obs_dim]
  nn::Tensor hidden;  ///< h' [d]
  nn::Tensor repr;    ///< m [d]
};

/// One recurrent autoencoder step for one agent on its next observation.
SimObservation sim_observe_step(const SimNetwork& sim, int agent, const nn::Tensor& next_obs, const nn::Tensor& hidden);
/// s̃ from the agents' next hiddens [N x d] (concatenated in agent order).
nn::Tensor sim_predict_state(const SimNetwork& sim, const nn::Tensor& hiddens);

struct SimBonus {
  double r_int = 0.0;
  nn::Tensor hidden;  ///< [N x d]
};

/// ρ·(1/N)·Σᵢ‖z̃ⁱ − zⁱ‖² + (1−ρ)·‖s̃ − s‖² for one transition given the
/// agents' next observations [N x obs_dim], the next state and the hiddens
/// carried from the previous step [N x d].
SimBonus sim_bonus(const SimNetwork& sim, double rho, const nn::Tensor& next_obs, const nn::Tensor& next_state,
                   const nn::Tensor& hidden);
/// Eq. (6) on precomputed squared errors.
double strangeness(double rho, std::span<const double> obs_sq_errors, double state_sq_error);

/// Per-step bonuses [T x B] (zero on padded steps) and their masked mean.
struct BonusResult {
  nn::Tensor r_int;
  double loss = 0.0;
};

/// Intrinsic rewards of every batch step, unrolling hiddens from step 0.
/// When `loss` is given it receives the masked batch mean of r_int as a
/// graph node.
nn::Tensor sim_batch_bonus(nn::Graph& g, const SimNetwork& sim, double rho, const replay::MiniBatch& batch,
                           nn::Var* loss);
nn::Tensor sim_batch_bonus(nn::Graph& g, SimNetwork& sim, double rho, const replay::MiniBatch& batch, nn::Var* loss);

/// Random network distillation over local observations: a frozen random
/// target and a trained predictor, both obs -> d.
struct RndNetwork {
  nn::Mlp target;
  nn::Mlp predictor;
  int n_agents = 0;

  RndNetwork() = default;
  RndNetwork(const envs::EnvSpec& spec, int width, nn::Rng& rng);

  nn::ParameterList parameters();  ///< predictor only
  nn::ParameterList target_parameters();
};

/// Mean over agents of ‖f_p(zⁱ) − f(zⁱ)‖² for next observations [N x obs_dim].
double rnd_bonus(const RndNetwork& rnd, const nn::Tensor& next_obs);
nn::Tensor rnd_batch_bonus(nn::Graph& g, const RndNetwork& rnd, const replay::MiniBatch& batch, nn::Var* loss);
nn::Tensor rnd_batch_bonus(nn::Graph& g, RndNetwork& rnd, const replay::MiniBatch& batch, nn::Var* loss);

/// Intrinsic curiosity over local observations: encoder σ shared by a
/// forward model [σ(z), onehot(u)] -> σ(z') and an inverse model
/// [σ(z), σ(z')] -> action logits.
struct IcmNetwork {
  int n_agents = 0;
  int n_actions = 0;
  nn::Mlp encoder;
  nn::Mlp forward;
  nn::Mlp inverse;
  /// Weight of the forward loss in the training objective.
  double forward_weight = 0.2;

  IcmNetwork() = default;
  IcmNetwork(const envs::EnvSpec& spec, int width, nn::Rng& rng);

  nn::ParameterList parameters();
};

/// Mean over agents of ‖σ(zⁱ') − f(σ(zⁱ), uⁱ)‖²; obs and next_obs are
/// [N x obs_dim].
double icm_bonus(const IcmNetwork& icm, const nn::Tensor& obs, std::span<const int> actions,
                 const nn::Tensor& next_obs);
/// Bonuses [T x B]; `loss` receives (1−w)·inverse + w·forward as a node.
nn::Tensor icm_batch_bonus(nn::Graph& g, IcmNetwork& icm, const replay::MiniBatch& batch, nn::Var* loss);
nn::Tensor icm_batch_bonus(nn::Graph& g, const IcmNetwork& icm, const replay::MiniBatch& batch, nn::Var* loss);

enum class BonusKind { none, sim, rnd, icm };

std::string to_string(BonusKind kind);

/// A bonus generator with its own optimizer. `update` computes the batch
/// bonuses with the current parameters, then takes one gradient step.
class BonusModule {
 public:
  virtual ~BonusModule() = default;

  virtual BonusKind kind() const = 0;
  /// Bonuses [T x B] with the current parameters; no side effects.
  virtual nn::Tensor evaluate(const replay::MiniBatch& batch) const = 0;
  virtual BonusResult update(const replay::MiniBatch& batch) = 0;
  virtual nn::ParameterList parameters() = 0;

  void save(nn::CheckpointWriter& out, const std::string& module);
  void load(nn::CheckpointReader& in, const std::string& module);

 protected:
  BonusModule(const nn::OptimizerSettings& optimizer, double grad_clip) : optimizer_(optimizer), grad_clip_(grad_clip) {}

  /// Backpropagates `loss`, clips the gradients and applies the optimizer.
  void apply(nn::Graph& g, nn::Var loss, const nn::ParameterList& params);
  /// Extra tensors (beyond trainable parameters) that a checkpoint must hold.
  virtual nn::ParameterList frozen_parameters() { return {}; }

 private:
  nn::Optimizer optimizer_;
  double grad_clip_;
};

/// Builds the generator for `kind`; nullptr for BonusKind::none.
std::unique_ptr<BonusModule> make_bonus(BonusKind kind, const envs::EnvSpec& spec, const BonusConfig& config,
                                        bool shared_sim, const nn::OptimizerSettings& optimizer, double grad_clip,
                                        nn::Rng& rng);

class SimModule : public BonusModule {
 public:
  SimModule(const envs::EnvSpec& spec, const BonusConfig& config, bool shared, nn::Rng& rng,
            const nn::OptimizerSettings& optimizer = {}, double grad_clip = 10.0);

  BonusKind kind() const override { return BonusKind::sim; }
  nn::Tensor evaluate(const replay::MiniBatch& batch) const override;
  BonusResult update(const replay::MiniBatch& batch) override;
  nn::ParameterList parameters() override { return net.parameters(); }

  SimNetwork net;
  double rho;
};

class RndModule : public BonusModule {
 public:
  RndModule(const envs::EnvSpec& spec, const BonusConfig& config, nn::Rng& rng,
            const nn::OptimizerSettings& optimizer = {}, double grad_clip = 10.0);

  BonusKind kind() const override { return BonusKind::rnd; }
  nn::Tensor evaluate(const replay::MiniBatch& batch) const override;
  BonusResult update(const replay::MiniBatch& batch) override;
  nn::ParameterList parameters() override { return net.parameters(); }

  RndNetwork net;

 protected:
  nn::ParameterList frozen_parameters() override { return net.target_parameters(); }
};

class IcmModule : public BonusModule {
 public:
  IcmModule(const envs::EnvSpec& spec, const BonusConfig& config, nn::Rng& rng,
            const nn::OptimizerSettings& optimizer = {}, double grad_clip = 10.0);

  BonusKind kind() const override { return BonusKind::icm; }
  nn::Tensor evaluate(const replay::MiniBatch& batch) const override;
  BonusResult update(const replay::MiniBatch& batch) override;
  nn::ParameterList parameters() override { return net.parameters(); }

  IcmNetwork net;
};

}  // namespace strange::exploration
