#pragma once

#include <string>

#include "strange/nn/graph.hpp"
#include "strange/nn/parameter.hpp"
#include "strange/nn/rng.hpp"

namespace strange::nn {

/// Dense layer y = x·Wᵀ + b, W [out x in], b [out].
struct Linear {
  int in = 0;
  int out = 0;
  Parameter weight;
  Parameter bias;

  Linear() = default;
  /// Zero-initialized layer.
  Linear(int in_dim, int out_dim);
  /// Uniform(-1/√in, 1/√in) initialization for weights and bias.
  Linear(int in_dim, int out_dim, Rng& rng);

  Var operator()(Graph& g, Var x) const;
  Var operator()(Graph& g, Var x);
  void collect(ParameterList& out, const std::string& prefix);
};

/// GRU cell; each gate maps [input, hidden] to hidden.
struct GruCell {
  int in = 0;
  int hidden = 0;
  Parameter w_update, b_update;
  Parameter w_reset, b_reset;
  Parameter w_cand, b_cand;

  GruCell() = default;
  GruCell(int in_dim, int hidden_dim);
  GruCell(int in_dim, int hidden_dim, Rng& rng);

  Var operator()(Graph& g, Var x, Var h) const;
  Var operator()(Graph& g, Var x, Var h);
  void collect(ParameterList& out, const std::string& prefix);
};

/// Two dense layers with a relu between them (one hidden layer).
struct Mlp {
  Linear first;
  Linear second;

  Mlp() = default;
  Mlp(int in_dim, int hidden_dim, int out_dim, Rng& rng);

  Var operator()(Graph& g, Var x) const;
  Var operator()(Graph& g, Var x);
  void collect(ParameterList& out, const std::string& prefix);
};

// Eager single-call helpers over plain tensors.

Tensor linear_forward(const Linear& layer, const Tensor& x);
Tensor gru_step(const GruCell& cell, const Tensor& x, const Tensor& h_prev);
Tensor activation(Activation kind, const Tensor& x);
/// Sum of squared differences ‖pred − target‖², accumulated in double.
double mse(const Tensor& pred, const Tensor& target);
/// Mean of squared differences.
double mse_mean(const Tensor& pred, const Tensor& target);

}  // namespace strange::nn
