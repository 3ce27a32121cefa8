#include "strange/nn/layers.hpp"

#include <cmath>

#include "kernels.hpp"
#include "strange/errors.hpp"

namespace strange::nn {

namespace {

Tensor uniform_tensor(Shape shape, double bound, Rng& rng) {
  Tensor t(std::move(shape));
  for (float& v : t.values()) v = static_cast<float>(rng.uniform(-bound, bound));
  return t;
}

}  // namespace

Linear::Linear(int in_dim, int out_dim)
    : in(in_dim), out(out_dim), weight(Tensor({out_dim, in_dim})), bias(Tensor({out_dim})) {}

Linear::Linear(int in_dim, int out_dim, Rng& rng) : in(in_dim), out(out_dim) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_dim));
  weight = Parameter(uniform_tensor({out_dim, in_dim}, bound, rng));
  bias = Parameter(uniform_tensor({out_dim}, bound, rng));
}

Var Linear::operator()(Graph& g, Var x) const { return g.linear(x, g.param(weight), g.param(bias)); }
Var Linear::operator()(Graph& g, Var x) { return g.linear(x, g.param(weight), g.param(bias)); }

void Linear::collect(ParameterList& out_list, const std::string& prefix) {
  out_list.push_back({prefix + ".weight", &weight});
  out_list.push_back({prefix + ".bias", &bias});
}

GruCell::GruCell(int in_dim, int hidden_dim) : in(in_dim), hidden(hidden_dim) {
  const Shape w{hidden_dim, in_dim + hidden_dim};
  const Shape b{hidden_dim};
  w_update = Parameter(Tensor(w));
  b_update = Parameter(Tensor(b));
  w_reset = Parameter(Tensor(w));
  b_reset = Parameter(Tensor(b));
  w_cand = Parameter(Tensor(w));
  b_cand = Parameter(Tensor(b));
}

GruCell::GruCell(int in_dim, int hidden_dim, Rng& rng) : in(in_dim), hidden(hidden_dim) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_dim + hidden_dim));
  const Shape w{hidden_dim, in_dim + hidden_dim};
  const Shape b{hidden_dim};
  w_update = Parameter(uniform_tensor(w, bound, rng));
  b_update = Parameter(uniform_tensor(b, bound, rng));
  w_reset = Parameter(uniform_tensor(w, bound, rng));
  b_reset = Parameter(uniform_tensor(b, bound, rng));
  w_cand = Parameter(uniform_tensor(w, bound, rng));
  b_cand = Parameter(uniform_tensor(b, bound, rng));
}

Var GruCell::operator()(Graph& g, Var x, Var h) const {
  return g.gru(x, h, g.param(w_update), g.param(b_update), g.param(w_reset), g.param(b_reset), g.param(w_cand),
               g.param(b_cand));
}

Var GruCell::operator()(Graph& g, Var x, Var h) {
  return g.gru(x, h, g.param(w_update), g.param(b_update), g.param(w_reset), g.param(b_reset), g.param(w_cand),
               g.param(b_cand));
}

void GruCell::collect(ParameterList& out, const std::string& prefix) {
  out.push_back({prefix + ".w_update", &w_update});
  out.push_back({prefix + ".b_update", &b_update});
  out.push_back({prefix + ".w_reset", &w_reset});
  out.push_back({prefix + ".b_reset", &b_reset});
  out.push_back({prefix + ".w_cand", &w_cand});
  out.push_back({prefix + ".b_cand", &b_cand});
}

Mlp::Mlp(int in_dim, int hidden_dim, int out_dim, Rng& rng)
    : first(in_dim, hidden_dim, rng), second(hidden_dim, out_dim, rng) {}

Var Mlp::operator()(Graph& g, Var x) const { return second(g, g.relu(first(g, x))); }
Var Mlp::operator()(Graph& g, Var x) { return second(g, g.relu(first(g, x))); }

void Mlp::collect(ParameterList& out, const std::string& prefix) {
  first.collect(out, prefix + ".0");
  second.collect(out, prefix + ".1");
}

Tensor linear_forward(const Linear& layer, const Tensor& x) {
  Graph g(false);
  Tensor out = g.value(layer(g, g.input(x)));
  return x.rank() == 1 ? out.reshaped({layer.out}) : out;
}

Tensor gru_step(const GruCell& cell, const Tensor& x, const Tensor& h_prev) {
  if (x.cols() != cell.in || h_prev.cols() != cell.hidden) {
    throw DimensionError("gru_step: expected input " + std::to_string(cell.in) + " and hidden " +
                         std::to_string(cell.hidden) + ", got " + shape_string(x.shape()) + " and " +
                         shape_string(h_prev.shape()));
  }
  Graph g(false);
  Tensor out = g.value(cell(g, g.input(x), g.input(h_prev)));
  return x.rank() == 1 ? out.reshaped({cell.hidden}) : out;
}

Tensor activation(Activation kind, const Tensor& x) {
  Tensor y = x;
  for (float& v : y.values()) v = kernels::activate(kind, v);
  return y;
}

double mse(const Tensor& pred, const Tensor& target) {
  if (!pred.same_shape(target)) {
    throw DimensionError("mse: " + shape_string(pred.shape()) + " vs " + shape_string(target.shape()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = static_cast<double>(pred[i]) - target[i];
    s += d * d;
  }
  return s;
}

double mse_mean(const Tensor& pred, const Tensor& target) {
  return mse(pred, target) / static_cast<double>(pred.size());
}

}  // namespace strange::nn
