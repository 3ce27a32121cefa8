#pragma once

// Central finite differences against tape gradients.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>

#include "strange/nn/graph.hpp"
#include "strange/nn/parameter.hpp"

namespace testing {

struct GradCheck {
  double max_rel_error = 0.0;
  int checked = 0;
  /// Coordinates whose ±h perturbation crosses a relu or abs kink; the
  /// central difference is meaningless there.
  int skipped = 0;
};

/// `loss(g)` must build a scalar on `g` from the parameters in `params`.
/// The error of each coordinate is |analytic − numeric| / max(1, |analytic|,
/// |numeric|), so near-zero gradients are judged on absolute error.
/// Coordinates where f(x−h), f(x) and f(x+h) do not share one relu/abs
/// sign pattern are skipped and counted.
inline GradCheck grad_check(const strange::nn::ParameterList& params,
                            const std::function<strange::nn::Var(strange::nn::Graph&)>& loss, double h = 1e-3) {
  strange::nn::zero_grads(params);
  {
    strange::nn::Graph g(true);
    g.backward(loss(g));
  }
  struct Eval {
    double value;
    std::uint64_t kinks;
  };
  auto eval = [&]() {
    strange::nn::Graph g(false);
    const double v = g.value(loss(g)).item();
    return Eval{v, g.kink_signature()};
  };
  const std::uint64_t here = eval().kinks;
  GradCheck out;
  for (const auto& np : params) {
    strange::nn::Parameter& p = *np.param;
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const float orig = p.value[i];
      // Divide by the step actually taken after rounding to float.
      const float hi = static_cast<float>(orig + h);
      const float lo = static_cast<float>(orig - h);
      p.value[i] = hi;
      const Eval up = eval();
      p.value[i] = lo;
      const Eval down = eval();
      p.value[i] = orig;
      if (up.kinks != here || down.kinks != here) {
        ++out.skipped;
        continue;
      }
      const double numeric = (up.value - down.value) / (static_cast<double>(hi) - lo);
      const double analytic = p.grad[i];
      const double denom = std::max({1.0, std::fabs(analytic), std::fabs(numeric)});
      out.max_rel_error = std::max(out.max_rel_error, std::fabs(analytic - numeric) / denom);
      ++out.checked;
    }
  }
  return out;
}

}  // namespace testing
