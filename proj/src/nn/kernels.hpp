#pragma once

// Dense float kernels shared by the tape and the eager helpers. Every output
// element is computed in a fixed order that does not depend on the number of
// rows, so a batch of R rows gives bitwise the same per-row result as R
// single-row calls.

#include <cmath>
#include <cstddef>
#include <vector>

#include "strange/nn/graph.hpp"
#include "strange/nn/tensor.hpp"

namespace strange::nn::kernels {

inline void axpy(float a, const float* x, float* y, int n) {
  for (int i = 0; i < n; ++i) y[i] += a * x[i];
}

/// y[R x out] = x[R x in] · Wᵀ + b
inline void linear_forward(const float* x, int rows, int in, const float* w, const float* b, int out, float* y) {
  std::vector<float> wt(static_cast<std::size_t>(in) * out);
  for (int o = 0; o < out; ++o) {
    for (int k = 0; k < in; ++k) wt[static_cast<std::size_t>(k) * out + o] = w[static_cast<std::size_t>(o) * in + k];
  }
  for (int r = 0; r < rows; ++r) {
    float* yr = y + static_cast<std::size_t>(r) * out;
    const float* xr = x + static_cast<std::size_t>(r) * in;
    for (int o = 0; o < out; ++o) yr[o] = b[o];
    for (int k = 0; k < in; ++k) {
      if (xr[k] != 0.0f) axpy(xr[k], wt.data() + static_cast<std::size_t>(k) * out, yr, out);
    }
  }
}

/// Accumulates dx (if non-null), dW and db (if non-null) for y = x·Wᵀ + b.
inline void linear_backward(const float* x, int rows, int in, const float* w, int out, const float* dy, float* dx,
                            float* dw, float* db) {
  for (int r = 0; r < rows; ++r) {
    const float* dyr = dy + static_cast<std::size_t>(r) * out;
    const float* xr = x + static_cast<std::size_t>(r) * in;
    for (int o = 0; o < out; ++o) {
      const float g = dyr[o];
      if (g == 0.0f) continue;
      if (dx) axpy(g, w + static_cast<std::size_t>(o) * in, dx + static_cast<std::size_t>(r) * in, in);
      if (dw) axpy(g, xr, dw + static_cast<std::size_t>(o) * in, in);
      if (db) db[o] += g;
    }
  }
}

inline float activate(Activation kind, float v) {
  switch (kind) {
    case Activation::relu: return v > 0.0f ? v : 0.0f;
    case Activation::tanh: return std::tanh(v);
    case Activation::elu: return v > 0.0f ? v : std::expm1(v);
    case Activation::abs: return std::fabs(v);
    case Activation::sigmoid: return 1.0f / (1.0f + std::exp(-v));
  }
  return v;
}

/// Derivative expressed through input x and output y.
inline float activate_grad(Activation kind, float x, float y) {
  switch (kind) {
    case Activation::relu: return x > 0.0f ? 1.0f : 0.0f;
    case Activation::tanh: return 1.0f - y * y;
    case Activation::elu: return x > 0.0f ? 1.0f : y + 1.0f;
    case Activation::abs: return x > 0.0f ? 1.0f : (x < 0.0f ? -1.0f : 0.0f);
    case Activation::sigmoid: return y * (1.0f - y);
  }
  return 1.0f;
}

inline float sigmoid(float v) { return 1.0f / (1.0f + std::exp(-v)); }

}  // namespace strange::nn::kernels
