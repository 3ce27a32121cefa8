#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "strange/nn/tensor.hpp"

namespace strange::nn {

/// A trainable tensor and its accumulated gradient (same shape).
struct Parameter {
  Tensor value;
  Tensor grad;

  Parameter() = default;
  explicit Parameter(Tensor v) : value(std::move(v)), grad(value.shape()) {}

  void zero_grad() { grad = Tensor(value.shape()); }
};

/// Named, ordered view over the parameters of one network. Order is the
/// declaration order of the owning module and is what checkpoints rely on.
struct NamedParameter {
  std::string name;
  Parameter* param;
};
using ParameterList = std::vector<NamedParameter>;

void zero_grads(const ParameterList& params);
/// FNV-1a hash over every parameter value; equal hashes mean bitwise-equal
/// parameters with overwhelming probability.
std::uint64_t parameter_hash(const ParameterList& params);
std::size_t parameter_count(const ParameterList& params);
/// Global L2 norm of the gradients, accumulated in double.
double grad_norm(const ParameterList& params);
/// Rescales gradients so their global norm is at most `max_norm`. Returns the
/// norm before clipping.
double clip_grad_norm(const ParameterList& params, double max_norm);
/// Copies values from `src` to `dst`; names and shapes must match pairwise.
void copy_values(const ParameterList& src, const ParameterList& dst);

}  // namespace strange::nn
