#include "strange/nn/parameter.hpp"

#include <cmath>

#include "strange/errors.hpp"

namespace strange::nn {

void zero_grads(const ParameterList& params) {
  for (const auto& p : params) p.param->zero_grad();
}

std::uint64_t parameter_hash(const ParameterList& params) {
  std::uint64_t h = 14695981039346656037ULL;
  for (const auto& p : params) h = hash_combine_tensor(h, p.param->value);
  return h;
}

std::size_t parameter_count(const ParameterList& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.param->value.size();
  return n;
}

double grad_norm(const ParameterList& params) {
  double sq = 0.0;
  for (const auto& p : params) {
    for (float g : p.param->grad.values()) sq += static_cast<double>(g) * g;
  }
  return std::sqrt(sq);
}

double clip_grad_norm(const ParameterList& params, double max_norm) {
  const double norm = grad_norm(params);
  if (norm > max_norm && norm > 0.0) {
    const auto scale = static_cast<float>(max_norm / norm);
    for (const auto& p : params) {
      for (float& g : p.param->grad.values()) g *= scale;
    }
  }
  return norm;
}

void copy_values(const ParameterList& src, const ParameterList& dst) {
  if (src.size() != dst.size()) throw DimensionError("parameter lists differ in length");
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (src[i].name != dst[i].name || !src[i].param->value.same_shape(dst[i].param->value)) {
      throw DimensionError("parameter mismatch at " + src[i].name);
    }
    dst[i].param->value = src[i].param->value;
  }
}

}  // namespace strange::nn
