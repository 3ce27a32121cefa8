#include "strange/nn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>

#include "strange/errors.hpp"

namespace strange::nn {

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

std::size_t element_count(const Shape& shape) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

}  // namespace

void Tensor::check_shape(const Shape& shape) {
  if (shape.empty() || shape.size() > 3) {
    throw DimensionError("tensor rank must be 1..3, got shape " + shape_string(shape));
  }
  for (int d : shape) {
    if (d <= 0) throw DimensionError("tensor dimensions must be positive: " + shape_string(shape));
  }
}

Tensor::Tensor(Shape shape, float fill) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_.assign(element_count(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<float> data) : shape_(std::move(shape)), data_(std::move(data)) {
  check_shape(shape_);
  if (element_count(shape_) != data_.size()) {
    throw DimensionError("shape " + shape_string(shape_) + " does not hold " + std::to_string(data_.size()) +
                         " elements");
  }
}

Tensor Tensor::vector(std::initializer_list<float> values) {
  return Tensor({static_cast<int>(values.size())}, std::vector<float>(values));
}

Tensor Tensor::vector(std::span<const float> values) {
  return Tensor({static_cast<int>(values.size())}, std::vector<float>(values.begin(), values.end()));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<float>> rows) {
  const int r = static_cast<int>(rows.size());
  const int c = r ? static_cast<int>(rows.begin()->size()) : 0;
  std::vector<float> data;
  data.reserve(static_cast<std::size_t>(r) * c);
  for (const auto& row : rows) {
    if (static_cast<int>(row.size()) != c) throw DimensionError("ragged matrix literal");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({r, c}, std::move(data));
}

int Tensor::rows() const {
  if (shape_.empty()) return 0;
  return static_cast<int>(data_.size() / static_cast<std::size_t>(shape_.back()));
}

int Tensor::cols() const { return shape_.empty() ? 0 : shape_.back(); }

float Tensor::item() const {
  if (data_.size() != 1) throw DimensionError("item() on tensor of shape " + shape_string(shape_));
  return data_[0];
}

std::span<float> Tensor::row(int r) {
  return std::span<float>(data_).subspan(static_cast<std::size_t>(r) * cols(), cols());
}

std::span<const float> Tensor::row(int r) const {
  return std::span<const float>(data_).subspan(static_cast<std::size_t>(r) * cols(), cols());
}

Tensor Tensor::reshaped(Shape shape) const {
  check_shape(shape);
  if (element_count(shape) != data_.size()) {
    throw DimensionError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  Tensor out;
  out.shape_ = std::move(shape);
  out.data_ = data_;
  return out;
}

void Tensor::fill(float value) { std::fill(data_.begin(), data_.end(), value); }

bool Tensor::all_finite() const {
  for (float v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

bool operator==(const Tensor& a, const Tensor& b) {
  return a.shape_ == b.shape_ &&
         (a.data_.empty() || std::memcmp(a.data_.data(), b.data_.data(), a.data_.size() * sizeof(float)) == 0);
}

std::uint64_t hash_combine_tensor(std::uint64_t seed, const Tensor& t) {
  constexpr std::uint64_t kPrime = 1099511628211ULL;
  auto mix = [&](const void* p, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      seed ^= bytes[i];
      seed *= kPrime;
    }
  };
  for (int d : t.shape()) mix(&d, sizeof d);
  mix(t.data(), t.size() * sizeof(float));
  return seed;
}

}  // namespace strange::nn
