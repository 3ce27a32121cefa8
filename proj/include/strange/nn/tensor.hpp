#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace strange::nn {

using Shape = std::vector<int>;

std::string shape_string(const Shape& shape);

/// Dense row-major array of 32-bit reals with at most three dimensions.
///
/// Most kernels view a tensor as a matrix: `rows()` is the product of all
/// leading dimensions and `cols()` is the last one. A rank-1 tensor is a
/// single row.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, float fill = 0.0f);
  Tensor(Shape shape, std::vector<float> data);

  /// Rank-1 tensor holding `values`.
  static Tensor vector(std::initializer_list<float> values);
  static Tensor vector(std::span<const float> values);
  /// Rank-2 tensor from nested rows.
  static Tensor matrix(std::initializer_list<std::initializer_list<float>> rows);
  static Tensor scalar(float value) { return Tensor({1}, value); }

  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int axis) const { return shape_.at(static_cast<std::size_t>(axis)); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  int rows() const;
  int cols() const;

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }
  std::span<float> values() { return data_; }
  std::span<const float> values() const { return data_; }

  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }
  float& at(int row, int col) { return data_[static_cast<std::size_t>(row) * cols() + col]; }
  float at(int row, int col) const { return data_[static_cast<std::size_t>(row) * cols() + col]; }
  /// Scalar value of a one-element tensor.
  float item() const;

  std::span<float> row(int r);
  std::span<const float> row(int r) const;

  Tensor reshaped(Shape shape) const;
  void fill(float value);
  bool all_finite() const;
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  /// Bitwise equality of shape and contents.
  friend bool operator==(const Tensor& a, const Tensor& b);

 private:
  static void check_shape(const Shape& shape);

  Shape shape_;
  std::vector<float> data_;
};

/// FNV-1a over shapes and raw float bits; used to detect parameter changes.
std::uint64_t hash_combine_tensor(std::uint64_t seed, const Tensor& t);

}  // namespace strange::nn
