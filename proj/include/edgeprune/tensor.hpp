#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace edgeprune {

/// (batch, channels, height, width) for features; (out, in, kh, kw) for kernels.
using Shape = std::array<std::size_t, 4>;

std::size_t element_count(const Shape& shape);
std::string to_string(const Shape& shape);

/// Dense row-major 32-bit tensor of rank 4.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, float fill = 0.0f);
  Tensor(Shape shape, std::vector<float> values);

  const Shape& shape() const { return shape_; }
  std::size_t dim(std::size_t axis) const { return shape_[axis]; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  std::span<float> values() { return values_; }
  std::span<const float> values() const { return values_; }
  float* data() { return values_.data(); }
  const float* data() const { return values_.data(); }

  float& operator[](std::size_t i) { return values_[i]; }
  float operator[](std::size_t i) const { return values_[i]; }

  float& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
    return values_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }
  float at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return values_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }

  /// Elements of one batch item (channels * height * width).
  std::size_t item_size() const { return shape_[1] * shape_[2] * shape_[3]; }

  /// Copies `count` consecutive batch items starting at `first`.
  Tensor slice_batch(std::size_t first, std::size_t count) const;
  /// Gathers the listed batch items in order.
  Tensor gather_batch(std::span<const std::size_t> items) const;

  /// Same values, new shape with the same element count.
  Tensor reshaped(Shape shape) const;

  bool all_finite() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_{0, 0, 0, 0};
  std::vector<float> values_;
};

/// Largest absolute elementwise difference; shapes must match.
float max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace edgeprune
