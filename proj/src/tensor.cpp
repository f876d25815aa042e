#include "edgeprune/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "edgeprune/error.hpp"

namespace edgeprune {

std::size_t element_count(const Shape& shape) {
  return shape[0] * shape[1] * shape[2] * shape[3];
}

std::string to_string(const Shape& shape) {
  std::ostringstream out;
  out << '(' << shape[0] << ", " << shape[1] << ", " << shape[2] << ", " << shape[3] << ')';
  return out.str();
}

Tensor::Tensor(Shape shape, float fill) : shape_(shape), values_(element_count(shape), fill) {}

Tensor::Tensor(Shape shape, std::vector<float> values)
    : shape_(shape), values_(std::move(values)) {
  if (values_.size() != element_count(shape_)) {
    throw InvalidInput("tensor of shape " + to_string(shape_) + " needs " +
                       std::to_string(element_count(shape_)) + " values, got " +
                       std::to_string(values_.size()));
  }
}

Tensor Tensor::slice_batch(std::size_t first, std::size_t count) const {
  if (first + count > shape_[0]) {
    throw InvalidInput("batch slice out of range");
  }
  const std::size_t item = item_size();
  Tensor out({count, shape_[1], shape_[2], shape_[3]});
  std::copy_n(values_.begin() + static_cast<std::ptrdiff_t>(first * item), count * item,
              out.values_.begin());
  return out;
}

Tensor Tensor::gather_batch(std::span<const std::size_t> items) const {
  const std::size_t item = item_size();
  Tensor out({items.size(), shape_[1], shape_[2], shape_[3]});
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i] >= shape_[0]) {
      throw InvalidInput("batch index out of range");
    }
    std::memcpy(out.values_.data() + i * item, values_.data() + items[i] * item,
                item * sizeof(float));
  }
  return out;
}

Tensor Tensor::reshaped(Shape shape) const {
  if (element_count(shape) != values_.size()) {
    throw InvalidInput("cannot reshape " + to_string(shape_) + " to " + to_string(shape));
  }
  Tensor out;
  out.shape_ = shape;
  out.values_ = values_;
  return out;
}

bool Tensor::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](float v) { return std::isfinite(v); });
}

float max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw InvalidInput("shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
  float worst = 0.0f;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(a[i] - b[i]));
  }
  return worst;
}

}  // namespace edgeprune
