#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "edgeprune/tensor.hpp"

namespace edgeprune {

struct Conv {
  std::size_t out_channels = 1;
  std::size_t kernel = 3;
  std::size_t stride = 1;
  std::size_t padding = 1;
  bool relu = true;
  friend bool operator==(const Conv&, const Conv&) = default;
};

struct MaxPool {
  std::size_t window = 2;
  std::size_t stride = 2;
  friend bool operator==(const MaxPool&, const MaxPool&) = default;
};

struct Flatten {
  friend bool operator==(const Flatten&, const Flatten&) = default;
};

struct FullyConnected {
  std::size_t out_features = 1;
  bool relu = false;
  friend bool operator==(const FullyConnected&, const FullyConnected&) = default;
};

using Layer = std::variant<Conv, MaxPool, Flatten, FullyConnected>;

/// Per-sample feature shape.
struct FeatureShape {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t elements() const { return channels * height * width; }
  Shape batched(std::size_t batch) const { return {batch, channels, height, width}; }
  friend bool operator==(const FeatureShape&, const FeatureShape&) = default;
};

struct ModelSpec {
  FeatureShape input;
  std::size_t classes = 0;
  std::vector<Layer> layers;

  /// M: number of layers, and the largest partition index.
  std::size_t layer_count() const { return layers.size(); }
  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

bool is_conv(const Layer& layer);
bool is_pool(const Layer& layer);
bool has_params(const Layer& layer);
/// "conv", "pool", "flatten" or "fc".
std::string layer_kind_name(const Layer& layer);

/// Shapes at every layer boundary: element 0 is the input, element i the
/// output of layer i-1. Throws InvalidInput when the chain breaks.
std::vector<FeatureShape> infer_shapes(const ModelSpec& spec);

/// Checks shape chaining and the single terminal classifier rule.
void validate_spec(const ModelSpec& spec);

/// Conv/pool-style names: conv1.., pool1.., flatten, fc1..
std::string layer_name(const ModelSpec& spec, std::size_t layer);
std::vector<std::string> layer_names(const ModelSpec& spec);

/// Indices of Conv layers in order.
std::vector<std::size_t> conv_layers(const ModelSpec& spec);

/// Output channel count per layer (Conv: out_channels; FC: out_features;
/// others 0).
std::vector<std::size_t> filter_counts(const ModelSpec& spec);

/// Trainable parameters of one layer. Conv weight (out, in, k, k); FC weight
/// (out, in, 1, 1); empty for pool and flatten.
struct LayerParams {
  Tensor weight;
  std::vector<float> bias;
  friend bool operator==(const LayerParams&, const LayerParams&) = default;
};

struct ModelState {
  ModelSpec spec;
  std::vector<LayerParams> params;
  std::uint64_t seed = 0;

  std::size_t parameter_count() const;
  bool all_finite() const;
  friend bool operator==(const ModelState&, const ModelState&) = default;
};

/// Uniform +-sqrt(6/fan_in) weights and zero biases.
ModelState init_model(const ModelSpec& spec, std::uint64_t seed);

/// Same spec, every parameter zero.
ModelState zero_model(const ModelSpec& spec);

}  // namespace edgeprune
