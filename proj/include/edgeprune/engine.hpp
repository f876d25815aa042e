#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "edgeprune/model.hpp"
#include "edgeprune/tensor.hpp"

namespace edgeprune {

struct Split;

/// Runs every layer. Returns (batch, classes, 1, 1) logits.
Tensor forward(const ModelState& model, const Tensor& batch);

/// Runs layers [first, last) on `input`, which must have the shape of the
/// boundary before `first`. forward_range(m, x, 0, M) == forward(m, x).
Tensor forward_range(const ModelState& model, const Tensor& input, std::size_t first,
                     std::size_t last);

/// Outputs of every layer (after fused ReLU); element i is layer i's output.
std::vector<Tensor> forward_all(const ModelState& model, const Tensor& batch);

/// Per-layer outputs and the loss gradient with respect to each of them.
struct GradCapture {
  std::vector<Tensor> activations;
  std::vector<Tensor> gradients;
  std::size_t batch = 0;
};

struct BackwardResult {
  double loss = 0.0;
  std::vector<LayerParams> param_grads;
  GradCapture capture;
};

/// Mean softmax cross-entropy, its parameter gradients, and per-layer
/// activation/gradient capture.
BackwardResult backward_with_capture(const ModelState& model, const Tensor& batch,
                                     std::span<const int> labels);

/// Loss only (no gradients), used by finite-difference and ablation checks.
double loss(const ModelState& model, const Tensor& batch, std::span<const int> labels);

struct TrainConfig {
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::size_t batch_size = 32;
  std::size_t epochs = 20;
  std::uint64_t seed = 1;
};

/// Called after each epoch with (epoch index, mean loss).
using EpochCallback = std::function<void(std::size_t, double)>;

/// SGD with momentum over shuffled mini-batches. Deterministic for a fixed
/// seed. Throws TrainingDiverged on a non-finite loss.
ModelState train(ModelState model, const Split& data, const TrainConfig& cfg,
                 const EpochCallback& on_epoch = {});

/// Fraction of samples whose argmax logit equals the label.
double evaluate(const ModelState& model, const Split& data, std::size_t batch_size = 128);

/// Argmax per batch item.
std::vector<int> predict(const Tensor& logits);

}  // namespace edgeprune
