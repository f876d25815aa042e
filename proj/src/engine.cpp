#include "edgeprune/engine.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "edgeprune/dataset.hpp"
#include "edgeprune/error.hpp"
#include "edgeprune/rng.hpp"

namespace edgeprune {

namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using ColVecMap = Eigen::Map<Eigen::VectorXf>;
using ConstColVecMap = Eigen::Map<const Eigen::VectorXf>;

struct ConvGeometry {
  std::size_t in_c, in_h, in_w;
  std::size_t out_c, out_h, out_w;
  std::size_t kernel, stride, padding;

  std::size_t patch() const { return in_c * kernel * kernel; }
  std::size_t positions() const { return out_h * out_w; }
};

ConvGeometry conv_geometry(const Conv& conv, const FeatureShape& in, const FeatureShape& out) {
  return {in.channels, in.height, in.width, out.channels, out.height,
          out.width,   conv.kernel, conv.stride, conv.padding};
}

// col is (patch x positions), row index = (c * k + kh) * k + kw.
void im2col(const float* image, const ConvGeometry& g, float* col) {
  const std::size_t positions = g.positions();
  for (std::size_t c = 0; c < g.in_c; ++c) {
    for (std::size_t kh = 0; kh < g.kernel; ++kh) {
      for (std::size_t kw = 0; kw < g.kernel; ++kw) {
        float* row = col + ((c * g.kernel + kh) * g.kernel + kw) * positions;
        for (std::size_t oh = 0; oh < g.out_h; ++oh) {
          const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * g.stride + kh) -
                                    static_cast<std::ptrdiff_t>(g.padding);
          float* dst = row + oh * g.out_w;
          if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.in_h)) {
            std::fill_n(dst, g.out_w, 0.0f);
            continue;
          }
          const float* src = image + (c * g.in_h + static_cast<std::size_t>(ih)) * g.in_w;
          for (std::size_t ow = 0; ow < g.out_w; ++ow) {
            const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow * g.stride + kw) -
                                      static_cast<std::ptrdiff_t>(g.padding);
            dst[ow] = (iw < 0 || iw >= static_cast<std::ptrdiff_t>(g.in_w))
                          ? 0.0f
                          : src[static_cast<std::size_t>(iw)];
          }
        }
      }
    }
  }
}

void col2im(const float* col, const ConvGeometry& g, float* image) {
  const std::size_t positions = g.positions();
  std::fill_n(image, g.in_c * g.in_h * g.in_w, 0.0f);
  for (std::size_t c = 0; c < g.in_c; ++c) {
    for (std::size_t kh = 0; kh < g.kernel; ++kh) {
      for (std::size_t kw = 0; kw < g.kernel; ++kw) {
        const float* row = col + ((c * g.kernel + kh) * g.kernel + kw) * positions;
        for (std::size_t oh = 0; oh < g.out_h; ++oh) {
          const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * g.stride + kh) -
                                    static_cast<std::ptrdiff_t>(g.padding);
          if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.in_h)) continue;
          float* dst = image + (c * g.in_h + static_cast<std::size_t>(ih)) * g.in_w;
          const float* src = row + oh * g.out_w;
          for (std::size_t ow = 0; ow < g.out_w; ++ow) {
            const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow * g.stride + kw) -
                                      static_cast<std::ptrdiff_t>(g.padding);
            if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(g.in_w)) continue;
            dst[static_cast<std::size_t>(iw)] += src[ow];
          }
        }
      }
    }
  }
}

void relu_inplace(Tensor& t) {
  for (float& v : t.values()) v = v > 0.0f ? v : 0.0f;
}

// Intermediate state a layer keeps for its backward pass.
struct LayerCache {
  std::vector<float> cols;           // conv: im2col of every sample
  std::vector<std::uint32_t> argmax;  // pool: flat input index per output
};

Tensor conv_forward(const Conv& conv, const LayerParams& p, const Tensor& in,
                    const FeatureShape& out_shape, LayerCache* cache) {
  const std::size_t batch = in.dim(0);
  const ConvGeometry g = conv_geometry(conv, {in.dim(1), in.dim(2), in.dim(3)}, out_shape);
  Tensor out(out_shape.batched(batch));
  const std::size_t col_size = g.patch() * g.positions();
  std::vector<float> local;
  float* cols = nullptr;
  if (cache != nullptr) {
    cache->cols.resize(col_size * batch);
    cols = cache->cols.data();
  } else {
    local.resize(col_size);
  }
  ConstMatMap weight(p.weight.data(), static_cast<Eigen::Index>(g.out_c),
                     static_cast<Eigen::Index>(g.patch()));
  ConstColVecMap bias(p.bias.data(), static_cast<Eigen::Index>(g.out_c));
  for (std::size_t n = 0; n < batch; ++n) {
    float* col = cache != nullptr ? cols + n * col_size : local.data();
    im2col(in.data() + n * in.item_size(), g, col);
    ConstMatMap col_mat(col, static_cast<Eigen::Index>(g.patch()),
                        static_cast<Eigen::Index>(g.positions()));
    MatMap result(out.data() + n * out.item_size(), static_cast<Eigen::Index>(g.out_c),
                  static_cast<Eigen::Index>(g.positions()));
    result.noalias() = weight * col_mat;
    result.colwise() += bias;
  }
  if (conv.relu) relu_inplace(out);
  return out;
}

Tensor pool_forward(const MaxPool& pool, const Tensor& in, const FeatureShape& out_shape,
                    LayerCache* cache) {
  const std::size_t batch = in.dim(0), channels = in.dim(1), in_h = in.dim(2), in_w = in.dim(3);
  Tensor out(out_shape.batched(batch));
  if (cache != nullptr) cache->argmax.resize(out.size());
  std::size_t o = 0;
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t plane = (n * channels + c) * in_h * in_w;
      for (std::size_t oh = 0; oh < out_shape.height; ++oh) {
        for (std::size_t ow = 0; ow < out_shape.width; ++ow, ++o) {
          float best = -std::numeric_limits<float>::infinity();
          std::size_t best_index = plane;
          for (std::size_t kh = 0; kh < pool.window; ++kh) {
            const std::size_t ih = oh * pool.stride + kh;
            for (std::size_t kw = 0; kw < pool.window; ++kw) {
              const std::size_t index = plane + ih * in_w + ow * pool.stride + kw;
              if (in[index] > best) {
                best = in[index];
                best_index = index;
              }
            }
          }
          out[o] = best;
          if (cache != nullptr) cache->argmax[o] = static_cast<std::uint32_t>(best_index);
        }
      }
    }
  }
  return out;
}

Tensor fc_forward(const FullyConnected& fc, const LayerParams& p, const Tensor& in) {
  const std::size_t batch = in.dim(0), in_features = in.item_size();
  Tensor out({batch, fc.out_features, 1, 1});
  ConstMatMap x(in.data(), static_cast<Eigen::Index>(batch), static_cast<Eigen::Index>(in_features));
  ConstMatMap w(p.weight.data(), static_cast<Eigen::Index>(fc.out_features),
                static_cast<Eigen::Index>(in_features));
  MatMap y(out.data(), static_cast<Eigen::Index>(batch), static_cast<Eigen::Index>(fc.out_features));
  y.noalias() = x * w.transpose();
  y.rowwise() += Eigen::Map<const Eigen::RowVectorXf>(p.bias.data(),
                                                      static_cast<Eigen::Index>(fc.out_features));
  if (fc.relu) relu_inplace(out);
  return out;
}

Tensor layer_forward(const ModelState& model, std::size_t i, const Tensor& in,
                     const FeatureShape& out_shape, LayerCache* cache) {
  return std::visit(
      [&](const auto& layer) -> Tensor {
        using T = std::decay_t<decltype(layer)>;
        if constexpr (std::is_same_v<T, Conv>) {
          return conv_forward(layer, model.params[i], in, out_shape, cache);
        } else if constexpr (std::is_same_v<T, MaxPool>) {
          return pool_forward(layer, in, out_shape, cache);
        } else if constexpr (std::is_same_v<T, Flatten>) {
          return in.reshaped({in.dim(0), in.item_size(), 1, 1});
        } else {
          return fc_forward(layer, model.params[i], in);
        }
      },
      model.spec.layers[i]);
}

void check_input(const std::vector<FeatureShape>& shapes, std::size_t first, const Tensor& input) {
  const FeatureShape expected = shapes.at(first);
  if (input.dim(0) == 0 || input.dim(1) != expected.channels || input.dim(2) != expected.height ||
      input.dim(3) != expected.width) {
    throw InvalidInput("input shape " + to_string(input.shape()) + " does not match expected " +
                       to_string(expected.batched(input.dim(0) == 0 ? 1 : input.dim(0))));
  }
}

// Plain loop so the summation order never depends on buffer alignment.
void add_row_sums(const float* m, std::size_t rows, std::size_t cols, float* out) {
  for (std::size_t r = 0; r < rows; ++r) {
    float acc = 0.0f;
    for (std::size_t c = 0; c < cols; ++c) acc += m[r * cols + c];
    out[r] += acc;
  }
}

// Backward through layer i. grad_out is dL/d(output) before the relu mask;
// returns dL/d(input) unless want_input_grad is false.
Tensor layer_backward(const ModelState& model, std::size_t i, const Tensor& input,
                      const Tensor& output, Tensor grad_out, const LayerCache& cache,
                      LayerParams& grads, bool want_input_grad) {
  const Layer& layer = model.spec.layers[i];
  const std::size_t batch = input.dim(0);
  if (const auto* conv = std::get_if<Conv>(&layer)) {
    if (conv->relu) {
      for (std::size_t k = 0; k < grad_out.size(); ++k) {
        if (output[k] <= 0.0f) grad_out[k] = 0.0f;
      }
    }
    const ConvGeometry g = conv_geometry(*conv, {input.dim(1), input.dim(2), input.dim(3)},
                                         {output.dim(1), output.dim(2), output.dim(3)});
    const std::size_t col_size = g.patch() * g.positions();
    const auto rows = static_cast<Eigen::Index>(g.out_c);
    const auto patch = static_cast<Eigen::Index>(g.patch());
    const auto positions = static_cast<Eigen::Index>(g.positions());
    MatMap dweight(grads.weight.data(), rows, patch);
    ConstMatMap weight(model.params[i].weight.data(), rows, patch);
    Tensor grad_in;
    std::vector<float> dcol;
    if (want_input_grad) {
      grad_in = Tensor(input.shape());
      dcol.resize(col_size);
    }
    for (std::size_t n = 0; n < batch; ++n) {
      ConstMatMap dout(grad_out.data() + n * output.item_size(), rows, positions);
      ConstMatMap col(cache.cols.data() + n * col_size, patch, positions);
      dweight.noalias() += dout * col.transpose();
      add_row_sums(grad_out.data() + n * output.item_size(), g.out_c, g.positions(), grads.bias.data());
      if (want_input_grad) {
        MatMap dcol_mat(dcol.data(), patch, positions);
        dcol_mat.noalias() = weight.transpose() * dout;
        col2im(dcol.data(), g, grad_in.data() + n * input.item_size());
      }
    }
    return grad_in;
  }
  if (std::holds_alternative<MaxPool>(layer)) {
    Tensor grad_in(input.shape());
    for (std::size_t o = 0; o < grad_out.size(); ++o) {
      grad_in[cache.argmax[o]] += grad_out[o];
    }
    return grad_in;
  }
  if (std::holds_alternative<Flatten>(layer)) {
    return grad_out.reshaped(input.shape());
  }
  const auto& fc = std::get<FullyConnected>(layer);
  if (fc.relu) {
    for (std::size_t k = 0; k < grad_out.size(); ++k) {
      if (output[k] <= 0.0f) grad_out[k] = 0.0f;
    }
  }
  const auto n = static_cast<Eigen::Index>(batch);
  const auto in_features = static_cast<Eigen::Index>(input.item_size());
  const auto out_features = static_cast<Eigen::Index>(fc.out_features);
  ConstMatMap x(input.data(), n, in_features);
  ConstMatMap dy(grad_out.data(), n, out_features);
  MatMap dweight(grads.weight.data(), out_features, in_features);
  dweight.noalias() += dy.transpose() * x;
  for (std::size_t r = 0; r < batch; ++r) {
    for (std::size_t c = 0; c < fc.out_features; ++c) grads.bias[c] += grad_out[r * fc.out_features + c];
  }
  Tensor grad_in;
  if (want_input_grad) {
    grad_in = Tensor(input.shape());
    ConstMatMap w(model.params[i].weight.data(), out_features, in_features);
    MatMap dx(grad_in.data(), n, in_features);
    dx.noalias() = dy * w;
  }
  return grad_in;
}

void check_labels(std::span<const int> labels, std::size_t batch, std::size_t classes) {
  if (labels.size() != batch) {
    throw InvalidInput("got " + std::to_string(labels.size()) + " labels for a batch of " +
                       std::to_string(batch));
  }
  for (int label : labels) {
    if (label < 0 || static_cast<std::size_t>(label) >= classes) {
      throw InvalidInput("label " + std::to_string(label) + " outside [0, " +
                         std::to_string(classes) + ")");
    }
  }
}

// Mean softmax cross-entropy; fills dlogits when non-null.
double softmax_cross_entropy(const Tensor& logits, std::span<const int> labels, Tensor* dlogits) {
  const std::size_t batch = logits.dim(0), classes = logits.dim(1);
  double total = 0.0;
  if (dlogits != nullptr) *dlogits = Tensor(logits.shape());
  std::vector<double> probs(classes);
  for (std::size_t n = 0; n < batch; ++n) {
    const float* z = logits.data() + n * classes;
    const float zmax = *std::max_element(z, z + classes);
    double sum = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      probs[c] = std::exp(static_cast<double>(z[c]) - zmax);
      sum += probs[c];
    }
    const auto y = static_cast<std::size_t>(labels[n]);
    total += std::log(sum) - (static_cast<double>(z[y]) - zmax);
    if (dlogits != nullptr) {
      for (std::size_t c = 0; c < classes; ++c) {
        const double p = probs[c] / sum - (c == y ? 1.0 : 0.0);
        (*dlogits)[n * classes + c] = static_cast<float>(p / static_cast<double>(batch));
      }
    }
  }
  return total / static_cast<double>(batch);
}

BackwardResult run_backward(const ModelState& model, const Tensor& batch,
                            std::span<const int> labels, bool capture) {
  const auto shapes = infer_shapes(model.spec);
  check_input(shapes, 0, batch);
  check_labels(labels, batch.dim(0), model.spec.classes);
  const std::size_t layers = model.spec.layers.size();

  std::vector<Tensor> outputs(layers);
  std::vector<LayerCache> caches(layers);
  for (std::size_t i = 0; i < layers; ++i) {
    outputs[i] = layer_forward(model, i, i == 0 ? batch : outputs[i - 1], shapes[i + 1], &caches[i]);
  }

  BackwardResult result;
  Tensor grad;
  result.loss = softmax_cross_entropy(outputs.back(), labels, &grad);
  result.param_grads.resize(layers);
  for (std::size_t i = 0; i < layers; ++i) {
    if (!model.params[i].weight.empty()) {
      result.param_grads[i].weight = Tensor(model.params[i].weight.shape());
      result.param_grads[i].bias.assign(model.params[i].bias.size(), 0.0f);
    }
  }
  if (capture) {
    result.capture.gradients.resize(layers);
    result.capture.batch = batch.dim(0);
  }
  for (std::size_t i = layers; i-- > 0;) {
    if (capture) result.capture.gradients[i] = grad;
    const Tensor& input = i == 0 ? batch : outputs[i - 1];
    grad = layer_backward(model, i, input, outputs[i], std::move(grad), caches[i],
                          result.param_grads[i], i > 0);
  }
  if (capture) result.capture.activations = std::move(outputs);
  return result;
}

}  // namespace

Tensor forward_range(const ModelState& model, const Tensor& input, std::size_t first,
                     std::size_t last) {
  const auto shapes = infer_shapes(model.spec);
  if (first > last || last > model.spec.layers.size()) {
    throw InvalidInput("layer range [" + std::to_string(first) + ", " + std::to_string(last) +
                       ") is invalid for a model of " +
                       std::to_string(model.spec.layers.size()) + " layers");
  }
  check_input(shapes, first, input);
  Tensor x = input;
  for (std::size_t i = first; i < last; ++i) {
    x = layer_forward(model, i, x, shapes[i + 1], nullptr);
  }
  return x;
}

Tensor forward(const ModelState& model, const Tensor& batch) {
  return forward_range(model, batch, 0, model.spec.layers.size());
}

std::vector<Tensor> forward_all(const ModelState& model, const Tensor& batch) {
  const auto shapes = infer_shapes(model.spec);
  check_input(shapes, 0, batch);
  std::vector<Tensor> outputs;
  outputs.reserve(model.spec.layers.size());
  for (std::size_t i = 0; i < model.spec.layers.size(); ++i) {
    outputs.push_back(
        layer_forward(model, i, i == 0 ? batch : outputs.back(), shapes[i + 1], nullptr));
  }
  return outputs;
}

BackwardResult backward_with_capture(const ModelState& model, const Tensor& batch,
                                     std::span<const int> labels) {
  return run_backward(model, batch, labels, true);
}

double loss(const ModelState& model, const Tensor& batch, std::span<const int> labels) {
  check_labels(labels, batch.dim(0), model.spec.classes);
  return softmax_cross_entropy(forward(model, batch), labels, nullptr);
}

ModelState train(ModelState model, const Split& data, const TrainConfig& cfg,
                 const EpochCallback& on_epoch) {
  if (!(cfg.learning_rate > 0.0)) throw InvalidInput("learning rate must be positive");
  if (cfg.batch_size == 0) throw InvalidInput("batch size must be at least 1");
  if (cfg.epochs == 0) return model;
  if (data.size() == 0) throw InvalidInput("training split is empty");
  check_input(infer_shapes(model.spec), 0, data.images.slice_batch(0, 1));

  std::vector<LayerParams> velocity(model.params.size());
  for (std::size_t i = 0; i < model.params.size(); ++i) {
    if (model.params[i].weight.empty()) continue;
    velocity[i].weight = Tensor(model.params[i].weight.shape());
    velocity[i].bias.assign(model.params[i].bias.size(), 0.0f);
  }
  const auto lr = static_cast<float>(cfg.learning_rate);
  const auto momentum = static_cast<float>(cfg.momentum);
  auto step = [&](std::span<float> param, std::span<float> vel, std::span<const float> grad) {
    for (std::size_t k = 0; k < param.size(); ++k) {
      vel[k] = momentum * vel[k] + grad[k];
      param[k] -= lr * vel[k];
    }
  };

  Rng rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  std::vector<int> labels;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(order));
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batches) {
      const std::size_t count = std::min(cfg.batch_size, order.size() - start);
      std::span<const std::size_t> items(order.data() + start, count);
      const Tensor batch = data.images.gather_batch(items);
      labels.resize(count);
      for (std::size_t k = 0; k < count; ++k) labels[k] = data.labels[items[k]];
      BackwardResult r = run_backward(model, batch, labels, false);
      if (!std::isfinite(r.loss)) {
        throw TrainingDiverged(epoch, batches,
                               "training diverged at epoch " + std::to_string(epoch) + ", batch " +
                                   std::to_string(batches) + ": non-finite loss");
      }
      epoch_loss += r.loss;
      for (std::size_t i = 0; i < model.params.size(); ++i) {
        if (model.params[i].weight.empty()) continue;
        step(model.params[i].weight.values(), velocity[i].weight.values(),
             r.param_grads[i].weight.values());
        step(model.params[i].bias, velocity[i].bias, r.param_grads[i].bias);
      }
    }
    if (!model.all_finite()) {
      throw TrainingDiverged(epoch, batches,
                             "training diverged at epoch " + std::to_string(epoch) +
                                 ": non-finite parameters");
    }
    if (on_epoch) on_epoch(epoch, epoch_loss / static_cast<double>(batches));
  }
  return model;
}

std::vector<int> predict(const Tensor& logits) {
  const std::size_t classes = logits.item_size();
  std::vector<int> out(logits.dim(0));
  for (std::size_t n = 0; n < out.size(); ++n) {
    const float* z = logits.data() + n * classes;
    out[n] = static_cast<int>(std::max_element(z, z + classes) - z);
  }
  return out;
}

double evaluate(const ModelState& model, const Split& data, std::size_t batch_size) {
  if (data.size() == 0) throw InvalidInput("cannot evaluate on an empty dataset");
  if (batch_size == 0) batch_size = 1;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    const std::size_t count = std::min(batch_size, data.size() - start);
    const auto predicted = predict(forward(model, data.images.slice_batch(start, count)));
    for (std::size_t k = 0; k < count; ++k) {
      if (predicted[k] == data.labels[start + k]) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace edgeprune
