#include "edgeprune/model.hpp"

#include <cmath>

#include "edgeprune/error.hpp"
#include "edgeprune/rng.hpp"

namespace edgeprune {

bool is_conv(const Layer& layer) { return std::holds_alternative<Conv>(layer); }
bool is_pool(const Layer& layer) { return std::holds_alternative<MaxPool>(layer); }
bool has_params(const Layer& layer) {
  return std::holds_alternative<Conv>(layer) || std::holds_alternative<FullyConnected>(layer);
}

std::string layer_kind_name(const Layer& layer) {
  if (is_conv(layer)) return "conv";
  if (is_pool(layer)) return "pool";
  if (std::holds_alternative<Flatten>(layer)) return "flatten";
  return "fc";
}

namespace {

std::size_t window_output(std::size_t in, std::size_t window, std::size_t stride,
                          std::size_t padding, std::size_t layer) {
  if (in + 2 * padding < window) {
    throw InvalidInput("layer " + std::to_string(layer) + ": spatial size " + std::to_string(in) +
                       " is smaller than its window " + std::to_string(window));
  }
  return (in + 2 * padding - window) / stride + 1;
}

}  // namespace

std::vector<FeatureShape> infer_shapes(const ModelSpec& spec) {
  if (spec.input.elements() == 0) {
    throw InvalidInput("model input shape has a zero dimension");
  }
  std::vector<FeatureShape> shapes{spec.input};
  shapes.reserve(spec.layers.size() + 1);
  bool flat = false;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const FeatureShape in = shapes.back();
    FeatureShape out;
    std::visit(
        [&](const auto& layer) {
          using T = std::decay_t<decltype(layer)>;
          if constexpr (std::is_same_v<T, Conv>) {
            if (flat) throw InvalidInput("layer " + std::to_string(i) + ": conv after flatten");
            if (layer.out_channels == 0 || layer.kernel == 0 || layer.stride == 0) {
              throw InvalidInput("layer " + std::to_string(i) + ": conv needs nonzero sizes");
            }
            out = {layer.out_channels,
                   window_output(in.height, layer.kernel, layer.stride, layer.padding, i),
                   window_output(in.width, layer.kernel, layer.stride, layer.padding, i)};
          } else if constexpr (std::is_same_v<T, MaxPool>) {
            if (flat) throw InvalidInput("layer " + std::to_string(i) + ": pool after flatten");
            if (layer.window == 0 || layer.stride == 0) {
              throw InvalidInput("layer " + std::to_string(i) + ": pool needs nonzero sizes");
            }
            out = {in.channels, window_output(in.height, layer.window, layer.stride, 0, i),
                   window_output(in.width, layer.window, layer.stride, 0, i)};
          } else if constexpr (std::is_same_v<T, Flatten>) {
            flat = true;
            out = {in.elements(), 1, 1};
          } else {
            if (!flat) {
              throw InvalidInput("layer " + std::to_string(i) +
                                 ": fully-connected layer needs a preceding flatten");
            }
            if (layer.out_features == 0) {
              throw InvalidInput("layer " + std::to_string(i) + ": zero output features");
            }
            out = {layer.out_features, 1, 1};
          }
        },
        spec.layers[i]);
    shapes.push_back(out);
  }
  return shapes;
}

void validate_spec(const ModelSpec& spec) {
  if (spec.classes == 0) {
    throw InvalidInput("model needs at least one class");
  }
  if (spec.layers.empty()) {
    throw InvalidInput("model has no layers");
  }
  const auto shapes = infer_shapes(spec);
  const auto* last = std::get_if<FullyConnected>(&spec.layers.back());
  if (last == nullptr) {
    throw InvalidInput("model must end in a fully-connected classifier");
  }
  if (last->relu) {
    throw InvalidInput("terminal classifier must not apply relu");
  }
  if (shapes.back().channels != spec.classes) {
    throw InvalidInput("classifier emits " + std::to_string(shapes.back().channels) +
                       " logits but the model has " + std::to_string(spec.classes) + " classes");
  }
}

std::string layer_name(const ModelSpec& spec, std::size_t layer) {
  std::size_t convs = 0, pools = 0, fcs = 0, flats = 0;
  for (std::size_t i = 0; i <= layer && i < spec.layers.size(); ++i) {
    const Layer& l = spec.layers[i];
    if (is_conv(l)) ++convs;
    else if (is_pool(l)) ++pools;
    else if (std::holds_alternative<Flatten>(l)) ++flats;
    else ++fcs;
  }
  const Layer& l = spec.layers.at(layer);
  if (is_conv(l)) return "conv" + std::to_string(convs);
  if (is_pool(l)) return "pool" + std::to_string(pools);
  if (std::holds_alternative<Flatten>(l)) return flats == 1 ? "flatten" : "flatten" + std::to_string(flats);
  return "fc" + std::to_string(fcs);
}

std::vector<std::string> layer_names(const ModelSpec& spec) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    names.push_back(layer_name(spec, i));
  }
  return names;
}

std::vector<std::size_t> conv_layers(const ModelSpec& spec) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    if (is_conv(spec.layers[i])) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> filter_counts(const ModelSpec& spec) {
  std::vector<std::size_t> counts;
  for (const Layer& l : spec.layers) {
    if (const auto* c = std::get_if<Conv>(&l)) counts.push_back(c->out_channels);
    else if (const auto* f = std::get_if<FullyConnected>(&l)) counts.push_back(f->out_features);
    else counts.push_back(0);
  }
  return counts;
}

std::size_t ModelState::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params) n += p.weight.size() + p.bias.size();
  return n;
}

bool ModelState::all_finite() const {
  for (const auto& p : params) {
    if (!p.weight.all_finite()) return false;
    for (float b : p.bias) {
      if (!std::isfinite(b)) return false;
    }
  }
  return true;
}

ModelState zero_model(const ModelSpec& spec) {
  validate_spec(spec);
  const auto shapes = infer_shapes(spec);
  ModelState state;
  state.spec = spec;
  state.params.resize(spec.layers.size());
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const FeatureShape in = shapes[i];
    if (const auto* c = std::get_if<Conv>(&spec.layers[i])) {
      state.params[i].weight = Tensor({c->out_channels, in.channels, c->kernel, c->kernel});
      state.params[i].bias.assign(c->out_channels, 0.0f);
    } else if (const auto* f = std::get_if<FullyConnected>(&spec.layers[i])) {
      state.params[i].weight = Tensor({f->out_features, in.channels, 1, 1});
      state.params[i].bias.assign(f->out_features, 0.0f);
    }
  }
  return state;
}

ModelState init_model(const ModelSpec& spec, std::uint64_t seed) {
  ModelState state = zero_model(spec);
  state.seed = seed;
  Rng rng(seed);
  for (auto& p : state.params) {
    if (p.weight.empty()) continue;
    const std::size_t fan_in = p.weight.dim(1) * p.weight.dim(2) * p.weight.dim(3);
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (float& w : p.weight.values()) {
      w = static_cast<float>(rng.uniform(-limit, limit));
    }
  }
  return state;
}

}  // namespace edgeprune
