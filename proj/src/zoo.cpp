#include "edgeprune/zoo.hpp"

#include "edgeprune/error.hpp"

namespace edgeprune {

ModelSpec build_vgg_like(const VggConfig& cfg) {
  if (cfg.widths.empty() || cfg.widths.size() != cfg.convs.size()) {
    throw InvalidInput("vgg config needs equal-length, non-empty widths and convs lists");
  }
  ModelSpec spec;
  spec.input = cfg.input;
  spec.classes = cfg.classes;
  std::size_t h = cfg.input.height, w = cfg.input.width;
  for (std::size_t s = 0; s < cfg.widths.size(); ++s) {
    if (cfg.widths[s] == 0) throw InvalidInput("vgg stage " + std::to_string(s) + " has zero width");
    for (std::size_t c = 0; c < cfg.convs[s]; ++c) {
      spec.layers.emplace_back(Conv{cfg.widths[s], 3, 1, 1, true});
    }
    if (h < 2 || w < 2) {
      throw InvalidInput("vgg stage " + std::to_string(s) + " would pool a " + std::to_string(h) +
                         "x" + std::to_string(w) + " map below 1x1");
    }
    h /= 2;
    w /= 2;
    spec.layers.emplace_back(MaxPool{2, 2});
  }
  spec.layers.emplace_back(Flatten{});
  for (std::size_t hidden : cfg.classifier_hidden) {
    spec.layers.emplace_back(FullyConnected{hidden, true});
  }
  spec.layers.emplace_back(FullyConnected{cfg.classes, false});
  validate_spec(spec);
  return spec;
}

VggConfig vgg16_config() {
  VggConfig cfg;
  cfg.widths = {64, 128, 256, 512, 512};
  cfg.convs = {2, 2, 3, 3, 3};
  cfg.input = {3, 32, 32};
  cfg.classes = 10;
  cfg.classifier_hidden = {512};
  return cfg;
}

VggConfig vgg_mini_config(FeatureShape input, std::size_t classes) {
  VggConfig cfg;
  cfg.widths = {16, 32, 64};
  cfg.convs = {2, 2, 1};
  cfg.input = input;
  cfg.classes = classes;
  return cfg;
}

}  // namespace edgeprune
