#pragma once

#include <cstddef>
#include <vector>

#include "edgeprune/model.hpp"

namespace edgeprune {

/// VGG-style family: each stage is `convs[s]` 3x3 same-padded conv+relu
/// layers of width `widths[s]` closed by a 2x2/2 max pool; then flatten, the
/// optional hidden classifier layers, and the final class logits.
struct VggConfig {
  std::vector<std::size_t> widths;
  std::vector<std::size_t> convs;
  FeatureShape input{3, 32, 32};
  std::size_t classes = 10;
  std::vector<std::size_t> classifier_hidden;
};

/// Throws InvalidInput on mismatched lists, zero widths, or pooling below 1x1.
ModelSpec build_vgg_like(const VggConfig& cfg);

/// 13 conv + 5 pool on 3x32x32, 512-wide classifier head.
VggConfig vgg16_config();

/// Desk-scale reference: widths {16, 32, 64}, convs {2, 2, 1}.
VggConfig vgg_mini_config(FeatureShape input = {3, 32, 32}, std::size_t classes = 10);

}  // namespace edgeprune
