#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "edgeprune/model.hpp"
#include "edgeprune/tensor.hpp"

namespace edgeprune {

/// One split stored contiguously: images (n, c, h, w) and n labels.
struct Split {
  Tensor images;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  FeatureShape sample_shape() const {
    return {images.dim(1), images.dim(2), images.dim(3)};
  }
  Tensor sample(std::size_t i) const { return images.slice_batch(i, 1); }
};

struct DatasetHandle {
  Split train;
  Split test;
  std::string name;
  std::size_t classes = 0;
  std::string source;
};

/// Throws InvalidInput if the handle breaks its invariants (shared shape,
/// labels below class count, finite values).
void validate_dataset(const DatasetHandle& data);

/// CIFAR-10 binary layout: one label byte then 3072 pixel bytes
/// (1024 R, 1024 G, 1024 B, each row-major 32x32).
inline constexpr std::size_t kCifarRecordBytes = 1 + 3 * 32 * 32;

struct CifarOptions {
  std::size_t records_per_batch = 10000;
};

struct CifarRecord {
  int label = 0;
  std::vector<std::uint8_t> pixels;
};

/// Decodes record `index` of a batch file without loading the rest.
CifarRecord read_cifar_record(const std::filesystem::path& file, std::size_t index);

/// Reads data_batch_1..5.bin and test_batch.bin. Pixels scaled to [0,1],
/// then the per-channel training mean is subtracted from both splits.
DatasetHandle load_cifar10(const std::filesystem::path& dir, const CifarOptions& options = {});

struct SyntheticConfig {
  std::uint64_t seed = 1;
  std::size_t n_per_class = 200;
  std::size_t test_per_class = 50;
  std::size_t classes = 10;
  FeatureShape shape{3, 16, 16};
  double noise = 0.6;
};

/// Class-conditional oriented gratings (distinct frequency, orientation and
/// colour mix per class) with phase jitter and additive Gaussian noise both
/// scaled by `noise`. With noise 0 every sample of a class is identical.
DatasetHandle gen_synthetic(const SyntheticConfig& cfg);

/// Per-channel mean subtraction using the training split's means.
void subtract_channel_mean(DatasetHandle& data);

}  // namespace edgeprune
