#include "edgeprune/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "edgeprune/error.hpp"
#include "edgeprune/rng.hpp"

namespace edgeprune {

void validate_dataset(const DatasetHandle& data) {
  if (data.classes < 2) throw InvalidInput("dataset needs at least two classes");
  auto check = [&](const Split& split, const char* which) {
    if (split.images.dim(0) != split.labels.size()) {
      throw InvalidInput(std::string(which) + " split has " + std::to_string(split.images.dim(0)) +
                         " images but " + std::to_string(split.labels.size()) + " labels");
    }
    for (int label : split.labels) {
      if (label < 0 || static_cast<std::size_t>(label) >= data.classes) {
        throw InvalidInput(std::string(which) + " split holds label " + std::to_string(label));
      }
    }
    if (!split.images.all_finite()) {
      throw InvalidInput(std::string(which) + " split holds non-finite values");
    }
  };
  check(data.train, "train");
  check(data.test, "test");
  if (data.train.size() > 0 && data.test.size() > 0 &&
      !(data.train.sample_shape() == data.test.sample_shape())) {
    throw InvalidInput("train and test samples differ in shape");
  }
}

void subtract_channel_mean(DatasetHandle& data) {
  const std::size_t n = data.train.size();
  if (n == 0) return;
  const FeatureShape shape = data.train.sample_shape();
  const std::size_t plane = shape.height * shape.width;
  std::vector<double> mean(shape.channels, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < shape.channels; ++c) {
      const float* p = data.train.images.data() + (i * shape.channels + c) * plane;
      for (std::size_t k = 0; k < plane; ++k) mean[c] += p[k];
    }
  }
  for (double& m : mean) m /= static_cast<double>(n * plane);
  for (Split* split : {&data.train, &data.test}) {
    for (std::size_t i = 0; i < split->size(); ++i) {
      for (std::size_t c = 0; c < shape.channels; ++c) {
        float* p = split->images.data() + (i * shape.channels + c) * plane;
        const auto m = static_cast<float>(mean[c]);
        for (std::size_t k = 0; k < plane; ++k) p[k] -= m;
      }
    }
  }
}

namespace {

std::vector<std::uint8_t> read_batch_file(const std::filesystem::path& file, std::size_t records) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IngestionError("cannot open CIFAR-10 batch file " + file.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  const std::size_t expected = records * kCifarRecordBytes;
  if (bytes.size() != expected) {
    throw IngestionError("CIFAR-10 batch file " + file.string() + " holds " +
                         std::to_string(bytes.size()) + " bytes, expected " +
                         std::to_string(expected) + " (" + std::to_string(records) +
                         " records of " + std::to_string(kCifarRecordBytes) + ")");
  }
  return bytes;
}

void append_records(const std::filesystem::path& file, const std::vector<std::uint8_t>& bytes,
                    std::size_t records, Split& split, std::size_t offset) {
  constexpr std::size_t kPixels = kCifarRecordBytes - 1;
  for (std::size_t r = 0; r < records; ++r) {
    const std::uint8_t* rec = bytes.data() + r * kCifarRecordBytes;
    if (rec[0] > 9) {
      throw IngestionError("CIFAR-10 batch file " + file.string() + " record " +
                           std::to_string(r) + " has label " + std::to_string(rec[0]));
    }
    split.labels[offset + r] = rec[0];
    float* dst = split.images.data() + (offset + r) * kPixels;
    for (std::size_t k = 0; k < kPixels; ++k) dst[k] = static_cast<float>(rec[1 + k]) / 255.0f;
  }
}

}  // namespace

CifarRecord read_cifar_record(const std::filesystem::path& file, std::size_t index) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IngestionError("cannot open CIFAR-10 batch file " + file.string());
  in.seekg(static_cast<std::streamoff>(index * kCifarRecordBytes));
  std::vector<std::uint8_t> rec(kCifarRecordBytes);
  in.read(reinterpret_cast<char*>(rec.data()), static_cast<std::streamsize>(rec.size()));
  if (in.gcount() != static_cast<std::streamsize>(rec.size())) {
    throw IngestionError("CIFAR-10 batch file " + file.string() + " is truncated at record " +
                         std::to_string(index));
  }
  return {rec[0], std::vector<std::uint8_t>(rec.begin() + 1, rec.end())};
}

DatasetHandle load_cifar10(const std::filesystem::path& dir, const CifarOptions& options) {
  const std::size_t per = options.records_per_batch;
  if (per == 0) throw InvalidInput("records_per_batch must be positive");
  std::vector<std::filesystem::path> train_files;
  for (int b = 1; b <= 5; ++b) {
    train_files.push_back(dir / ("data_batch_" + std::to_string(b) + ".bin"));
  }
  const std::filesystem::path test_file = dir / "test_batch.bin";

  // Read everything before building, so a bad file leaves nothing behind.
  std::vector<std::vector<std::uint8_t>> train_bytes;
  for (const auto& f : train_files) train_bytes.push_back(read_batch_file(f, per));
  const auto test_bytes = read_batch_file(test_file, per);

  DatasetHandle data;
  data.name = "cifar10";
  data.classes = 10;
  data.source = dir.string();
  data.train.images = Tensor({5 * per, 3, 32, 32});
  data.train.labels.resize(5 * per);
  for (std::size_t b = 0; b < train_files.size(); ++b) {
    append_records(train_files[b], train_bytes[b], per, data.train, b * per);
  }
  data.test.images = Tensor({per, 3, 32, 32});
  data.test.labels.resize(per);
  append_records(test_file, test_bytes, per, data.test, 0);
  subtract_channel_mean(data);
  validate_dataset(data);
  return data;
}

namespace {

struct ClassPattern {
  double cos_theta, sin_theta, cycles;
  std::vector<double> channel_gain;
};

ClassPattern class_pattern(std::size_t c, std::size_t classes, std::size_t channels) {
  const double theta = std::numbers::pi * static_cast<double>(c % 4) / 4.0;
  ClassPattern p{std::cos(theta), std::sin(theta), 1.5 + 1.25 * static_cast<double>(c / 4), {}};
  for (std::size_t ch = 0; ch < channels; ++ch) {
    const double phase = 2.0 * std::numbers::pi *
                         (static_cast<double>(c) / static_cast<double>(classes) +
                          static_cast<double>(ch) / static_cast<double>(channels));
    p.channel_gain.push_back(0.6 + 0.4 * std::cos(phase));
  }
  return p;
}

void render_split(const SyntheticConfig& cfg, std::size_t per_class, Rng& rng, Split& split) {
  const FeatureShape s = cfg.shape;
  const std::size_t n = per_class * cfg.classes;
  split.images = Tensor(s.batched(n));
  split.labels.resize(n);
  std::vector<ClassPattern> patterns;
  for (std::size_t c = 0; c < cfg.classes; ++c) {
    patterns.push_back(class_pattern(c, cfg.classes, s.channels));
  }
  const double phase_jitter = std::numbers::pi * std::min(1.0, 2.0 * cfg.noise);
  // Interleave classes so any prefix is roughly balanced.
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i % cfg.classes;
    const ClassPattern& p = patterns[c];
    split.labels[i] = static_cast<int>(c);
    const double phase = phase_jitter * rng.uniform(-1.0, 1.0);
    const double omega = 2.0 * std::numbers::pi * p.cycles / static_cast<double>(s.width);
    for (std::size_t ch = 0; ch < s.channels; ++ch) {
      for (std::size_t y = 0; y < s.height; ++y) {
        for (std::size_t x = 0; x < s.width; ++x) {
          const double u = static_cast<double>(x) * p.cos_theta + static_cast<double>(y) * p.sin_theta;
          double v = 0.5 + 0.4 * p.channel_gain[ch] * std::sin(omega * u + phase);
          if (cfg.noise > 0.0) v += cfg.noise * rng.normal();
          split.images.at(i, ch, y, x) = static_cast<float>(v);
        }
      }
    }
  }
}

}  // namespace

DatasetHandle gen_synthetic(const SyntheticConfig& cfg) {
  if (cfg.classes < 2) throw InvalidInput("synthetic dataset needs at least two classes");
  if (cfg.n_per_class == 0) throw InvalidInput("synthetic dataset needs samples per class");
  if (cfg.shape.elements() == 0) throw InvalidInput("synthetic sample shape has a zero dimension");
  if (!(cfg.noise >= 0.0)) throw InvalidInput("noise amplitude must be non-negative");
  DatasetHandle data;
  data.name = "synthetic";
  data.classes = cfg.classes;
  data.source = "gen_synthetic(seed=" + std::to_string(cfg.seed) + ")";
  Rng train_rng(cfg.seed);
  Rng test_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  render_split(cfg, cfg.n_per_class, train_rng, data.train);
  render_split(cfg, cfg.test_per_class, test_rng, data.test);
  subtract_channel_mean(data);
  validate_dataset(data);
  return data;
}

}  // namespace edgeprune
