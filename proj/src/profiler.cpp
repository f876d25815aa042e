#include "edgeprune/profiler.hpp"

#include <algorithm>
#include <chrono>
#include <sstream>

#include "edgeprune/engine.hpp"
#include "edgeprune/error.hpp"
#include "edgeprune/rng.hpp"

namespace edgeprune {

void TimerConfig::validate() const {
  if (measured_runs < 3) throw InvalidInput("timer needs at least 3 measured runs");
  if (batch_size < 1) throw InvalidInput("timer batch size must be at least 1");
}

std::string TimerConfig::digest() const {
  std::ostringstream out;
  out << "median:w" << warmup_runs << ":r" << measured_runs << ":b" << batch_size;
  return out.str();
}

std::vector<std::uint64_t> analytic_flops(const ModelSpec& spec) {
  const auto shapes = infer_shapes(spec);
  std::vector<std::uint64_t> flops;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const FeatureShape in = shapes[i], out = shapes[i + 1];
    std::uint64_t f = 0;
    if (const auto* c = std::get_if<Conv>(&spec.layers[i])) {
      f = 2ull * c->kernel * c->kernel * in.channels * out.channels * out.height * out.width;
    } else if (const auto* p = std::get_if<MaxPool>(&spec.layers[i])) {
      f = std::uint64_t{p->window} * p->window * out.elements();
    } else if (std::holds_alternative<FullyConnected>(spec.layers[i])) {
      f = 2ull * in.elements() * out.elements();
    }
    flops.push_back(f);
  }
  return flops;
}

namespace {

Tensor random_input(const FeatureShape& shape, std::size_t batch) {
  Tensor t(shape.batched(batch));
  Rng rng(0x5eed);
  for (float& v : t.values()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  return t;
}

struct CodecSample {
  std::size_t bytes = 0;
  double encode_s = 0.0;
  double decode_s = 0.0;
};

CodecSample codec_sample(const Tensor& features, const ProfileOptions& options) {
  const EncodedBlob blob = encode_tensor(features, options.codec_id);
  CodecSample s;
  s.bytes = blob.encoded_bytes();
  if (options.method == ProfileMethod::Analytic) {
    s.encode_s = static_cast<double>(features.size()) / options.codec_bytes_per_second;
    s.decode_s = s.encode_s;
  } else {
    const auto start = std::chrono::steady_clock::now();
    const DecodedBlob decoded = decode(blob.wire);
    const auto stop = std::chrono::steady_clock::now();
    s.encode_s = blob.encode_s;
    s.decode_s = std::chrono::duration<double>(stop - start).count();
  }
  return s;
}

}  // namespace

ModelProfile profile_model(const ModelState& model, const ProfileOptions& options,
                           const Tensor* probe) {
  validate_spec(model.spec);
  if (options.bytes_per_element == 0) throw InvalidInput("bytes_per_element must be positive");
  const auto shapes = infer_shapes(model.spec);
  const auto flops = analytic_flops(model.spec);
  const auto names = layer_names(model.spec);
  const std::size_t layers = model.spec.layers.size();

  ModelProfile p;
  p.method = options.method;
  p.bytes_per_element = options.bytes_per_element;
  p.classes = model.spec.classes;
  p.input_elements = shapes[0].elements();
  p.input_bytes = p.input_elements * options.bytes_per_element;
  p.layers.resize(layers);
  for (std::size_t i = 0; i < layers; ++i) {
    LayerProfile& l = p.layers[i];
    l.index = i;
    l.name = names[i];
    l.kind = layer_kind_name(model.spec.layers[i]);
    l.elements = shapes[i + 1].elements();
    l.bytes = l.elements * options.bytes_per_element;
    l.flops = flops[i];
  }

  if (options.method == ProfileMethod::Analytic) {
    if (!(options.flops_per_second > 0.0)) throw InvalidInput("flops_per_second must be positive");
    std::ostringstream digest;
    digest << "analytic:flops_per_s=" << options.flops_per_second;
    p.timer_digest = digest.str();
    for (auto& l : p.layers) {
      l.latency_s = static_cast<double>(l.flops) / options.flops_per_second;
    }
  } else {
    options.timer.validate();
    p.timer_digest = "wallclock:" + options.timer.digest();
    const std::size_t batch = options.timer.batch_size;
    Tensor input = random_input(shapes[0], batch);
    if (probe != nullptr && batch == 1) input = *probe;
    std::vector<Tensor> inputs{input};
    const auto outs = forward_all(model, input);
    inputs.insert(inputs.end(), outs.begin(), outs.end() - 1);
    std::vector<std::vector<double>> samples(layers);
    const std::size_t runs = options.timer.warmup_runs + options.timer.measured_runs;
    for (std::size_t run = 0; run < runs; ++run) {
      for (std::size_t i = 0; i < layers; ++i) {
        const auto start = std::chrono::steady_clock::now();
        const Tensor out = forward_range(model, inputs[i], i, i + 1);
        const auto stop = std::chrono::steady_clock::now();
        if (stop < start) throw ProfilingError("clock went backwards while timing layer " + names[i]);
        if (run >= options.timer.warmup_runs) {
          samples[i].push_back(std::chrono::duration<double>(stop - start).count() /
                               static_cast<double>(batch));
        }
      }
    }
    for (std::size_t i = 0; i < layers; ++i) {
      auto& s = samples[i];
      std::sort(s.begin(), s.end());
      const std::size_t n = s.size();
      p.layers[i].latency_s = n % 2 == 1 ? s[n / 2] : 0.5 * (s[n / 2 - 1] + s[n / 2]);
    }
  }
  p.accumulate();

  if (options.codec) {
    const Tensor sample = probe != nullptr ? *probe : random_input(shapes[0], 1);
    const CodecSample in = codec_sample(sample, options);
    p.input_encoded_bytes = in.bytes;
    p.input_encode_s = in.encode_s;
    p.input_decode_s = in.decode_s;
    const auto outs = forward_all(model, sample);
    for (std::size_t i = 0; i < layers; ++i) {
      const CodecSample s = codec_sample(outs[i], options);
      p.layers[i].encoded_bytes = s.bytes;
      p.layers[i].encode_s = s.encode_s;
      p.layers[i].decode_s = s.decode_s;
    }
  }
  return p;
}

void profile_catalog(Catalog& catalog, const ProfileOptions& options, const Tensor* probe) {
  for (const auto* r : catalog.records()) {
    ModelState state;
    try {
      state = catalog.load_state(r->id);
    } catch (const IngestionError& e) {
      throw ProfilingError("cannot profile record " + std::to_string(r->id) + ": " + e.what());
    }
    ModelProfile profile = profile_model(state, options, probe);
    catalog.attach_profile(r->id, std::move(profile));
  }
}

double measure_codec_throughput(const Tensor& features, CodecId codec, std::size_t repeats) {
  const QuantizedTensor q = quantize(features);
  double best = 0.0;
  for (std::size_t i = 0; i < std::max<std::size_t>(repeats, 1); ++i) {
    const auto start = std::chrono::steady_clock::now();
    const EncodedBlob blob = encode(q, codec);
    const DecodedBlob decoded = decode(blob.wire);
    const auto stop = std::chrono::steady_clock::now();
    const double seconds = std::chrono::duration<double>(stop - start).count() / 2.0;
    if (seconds > 0.0) best = std::max(best, static_cast<double>(q.codes.size()) / seconds);
  }
  return best;
}

}  // namespace edgeprune
