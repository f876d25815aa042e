#include "oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <variant>

namespace oracle {

using namespace edgeprune;

Tensor conv(const Tensor& in, const Conv& layer, const LayerParams& p) {
  const std::size_t n = in.dim(0), cin = in.dim(1), h = in.dim(2), w = in.dim(3);
  const std::size_t k = layer.kernel, s = layer.stride, pad = layer.padding;
  const std::size_t ho = (h + 2 * pad - k) / s + 1, wo = (w + 2 * pad - k) / s + 1;
  const std::size_t cout = layer.out_channels;
  Tensor out({n, cout, ho, wo});
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t co = 0; co < cout; ++co)
      for (std::size_t y = 0; y < ho; ++y)
        for (std::size_t x = 0; x < wo; ++x) {
          double acc = p.bias[co];
          for (std::size_t ci = 0; ci < cin; ++ci)
            for (std::size_t ky = 0; ky < k; ++ky)
              for (std::size_t kx = 0; kx < k; ++kx) {
                const long iy = static_cast<long>(y * s + ky) - static_cast<long>(pad);
                const long ix = static_cast<long>(x * s + kx) - static_cast<long>(pad);
                if (iy < 0 || ix < 0 || iy >= static_cast<long>(h) || ix >= static_cast<long>(w)) continue;
                acc += static_cast<double>(p.weight.at(co, ci, ky, kx)) *
                       in.at(b, ci, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix));
              }
          if (layer.relu) acc = std::max(acc, 0.0);
          out.at(b, co, y, x) = static_cast<float>(acc);
        }
  return out;
}

Tensor max_pool(const Tensor& in, const MaxPool& layer) {
  const std::size_t n = in.dim(0), c = in.dim(1), h = in.dim(2), w = in.dim(3);
  const std::size_t ho = (h - layer.window) / layer.stride + 1, wo = (w - layer.window) / layer.stride + 1;
  Tensor out({n, c, ho, wo});
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t y = 0; y < ho; ++y)
        for (std::size_t x = 0; x < wo; ++x) {
          float best = -std::numeric_limits<float>::infinity();
          for (std::size_t dy = 0; dy < layer.window; ++dy)
            for (std::size_t dx = 0; dx < layer.window; ++dx)
              best = std::max(best, in.at(b, ch, y * layer.stride + dy, x * layer.stride + dx));
          out.at(b, ch, y, x) = best;
        }
  return out;
}

Tensor fully_connected(const Tensor& in, const FullyConnected& layer, const LayerParams& p) {
  const std::size_t n = in.dim(0), features = in.item_size();
  Tensor out({n, layer.out_features, 1, 1});
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t o = 0; o < layer.out_features; ++o) {
      double acc = p.bias[o];
      for (std::size_t i = 0; i < features; ++i) {
        acc += static_cast<double>(p.weight[o * features + i]) * in[b * features + i];
      }
      if (layer.relu) acc = std::max(acc, 0.0);
      out.at(b, o, 0, 0) = static_cast<float>(acc);
    }
  return out;
}

Tensor forward(const ModelState& model, const Tensor& input) {
  Tensor x = input;
  for (std::size_t i = 0; i < model.spec.layers.size(); ++i) {
    const Layer& l = model.spec.layers[i];
    if (const auto* c = std::get_if<Conv>(&l)) x = conv(x, *c, model.params[i]);
    else if (const auto* p = std::get_if<MaxPool>(&l)) x = max_pool(x, *p);
    else if (std::holds_alternative<Flatten>(l)) x = x.reshaped({x.dim(0), x.item_size(), 1, 1});
    else x = fully_connected(x, std::get<FullyConnected>(l), model.params[i]);
  }
  return x;
}

double loss(const Tensor& logits, const std::vector<int>& labels) {
  const std::size_t n = logits.dim(0), k = logits.item_size();
  double total = 0.0;
  for (std::size_t b = 0; b < n; ++b) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < k; ++j) mx = std::max(mx, static_cast<double>(logits[b * k + j]));
    double sum = 0.0;
    for (std::size_t j = 0; j < k; ++j) sum += std::exp(logits[b * k + j] - mx);
    total += std::log(sum) + mx - logits[b * k + static_cast<std::size_t>(labels[b])];
  }
  return total / static_cast<double>(n);
}

PartitionPlan brute_force_plan(const std::vector<PlanCandidate>& candidates, const SystemConfig& cfg) {
  PartitionPlan best;
  for (const PlanCandidate& c : candidates) {
    if (c.accuracy <= cfg.accuracy_floor) continue;
    const ModelProfile& prof = *c.profile;
    const std::size_t m = prof.layers.size();
    for (std::size_t p = 0; p <= m; ++p) {
      const bool after_pool = p >= 1 && prof.layers[p - 1].kind == "pool";
      bool ok = cfg.policy == CandidatePolicy::EndpointsIncluded ||
                (cfg.policy == CandidatePolicy::AllLayers && p >= 1) ||
                (cfg.policy == CandidatePolicy::PoolingOnly && after_pool);
      if (c.family_layer) {
        // A step-2 model only changes the output of its pruned layer and of
        // the pool directly after it.
        const std::size_t l = *c.family_layer;
        ok = ok && (p == l + 1 || (p == l + 2 && after_pool));
      }
      if (!ok) continue;

      double f = 0.0;
      for (std::size_t i = 0; i < p; ++i) f += prof.layers[i].latency_s;
      double t = 0.0;
      for (const auto& layer : prof.layers) t += layer.latency_s;
      double mobile = cfg.gamma * f;
      double server = t - f;
      std::size_t bytes = 0;
      if (p == m) {
        bytes = cfg.result_bytes ? cfg.result_bytes : prof.classes * 4;
      } else if (cfg.codec) {
        bytes = p == 0 ? prof.input_encoded_bytes : prof.layers[p - 1].encoded_bytes;
        mobile += cfg.gamma * (p == 0 ? prof.input_encode_s : prof.layers[p - 1].encode_s);
        server += p == 0 ? prof.input_decode_s : prof.layers[p - 1].decode_s;
      } else {
        bytes = p == 0 ? prof.input_bytes : prof.layers[p - 1].bytes;
      }
      const double tx = static_cast<double>(bytes) / cfg.upload_rate;
      const double total = mobile + tx + server;
      const bool better = !best.feasible || total < best.total_s ||
                          (total == best.total_s && p < best.partition) ||
                          (total == best.total_s && p == best.partition && c.record_id < best.record_id);
      if (better) {
        best = {true, c.record_id, p, mobile, tx, server, total, c.accuracy, bytes};
      }
    }
  }
  return best;
}

RandomCatalog random_catalog(std::uint64_t seed, std::size_t max_layers, std::size_t max_records,
                             bool with_codec) {
  std::mt19937_64 gen(seed);
  auto pick = [&](std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(gen);
  };
  RandomCatalog cat;
  const std::size_t m = pick(1, max_layers);
  std::vector<std::string> kinds(m);
  for (std::size_t i = 0; i + 1 < m; ++i) kinds[i] = pick(0, 2) == 0 ? "pool" : "conv";
  kinds[m - 1] = "fc";
  std::vector<std::size_t> convs;
  for (std::size_t i = 0; i < m; ++i) {
    if (kinds[i] == "conv") convs.push_back(i);
  }
  const std::size_t records = pick(1, max_records);
  const std::size_t distinct = pick(1, records);
  for (std::size_t d = 0; d < distinct; ++d) {
    auto prof = std::make_unique<ModelProfile>();
    prof->record_id = static_cast<int>(d);
    prof->classes = pick(2, 10);
    prof->input_elements = pick(1, 64) * 16;
    prof->input_bytes = prof->input_elements * 4;
    for (std::size_t i = 0; i < m; ++i) {
      LayerProfile l;
      l.index = i;
      l.name = kinds[i] + std::to_string(i);
      l.kind = kinds[i];
      l.elements = pick(1, 64) * 16;
      l.bytes = l.elements * 4;
      l.latency_s = static_cast<double>(pick(0, 8)) / 1024.0;
      if (with_codec) {
        l.encoded_bytes = pick(1, l.bytes);
        l.encode_s = static_cast<double>(pick(0, 4)) / 4096.0;
        l.decode_s = static_cast<double>(pick(0, 4)) / 4096.0;
      }
      prof->layers.push_back(l);
    }
    if (with_codec) {
      prof->input_encoded_bytes = pick(1, prof->input_bytes);
      prof->input_encode_s = static_cast<double>(pick(0, 4)) / 4096.0;
      prof->input_decode_s = static_cast<double>(pick(0, 4)) / 4096.0;
    }
    prof->accumulate();
    cat.profiles.push_back(std::move(prof));
  }
  for (std::size_t r = 0; r < records; ++r) {
    PlanCandidate c;
    c.record_id = static_cast<int>(r);
    c.accuracy = static_cast<double>(pick(0, 20)) / 20.0;
    c.profile = cat.profiles[pick(0, distinct - 1)].get();
    if (!convs.empty() && pick(0, 1) == 1) c.family_layer = convs[pick(0, convs.size() - 1)];
    cat.candidates.push_back(c);
  }
  return cat;
}

namespace {

std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  const auto ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    cov += (ra[i] - ma) * (rb[i] - mb);
    va += (ra[i] - ma) * (ra[i] - ma);
    vb += (rb[i] - mb) * (rb[i] - mb);
  }
  return cov / std::sqrt(va * vb);
}

TempDir::TempDir() {
  std::random_device rd;
  path_ = std::filesystem::temp_directory_path() /
          ("edgeprune-test-" + std::to_string(rd()) + std::to_string(rd()));
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

}  // namespace oracle
