#include "edgeprune/serialize.hpp"

#include <fstream>

#include "edgeprune/bytes.hpp"
#include "edgeprune/error.hpp"

namespace edgeprune {

namespace bytes {

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, std::span<const std::uint8_t> data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) throw Error("short write to " + path);
}

}  // namespace bytes

namespace {

constexpr char kMagic[8] = {'E', 'P', 'M', 'O', 'D', 'E', 'L', '\0'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

std::vector<std::uint8_t> serialize_model(const ModelState& model) {
  bytes::Writer w;
  w.raw({reinterpret_cast<const std::uint8_t*>(kMagic), sizeof(kMagic)});
  w.u32(kVersion);
  const ModelSpec& spec = model.spec;
  w.u32(static_cast<std::uint32_t>(spec.input.channels));
  w.u32(static_cast<std::uint32_t>(spec.input.height));
  w.u32(static_cast<std::uint32_t>(spec.input.width));
  w.u32(static_cast<std::uint32_t>(spec.classes));
  w.u64(model.seed);
  w.u32(static_cast<std::uint32_t>(spec.layers.size()));
  for (const Layer& layer : spec.layers) {
    if (const auto* c = std::get_if<Conv>(&layer)) {
      w.u8(0);
      w.u32(static_cast<std::uint32_t>(c->out_channels));
      w.u32(static_cast<std::uint32_t>(c->kernel));
      w.u32(static_cast<std::uint32_t>(c->stride));
      w.u32(static_cast<std::uint32_t>(c->padding));
      w.u8(c->relu ? 1 : 0);
    } else if (const auto* p = std::get_if<MaxPool>(&layer)) {
      w.u8(1);
      w.u32(static_cast<std::uint32_t>(p->window));
      w.u32(static_cast<std::uint32_t>(p->stride));
    } else if (std::holds_alternative<Flatten>(layer)) {
      w.u8(2);
    } else {
      const auto& f = std::get<FullyConnected>(layer);
      w.u8(3);
      w.u32(static_cast<std::uint32_t>(f.out_features));
      w.u8(f.relu ? 1 : 0);
    }
  }
  for (const LayerParams& p : model.params) {
    for (float v : p.weight.values()) w.f32(v);
    for (float v : p.bias) w.f32(v);
  }
  return w.take();
}

ModelState deserialize_model(const std::vector<std::uint8_t>& data) {
  auto fail = [](const std::string& msg) -> void { throw IngestionError("model file: " + msg); };
  bytes::Reader r(data, fail);
  const auto magic = r.raw(sizeof(kMagic));
  if (!std::equal(magic.begin(), magic.end(), reinterpret_cast<const std::uint8_t*>(kMagic))) {
    fail("bad magic");
  }
  if (const auto version = r.u32(); version != kVersion) {
    fail("unsupported version " + std::to_string(version));
  }
  ModelSpec spec;
  spec.input.channels = r.u32();
  spec.input.height = r.u32();
  spec.input.width = r.u32();
  spec.classes = r.u32();
  const std::uint64_t seed = r.u64();
  const std::uint32_t layers = r.u32();
  if (layers > 4096) fail("implausible layer count " + std::to_string(layers));
  for (std::uint32_t i = 0; i < layers; ++i) {
    switch (r.u8()) {
      case 0: {
        Conv c;
        c.out_channels = r.u32();
        c.kernel = r.u32();
        c.stride = r.u32();
        c.padding = r.u32();
        c.relu = r.u8() != 0;
        spec.layers.emplace_back(c);
        break;
      }
      case 1: {
        MaxPool p;
        p.window = r.u32();
        p.stride = r.u32();
        spec.layers.emplace_back(p);
        break;
      }
      case 2:
        spec.layers.emplace_back(Flatten{});
        break;
      case 3: {
        FullyConnected f;
        f.out_features = r.u32();
        f.relu = r.u8() != 0;
        spec.layers.emplace_back(f);
        break;
      }
      default:
        fail("unknown layer kind in layer " + std::to_string(i));
    }
  }
  ModelState model;
  try {
    model = zero_model(spec);
  } catch (const InvalidInput& e) {
    fail(std::string("invalid spec block: ") + e.what());
  }
  model.seed = seed;
  for (LayerParams& p : model.params) {
    for (float& v : p.weight.values()) v = r.f32();
    for (float& v : p.bias) v = r.f32();
  }
  if (r.remaining() != 0) fail(std::to_string(r.remaining()) + " trailing bytes");
  return model;
}

void save_model(const ModelState& model, const std::filesystem::path& file) {
  bytes::write_file(file.string(), serialize_model(model));
}

ModelState load_model(const std::filesystem::path& file) {
  return deserialize_model(bytes::read_file(file.string()));
}

}  // namespace edgeprune
