#include "edgeprune/catalog.hpp"

#include <fstream>

#include "edgeprune/error.hpp"
#include "edgeprune/serialize.hpp"

namespace edgeprune {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(LineageKind kind) {
  switch (kind) {
    case LineageKind::Original: return "original";
    case LineageKind::Step1: return "step1";
    case LineageKind::Step2: return "step2";
  }
  return "unknown";
}

namespace {

LineageKind parse_lineage_kind(const std::string& s) {
  if (s == "original") return LineageKind::Original;
  if (s == "step1") return LineageKind::Step1;
  if (s == "step2") return LineageKind::Step2;
  throw IngestionError("catalog: unknown lineage '" + s + "'");
}

json to_json(const PrunedModelRecord& r) {
  return {{"id", r.id},
          {"parent", r.parent},
          {"lineage",
           {{"kind", to_string(r.lineage.kind)},
            {"layer", r.lineage.layer},
            {"iteration", r.lineage.iteration}}},
          {"filter_counts", r.filter_counts},
          {"pruned_fraction", r.pruned_fraction},
          {"accuracy", r.accuracy},
          {"below_threshold", r.below_threshold},
          {"state_file", r.state_file},
          {"profile_file", r.profile_file}};
}

PrunedModelRecord record_from_json(const json& j) {
  PrunedModelRecord r;
  r.id = j.at("id").get<int>();
  r.parent = j.at("parent").get<int>();
  r.lineage.kind = parse_lineage_kind(j.at("lineage").at("kind").get<std::string>());
  r.lineage.layer = j.at("lineage").at("layer").get<std::size_t>();
  r.lineage.iteration = j.at("lineage").at("iteration").get<std::size_t>();
  r.filter_counts = j.at("filter_counts").get<std::vector<std::size_t>>();
  r.pruned_fraction = j.at("pruned_fraction").get<double>();
  r.accuracy = j.at("accuracy").get<double>();
  r.below_threshold = j.at("below_threshold").get<bool>();
  r.state_file = j.at("state_file").get<std::string>();
  r.profile_file = j.at("profile_file").get<std::string>();
  return r;
}

}  // namespace

fs::path Catalog::state_path(int id) const {
  return fs::path("models") / (std::to_string(id) + ".bin");
}

Catalog Catalog::create(const fs::path& root, const ModelState& original, double accuracy,
                        json metadata) {
  Catalog c;
  c.root_ = root;
  c.metadata_ = std::move(metadata);
  fs::create_directories(root / "models");
  fs::create_directories(root / "profiles");
  c.original_.id = 0;
  c.original_.parent = -1;
  c.original_.lineage = {LineageKind::Original, 0, 0};
  c.original_.filter_counts = filter_counts(original.spec);
  c.original_.accuracy = accuracy;
  c.original_.state_file = c.state_path(0).string();
  save_model(original, root / c.original_.state_file);
  c.next_id_ = 1;
  return c;
}

std::vector<const PrunedModelRecord*> Catalog::records() const {
  std::vector<const PrunedModelRecord*> out{&original_};
  if (step1_) out.push_back(&*step1_);
  for (const auto& [layer, family] : families_) {
    for (const auto& r : family) out.push_back(&r);
  }
  return out;
}

PrunedModelRecord* Catalog::find_mutable(int id) {
  if (original_.id == id) return &original_;
  if (step1_ && step1_->id == id) return &*step1_;
  for (auto& [layer, family] : families_) {
    for (auto& r : family) {
      if (r.id == id) return &r;
    }
  }
  return nullptr;
}

const PrunedModelRecord& Catalog::find(int id) const {
  auto* r = const_cast<Catalog*>(this)->find_mutable(id);
  if (r == nullptr) throw InvalidInput("catalog has no record " + std::to_string(id));
  return *r;
}

const PrunedModelRecord& Catalog::set_step1(PrunedModelRecord record, const ModelState& state,
                                            std::vector<CurvePoint> curve) {
  record.id = next_id_++;
  record.lineage.kind = LineageKind::Step1;
  record.state_file = state_path(record.id).string();
  record.profile_file.clear();
  save_model(state, root_ / record.state_file);
  step1_ = std::move(record);
  step1_curve_ = std::move(curve);
  return *step1_;
}

const PrunedModelRecord& Catalog::add_to_family(std::size_t layer, PrunedModelRecord record,
                                                const ModelState& state) {
  record.id = next_id_++;
  record.lineage.kind = LineageKind::Step2;
  record.lineage.layer = layer;
  record.state_file = state_path(record.id).string();
  record.profile_file.clear();
  save_model(state, root_ / record.state_file);
  auto& family = families_[layer];
  family.push_back(std::move(record));
  return family.back();
}

void Catalog::clear_families() {
  for (const auto& [layer, family] : families_) {
    for (const auto& r : family) {
      profiles_.erase(r.id);
      std::error_code ec;
      fs::remove(root_ / r.state_file, ec);
      if (!r.profile_file.empty()) fs::remove(root_ / r.profile_file, ec);
    }
  }
  families_.clear();
}

ModelState Catalog::load_state(int id) const {
  const PrunedModelRecord& r = find(id);
  const fs::path file = root_ / r.state_file;
  if (!fs::exists(file)) {
    throw IngestionError("record " + std::to_string(id) + ": model binary " + file.string() +
                         " is missing");
  }
  return load_model(file);
}

void Catalog::attach_profile(int id, ModelProfile profile) {
  PrunedModelRecord* r = find_mutable(id);
  if (r == nullptr) throw InvalidInput("catalog has no record " + std::to_string(id));
  profile.record_id = id;
  r->profile_file = (fs::path("profiles") / (std::to_string(id) + ".tsv")).string();
  fs::create_directories(root_ / "profiles");
  write_profile(profile, root_ / r->profile_file);
  profiles_[id] = std::move(profile);
}

const ModelProfile* Catalog::profile(int id) const {
  auto it = profiles_.find(id);
  return it == profiles_.end() ? nullptr : &it->second;
}

bool Catalog::fully_profiled() const {
  for (const auto* r : records()) {
    if (profile(r->id) == nullptr) return false;
  }
  return true;
}

void Catalog::validate() const {
  for (const auto* r : records()) {
    if (!(r->accuracy >= 0.0 && r->accuracy <= 1.0)) {
      throw InvalidInput("record " + std::to_string(r->id) + " has accuracy outside [0, 1]");
    }
    if (r->lineage.kind != LineageKind::Original) {
      const PrunedModelRecord& parent = find(r->parent);
      if (parent.filter_counts.size() != r->filter_counts.size()) {
        throw InvalidInput("record " + std::to_string(r->id) + " has a different layer count than its parent");
      }
      for (std::size_t l = 0; l < r->filter_counts.size(); ++l) {
        if (r->filter_counts[l] > parent.filter_counts[l]) {
          throw InvalidInput("record " + std::to_string(r->id) + " has more filters than its parent in layer " +
                             std::to_string(l));
        }
      }
    }
  }
  if (step1_ && step1_->parent != original_.id) {
    throw InvalidInput("step-1 record does not descend from the original");
  }
  for (const auto& [layer, family] : families_) {
    for (const auto& r : family) {
      if (!step1_ || r.parent != step1_->id) {
        throw InvalidInput("step-2 record " + std::to_string(r.id) + " does not descend from step 1");
      }
      for (std::size_t l = 0; l < r.filter_counts.size(); ++l) {
        if (l != layer && r.filter_counts[l] != step1_->filter_counts[l]) {
          throw InvalidInput("step-2 record " + std::to_string(r.id) + " of layer " +
                             std::to_string(layer) + " also changes layer " + std::to_string(l));
        }
      }
    }
  }
}

void Catalog::save() const {
  json index;
  index["format"] = "edgeprune-catalog";
  index["version"] = 1;
  index["metadata"] = metadata_;
  index["next_id"] = next_id_;
  json records = json::array();
  for (const auto* r : this->records()) records.push_back(to_json(*r));
  index["records"] = records;
  json curve = json::array();
  for (const auto& p : step1_curve_) {
    curve.push_back({{"iteration", p.iteration},
                     {"pruned_fraction", p.pruned_fraction},
                     {"accuracy", p.accuracy},
                     {"filters_in_range", p.filters_in_range},
                     {"below_threshold", p.below_threshold}});
  }
  index["step1_curve"] = curve;
  fs::create_directories(root_);
  std::ofstream out(root_ / "catalog.json", std::ios::trunc);
  if (!out) throw Error("cannot write " + (root_ / "catalog.json").string());
  out << index.dump(2) << '\n';
}

Catalog Catalog::load(const fs::path& root) {
  const fs::path file = root / "catalog.json";
  std::ifstream in(file);
  if (!in) throw IngestionError("no catalog index at " + file.string());
  json index;
  try {
    index = json::parse(in);
  } catch (const json::exception& e) {
    throw IngestionError("catalog index " + file.string() + ": " + e.what());
  }
  Catalog c;
  c.root_ = root;
  try {
    if (index.at("format") != "edgeprune-catalog") throw IngestionError("not a catalog index");
    c.metadata_ = index.value("metadata", json::object());
    c.next_id_ = index.at("next_id").get<int>();
    bool have_original = false;
    for (const auto& j : index.at("records")) {
      PrunedModelRecord r = record_from_json(j);
      switch (r.lineage.kind) {
        case LineageKind::Original:
          c.original_ = r;
          have_original = true;
          break;
        case LineageKind::Step1:
          c.step1_ = r;
          break;
        case LineageKind::Step2:
          c.families_[r.lineage.layer].push_back(r);
          break;
      }
    }
    if (!have_original) throw IngestionError("catalog index lacks the original record");
    for (const auto& p : index.value("step1_curve", json::array())) {
      c.step1_curve_.push_back({p.at("iteration").get<std::size_t>(),
                                p.at("pruned_fraction").get<double>(),
                                p.at("accuracy").get<double>(),
                                p.at("filters_in_range").get<std::size_t>(),
                                p.at("below_threshold").get<bool>()});
    }
  } catch (const json::exception& e) {
    throw IngestionError("catalog index " + file.string() + ": " + e.what());
  }
  for (const auto* r : c.records()) {
    if (!r->profile_file.empty()) {
      ModelProfile p = read_profile(root / r->profile_file);
      p.record_id = r->id;
      c.profiles_[r->id] = std::move(p);
    }
  }
  return c;
}

}  // namespace edgeprune
