#include "edgeprune/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "edgeprune/codec.hpp"
#include "edgeprune/edgesim.hpp"
#include "edgeprune/engine.hpp"
#include "edgeprune/error.hpp"
#include "edgeprune/profiler.hpp"
#include "edgeprune/pruning.hpp"
#include "edgeprune/report.hpp"
#include "edgeprune/units.hpp"
#include "edgeprune/version.hpp"
#include "edgeprune/zoo.hpp"

namespace edgeprune {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct StageInfo {
  Stage stage;
  const char* name;
  std::vector<Stage> needs;
  std::vector<const char*> sections;
};

const std::vector<StageInfo>& stage_table() {
  static const std::vector<StageInfo> table = {
      {Stage::Train, "train", {}, {"dataset", "model", "train"}},
      {Stage::Prune1, "prune1", {Stage::Train}, {"dataset", "model", "train", "prune"}},
      {Stage::Prune2, "prune2", {Stage::Prune1}, {"dataset", "model", "train", "prune"}},
      {Stage::Profile, "profile", {Stage::Prune2}, {"dataset", "model", "train", "prune", "profile"}},
      {Stage::Plan, "plan", {Stage::Profile},
       {"dataset", "model", "train", "prune", "profile", "system"}},
      {Stage::Sweep, "sweep", {Stage::Profile},
       {"dataset", "model", "train", "prune", "profile", "system", "sweep"}},
      {Stage::Simulate, "simulate", {Stage::Plan},
       {"dataset", "model", "train", "prune", "profile", "system", "simulate"}},
      {Stage::Report, "report", {Stage::Plan, Stage::Sweep, Stage::Simulate},
       {"dataset", "model", "train", "prune", "profile", "system", "sweep", "simulate"}},
  };
  return table;
}

const StageInfo& info(Stage s) {
  for (const auto& i : stage_table()) {
    if (i.stage == s) return i;
  }
  throw InvalidInput("unknown stage");
}

bool depends_on(Stage stage, Stage upstream) {
  for (Stage n : info(stage).needs) {
    if (n == upstream || depends_on(n, upstream)) return true;
  }
  return false;
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error("cannot write " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw IngestionError(path.string() + ": " + e.what());
  }
}

json plan_to_json(const PartitionPlan& p) {
  return {{"feasible", p.feasible},         {"record_id", p.record_id},
          {"partition", p.partition},       {"mobile_s", p.mobile_s},
          {"transmission_s", p.transmission_s}, {"server_s", p.server_s},
          {"total_s", p.total_s},           {"accuracy", p.accuracy},
          {"transmitted_bytes", p.transmitted_bytes}};
}

PartitionPlan plan_from_json(const json& j) {
  PartitionPlan p;
  p.feasible = j.at("feasible").get<bool>();
  p.record_id = j.at("record_id").get<int>();
  p.partition = j.at("partition").get<std::size_t>();
  p.mobile_s = j.at("mobile_s").get<double>();
  p.transmission_s = j.at("transmission_s").get<double>();
  p.server_s = j.at("server_s").get<double>();
  p.total_s = j.at("total_s").get<double>();
  p.accuracy = j.at("accuracy").get<double>();
  p.transmitted_bytes = j.at("transmitted_bytes").get<std::size_t>();
  return p;
}

}  // namespace

std::string to_string(Stage stage) { return info(stage).name; }

Stage parse_stage(const std::string& text) {
  for (const auto& i : stage_table()) {
    if (text == i.name) return i.stage;
  }
  throw ConfigError("unknown stage '" + text + "'");
}

const std::vector<Stage>& all_stages() {
  static const std::vector<Stage> stages = {Stage::Train, Stage::Prune1, Stage::Prune2,
                                            Stage::Profile, Stage::Plan, Stage::Sweep,
                                            Stage::Simulate, Stage::Report};
  return stages;
}

std::vector<Stage> prerequisites(Stage stage) { return info(stage).needs; }

json RunManifest::to_json() const {
  json stages_json = json::object();
  for (const auto& [name, m] : stages) {
    stages_json[name] = {{"digest", m.digest}, {"completed", m.completed}};
  }
  return {{"tool_version", tool_version}, {"config_digest", config_digest},
          {"seeds", seeds},               {"catalog", catalog_path},
          {"stages", stages_json}};
}

RunManifest RunManifest::from_json(const json& doc) {
  RunManifest m;
  try {
    m.tool_version = doc.at("tool_version").get<std::string>();
    m.config_digest = doc.at("config_digest").get<std::string>();
    m.seeds = doc.at("seeds");
    m.catalog_path = doc.at("catalog").get<std::string>();
    for (const auto& [name, s] : doc.at("stages").items()) {
      m.stages[name] = {s.at("digest").get<std::string>(), s.at("completed").get<bool>()};
    }
  } catch (const json::exception& e) {
    throw IngestionError(std::string("malformed run manifest: ") + e.what());
  }
  return m;
}

DatasetHandle load_dataset(const DatasetConfig& cfg) {
  if (cfg.source == "cifar10") {
    if (cfg.cifar_dir.empty()) throw ConfigError("config field /dataset/cifar_dir: required for cifar10");
    return load_cifar10(cfg.cifar_dir);
  }
  return gen_synthetic(cfg.synthetic);
}

ModelSpec build_model_spec(const ModelConfig& cfg, const DatasetHandle& data) {
  VggConfig v;
  v.widths = cfg.widths;
  v.convs = cfg.convs;
  v.classifier_hidden = cfg.hidden;
  v.input = data.train.sample_shape();
  v.classes = data.classes;
  return build_vgg_like(v);
}

double evaluate_with_codec(const ModelState& model, const Split& data, std::size_t partition,
                           CodecId codec, std::size_t batch_size) {
  const std::size_t m = model.spec.layers.size();
  if (partition > m) throw InvalidInput("partition out of range");
  if (data.size() == 0) throw InvalidInput("cannot evaluate on an empty split");
  std::size_t correct = 0;
  for (std::size_t first = 0; first < data.size(); first += batch_size) {
    const std::size_t count = std::min(batch_size, data.size() - first);
    Tensor front = forward_range(model, data.images.slice_batch(first, count), 0, partition);
    if (partition < m) {
      const std::size_t item = front.item_size();
      for (std::size_t n = 0; n < count; ++n) {
        const Tensor restored = decode_tensor(encode_tensor(front.slice_batch(n, 1), codec).wire);
        std::copy(restored.values().begin(), restored.values().end(), front.data() + n * item);
      }
    }
    const Tensor logits = forward_range(model, front, partition, m);
    const auto pred = predict(logits);
    for (std::size_t n = 0; n < count; ++n) {
      if (pred[n] == data.labels[first + n]) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

double CompressionStats::ratio() const {
  return encoded_bytes == 0 ? 0.0 : static_cast<double>(quantized_bytes) / static_cast<double>(encoded_bytes);
}

CompressionStats measure_compression(const ModelState& model, const Split& data,
                                     std::size_t partition, CodecId codec, std::size_t samples) {
  CompressionStats s;
  s.samples = std::min(samples, data.size());
  if (s.samples == 0) throw InvalidInput("no samples to measure");
  const Tensor front = forward_range(model, data.images.slice_batch(0, s.samples), 0, partition);
  for (std::size_t n = 0; n < s.samples; ++n) {
    const EncodedBlob blob = encode_tensor(front.slice_batch(n, 1), codec);
    s.quantized_bytes += front.item_size();
    s.encoded_bytes += blob.encoded_bytes();
  }
  return s;
}

Pipeline::Pipeline(PipelineConfig cfg, fs::path run_dir, std::ostream* log)
    : cfg_(std::move(cfg)), cfg_json_(config_to_json(cfg_)), dir_(std::move(run_dir)), log_(log) {
  const fs::path manifest_path = dir_ / "manifest.json";
  if (fs::exists(manifest_path)) {
    manifest_ = RunManifest::from_json(read_json(manifest_path));
  } else {
    manifest_.tool_version = kVersion;
  }
}

std::string Pipeline::config_digest() const {
  json body = cfg_json_;
  body.erase("run_name");
  return digest(body);
}

std::string Pipeline::stage_digest(Stage stage) const {
  json body = json::object();
  for (const char* s : info(stage).sections) body[s] = cfg_json_.at(s);
  return digest(body);
}

bool Pipeline::completed(Stage stage) const {
  auto it = manifest_.stages.find(to_string(stage));
  return it != manifest_.stages.end() && it->second.completed &&
         it->second.digest == stage_digest(stage);
}

void Pipeline::say(const std::string& line) const {
  if (log_ != nullptr) *log_ << line << std::endl;
}

void Pipeline::save_manifest() const {
  write_text(dir_ / "manifest.json", manifest_.to_json().dump(2) + "\n");
}

const DatasetHandle& Pipeline::data() {
  if (!data_) data_ = load_dataset(cfg_.dataset);
  return *data_;
}

SystemConfig Pipeline::system_config(const Catalog& catalog) const {
  SystemConfig s = cfg_.system;
  s.accuracy_floor = cfg_.accuracy_floor.value_or(catalog.original().accuracy - cfg_.prune.step2_budget);
  return s;
}

Pipeline::Outcome Pipeline::run(Stage stage) {
  for (Stage need : info(stage).needs) {
    if (!completed(need)) {
      throw PrerequisiteError(to_string(need), "stage '" + to_string(stage) + "' needs stage '" +
                                                   to_string(need) +
                                                   "' to complete first for this configuration; run '" +
                                                   to_string(need) + "' first");
    }
  }
  if (completed(stage)) {
    say(to_string(stage) + ": up to date");
    return Outcome::UpToDate;
  }
  fs::create_directories(dir_);
  // Anything downstream was built from artifacts this stage is about to replace.
  for (Stage s : all_stages()) {
    if (depends_on(s, stage)) manifest_.stages.erase(to_string(s));
  }
  manifest_.stages.erase(to_string(stage));
  manifest_.tool_version = kVersion;
  manifest_.config_digest = config_digest();
  manifest_.seeds = {{"dataset", cfg_.dataset.synthetic.seed},
                     {"model", cfg_.model.seed},
                     {"train", cfg_.train.seed},
                     {"prune", cfg_.prune.seed},
                     {"jitter", cfg_.simulate.jitter_seed}};
  save_manifest();
  write_text(dir_ / "config.json", cfg_json_.dump(2) + "\n");

  switch (stage) {
    case Stage::Train: train(); break;
    case Stage::Prune1: prune1(); break;
    case Stage::Prune2: prune2(); break;
    case Stage::Profile: profile(); break;
    case Stage::Plan: plan(); break;
    case Stage::Sweep: sweep(); break;
    case Stage::Simulate: simulate(); break;
    case Stage::Report: report(); break;
  }
  manifest_.stages[to_string(stage)] = {stage_digest(stage), true};
  save_manifest();
  return Outcome::Ran;
}

void Pipeline::run_through(Stage last) {
  for (Stage s : all_stages()) {
    run(s);
    if (s == last) break;
  }
}

void Pipeline::train() {
  const DatasetHandle& d = data();
  const ModelSpec spec = build_model_spec(cfg_.model, d);
  say("train: " + std::to_string(d.train.size()) + " training samples, " +
      std::to_string(spec.layers.size()) + " layers");
  std::ostringstream log;
  log << "epoch,loss\n";
  ModelState model = edgeprune::train(init_model(spec, cfg_.model.seed), d.train, cfg_.train,
                                 [&](std::size_t epoch, double loss) {
                                   log << epoch << ',' << loss << '\n';
                                   say("train: epoch " + std::to_string(epoch) + " loss " +
                                       std::to_string(loss));
                                 });
  const double acc = evaluate(model, d.test);
  say("train: test accuracy " + std::to_string(acc));
  write_text(dir_ / "train_log.csv", "# config_digest=" + config_digest() + "\n" + log.str());
  fs::remove_all(catalog_dir());
  Catalog c = Catalog::create(catalog_dir(), model, acc,
                              {{"dataset", d.name},
                               {"baseline_accuracy", acc},
                               {"config_digest", config_digest()}});
  c.save();
}

namespace {

PruneSchedule schedule(const PipelineConfig& cfg, double floor) {
  PruneSchedule s;
  s.fraction = cfg.prune.fraction;
  s.finetune_epochs = cfg.prune.finetune_epochs;
  s.accuracy_floor = floor;
  s.min_filters = cfg.prune.min_filters;
  s.score_batches = cfg.prune.score_batches;
  s.score_batch_size = cfg.prune.score_batch_size;
  s.max_iterations = cfg.prune.max_iterations;
  s.finetune = cfg.train;
  s.finetune.seed = cfg.prune.seed;
  return s;
}

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f%%", v * 100.0);
  return buf;
}

}  // namespace

void Pipeline::prune1() {
  Catalog c = Catalog::load(catalog_dir());
  const double floor = c.original().accuracy - cfg_.prune.step1_budget;
  const ModelState original = c.load_state(0);
  const Step1Result r = run_step1(c, original, data(), schedule(cfg_, floor), [&](const PruneSnapshot& s) {
    say("prune1: iteration " + std::to_string(s.iteration) + " pruned " + pct(s.pruned_fraction) +
        " accuracy " + pct(s.accuracy));
  });
  say("prune1: kept record " + std::to_string(r.record.id) + " with " + pct(r.record.pruned_fraction) +
      " of filters removed");
  c.save();
}

void Pipeline::prune2() {
  Catalog c = Catalog::load(catalog_dir());
  const double floor = c.original().accuracy - cfg_.prune.step2_budget;
  run_step2(c, data(), schedule(cfg_, floor), [&](std::size_t layer, const PruneSnapshot& s) {
    say("prune2: layer " + std::to_string(layer) + " iteration " + std::to_string(s.iteration) +
        " pruned " + pct(s.pruned_fraction) + " accuracy " + pct(s.accuracy));
  });
  c.save();
}

void Pipeline::profile() {
  Catalog c = Catalog::load(catalog_dir());
  const Tensor probe = data().test.sample(0);
  profile_catalog(c, cfg_.profile, &probe);
  c.save();
  say("profile: " + std::to_string(c.records().size()) + " records profiled");
}

void Pipeline::plan() {
  const Catalog c = Catalog::load(catalog_dir());
  const SystemConfig sys = system_config(c);
  const PartitionPlan p = select_plan(plan_candidates(c), sys);
  json doc = plan_to_json(p);
  doc["config_digest"] = config_digest();
  doc["accuracy_floor"] = sys.accuracy_floor;
  doc["gamma"] = sys.gamma;
  doc["upload_rate"] = format_rate(sys.upload_rate);
  write_text(dir_ / "plan" / "plan.json", doc.dump(2) + "\n");
  if (!p.feasible) {
    throw InfeasiblePlan("no catalog record has accuracy above " + std::to_string(sys.accuracy_floor));
  }
  Table t;
  t.name = "plan";
  t.title = "Selected plan";
  t.columns = {"record", "partition", "accuracy", "bytes", "mobile_s", "transmission_s", "server_s",
               "total_s"};
  t.rows.push_back({std::to_string(p.record_id), std::to_string(p.partition), std::to_string(p.accuracy),
                    std::to_string(p.transmitted_bytes), std::to_string(p.mobile_s),
                    std::to_string(p.transmission_s), std::to_string(p.server_s),
                    std::to_string(p.total_s)});
  write_table(t, dir_ / "plan", config_digest());
  say("plan: record " + std::to_string(p.record_id) + " partition " + std::to_string(p.partition) +
      " total " + std::to_string(p.total_s * 1e3) + " ms");
}

void Pipeline::sweep() {
  const Catalog c = Catalog::load(catalog_dir());
  const SystemConfig sys = system_config(c);
  const auto candidates = plan_candidates(c);
  const fs::path out = dir_ / "sweep";
  write_table(sweep_grid_table(edgeprune::sweep(candidates, cfg_.sweep.rates, cfg_.sweep.gammas, sys)),
              out, config_digest());
  write_table(rate_sweep_table(candidates, cfg_.sweep.rates, sys), out, config_digest());
  write_table(gamma_sweep_table(candidates, cfg_.sweep.gammas, sys), out, config_digest());
  SystemConfig table_sys = sys;
  table_sys.gamma = cfg_.sweep.table_gamma;
  write_table(improvement_table(latency_improvements(c, cfg_.sweep.table_rates, table_sys),
                                cfg_.sweep.table_gamma),
              out, config_digest());
  say("sweep: " + std::to_string(cfg_.sweep.rates.size() * cfg_.sweep.gammas.size()) + " cells");
}

void Pipeline::simulate() {
  const Catalog c = Catalog::load(catalog_dir());
  const PartitionPlan p = plan_from_json(read_json(dir_ / "plan" / "plan.json"));
  const ModelState model = c.load_state(p.record_id);
  const ModelProfile* timing = c.profile(p.record_id);
  SimConfig sim;
  sim.link.rate = cfg_.system.upload_rate;
  if (cfg_.simulate.jitter > 0.0) sim.link.jitter = JitterModel{cfg_.simulate.jitter, cfg_.simulate.jitter_seed};
  sim.link.overhead_bytes = cfg_.simulate.overhead_bytes;
  sim.gamma = cfg_.system.gamma;
  sim.codec = cfg_.system.codec;
  sim.codec_id = cfg_.profile.codec_id;
  sim.result_bytes = cfg_.system.result_bytes;
  sim.timing = cfg_.simulate.timing;
  sim.codec_bytes_per_second = cfg_.profile.codec_bytes_per_second;

  const Split& test = data().test;
  const std::size_t n = std::min(cfg_.simulate.samples, test.size());
  std::ostringstream csv;
  csv << "# config_digest=" << config_digest() << '\n' << "sample," << trace_csv_header() << '\n';
  std::size_t correct = 0;
  std::size_t matches = 0;
  double total = 0.0;
  std::optional<InferenceTrace> first;
  for (std::size_t i = 0; i < n; ++i) {
    sim.run_index = i;
    InferenceTrace t = run_partitioned(model, test.sample(i), p.partition, sim, *timing);
    csv << i << ',' << trace_csv_row(t) << '\n';
    if (predict(t.logits)[0] == test.labels[i]) ++correct;
    if (t.matches_monolithic) ++matches;
    total += t.total_s;
    if (!first) first = std::move(t);
  }
  write_text(dir_ / "simulate" / "traces.csv", csv.str());
  write_text(dir_ / "simulate" / "trace.txt",
             "# config_digest=" + config_digest() + "\n" + format_trace(*first));

  // The profile probe is test sample 0, so its trace is the one the plan predicts.
  json summary = {{"config_digest", config_digest()},
                  {"record_id", p.record_id},
                  {"partition", p.partition},
                  {"samples", n},
                  {"accuracy", static_cast<double>(correct) / static_cast<double>(n)},
                  {"matches_monolithic", matches},
                  {"mean_total_s", total / static_cast<double>(n)}};
  const bool comparable = sim.timing == TimingMode::Analytic && !sim.link.jitter &&
                          sim.link.overhead_bytes == 0;
  if (comparable) {
    const ValidationReport v = validate_plan(p, *first);
    json checks = json::array();
    for (const auto& ch : v.checks) {
      checks.push_back({{"component", ch.component},
                        {"predicted_s", ch.predicted_s},
                        {"simulated_s", ch.simulated_s},
                        {"relative_error", ch.relative_error}});
    }
    summary["validation"] = checks;
  } else {
    summary["validation"] = "skipped: needs analytic timing, no jitter and no overhead";
  }
  write_text(dir_ / "simulate" / "summary.json", summary.dump(2) + "\n");
  say("simulate: " + std::to_string(n) + " inferences, " + std::to_string(matches) +
      " match the monolithic forward pass");
}

void Pipeline::report() {
  const Catalog c = Catalog::load(catalog_dir());
  const SystemConfig sys = system_config(c);
  const auto candidates = plan_candidates(c);
  const PartitionPlan p = plan_from_json(read_json(dir_ / "plan" / "plan.json"));
  const std::string dg = config_digest();
  const fs::path out = dir_ / "report";

  std::vector<int> ids{0};
  if (c.step1()) ids.push_back(c.step1()->id);
  if (std::find(ids.begin(), ids.end(), p.record_id) == ids.end()) ids.push_back(p.record_id);

  std::vector<Table> tables;
  for (int id : ids) tables.push_back(layer_table(c, id));
  tables.push_back(breakdown_table(c, ids, sys));
  tables.push_back(rate_sweep_table(candidates, cfg_.sweep.rates, sys));
  tables.push_back(gamma_sweep_table(candidates, cfg_.sweep.gammas, sys));
  tables.push_back(prune_curve_table(c));
  tables.push_back(compression_table(c));
  SystemConfig table_sys = sys;
  table_sys.gamma = cfg_.sweep.table_gamma;
  tables.push_back(improvement_table(latency_improvements(c, cfg_.sweep.table_rates, table_sys),
                                     cfg_.sweep.table_gamma));

  std::ostringstream md;
  md << "# Run report: " << cfg_.run_name << "\n\n";
  md << "config digest `" << dg << "`, tool version " << kVersion << "\n\n";
  md << "- dataset: " << c.metadata().value("dataset", std::string("?")) << "\n";
  md << "- baseline accuracy: " << pct(c.original().accuracy) << "\n";
  if (c.step1()) {
    md << "- step 1: record " << c.step1()->id << ", " << pct(c.step1()->pruned_fraction)
       << " of filters removed, accuracy " << pct(c.step1()->accuracy) << "\n";
  }
  md << "- accuracy floor: " << pct(sys.accuracy_floor) << "\n";
  md << "- selected plan: record " << p.record_id << ", partition " << p.partition << ", total "
     << p.total_s * 1e3 << " ms\n\n";
  for (const Table& t : tables) {
    write_table(t, out, dg);
    md << to_markdown(t, dg);
  }
  write_text(out / "report.md", md.str());
  say("report: " + std::to_string(tables.size()) + " tables under " + out.string());
}

}  // namespace edgeprune
