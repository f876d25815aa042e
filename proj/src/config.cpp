#include "edgeprune/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "edgeprune/error.hpp"
#include "edgeprune/units.hpp"

namespace edgeprune {

using nlohmann::json;

PipelineConfig::PipelineConfig() {
  for (double mbps : {0.1, 0.25, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0}) {
    sweep.rates.push_back(mbps * 1e6 / 8.0);
  }
  sweep.gammas = {1.0, 2.0, 3.0, 5.0, 8.0, 10.0, 20.0, 50.0, 100.0, 1000.0};
  sweep.table_rates = {parse_rate("1.1Mbps"), parse_rate("5.85Mbps"), parse_rate("18.88Mbps")};
  profile.codec = true;
}

namespace {

std::string timing_name(TimingMode m) { return m == TimingMode::Analytic ? "analytic" : "wallclock"; }

json rates_json(const std::vector<double>& rates) {
  json out = json::array();
  for (double r : rates) out.push_back(format_rate(r));
  return out;
}

}  // namespace

json config_to_json(const PipelineConfig& c) {
  json j;
  j["run_name"] = c.run_name;
  j["dataset"] = {
      {"source", c.dataset.source},
      {"cifar_dir", c.dataset.cifar_dir},
      {"seed", c.dataset.synthetic.seed},
      {"train_per_class", c.dataset.synthetic.n_per_class},
      {"test_per_class", c.dataset.synthetic.test_per_class},
      {"classes", c.dataset.synthetic.classes},
      {"shape", {c.dataset.synthetic.shape.channels, c.dataset.synthetic.shape.height,
                 c.dataset.synthetic.shape.width}},
      {"noise", c.dataset.synthetic.noise},
  };
  j["model"] = {{"widths", c.model.widths},
                {"convs", c.model.convs},
                {"hidden", c.model.hidden},
                {"seed", c.model.seed}};
  j["train"] = {{"lr", c.train.learning_rate},
                {"momentum", c.train.momentum},
                {"batch_size", c.train.batch_size},
                {"epochs", c.train.epochs},
                {"seed", c.train.seed}};
  j["prune"] = {{"fraction", c.prune.fraction},
                {"finetune_epochs", c.prune.finetune_epochs},
                {"step1_budget", c.prune.step1_budget},
                {"step2_budget", c.prune.step2_budget},
                {"min_filters", c.prune.min_filters},
                {"score_batches", c.prune.score_batches},
                {"score_batch_size", c.prune.score_batch_size},
                {"max_iterations", c.prune.max_iterations},
                {"seed", c.prune.seed}};
  j["profile"] = {{"method", to_string(c.profile.method)},
                  {"warmup_runs", c.profile.timer.warmup_runs},
                  {"measured_runs", c.profile.timer.measured_runs},
                  {"flops_per_second", c.profile.flops_per_second},
                  {"codec", c.profile.codec},
                  {"codec_id", to_string(c.profile.codec_id)},
                  {"codec_rate", format_rate(c.profile.codec_bytes_per_second)}};
  j["system"] = {{"gamma", c.system.gamma},
                 {"upload_rate", format_rate(c.system.upload_rate)},
                 {"accuracy_floor", c.accuracy_floor ? json(*c.accuracy_floor) : json(nullptr)},
                 {"policy", to_string(c.system.policy)},
                 {"codec", c.system.codec},
                 {"result_bytes", c.system.result_bytes}};
  j["sweep"] = {{"rates", rates_json(c.sweep.rates)},
                {"gammas", c.sweep.gammas},
                {"table_rates", rates_json(c.sweep.table_rates)},
                {"table_gamma", c.sweep.table_gamma}};
  j["simulate"] = {{"samples", c.simulate.samples},
                   {"jitter", c.simulate.jitter},
                   {"jitter_seed", c.simulate.jitter_seed},
                   {"overhead_bytes", c.simulate.overhead_bytes},
                   {"timing", timing_name(c.simulate.timing)}};
  return j;
}

namespace {

// Reads fields of one object, remembering which keys were consumed so that
// leftovers can be reported as unknown.
class Section {
 public:
  Section(const json& doc, std::string path) : path_(std::move(path)) {
    if (doc.is_null()) return;
    if (!doc.is_object()) fail("", "expected an object");
    obj_ = &doc;
  }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw ConfigError("config field " + path_ + (key.empty() ? "" : "/" + key) + ": " + what);
  }

  const json* get(const std::string& key) {
    seen_.insert(key);
    if (obj_ == nullptr) return nullptr;
    auto it = obj_->find(key);
    return it == obj_->end() ? nullptr : &*it;
  }

  void number(const std::string& key, double& out) {
    if (const json* v = get(key)) {
      if (!v->is_number()) fail(key, "expected a number");
      out = v->get<double>();
    }
  }

  template <typename T>
  void count(const std::string& key, T& out) {
    if (const json* v = get(key)) {
      if (!v->is_number_integer() || v->get<long long>() < 0) fail(key, "expected a non-negative integer");
      out = static_cast<T>(v->get<unsigned long long>());
    }
  }

  void flag(const std::string& key, bool& out) {
    if (const json* v = get(key)) {
      if (!v->is_boolean()) fail(key, "expected true or false");
      out = v->get<bool>();
    }
  }

  void text(const std::string& key, std::string& out) {
    if (const json* v = get(key)) {
      if (!v->is_string()) fail(key, "expected a string");
      out = v->get<std::string>();
    }
  }

  void counts(const std::string& key, std::vector<std::size_t>& out) {
    if (const json* v = get(key)) {
      if (!v->is_array()) fail(key, "expected an array of integers");
      out.clear();
      for (const auto& e : *v) {
        if (!e.is_number_integer() || e.get<long long>() < 0) fail(key, "expected an array of integers");
        out.push_back(e.get<std::size_t>());
      }
    }
  }

  void numbers(const std::string& key, std::vector<double>& out) {
    if (const json* v = get(key)) {
      if (!v->is_array()) fail(key, "expected an array of numbers");
      out.clear();
      for (const auto& e : *v) {
        if (!e.is_number()) fail(key, "expected an array of numbers");
        out.push_back(e.get<double>());
      }
    }
  }

  void rate(const std::string& key, double& out) {
    if (const json* v = get(key)) {
      if (!v->is_string()) fail(key, "rate needs an explicit unit, e.g. \"1.1Mbps\" or \"137.5kB/s\"");
      out = parse_field(key, *v);
    }
  }

  void rates(const std::string& key, std::vector<double>& out) {
    if (const json* v = get(key)) {
      if (!v->is_array()) fail(key, "expected an array of rates");
      out.clear();
      for (const auto& e : *v) {
        if (!e.is_string()) fail(key, "rate needs an explicit unit, e.g. \"1.1Mbps\"");
        out.push_back(parse_field(key, e));
      }
    }
  }

  template <typename F>
  void parsed(const std::string& key, F&& parse) {
    if (const json* v = get(key)) {
      if (!v->is_string()) fail(key, "expected a string");
      try {
        parse(v->get<std::string>());
      } catch (const Error& e) {
        fail(key, e.what());
      }
    }
  }

  void finish() const {
    if (obj_ == nullptr) return;
    for (const auto& [k, v] : obj_->items()) {
      if (!seen_.contains(k)) fail(k, "unknown key");
    }
  }

 private:
  double parse_field(const std::string& key, const json& v) const {
    try {
      return parse_rate(v.get<std::string>());
    } catch (const ConfigError& e) {
      fail(key, e.what());
    }
  }

  std::string path_;
  const json* obj_ = nullptr;
  std::set<std::string> seen_;
};

const json& member(const json& doc, const char* key) {
  static const json null_value;
  auto it = doc.find(key);
  return it == doc.end() ? null_value : *it;
}

}  // namespace

PipelineConfig config_from_json(const json& doc) {
  PipelineConfig c;
  Section top(doc, "");
  top.text("run_name", c.run_name);
  if (c.run_name.empty() || c.run_name.find('/') != std::string::npos) {
    top.fail("run_name", "must be a non-empty name without '/'");
  }
  for (const char* key : {"dataset", "model", "train", "prune", "profile", "system", "sweep", "simulate"}) {
    top.get(key);
  }
  top.finish();

  Section ds(member(doc, "dataset"), "/dataset");
  ds.text("source", c.dataset.source);
  if (c.dataset.source != "synthetic" && c.dataset.source != "cifar10") {
    ds.fail("source", "expected \"synthetic\" or \"cifar10\"");
  }
  ds.text("cifar_dir", c.dataset.cifar_dir);
  ds.count("seed", c.dataset.synthetic.seed);
  ds.count("train_per_class", c.dataset.synthetic.n_per_class);
  ds.count("test_per_class", c.dataset.synthetic.test_per_class);
  ds.count("classes", c.dataset.synthetic.classes);
  std::vector<std::size_t> shape{c.dataset.synthetic.shape.channels, c.dataset.synthetic.shape.height,
                                 c.dataset.synthetic.shape.width};
  ds.counts("shape", shape);
  if (shape.size() != 3) ds.fail("shape", "expected [channels, height, width]");
  c.dataset.synthetic.shape = {shape[0], shape[1], shape[2]};
  ds.number("noise", c.dataset.synthetic.noise);
  if (c.dataset.synthetic.noise < 0.0) ds.fail("noise", "must be non-negative");
  ds.finish();

  Section md(member(doc, "model"), "/model");
  md.counts("widths", c.model.widths);
  md.counts("convs", c.model.convs);
  md.counts("hidden", c.model.hidden);
  md.count("seed", c.model.seed);
  if (c.model.widths.empty() || c.model.widths.size() != c.model.convs.size()) {
    md.fail("widths", "widths and convs must be non-empty and of equal length");
  }
  md.finish();

  Section tr(member(doc, "train"), "/train");
  tr.number("lr", c.train.learning_rate);
  tr.number("momentum", c.train.momentum);
  tr.count("batch_size", c.train.batch_size);
  tr.count("epochs", c.train.epochs);
  tr.count("seed", c.train.seed);
  if (!(c.train.learning_rate > 0.0)) tr.fail("lr", "must be positive");
  if (c.train.batch_size == 0) tr.fail("batch_size", "must be positive");
  tr.finish();

  Section pr(member(doc, "prune"), "/prune");
  pr.number("fraction", c.prune.fraction);
  pr.count("finetune_epochs", c.prune.finetune_epochs);
  pr.number("step1_budget", c.prune.step1_budget);
  pr.number("step2_budget", c.prune.step2_budget);
  pr.count("min_filters", c.prune.min_filters);
  pr.count("score_batches", c.prune.score_batches);
  pr.count("score_batch_size", c.prune.score_batch_size);
  pr.count("max_iterations", c.prune.max_iterations);
  pr.count("seed", c.prune.seed);
  if (!(c.prune.fraction > 0.0 && c.prune.fraction < 1.0)) pr.fail("fraction", "must lie in (0, 1)");
  if (c.prune.step1_budget < 0.0) pr.fail("step1_budget", "must be non-negative");
  if (c.prune.step2_budget < c.prune.step1_budget) {
    pr.fail("step2_budget", "must be at least step1_budget");
  }
  pr.finish();

  Section pf(member(doc, "profile"), "/profile");
  pf.parsed("method", [&](const std::string& s) { c.profile.method = parse_profile_method(s); });
  pf.count("warmup_runs", c.profile.timer.warmup_runs);
  pf.count("measured_runs", c.profile.timer.measured_runs);
  pf.number("flops_per_second", c.profile.flops_per_second);
  pf.flag("codec", c.profile.codec);
  pf.parsed("codec_id", [&](const std::string& s) { c.profile.codec_id = parse_codec(s); });
  pf.rate("codec_rate", c.profile.codec_bytes_per_second);
  if (!(c.profile.flops_per_second > 0.0)) pf.fail("flops_per_second", "must be positive");
  try {
    c.profile.timer.validate();
  } catch (const Error& e) {
    pf.fail("measured_runs", e.what());
  }
  pf.finish();

  Section sy(member(doc, "system"), "/system");
  sy.number("gamma", c.system.gamma);
  sy.rate("upload_rate", c.system.upload_rate);
  if (const json* v = sy.get("accuracy_floor"); v != nullptr && !v->is_null()) {
    if (!v->is_number()) sy.fail("accuracy_floor", "expected a number in [0, 1] or null");
    c.accuracy_floor = v->get<double>();
    if (*c.accuracy_floor < 0.0 || *c.accuracy_floor > 1.0) {
      sy.fail("accuracy_floor", "expected a number in [0, 1] or null");
    }
  }
  sy.parsed("policy", [&](const std::string& s) { c.system.policy = parse_policy(s); });
  sy.flag("codec", c.system.codec);
  sy.count("result_bytes", c.system.result_bytes);
  if (!(c.system.gamma > 0.0)) sy.fail("gamma", "must be positive");
  sy.finish();

  Section sw(member(doc, "sweep"), "/sweep");
  sw.rates("rates", c.sweep.rates);
  sw.numbers("gammas", c.sweep.gammas);
  sw.rates("table_rates", c.sweep.table_rates);
  sw.number("table_gamma", c.sweep.table_gamma);
  if (c.sweep.rates.empty()) sw.fail("rates", "must not be empty");
  if (c.sweep.gammas.empty()) sw.fail("gammas", "must not be empty");
  for (double g : c.sweep.gammas) {
    if (!(g > 0.0)) sw.fail("gammas", "every gamma must be positive");
  }
  if (!(c.sweep.table_gamma > 0.0)) sw.fail("table_gamma", "must be positive");
  sw.finish();

  Section sm(member(doc, "simulate"), "/simulate");
  sm.count("samples", c.simulate.samples);
  sm.number("jitter", c.simulate.jitter);
  sm.count("jitter_seed", c.simulate.jitter_seed);
  sm.count("overhead_bytes", c.simulate.overhead_bytes);
  sm.parsed("timing", [&](const std::string& s) {
    if (s == "analytic") c.simulate.timing = TimingMode::Analytic;
    else if (s == "wallclock") c.simulate.timing = TimingMode::WallClock;
    else throw ConfigError("expected \"analytic\" or \"wallclock\"");
  });
  if (c.simulate.samples == 0) sm.fail("samples", "must be positive");
  if (!(c.simulate.jitter >= 0.0 && c.simulate.jitter < 1.0)) sm.fail("jitter", "must lie in [0, 1)");
  sm.finish();
  return c;
}

json parse_config_text(const std::string& text) {
  try {
    return json::parse(text, nullptr, true, true);
  } catch (const json::parse_error& e) {
    std::size_t line = 1;
    std::size_t col = 1;
    const std::size_t end = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    for (std::size_t i = 0; i < end; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::string what = e.what();
    if (auto pos = what.find("syntax error"); pos != std::string::npos) what = what.substr(pos);
    throw ConfigError("config line " + std::to_string(line) + ", column " + std::to_string(col) +
                      ": " + what);
  }
}

json read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config_text(text.str());
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' must look like section.key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;
  }
  std::string pointer = "/" + key;
  for (auto& ch : pointer) {
    if (ch == '.') ch = '/';
  }
  if (!doc.is_object()) doc = json::object();
  try {
    doc[json::json_pointer(pointer)] = std::move(value);
  } catch (const json::exception& e) {
    throw ConfigError("override '" + assignment + "': " + e.what());
  }
}

std::string digest(const json& doc) {
  const std::string text = doc.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace edgeprune
