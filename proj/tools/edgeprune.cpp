// edgeprune: offline training and pruning, partition planning, and simulated
// deployment of a small CNN split between a device and an edge server.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "edgeprune/config.hpp"
#include "edgeprune/error.hpp"
#include "edgeprune/pipeline.hpp"
#include "edgeprune/version.hpp"

namespace fs = std::filesystem;
using namespace edgeprune;

namespace {

enum Exit { kOk = 0, kFailure = 1, kConfig = 2, kPrerequisite = 3, kInfeasible = 4 };

struct Options {
  std::string config_file;
  std::string out_root;
  std::vector<std::string> overrides;
  std::string rate;
  double gamma = 0.0;
  double floor = -1.0;
  bool quiet = false;
};

nlohmann::json resolve_config(const Options& o) {
  nlohmann::json doc = o.config_file.empty() ? nlohmann::json::object() : read_config_file(o.config_file);
  for (const auto& s : o.overrides) apply_override(doc, s);
  if (!o.rate.empty()) doc["system"]["upload_rate"] = o.rate;
  if (o.gamma > 0.0) doc["system"]["gamma"] = o.gamma;
  if (o.floor >= 0.0) doc["system"]["accuracy_floor"] = o.floor;
  return doc;
}

fs::path output_root(const Options& o) {
  if (!o.out_root.empty()) return o.out_root;
  if (const char* env = std::getenv("EDGEPRUNE_OUT"); env != nullptr && *env != '\0') return env;
  return "runs";
}

int run_stages(const Options& o, const std::vector<Stage>& stages) {
  const PipelineConfig cfg = config_from_json(resolve_config(o));
  Pipeline pipeline(cfg, output_root(o) / cfg.run_name, o.quiet ? nullptr : &std::cerr);
  for (Stage s : stages) pipeline.run(s);
  std::cout << pipeline.run_dir().string() << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-step pruning and partition planning for device-edge CNN inference"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  app.fallthrough();

  Options o;
  app.add_option("-c,--config", o.config_file, "JSON config file (defaults apply when omitted)")
      ->check(CLI::ExistingFile);
  app.add_option("-o,--out", o.out_root,
                 "Output root; the run lives in <root>/<run_name> (env EDGEPRUNE_OUT, default ./runs)");
  app.add_option("-s,--set", o.overrides, "Override a config field, e.g. --set system.gamma=10");
  app.add_option("--rate", o.rate, "Upload rate with unit, e.g. 5.85Mbps or 137.5kB/s");
  app.add_option("--gamma", o.gamma, "Device/server latency ratio")->check(CLI::PositiveNumber);
  app.add_option("--floor", o.floor, "Accuracy floor A in [0, 1]; plans need accuracy > A")
      ->check(CLI::Range(0.0, 1.0));
  app.add_flag("-q,--quiet", o.quiet, "Suppress progress lines on stderr");

  struct Command {
    const char* name;
    const char* help;
    std::vector<Stage> stages;
  };
  const std::vector<Command> commands = {
      {"train", "Train the baseline model and create the catalog", {Stage::Train}},
      {"prune1", "Global-range pruning for compute reduction", {Stage::Prune1}},
      {"prune2", "Per-layer pruning families for transmission reduction", {Stage::Prune2}},
      {"profile", "Per-layer latency, output size and codec measurements", {Stage::Profile}},
      {"plan", "Select the model and partition point", {Stage::Plan}},
      {"sweep", "Plans over the rate and gamma grid, plus the typical-uplink table", {Stage::Sweep}},
      {"simulate", "Run the selected plan through the deployment simulator", {Stage::Simulate}},
      {"report", "Render all report tables as CSV and markdown", {Stage::Report}},
      {"all", "Run every stage in order, skipping completed ones", all_stages()},
  };
  std::vector<Stage> selected;
  for (const auto& c : commands) {
    app.add_subcommand(c.name, c.help)->callback([&selected, &c] { selected = c.stages; });
  }
  bool print_config = false;
  app.add_subcommand("config", "Print the resolved configuration as JSON")
      ->callback([&print_config] { print_config = true; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (print_config) {
      std::cout << config_to_json(config_from_json(resolve_config(o))).dump(2) << "\n";
      return kOk;
    }
    return run_stages(o, selected);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const PrerequisiteError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kPrerequisite;
  } catch (const InfeasiblePlan& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return kInfeasible;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
}
