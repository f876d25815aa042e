#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "edgeprune/config.hpp"
#include "edgeprune/error.hpp"
#include "edgeprune/pipeline.hpp"
#include "oracle.hpp"

using namespace edgeprune;
namespace fs = std::filesystem;

namespace {

nlohmann::json tiny_config() {
  nlohmann::json doc = config_to_json(PipelineConfig{});
  for (const char* o : {"run_name=tiny", "dataset.classes=4", "dataset.train_per_class=24",
                        "dataset.test_per_class=12", "dataset.shape=[3,8,8]", "model.widths=[4,8]",
                        "model.convs=[1,1]", "train.epochs=2", "prune.finetune_epochs=0",
                        "prune.max_iterations=2", "prune.score_batches=1", "prune.fraction=0.25",
                        "system.accuracy_floor=0.0", "sweep.rates=[\"1Mbps\",\"10Mbps\"]",
                        "sweep.gammas=[1,5]", "simulate.samples=3"}) {
    apply_override(doc, o);
  }
  return doc;
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream body;
    body << in.rdbuf();
    files[fs::relative(e.path(), dir).string()] = body.str();
  }
  return files;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + EDGEPRUNE_CLI_PATH + "\" -q " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Pipeline, StageOrderIsEnforced) {
  oracle::TempDir dir;
  Pipeline p(config_from_json(tiny_config()), dir.path() / "run");
  try {
    p.run(Stage::Plan);
    FAIL() << "expected PrerequisiteError";
  } catch (const PrerequisiteError& e) {
    EXPECT_EQ(e.missing_stage(), "profile");
    EXPECT_NE(std::string(e.what()).find("profile"), std::string::npos);
  }
  EXPECT_EQ(parse_stage("simulate"), Stage::Simulate);
  EXPECT_THROW(parse_stage("deploy"), ConfigError);
}

TEST(Pipeline, IdempotentAndIncremental) {
  oracle::TempDir dir;
  const fs::path run = dir.path() / "run";
  const nlohmann::json doc = tiny_config();
  {
    Pipeline p(config_from_json(doc), run);
    p.run_through(Stage::Report);
    for (Stage s : all_stages()) EXPECT_TRUE(p.completed(s)) << to_string(s);
  }
  for (const char* f : {"manifest.json", "plan/plan.json", "sweep/sweep_grid.csv",
                        "simulate/traces.csv", "simulate/summary.json", "report/report.md"}) {
    EXPECT_TRUE(fs::exists(run / f)) << f;
  }
  const auto before = snapshot(run);
  {
    Pipeline p(config_from_json(doc), run);
    for (Stage s : all_stages()) EXPECT_EQ(p.run(s), Pipeline::Outcome::UpToDate) << to_string(s);
  }
  EXPECT_EQ(snapshot(run), before);

  nlohmann::json changed = doc;
  apply_override(changed, "system.gamma=9");
  Pipeline p(config_from_json(changed), run);
  EXPECT_TRUE(p.completed(Stage::Profile));
  EXPECT_FALSE(p.completed(Stage::Plan));
  EXPECT_EQ(p.run(Stage::Profile), Pipeline::Outcome::UpToDate);
  EXPECT_THROW(p.run(Stage::Simulate), PrerequisiteError);
  EXPECT_EQ(p.run(Stage::Plan), Pipeline::Outcome::Ran);
  EXPECT_EQ(snapshot(run).at("catalog/catalog.json"), before.at("catalog/catalog.json"));
}

TEST(Pipeline, CliExitCodes) {
  oracle::TempDir dir;
  const std::string out = "-o \"" + dir.path().string() + "\"";
  EXPECT_EQ(run_cli(out + " plan"), 3);
  const fs::path bad = dir.path() / "bad.json";
  std::ofstream(bad) << "{\"system\": {\"upload_rate\": 5}}";
  EXPECT_EQ(run_cli(out + " -c \"" + bad.string() + "\" plan"), 2);
  EXPECT_EQ(run_cli(out + " --rate 3 config"), 2);
  EXPECT_EQ(run_cli(out + " config"), 0);
}
