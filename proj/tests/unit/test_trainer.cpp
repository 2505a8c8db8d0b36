#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "dribble/parallel.hpp"
#include "dribble/train.hpp"
#include "test_util.hpp"

using namespace dribble;
using dribble::testing::read_file;
using dribble::testing::TempDir;
using dribble::testing::tiny_run_config;
using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

std::vector<Json> read_rows(const fs::path& p) {
  std::vector<Json> rows;
  std::ifstream in(p);
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) rows.push_back(Json::parse(line));
  return rows;
}

}  // namespace

TEST(Trainer, SmokeRunWritesArtifacts) {
  TempDir dir("train");
  RunConfig cfg = tiny_run_config(8, 16);
  cfg.train.stage1_updates = 20;
  cfg.train.stage2_updates = 30;
  cfg.train.checkpoint_every = 25;
  Trainer t(cfg, dir.str());
  EXPECT_EQ(t.run(), 50u);
  EXPECT_TRUE(t.finished());
  EXPECT_THROW(t.step(), ContractViolation);

  EXPECT_TRUE(fs::exists(dir.path() / "config.json"));
  EXPECT_EQ(run_config_from_json(Json::parse(read_file(dir.path() / "config.json"))).ppo.num_lanes, 8u);
  EXPECT_TRUE(fs::exists(checkpoint_path(dir.str(), 25)));
  EXPECT_TRUE(fs::exists(checkpoint_path(dir.str(), 50)));
  const auto rows = read_rows(dir.path() / "metrics.jsonl");
  ASSERT_EQ(rows.size(), 50u);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i]["update"], i + 1);
    EXPECT_TRUE(std::isfinite(rows[i]["policy_loss"].get<double>()));
    EXPECT_TRUE(rows[i]["reward_terms"].contains("ball_vel"));
  }
}

TEST(Trainer, DeterministicCheckpoints) {
  TempDir a("det_a"), b("det_b");
  RunConfig cfg = tiny_run_config(8, 16);
  cfg.train.stage1_updates = 3;
  cfg.train.stage2_updates = 5;
  cfg.train.checkpoint_every = 8;
  Trainer(cfg, a.str()).run();
  Trainer(cfg, b.str()).run();
  const std::string x = read_file(checkpoint_path(a.str(), 8)), y = read_file(checkpoint_path(b.str(), 8));
  ASSERT_FALSE(x.empty());
  EXPECT_EQ(x, y);
  cfg.seed = 2;
  TempDir c("det_c");
  Trainer(cfg, c.str()).run();
  EXPECT_NE(read_file(checkpoint_path(c.str(), 8)), x);
}

TEST(Trainer, CheckpointsIndependentOfThreadCount) {
  RunConfig cfg = tiny_run_config(8, 16);
  cfg.train.stage1_updates = 2;
  cfg.train.stage2_updates = 2;
  cfg.train.checkpoint_every = 4;
  const std::size_t saved = thread_count();
  std::vector<std::string> bytes;
  for (std::size_t threads : {1u, 3u}) {
    set_thread_count(threads);
    TempDir dir("threads");
    Trainer(cfg, dir.str()).run();
    bytes.push_back(read_file(checkpoint_path(dir.str(), 4)));
  }
  set_thread_count(saved);
  ASSERT_FALSE(bytes[0].empty());
  EXPECT_EQ(bytes[0], bytes[1]);
}

TEST(Trainer, ResumeMatchesUninterruptedRun) {
  RunConfig cfg = tiny_run_config(4, 16);
  cfg.train.stage1_updates = 4;
  cfg.train.stage2_updates = 6;
  Trainer straight(cfg, "");
  straight.run();

  TempDir dir("resume");
  Trainer first(cfg, dir.str());
  first.run(5);
  const Checkpoint mid = parse_checkpoint(serialize_checkpoint(first.checkpoint()));
  // A row written past the checkpoint must be dropped on resume.
  std::ofstream(dir.path() / "metrics.jsonl", std::ios::app) << R"({"update": 6})" << "\n";
  Trainer second(mid, dir.str());
  EXPECT_EQ(second.run(), 5u);
  EXPECT_EQ(serialize_checkpoint(second.checkpoint()), serialize_checkpoint(straight.checkpoint()));
  const auto rows = read_rows(dir.path() / "metrics.jsonl");
  ASSERT_EQ(rows.size(), 10u);
  for (std::size_t i = 0; i < rows.size(); ++i) EXPECT_EQ(rows[i]["update"], i + 1);
}

TEST(Trainer, StageSwitchAtPlannedUpdate) {
  RunConfig cfg = tiny_run_config(4, 16);
  Trainer t(cfg, "");
  std::vector<Json> rows;
  t.set_metrics_callback([&](const Json& r) { rows.push_back(r); });
  t.run();
  ASSERT_EQ(rows.size(), 10u);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const bool s2 = i >= cfg.train.stage1_updates;
    EXPECT_EQ(rows[i]["stage"], s2 ? 2 : 1) << i;
    EXPECT_EQ(rows[i]["stage_switched"], i == cfg.train.stage1_updates);
    EXPECT_EQ(rows[i]["weights"]["gait"].get<double>(), s2 ? 0.0 : cfg.env.stage1.weights.gait);
    EXPECT_EQ(rows[i]["weights"]["ball_vel"].get<double>(), s2 ? cfg.env.stage2.weights.ball_vel : 0.0);
    EXPECT_EQ(rows[i]["fov_scale"].get<double>(), s2 ? 1.0 : 2.0);
  }
  EXPECT_EQ(t.counters().stage_switch_update, cfg.train.stage1_updates);
}

TEST(Trainer, ControlFileAdvancesStage) {
  TempDir dir("ctl");
  RunConfig cfg = tiny_run_config(4, 16);
  cfg.train.stage1_updates = 100;
  cfg.train.stage2_updates = 100;
  Trainer t(cfg, dir.str());
  t.run(2);
  EXPECT_EQ(t.counters().stage_id, 1u);
  std::ofstream(dir.path() / cfg.train.control_file).put('\n');
  const Json row = t.step();
  EXPECT_EQ(row["stage"], 2);
  EXPECT_TRUE(row["stage_switched"].get<bool>());
  EXPECT_FALSE(fs::exists(dir.path() / cfg.train.control_file));
  EXPECT_EQ(t.counters().stage_switch_update, 2u);
}

TEST(Trainer, MetricTriggerSwitchesEarly) {
  RunConfig cfg = tiny_run_config(4, 16);
  cfg.train.stage1_updates = 100;
  cfg.train.stage2_updates = 10;
  cfg.train.trigger = StageTrigger::kMetric;
  cfg.train.metric_window = 2;
  cfg.train.metric_threshold = -1.0;  // always satisfied once the window fills
  Trainer t(cfg, "");
  t.run(3);
  EXPECT_EQ(t.counters().stage_id, 2u);
  EXPECT_EQ(t.counters().stage_switch_update, 2u);
}

TEST(Trainer, LanesAdoptStageAtReset) {
  RunConfig cfg = tiny_run_config(4, 16);
  cfg.train.stage1_updates = 1;
  Trainer t(cfg, "");
  t.run(2);  // switch at the start of update 2, no lane has finished an episode yet
  for (std::size_t l = 0; l < t.envs().size(); ++l) {
    EXPECT_EQ(t.envs()[l].pending_stage().stage_id, 2);
    EXPECT_EQ(t.envs()[l].stage().stage_id, 1);
  }
}
