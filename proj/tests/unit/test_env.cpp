#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

#include "dribble/env.hpp"
#include "dribble/eval.hpp"

using namespace dribble;

namespace {

ActionVector random_action(CounterRng& rng) {
  ActionVector a;
  for (double& u : a.u) u = rng.uniform(-1, 1);
  return a;
}

double episode_return(Env& env, Controller* ctrl, CounterRng& rng, int steps) {
  double ret = 0;
  for (int i = 0; i < steps && !env.status().done; ++i) {
    const ActionVector a = ctrl ? ctrl->act(env, env.observation()) : random_action(rng);
    ret += env.step(a).reward.total;
  }
  return ret;
}

}  // namespace

TEST(Env, SpawnDistanceFollowsStage) {
  EnvConfig cfg;
  Env env(cfg, 1, 0);
  for (int i = 0; i < 200; ++i) {
    env.reset();
    const double d = norm(env.world().ball.position - env.world().robot.position);
    ASSERT_GE(d, 8.0);
    ASSERT_LE(d, 12.0);
  }
  env.set_stage(cfg.stage2);
  for (int i = 0; i < 200; ++i) {
    env.reset();
    const double d = norm(env.world().ball.position - env.world().robot.position);
    ASSERT_GE(d, 0.5);
    ASSERT_LE(d, 2.0);
  }
}

TEST(Env, StageTakesEffectAtNextReset) {
  EnvConfig cfg;
  Env env(cfg, 1, 0);
  env.reset();
  env.set_stage(cfg.stage2);
  EXPECT_EQ(env.stage().stage_id, 1);
  EXPECT_EQ(env.camera().fov_scale, cfg.stage1.fov_scale);
  env.reset();
  EXPECT_EQ(env.stage().stage_id, 2);
  EXPECT_EQ(env.camera().fov_scale, 1.0);
  // Stage 2 zeroes the gait term entirely.
  CounterRng rng(1);
  for (int i = 0; i < 50 && !env.status().done; ++i) {
    const auto r = env.step(random_action(rng));
    ASSERT_EQ(r.reward.terms[RewardTerm::kGait], 0.0);
    ASSERT_EQ(r.reward.weighted[static_cast<std::size_t>(RewardTerm::kGait)], 0.0);
  }
}

TEST(Env, CommandResamplesOnSchedule) {
  EnvConfig cfg;
  cfg.command.zero_probability = 0.0;
  Env env(cfg, 3, 0);
  env.reset_scenario(scenario_world({0, 0}, 0, {1, 0}), Command{{1.0, 0.0}},
                     ScenarioOptions{true, false, false});
  int changes = 0;
  Vec2 prev = env.command().v_cmd;
  for (int step = 1; step <= 200; ++step) {
    env.step(ActionVector{});
    const Vec2 now = env.command().v_cmd;
    if (!(now == prev)) {
      ++changes;
      EXPECT_EQ(step, 200);
    }
    prev = now;
  }
  EXPECT_EQ(changes, 1);
  const double speed = norm(prev);
  EXPECT_GE(speed, cfg.command.speed_min - 1e-12);
  EXPECT_LE(speed, cfg.command.speed_max + 1e-12);
}

TEST(Env, SampledCommandsRespectBounds) {
  CommandConfig cfg;
  CounterRng rng(11);
  int zeros = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const Command c = sample_command(cfg, rng);
    const double s = norm(c.v_cmd);
    if (s == 0.0) {
      ++zeros;
      continue;
    }
    ASSERT_GE(s, cfg.speed_min - 1e-12);
    ASSERT_LE(s, cfg.speed_max + 1e-12);
  }
  EXPECT_NEAR(static_cast<double>(zeros) / n, cfg.zero_probability, 0.01);
}

TEST(Env, BallLostTerminates) {
  EnvConfig cfg;
  Env env(cfg, 1, 0);
  env.reset_scenario(scenario_world({0, 0}, 0, {15.05, 0}), Command{}, ScenarioOptions{false, true, false});
  const auto r = env.step(ActionVector{});
  EXPECT_TRUE(r.status.done);
  EXPECT_EQ(r.status.reason, TerminationReason::kBallLost);
  EXPECT_THROW(env.step(ActionVector{}), ContractViolation);
}

TEST(Env, OutOfBoundsTerminates) {
  EnvConfig cfg;
  Env env(cfg, 1, 0);
  env.reset_scenario(scenario_world({19.0, 0}, 0, {20.5, 0}), Command{}, ScenarioOptions{false, true, false});
  EXPECT_EQ(env.step(ActionVector{}).status.reason, TerminationReason::kOutOfBounds);
}

TEST(Env, TimeoutAfterTmax) {
  EnvConfig cfg;
  cfg.t_max = 2.0;
  Env env(cfg, 1, 0);
  env.reset_scenario(scenario_world({0, 0}, 0, {1, 0}), Command{}, ScenarioOptions{false, true, false});
  int steps = 0;
  while (!env.status().done) {
    env.step(ActionVector{});
    ++steps;
  }
  EXPECT_EQ(steps, 100);
  EXPECT_EQ(env.status().reason, TerminationReason::kTimeout);
}

TEST(Observation, BodyFrameRotation) {
  WorldState w;
  w.robot.yaw = kPi / 2;
  w.robot.linear_velocity = {1.0, 0.0};
  const Observation o = build_observation(w, BallObservation{}, Command{}, ActionVector{});
  EXPECT_NEAR(o[2], 0.0, 1e-12);
  EXPECT_NEAR(o[3], -1.0, 1e-12);
  EXPECT_NEAR(o[5], 1.0, 1e-12);
  EXPECT_NEAR(o[6], 0.0, 1e-12);
}

TEST(Observation, ClockChannelsCancel) {
  CounterRng rng(2);
  for (int i = 0; i < 1000; ++i) {
    WorldState w;
    w.robot.gait_phase = rng.uniform(0, kTwoPi);
    const Observation o = build_observation(w, BallObservation{}, Command{}, ActionVector{});
    ASSERT_EQ(o[15] + o[16], 0.0);
    ASSERT_NEAR(o[15], std::sin(w.robot.gait_phase), 1e-15);
  }
}

TEST(Observation, PrivilegedPrefixIsObservation) {
  EnvConfig cfg;
  Env env(cfg, 4, 2);
  env.reset();
  CounterRng rng(4);
  for (int i = 0; i < 100 && !env.status().done; ++i) {
    const auto r = env.step(random_action(rng));
    ASSERT_EQ(std::memcmp(r.obs.data(), r.priv.data(), sizeof(double) * kObsDim), 0);
    ASSERT_EQ(r.priv[kObsDim + 4], env.episode_params().physics.terrain_friction);
  }
}

TEST(Observation, LayoutDescriptor) {
  EXPECT_EQ(observation_layout().size(), kPrivDim);
  const std::string d = observation_layout_descriptor();
  EXPECT_EQ(d.rfind("v1:v_cmd_x,", 0), 0u);
  EXPECT_NE(d.find("prev_u_kick|true_ball_rel_x"), std::string::npos);
}

TEST(Env, DeterministicGivenSeedAndLane) {
  EnvConfig cfg;
  Env a(cfg, 42, 3), b(cfg, 42, 3), c(cfg, 42, 4);
  a.reset();
  b.reset();
  c.reset();
  CounterRng ra(9), rb(9);
  for (int i = 0; i < 500; ++i) {
    const auto x = a.step(random_action(ra));
    const auto y = b.step(random_action(rb));
    ASSERT_EQ(std::memcmp(x.priv.data(), y.priv.data(), sizeof(double) * kPrivDim), 0);
    ASSERT_EQ(x.reward.total, y.reward.total);
    if (x.status.done) {
      a.reset();
      b.reset();
    }
  }
  EXPECT_NE(a.world().ball.position.x, c.world().ball.position.x);
}

TEST(Env, SnapshotRestoreContinuesIdentically) {
  EnvConfig cfg;
  Env a(cfg, 5, 0);
  a.reset();
  CounterRng rng(1);
  for (int i = 0; i < 37; ++i) a.step(random_action(rng));
  const Env::Snapshot s = a.snapshot();
  Env b(cfg, 5, 0);
  b.restore(s);
  CounterRng r1(77), r2(77);
  for (int i = 0; i < 100 && !a.status().done; ++i) {
    const auto x = a.step(random_action(r1));
    const auto y = b.step(random_action(r2));
    ASSERT_EQ(std::memcmp(x.priv.data(), y.priv.data(), sizeof(double) * kPrivDim), 0);
  }
}

TEST(Env, ChaserBeatsRandomPolicy) {
  EnvConfig cfg;
  int wins = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Env e1(cfg, seed, 0), e2(cfg, seed, 0);
    e1.reset();
    e2.reset();
    ScriptedDribbler chaser;
    CounterRng rng(seed);
    const double rc = episode_return(e1, &chaser, rng, 400);
    const double rr = episode_return(e2, nullptr, rng, 400);
    wins += rc > rr;
  }
  EXPECT_GE(wins, 45);
}

TEST(EnvConfig, ValidationRejectsNonsense) {
  EnvConfig cfg;
  cfg.dt = 0;
  EXPECT_THROW(Env(cfg, 1, 0), ConfigError);
  cfg = EnvConfig{};
  cfg.command.speed_max = 3.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = EnvConfig{};
  cfg.stage2.stage_id = 3;
  EXPECT_THROW(cfg.validate(), ConfigError);
}
