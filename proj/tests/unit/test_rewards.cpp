#include <gtest/gtest.h>

#include <cmath>

#include "dribble/rewards.hpp"

using namespace dribble;

TEST(BallVelocityReward, KernelValues) {
  EXPECT_DOUBLE_EQ(r_ball_velocity({1.0, 0.0}, {1.0, 0.0}, 0.5), 1.0);
  EXPECT_NEAR(r_ball_velocity({0.5, 0.0}, {1.0, 0.0}, 0.5), std::exp(-1.0), 1e-12);
  EXPECT_NEAR(r_ball_velocity({0.0, 0.0}, {1.0, 0.0}, 0.5), std::exp(-4.0), 1e-12);
  EXPECT_NEAR(r_ball_velocity({1.0, 0.5}, {1.0, 0.0}, 0.5), std::exp(-1.0), 1e-12);
}

TEST(BallVelocityReward, ProjectedIgnoresLateralError) {
  EXPECT_DOUBLE_EQ(r_ball_velocity_projected({1.0, 0.7}, {1.0, 0.0}, 0.5), 1.0);
  EXPECT_NEAR(r_ball_velocity_projected({0.5, 0.7}, {1.0, 0.0}, 0.5), std::exp(-1.0), 1e-12);
  // Zero command falls back to the full 2D kernel.
  EXPECT_NEAR(r_ball_velocity_projected({0.5, 0.0}, {0.0, 0.0}, 0.5), std::exp(-1.0), 1e-12);
}

TEST(BallVelocityReward, BoundedAndPeaksAtCommand) {
  CounterRng rng(3);
  for (int i = 0; i < 10000; ++i) {
    const Vec2 cmd{rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const Vec2 v{rng.uniform(-3, 3), rng.uniform(-3, 3)};
    const double r = r_ball_velocity(v, cmd, 0.5);
    ASSERT_GE(r, 0.0);
    ASSERT_LE(r, 1.0);
    ASSERT_LE(r, r_ball_velocity(cmd, cmd, 0.5));
  }
}

TEST(ChaseReward, ExponentialInDistance) {
  EXPECT_DOUBLE_EQ(r_chase({0, 0}, {0, 0}, 2.0), 1.0);
  EXPECT_NEAR(r_chase({0, 0}, {3, 4}, 2.0), std::exp(-2.5), 1e-12);
}

TEST(InViewReward, Indicator) {
  BallObservation o;
  o.visible = true;
  EXPECT_EQ(r_in_view(o), 1.0);
  o.visible = false;
  EXPECT_EQ(r_in_view(o), 0.0);
}

TEST(GaitReward, InPhaseBeatsAntiPhase) {
  RewardParams p;
  double in_phase = 0, anti = 0;
  const int n = 360;
  for (int i = 0; i < n; ++i) {
    const double phase = kTwoPi * i / n;
    ActionVector a, b;
    a.fx() = 0.2 + p.gait_amplitude * std::sin(phase);
    b.fx() = 0.2 - p.gait_amplitude * std::sin(phase);
    in_phase += r_gait(phase, 1.0, a, p, 0.2);
    anti += r_gait(phase, 1.0, b, p, 0.2);
  }
  in_phase /= n;
  anti /= n;
  EXPECT_GE(in_phase, 0.9);
  EXPECT_LT(anti, in_phase - 0.2);
}

TEST(GaitReward, GatedAtStandstill) {
  RewardParams p;
  ActionVector a;
  // With no body speed the reference is zero, so a constant action at the baseline is ideal.
  for (double phase = 0; phase < kTwoPi; phase += 0.3) EXPECT_DOUBLE_EQ(r_gait(phase, 0.0, a, p, 0.0), 1.0);
}

TEST(ActionRate, SquaredDifference) {
  ActionVector a, b;
  a.u = {1, 0, 0, 0, 0, 0};
  b.u = {0, 0, 0.5, 0, 0, 0};
  EXPECT_DOUBLE_EQ(r_action_rate(a, b), -1.25);
  EXPECT_DOUBLE_EQ(r_action_rate(a, a), 0.0);
}

TEST(UprightProxy, PenalizesLateralThrust) {
  ActionVector a;
  a.fy() = -0.4;
  EXPECT_DOUBLE_EQ(r_upright_proxy(a), -0.4);
  a.fy() = 3.0;
  EXPECT_DOUBLE_EQ(r_upright_proxy(a), -1.0);
}

TEST(TotalReward, LinearInWeights) {
  CounterRng rng(17);
  for (int trial = 0; trial < 1000; ++trial) {
    RewardTerms t;
    for (double& v : t.values) v = rng.uniform(-1, 1);
    RewardWeights w1{rng.uniform(0, 2), rng.uniform(0, 2), rng.uniform(0, 2), rng.uniform(0, 2),
                     rng.uniform(0, 2), rng.uniform(0, 2), rng.uniform(0, 2)};
    RewardWeights w2{rng.uniform(0, 2), rng.uniform(0, 2), rng.uniform(0, 2), rng.uniform(0, 2),
                     rng.uniform(0, 2), rng.uniform(0, 2), rng.uniform(0, 2)};
    const double a = rng.uniform(-2, 2), b = rng.uniform(-2, 2);
    const auto a1 = w1.as_array(), a2 = w2.as_array();
    RewardWeights mix{a * a1[0] + b * a2[0], a * a1[1] + b * a2[1], a * a1[2] + b * a2[2], a * a1[3] + b * a2[3],
                      a * a1[4] + b * a2[4], a * a1[5] + b * a2[5], a * a1[6] + b * a2[6]};
    const double lhs = total_reward(mix, t).total;
    const double rhs = a * total_reward(w1, t).total + b * total_reward(w2, t).total;
    ASSERT_NEAR(lhs, rhs, 1e-12);
    const auto br = total_reward(w1, t);
    double sum = 0;
    for (double x : br.weighted) sum += x;
    ASSERT_NEAR(sum, br.total, 1e-12);
  }
}

TEST(StageWeights, CurriculumShape) {
  const RewardWeights s1 = stage1_default_weights(), s2 = stage2_default_weights();
  EXPECT_EQ(s1.ball_vel, 0.0);
  EXPECT_GT(s1.gait, 0.0);
  EXPECT_EQ(s2.gait, 0.0);
  EXPECT_GT(s2.ball_vel, 0.0);
  EXPECT_EQ(reward_term_name(RewardTerm::kBallVelocity), "ball_vel");
  EXPECT_EQ(reward_term_name(RewardTerm::kAlive), "alive");
}
