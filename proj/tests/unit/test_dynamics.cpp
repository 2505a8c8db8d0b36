#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

#include "dribble/dynamics.hpp"

using namespace dribble;

namespace {

PhysicsParams nominal() { return PhysicsParams{}; }

WorldState resting_world() {
  WorldState w;
  w.ball.position = {5.0, 5.0};
  return w;
}

}  // namespace

TEST(BallRoll, DecaysByDecelTimesDt) {
  PhysicsParams p;
  p.rolling_decel = 1.0;  // decel * dt = 0.02
  const BallState b = ball_roll(BallState{{0, 0}, {1, 0}}, p, 0.02);
  EXPECT_NEAR(b.velocity.x, 0.98, 1e-15);
  EXPECT_EQ(b.velocity.y, 0.0);
  EXPECT_NEAR(b.position.x, 0.98 * 0.02, 1e-15);
}

TEST(BallRoll, RestStaysAtRest) {
  const BallState b = ball_roll(BallState{{1, 2}, {0, 0}}, nominal(), 0.02);
  EXPECT_EQ(b.velocity.x, 0.0);
  EXPECT_EQ(b.velocity.y, 0.0);
  EXPECT_EQ(b.position.x, 1.0);
  EXPECT_EQ(b.position.y, 2.0);
}

TEST(BallRoll, ClampsAtZeroWithoutReversal) {
  PhysicsParams p;
  p.rolling_decel = 1.0;
  const BallState b = ball_roll(BallState{{0, 0}, {0.01, 0}}, p, 0.02);
  EXPECT_EQ(b.velocity.x, 0.0);
  EXPECT_EQ(b.velocity.y, 0.0);
}

TEST(BallRoll, DirectionPreserved) {
  const BallState b = ball_roll(BallState{{0, 0}, {0.6, -0.8}}, nominal(), 0.02);
  EXPECT_NEAR(b.velocity.x / norm(b.velocity), 0.6, 1e-12);
  EXPECT_NEAR(b.velocity.y / norm(b.velocity), -0.8, 1e-12);
}

TEST(BallRoll, SpeedNonIncreasingOverRandomRollouts) {
  CounterRng rng(42);
  for (int trial = 0; trial < 10000; ++trial) {
    PhysicsParams p;
    p.rolling_decel = rng.uniform(0.1, 0.6);
    BallState b{{0, 0}, {rng.uniform(-3, 3), rng.uniform(-3, 3)}};
    double prev = norm(b.velocity);
    for (int s = 0; s < 20; ++s) {
      b = ball_roll(b, p, 0.02);
      const double sp = norm(b.velocity);
      ASSERT_LE(sp, prev);
      prev = sp;
    }
  }
}

TEST(StepDynamics, ZeroActionAtRestOnlyAdvancesGait) {
  const PhysicsConstants k;
  CounterRng noise(1);
  const WorldState w = resting_world();
  const WorldState n = step_dynamics(w, ActionVector{}, nominal(), k, 0.02, noise);
  EXPECT_EQ(n.robot.position.x, 0.0);
  EXPECT_EQ(n.robot.position.y, 0.0);
  EXPECT_EQ(n.robot.linear_velocity.x, 0.0);
  EXPECT_EQ(n.robot.yaw, 0.0);
  EXPECT_EQ(n.robot.head_pan, 0.0);
  EXPECT_EQ(n.robot.head_tilt, 0.0);
  EXPECT_EQ(n.ball.position.x, 5.0);
  EXPECT_EQ(n.ball.velocity.x, 0.0);
  EXPECT_NEAR(n.robot.gait_phase, k.gait_omega * 0.02, 1e-15);
}

TEST(StepDynamics, ForwardThrustClosedForm) {
  const PhysicsConstants k;  // accel_scale 2.0
  CounterRng noise(1);
  ActionVector a;
  a.fx() = 1.0;
  WorldState w = resting_world();
  w.robot.yaw = 0.7;
  const WorldState n = step_dynamics(w, a, nominal(), k, 0.02, noise);
  const Vec2 body_v = rotate(n.robot.linear_velocity, -n.robot.yaw);
  EXPECT_NEAR(body_v.x, 0.04, 1e-12);
  EXPECT_NEAR(body_v.y, 0.0, 1e-12);

  // Sustained thrust saturates at v_max.
  WorldState s = w;
  for (int i = 0; i < 2000; ++i) s = step_dynamics(s, a, nominal(), PhysicsConstants{.body_damping = 0.0}, 0.02, noise);
  EXPECT_NEAR(norm(s.robot.linear_velocity), k.v_max, 1e-12);
}

TEST(StepDynamics, BallFarAwayFollowsBallRoll) {
  const PhysicsConstants k;
  CounterRng noise(3);
  WorldState w;
  w.ball = BallState{{4.0, 1.0}, {0.7, -0.2}};
  ActionVector a;
  a.kick() = 1.0;
  for (int i = 0; i < 100; ++i) {
    const BallState expect = ball_roll(w.ball, nominal(), 0.02);
    w = step_dynamics(w, a, nominal(), k, 0.02, noise);
    ASSERT_EQ(w.ball.position.x, expect.position.x);
    ASSERT_EQ(w.ball.position.y, expect.position.y);
    ASSERT_EQ(w.ball.velocity.x, expect.velocity.x);
  }
}

TEST(StepDynamics, DeterministicForSameInputs) {
  const PhysicsConstants k;
  PhysicsParams p;
  p.roughness_sigma = 0.05;
  CounterRng rng(11);
  WorldState a = resting_world(), b = resting_world();
  a.ball.position = b.ball.position = {0.3, 0.1};
  CounterRng na(77), nb(77);
  for (int i = 0; i < 500; ++i) {
    ActionVector act;
    for (double& u : act.u) u = rng.uniform(-1, 1);
    a = step_dynamics(a, act, p, k, 0.02, na);
    b = step_dynamics(b, act, p, k, 0.02, nb);
    ASSERT_EQ(0, std::memcmp(&a.robot, &b.robot, sizeof(RobotState)));
    ASSERT_EQ(a.ball.position.x, b.ball.position.x);
    ASSERT_EQ(a.ball.velocity.y, b.ball.velocity.y);
  }
}

TEST(StepDynamics, HeadJointsStayClampedUnderExtremeActions) {
  const PhysicsConstants k;
  CounterRng rng(5), noise(6);
  PhysicsParams p;
  p.head_rate_gain = 1.3;
  p.action_scale = 1.05;
  WorldState w = resting_world();
  for (int i = 0; i < 20000; ++i) {
    ActionVector a;
    for (double& u : a.u) u = rng.uniform01() < 0.5 ? rng.uniform(-50, 50) : (rng.uniform01() < 0.5 ? -1.0 : 1.0);
    w = step_dynamics(w, a, p, k, 0.02, noise);
    ASSERT_GE(w.robot.head_pan, -1.57);
    ASSERT_LE(w.robot.head_pan, 1.57);
    ASSERT_GE(w.robot.head_tilt, -0.8);
    ASSERT_LE(w.robot.head_tilt, 0.4);
    ASSERT_GE(w.robot.gait_phase, 0.0);
    ASSERT_LT(w.robot.gait_phase, kTwoPi);
  }
}

TEST(StepDynamics, NonFiniteInputFaults) {
  const PhysicsConstants k;
  CounterRng noise(1);
  WorldState w = resting_world();
  w.ball.velocity.x = std::nan("");
  EXPECT_THROW(step_dynamics(w, ActionVector{}, nominal(), k, 0.02, noise), SimulationFault);
  ActionVector a;
  a.fx() = std::nan("");
  EXPECT_THROW(step_dynamics(resting_world(), a, nominal(), k, 0.02, noise), SimulationFault);
}

TEST(FootContact, NoImpulseWhenFar) {
  const PhysicsConstants k;
  RobotState r;
  EXPECT_FALSE(foot_ball_contact(r, BallState{{2.0, 0.0}, {}}, nominal(), k, 1.0));
}

TEST(FootContact, FullKickMagnitudeAtFoot) {
  const PhysicsConstants k;
  RobotState r;
  r.gait_phase = 0.1;
  const Vec2 foot = active_foot_point(r, k);
  // Just ahead of the foot so the direction is defined.
  const auto kick = foot_ball_contact(r, BallState{foot + Vec2{0.05, 0.0}, {}}, nominal(), k, 1.0);
  ASSERT_TRUE(kick);
  EXPECT_NEAR(norm(kick->delta_v), k.k0 + k.k1, 1e-12);
  EXPECT_NEAR(kick->delta_v.y, 0.0, 1e-12);
  EXPECT_TRUE(kick->left_foot);
}

TEST(FootContact, KickMagnitudeFormula) {
  const PhysicsConstants k;
  RobotState r;
  r.gait_phase = kPi + 0.2;  // right foot active
  PhysicsParams p;
  p.kick_gain = 0.97;
  const Vec2 foot = active_foot_point(r, k);
  EXPECT_NEAR(foot.y, -k.d_foot, 1e-12);
  for (double u : {-1.0, -0.3, 0.0, 0.5, 1.0}) {
    const auto kick = foot_ball_contact(r, BallState{foot + Vec2{0.1, 0.05}, {}}, p, k, u);
    ASSERT_TRUE(kick);
    EXPECT_NEAR(norm(kick->delta_v), 0.97 * (k.k0 + k.k1 * (u + 1.0) / 2.0), 1e-12);
    EXPECT_FALSE(kick->left_foot);
  }
}

TEST(FootContact, NoImpulseMidSwing) {
  const PhysicsConstants k;
  RobotState r;
  r.gait_phase = 0.6 * kPi;
  const Vec2 foot = active_foot_point(r, k);
  EXPECT_FALSE(foot_ball_contact(r, BallState{foot, {}}, nominal(), k, 1.0));
}

TEST(FootContact, ContactWindowBounds) {
  const PhysicsConstants k;
  EXPECT_TRUE(in_contact_window(0.0, k));
  EXPECT_TRUE(in_contact_window(0.3 * kPi - 1e-9, k));
  EXPECT_FALSE(in_contact_window(0.3 * kPi + 1e-6, k));
  EXPECT_TRUE(in_contact_window(kPi, k));
  EXPECT_TRUE(in_contact_window(1.3 * kPi - 1e-9, k));
  EXPECT_FALSE(in_contact_window(1.5 * kPi, k));
}

TEST(FootContact, ImpulseBoundedByDvMaxUnderFuzz) {
  const PhysicsConstants k;
  CounterRng rng(9);
  for (int i = 0; i < 100000; ++i) {
    RobotState r;
    r.position = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
    r.yaw = rng.uniform(-kPi, kPi);
    r.gait_phase = rng.uniform(0, kTwoPi);
    PhysicsParams p;
    p.kick_gain = rng.uniform(0.0, 3.0);
    p.com_offset = {rng.uniform(-0.04, 0.04), rng.uniform(-0.04, 0.04)};
    const BallState b{r.position + Vec2{rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4)}, {rng.uniform(-2, 2), 0}};
    const double u = rng.uniform(-10, 10);
    if (auto kick = foot_ball_contact(r, b, p, k, u)) {
      ASSERT_LE(norm(kick->delta_v), k.dv_max + 1e-12);
      // Energy proxy: one kick adds at most dv_max of speed.
      ASSERT_LE(norm(b.velocity + kick->delta_v), norm(b.velocity) + k.dv_max + 1e-12);
    }
  }
}

TEST(FootContact, OneImpulsePerContactWindow) {
  const PhysicsConstants k;
  CounterRng noise(1);
  WorldState w;
  w.robot.gait_phase = 0.0;
  // Ball parked on the left foot; zero rolling so it stays in reach if not kicked hard.
  PhysicsParams p;
  p.rolling_decel = 0.0;
  p.kick_gain = 0.0;  // zero-magnitude kicks keep the ball in place so the latch is what limits them
  w.ball.position = active_foot_point(w.robot, k) + Vec2{0.02, 0.0};
  int kicks = 0;
  // 12 steps cover the first contact window (5 steps) and part of the swing, not the next window.
  for (int i = 0; i < 12; ++i) {
    const WorldState n = step_dynamics(w, ActionVector{}, p, k, 0.02, noise);
    if (n.contact_latched && !w.contact_latched) ++kicks;
    w = n;
  }
  EXPECT_EQ(kicks, 1);
}

TEST(BodyPushback, EjectsPenetratingBall) {
  const PhysicsConstants k;
  RobotState r;
  PhysicsParams p;
  p.restitution = 0.5;
  const BallState b = body_pushback(r, BallState{{0.1, 0.0}, {-1.0, 0.0}}, p, k);
  EXPECT_NEAR(b.position.x, k.body_radius, 1e-12);
  EXPECT_NEAR(b.velocity.x, 0.5, 1e-12);
}
