#pragma once

#include <array>
#include <cstddef>
#include <optional>

#include "dribble/common.hpp"
#include "dribble/rng.hpp"

namespace dribble {

inline constexpr double kHeadPanMin = -1.57;
inline constexpr double kHeadPanMax = 1.57;
inline constexpr double kHeadTiltMin = -0.8;
inline constexpr double kHeadTiltMax = 0.4;

struct RobotState {
  Vec2 position;
  double yaw = 0.0;
  Vec2 linear_velocity;  // world frame
  double yaw_rate = 0.0;
  double head_pan = 0.0;
  double head_tilt = 0.0;  // positive tilts the camera up
  double head_pan_rate = 0.0;
  double head_tilt_rate = 0.0;
  double gait_phase = 0.0;  // [0, 2pi)
};

struct BallState {
  Vec2 position;
  Vec2 velocity;
};

struct WorldState {
  RobotState robot;
  BallState ball;
  double t = 0.0;
  /// Set once a kick fires inside a contact window, cleared when the window ends,
  /// so each foot strike transfers at most one impulse.
  bool contact_latched = false;
  Vec2 last_kick;  // most recent kick impulse (world frame), zero if none yet
};

/// Per-episode physical parameters (the randomized quantities).
struct PhysicsParams {
  double terrain_friction = 1.0;
  double rolling_decel = 0.35;  // m/s^2
  double robot_accel_gain = 1.0;
  double head_rate_gain = 1.0;
  double kick_gain = 1.0;
  double mass_offset = 0.0;  // relative drag factor, analog of base-mass change
  Vec2 com_offset;           // body-frame bias on kick direction (m)
  double roughness_sigma = 0.0;
  double restitution = 0.5;
  double action_scale = 1.0;
};

/// Fixed model constants; every value is configurable.
struct PhysicsConstants {
  double accel_scale = 2.0;       // m/s^2 per unit u_fx/u_fy
  double body_damping = 1.0;      // 1/s linear velocity damping
  double v_max = 2.0;             // m/s
  double yaw_rate_max = 2.0;      // rad/s
  double head_rate_max = 3.0;     // rad/s
  double gait_omega = kTwoPi * 1.5;
  double k0 = 0.3;                // m/s
  double k1 = 1.2;                // m/s
  double dv_max = 2.0;            // m/s
  double r_reach = 0.25;          // m
  double d_foot = 0.12;           // m, lateral foot offset
  double l_foot = 0.10;           // m, forward foot offset
  double body_radius = 0.2;       // m
  double rolling_decel_per_friction = 0.35;
  double robot_jitter_ratio = 0.05;  // robot velocity jitter sigma = ratio * roughness_sigma (m/s)
  double contact_window = 0.3 * kPi;  // contact window length after each half-cycle start
};

inline constexpr std::size_t kActionDim = 6;

/// Normalized action channels. Every component is clamped to [-1, 1] before scaling.
struct ActionVector {
  std::array<double, kActionDim> u{};

  double& fx() { return u[0]; }
  double& fy() { return u[1]; }
  double& yaw() { return u[2]; }
  double& pan() { return u[3]; }
  double& tilt() { return u[4]; }
  double& kick() { return u[5]; }
  double fx() const { return u[0]; }
  double fy() const { return u[1]; }
  double yaw() const { return u[2]; }
  double pan() const { return u[3]; }
  double tilt() const { return u[4]; }
  double kick() const { return u[5]; }

  ActionVector clamped() const;
  friend bool operator==(const ActionVector&, const ActionVector&) = default;
};

struct KickImpulse {
  Vec2 delta_v;  // world frame
  bool left_foot = true;
};

/// World position of the foot that is active at this gait phase.
Vec2 active_foot_point(const RobotState& robot, const PhysicsConstants& k);

/// True iff the gait phase lies in [0, w] or [pi, pi + w].
bool in_contact_window(double gait_phase, const PhysicsConstants& k);

/// Rolls the ball for one step: speed drops by rolling_decel*dt, never reversing.
BallState ball_roll(const BallState& ball, const PhysicsParams& params, double dt);

/// Impulse delivered by the active foot, if the ball is in reach during a contact window.
std::optional<KickImpulse> foot_ball_contact(const RobotState& robot, const BallState& ball,
                                             const PhysicsParams& params, const PhysicsConstants& k,
                                             double u_kick);

/// Pushes a ball that penetrated the body circle back to its surface.
BallState body_pushback(const RobotState& robot, const BallState& ball, const PhysicsParams& params,
                        const PhysicsConstants& k);

/// One control step of the planar biped + ball. Throws SimulationFault on non-finite state.
WorldState step_dynamics(const WorldState& state, const ActionVector& action, const PhysicsParams& params,
                         const PhysicsConstants& k, double dt, CounterRng& noise);

bool is_finite(const WorldState& s);

}  // namespace dribble
