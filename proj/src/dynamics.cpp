#include "dribble/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dribble {

ActionVector ActionVector::clamped() const {
  ActionVector out;
  for (std::size_t i = 0; i < kActionDim; ++i) {
    // NaN stays NaN so step_dynamics can fault on it.
    out.u[i] = std::isnan(u[i]) ? u[i] : std::clamp(u[i], -1.0, 1.0);
  }
  return out;
}

Vec2 active_foot_point(const RobotState& robot, const PhysicsConstants& k) {
  // Left foot leads the first half-cycle, right foot the second.
  const double lateral = robot.gait_phase < kPi ? k.d_foot : -k.d_foot;
  return robot.position + rotate(Vec2{k.l_foot, lateral}, robot.yaw);
}

bool in_contact_window(double gait_phase, const PhysicsConstants& k) {
  const double phase = wrap_phase(gait_phase);
  return phase <= k.contact_window || (phase >= kPi && phase <= kPi + k.contact_window);
}

BallState ball_roll(const BallState& ball, const PhysicsParams& params, double dt) {
  BallState out = ball;
  const double speed = norm(ball.velocity);
  if (speed > 0.0) {
    const double reduced = std::max(0.0, speed - params.rolling_decel * dt);
    out.velocity = reduced > 0.0 ? ball.velocity * (reduced / speed) : Vec2{};
  }
  out.position = ball.position + out.velocity * dt;
  return out;
}

std::optional<KickImpulse> foot_ball_contact(const RobotState& robot, const BallState& ball,
                                             const PhysicsParams& params, const PhysicsConstants& k,
                                             double u_kick) {
  if (!in_contact_window(robot.gait_phase, k)) return std::nullopt;
  const Vec2 foot = active_foot_point(robot, k);
  const Vec2 offset = ball.position - foot;
  const double dist = norm(offset);
  if (dist > k.r_reach) return std::nullopt;

  const Vec2 heading{std::cos(robot.yaw), std::sin(robot.yaw)};
  Vec2 dir = dist > 1e-9 ? offset / dist : heading;
  dir += rotate(params.com_offset, robot.yaw) / k.r_reach;
  const double dir_norm = norm(dir);
  dir = dir_norm > 1e-12 ? dir / dir_norm : heading;

  const double u = std::isnan(u_kick) ? 0.0 : std::clamp(u_kick, -1.0, 1.0);
  const double magnitude = std::min(k.dv_max, std::max(0.0, params.kick_gain * (k.k0 + k.k1 * (u + 1.0) / 2.0)));
  return KickImpulse{dir * magnitude, robot.gait_phase < kPi};
}

BallState body_pushback(const RobotState& robot, const BallState& ball, const PhysicsParams& params,
                        const PhysicsConstants& k) {
  const Vec2 d = ball.position - robot.position;
  const double dist = norm(d);
  if (dist >= k.body_radius) return ball;
  const Vec2 n = dist > 1e-9 ? d / dist : Vec2{std::cos(robot.yaw), std::sin(robot.yaw)};
  BallState out = ball;
  out.position = robot.position + n * k.body_radius;
  const double v_rel = dot(ball.velocity - robot.linear_velocity, n);
  if (v_rel < 0.0) out.velocity = ball.velocity - n * ((1.0 + params.restitution) * v_rel);
  return out;
}

bool is_finite(const WorldState& s) {
  const RobotState& r = s.robot;
  return is_finite(r.position) && std::isfinite(r.yaw) && is_finite(r.linear_velocity) &&
         std::isfinite(r.yaw_rate) && std::isfinite(r.head_pan) && std::isfinite(r.head_tilt) &&
         std::isfinite(r.head_pan_rate) && std::isfinite(r.head_tilt_rate) && std::isfinite(r.gait_phase) &&
         is_finite(s.ball.position) && is_finite(s.ball.velocity) && std::isfinite(s.t) && is_finite(s.last_kick);
}

namespace {

double advance_joint(double q, double rate, double dt, double lo, double hi, double& realized_rate) {
  const double next = std::clamp(q + rate * dt, lo, hi);
  realized_rate = (next - q) / dt;
  return next;
}

}  // namespace

WorldState step_dynamics(const WorldState& state, const ActionVector& action, const PhysicsParams& params,
                         const PhysicsConstants& k, double dt, CounterRng& noise) {
  if (!is_finite(state)) throw SimulationFault("step_dynamics: non-finite input state");
  const ActionVector a = action.clamped();
  for (double u : a.u) {
    if (!std::isfinite(u)) throw SimulationFault("step_dynamics: non-finite action");
  }
  const double scale = params.action_scale;

  WorldState next = state;
  RobotState& r = next.robot;

  // Body translation: semi-implicit Euler with linear damping.
  const Vec2 thrust_body{a.fx() * scale, a.fy() * scale};
  const Vec2 accel = rotate(thrust_body, r.yaw) * (k.accel_scale * params.robot_accel_gain / (1.0 + params.mass_offset)) -
                     r.linear_velocity * k.body_damping;
  r.linear_velocity += accel * dt;
  if (params.roughness_sigma > 0.0) {
    const double jitter = k.robot_jitter_ratio * params.roughness_sigma;
    r.linear_velocity += Vec2{noise.normal(0.0, jitter), noise.normal(0.0, jitter)};
  }
  const double speed = norm(r.linear_velocity);
  if (speed > k.v_max) r.linear_velocity *= k.v_max / speed;
  r.position += r.linear_velocity * dt;

  r.yaw_rate = a.yaw() * scale * k.yaw_rate_max;
  r.yaw = wrap_angle(r.yaw + r.yaw_rate * dt);

  const double head_rate = k.head_rate_max * params.head_rate_gain * scale;
  r.head_pan = advance_joint(r.head_pan, a.pan() * head_rate, dt, kHeadPanMin, kHeadPanMax, r.head_pan_rate);
  r.head_tilt = advance_joint(r.head_tilt, a.tilt() * head_rate, dt, kHeadTiltMin, kHeadTiltMax, r.head_tilt_rate);

  r.gait_phase = wrap_phase(r.gait_phase + k.gait_omega * dt);

  next.ball = ball_roll(state.ball, params, dt);

  if (!in_contact_window(r.gait_phase, k)) {
    next.contact_latched = false;
  } else if (!next.contact_latched) {
    if (auto kick = foot_ball_contact(r, next.ball, params, k, a.kick())) {
      Vec2 dv = kick->delta_v;
      if (params.roughness_sigma > 0.0) dv = rotate(dv, noise.normal(0.0, params.roughness_sigma));
      next.ball.velocity += dv;
      next.last_kick = dv;
      next.contact_latched = true;
    }
  }
  next.ball = body_pushback(r, next.ball, params, k);
  next.t = state.t + dt;

  if (!is_finite(next)) throw SimulationFault("step_dynamics: state became non-finite at t=" + std::to_string(next.t));
  return next;
}

}  // namespace dribble
