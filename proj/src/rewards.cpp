#include "dribble/rewards.hpp"

#include <algorithm>
#include <cmath>

namespace dribble {

std::string_view reward_term_name(RewardTerm term) {
  switch (term) {
    case RewardTerm::kBallVelocity: return "ball_vel";
    case RewardTerm::kChase: return "chase";
    case RewardTerm::kInView: return "in_view";
    case RewardTerm::kGait: return "gait";
    case RewardTerm::kUprightProxy: return "upright_proxy";
    case RewardTerm::kActionRate: return "action_rate";
    case RewardTerm::kAlive: return "alive";
  }
  return "unknown";
}

RewardWeights stage1_default_weights() {
  RewardWeights w;
  w.ball_vel = 0.0;
  w.chase = 1.5;
  w.in_view = 0.5;
  w.gait = 0.8;
  w.upright_proxy = 0.1;
  w.action_rate = 0.05;
  w.alive = 0.2;
  return w;
}

RewardWeights stage2_default_weights() {
  RewardWeights w;
  w.ball_vel = 2.0;
  w.chase = 0.5;
  w.in_view = 0.5;
  w.gait = 0.0;
  w.upright_proxy = 0.0;
  w.action_rate = 0.05;
  w.alive = 0.2;
  return w;
}

double r_ball_velocity(Vec2 ball_vel, Vec2 cmd, double sigma) {
  return std::exp(-norm_sq(ball_vel - cmd) / (sigma * sigma));
}

double r_ball_velocity_projected(Vec2 ball_vel, Vec2 cmd, double sigma) {
  const double speed = norm(cmd);
  if (speed < 1e-9) return r_ball_velocity(ball_vel, cmd, sigma);
  const double along = dot(ball_vel, cmd) / speed;
  const double err = along - speed;
  return std::exp(-err * err / (sigma * sigma));
}

double r_chase(Vec2 robot_pos, Vec2 ball_pos, double d_scale) {
  return std::exp(-norm(robot_pos - ball_pos) / d_scale);
}

double r_in_view(const BallObservation& obs) { return obs.visible ? 1.0 : 0.0; }

double r_gait(double gait_phase, double body_speed, const ActionVector& action, const RewardParams& p,
              double u_fx_baseline) {
  const double gate = std::clamp(body_speed / p.gait_walk_speed, 0.0, 1.0);
  const double reference = p.gait_amplitude * std::sin(gait_phase) * gate;
  const double proxy = std::clamp(action.fx(), -1.0, 1.0) - u_fx_baseline;
  const double err = proxy - reference;
  return std::exp(-err * err / (p.gait_sigma * p.gait_sigma));
}

double r_upright_proxy(const ActionVector& action) { return -std::abs(std::clamp(action.fy(), -1.0, 1.0)); }

double r_action_rate(const ActionVector& action, const ActionVector& prev_action) {
  double s = 0.0;
  for (std::size_t i = 0; i < kActionDim; ++i) {
    const double d = action.u[i] - prev_action.u[i];
    s += d * d;
  }
  return -s;
}

RewardBreakdown total_reward(const RewardWeights& weights, const RewardTerms& terms) {
  RewardBreakdown out;
  out.terms = terms;
  const auto w = weights.as_array();
  for (std::size_t i = 0; i < kRewardTermCount; ++i) {
    out.weighted[i] = w[i] * terms.values[i];
    out.total += out.weighted[i];
  }
  return out;
}

}  // namespace dribble
