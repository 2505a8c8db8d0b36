#pragma once

#include <array>
#include <cstddef>
#include <string_view>

#include "dribble/common.hpp"
#include "dribble/dynamics.hpp"
#include "dribble/perception.hpp"

namespace dribble {

enum class RewardTerm : std::size_t {
  kBallVelocity = 0,
  kChase,
  kInView,
  kGait,
  kUprightProxy,
  kActionRate,
  kAlive,
};
inline constexpr std::size_t kRewardTermCount = 7;

std::string_view reward_term_name(RewardTerm term);

struct RewardWeights {
  double ball_vel = 0.0;
  double chase = 0.0;
  double in_view = 0.0;
  double gait = 0.0;
  double upright_proxy = 0.0;
  double action_rate = 0.0;
  double alive = 0.0;

  std::array<double, kRewardTermCount> as_array() const {
    return {ball_vel, chase, in_view, gait, upright_proxy, action_rate, alive};
  }
  friend bool operator==(const RewardWeights&, const RewardWeights&) = default;
};

/// Locomotion-heavy stage: chase, gait clock and view; no ball-velocity tracking.
RewardWeights stage1_default_weights();
/// Dribbling stage: ball-velocity tracking dominates; gait reference removed.
RewardWeights stage2_default_weights();

enum class BallVelocityMode { kFull2d, kProjected };

struct RewardParams {
  double ball_vel_sigma = 0.5;  // m/s
  double chase_scale = 2.0;     // m
  BallVelocityMode ball_vel_mode = BallVelocityMode::kFull2d;
  double gait_amplitude = 0.5;  // reference amplitude on u_fx
  double gait_sigma = 0.5;
  double gait_walk_speed = 0.3;  // m/s at which the clock reference reaches full amplitude
  double gait_baseline_tau = 0.5;  // s, time constant of the u_fx running mean
};

struct RewardTerms {
  std::array<double, kRewardTermCount> values{};
  double& operator[](RewardTerm t) { return values[static_cast<std::size_t>(t)]; }
  double operator[](RewardTerm t) const { return values[static_cast<std::size_t>(t)]; }
};

struct RewardBreakdown {
  RewardTerms terms;
  std::array<double, kRewardTermCount> weighted{};
  double total = 0.0;
};

/// exp(-|ball_vel - cmd|^2 / sigma^2).
double r_ball_velocity(Vec2 ball_vel, Vec2 cmd, double sigma);
/// Projected variant: only the along-command speed mismatch counts. Falls back to full 2D at zero command.
double r_ball_velocity_projected(Vec2 ball_vel, Vec2 cmd, double sigma);
/// exp(-|robot_pos - ball_pos| / d_scale).
double r_chase(Vec2 robot_pos, Vec2 ball_pos, double d_scale);
double r_in_view(const BallObservation& obs);
/// Agreement between the stepping proxy (u_fx minus its running mean) and the clock
/// reference amplitude * sin(phase), gated to zero at standstill.
double r_gait(double gait_phase, double body_speed, const ActionVector& action, const RewardParams& p,
              double u_fx_baseline = 0.0);
/// -|u_fy|: lateral thrust, the planar stand-in for torso tilt.
double r_upright_proxy(const ActionVector& action);
/// -|action - prev_action|^2.
double r_action_rate(const ActionVector& action, const ActionVector& prev_action);

RewardBreakdown total_reward(const RewardWeights& weights, const RewardTerms& terms);

}  // namespace dribble
