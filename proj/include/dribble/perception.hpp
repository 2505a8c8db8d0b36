#pragma once

#include <cstddef>
#include <vector>

#include "dribble/common.hpp"
#include "dribble/dynamics.hpp"
#include "dribble/rng.hpp"

namespace dribble {

/// Pinhole camera on the pan/tilt head. Angles in radians, lengths in meters.
struct CameraModel {
  double hfov = 1.518;  // 87 deg
  double vfov = 1.012;  // 58 deg
  double mount_height = 1.10;
  double mount_forward = 0.05;
  double mount_pitch = 0.45;  // depression of the optical axis at head_tilt = 0
  double latency = 0.033;
  double noise_sigma = 0.03;
  double fov_scale = 1.0;     // curriculum multiplier, applies to both axes
  double hfov_axis_scale = 1.0;
  double vfov_axis_scale = 1.0;
  double memory_horizon = 0.3;
  double max_range = 10.0;  // footprint clip for fov_polygon

  double effective_hfov() const { return hfov * fov_scale * hfov_axis_scale; }
  double effective_vfov() const { return vfov * fov_scale * vfov_axis_scale; }
  /// Downward angle of the optical axis below horizontal.
  double depression(const RobotState& robot) const { return mount_pitch - robot.head_tilt; }
  /// Throws ConfigError if the angular extents or timing constants are out of range.
  void validate() const;
};

struct BallObservation {
  Vec2 rel_position;  // body frame
  bool visible = false;
  double age = 0.0;   // seconds since last sighting
  bool stale = true;
  int unseen_steps = 0;

  friend bool operator==(const BallObservation&, const BallObservation&) = default;
};

/// World-frame camera center at ground level, and its height.
Vec2 camera_ground_origin(const CameraModel& camera, const RobotState& robot);

/// Frustum membership for a ground-level point.
bool in_fov(const CameraModel& camera, const RobotState& robot, Vec2 ball_pos);

/// World-to-body transform of a point.
Vec2 to_body_frame(const RobotState& robot, Vec2 world_point);

/// Gated observation update. `robot` and `ball` are the (latency-delayed) states seen by the camera.
BallObservation observe_ball(const CameraModel& camera, const RobotState& robot, const BallState& ball,
                             const BallObservation& memory, double dt, CounterRng& noise);

/// Memory state after a reset: stale, zeroed, age just past the horizon.
BallObservation cleared_observation(const CameraModel& camera, double dt);

/// Ground footprint of the view frustum (convex, counter-clockwise), clipped to a square of
/// half-size max_range around the camera. Empty when the optical axis is at or above horizontal.
std::vector<Vec2> fov_polygon(const CameraModel& camera, const RobotState& robot);

/// Per-lane camera pipeline: latency ring buffer plus the gated memory.
class BallTracker {
 public:
  BallTracker() = default;
  BallTracker(const CameraModel& camera, double dt);

  /// Clears history and memory, then observes the initial state with no delay.
  const BallObservation& reset(const RobotState& robot, const BallState& ball, CounterRng& noise);
  /// Records the current state and observes the one `delay_steps` in the past.
  const BallObservation& update(const RobotState& robot, const BallState& ball, CounterRng& noise);

  const BallObservation& observation() const { return obs_; }
  const CameraModel& camera() const { return camera_; }
  void set_camera(const CameraModel& camera);
  std::size_t delay_steps() const { return delay_steps_; }

  struct Snapshot {
    RobotState robot;
    BallState ball;
  };
  const std::vector<Snapshot>& history() const { return history_; }
  std::size_t head() const { return head_; }
  void restore(std::vector<Snapshot> history, std::size_t head, const BallObservation& obs);

 private:
  CameraModel camera_;
  double dt_ = 0.02;
  std::size_t delay_steps_ = 0;
  std::vector<Snapshot> history_;  // ring of delay_steps_ + 1 entries
  std::size_t head_ = 0;           // index of the newest entry
  BallObservation obs_;
};

}  // namespace dribble
