#include "dribble/perception.hpp"

#include <algorithm>
#include <cmath>

namespace dribble {

void CameraModel::validate() const {
  const double h = effective_hfov();
  const double v = effective_vfov();
  if (!(h > 0.0 && h < kTwoPi)) throw ConfigError("camera: hfov * fov_scale must lie in (0, 2pi)");
  if (!(v > 0.0 && v < kPi)) throw ConfigError("camera: vfov * fov_scale must lie in (0, pi)");
  if (!(latency >= 0.0)) throw ConfigError("camera: latency must be >= 0");
  if (!(noise_sigma >= 0.0)) throw ConfigError("camera: noise_sigma must be >= 0");
  if (!(memory_horizon >= 0.0)) throw ConfigError("camera: memory_horizon must be >= 0");
  if (!(mount_height > 0.0)) throw ConfigError("camera: mount_height must be > 0");
  if (!(max_range > 0.0)) throw ConfigError("camera: max_range must be > 0");
}

Vec2 camera_ground_origin(const CameraModel& camera, const RobotState& robot) {
  return robot.position + rotate(Vec2{camera.mount_forward, 0.0}, robot.yaw);
}

Vec2 to_body_frame(const RobotState& robot, Vec2 world_point) {
  return rotate(world_point - robot.position, -robot.yaw);
}

namespace {

struct CameraAxes {
  Vec2 origin;
  double height;
  // Horizontal components of forward / left / up, and their vertical components.
  Vec2 f2, l2, u2;
  double fz, uz;
};

CameraAxes camera_axes(const CameraModel& camera, const RobotState& robot) {
  const double psi = robot.yaw + robot.head_pan;
  const double delta = camera.depression(robot);
  const double cp = std::cos(psi), sp = std::sin(psi);
  const double cd = std::cos(delta), sd = std::sin(delta);
  return CameraAxes{camera_ground_origin(camera, robot), camera.mount_height, Vec2{cp * cd, sp * cd},
                    Vec2{-sp, cp},                        Vec2{cp * sd, sp * sd}, -sd, cd};
}

}  // namespace

bool in_fov(const CameraModel& camera, const RobotState& robot, Vec2 ball_pos) {
  const CameraAxes ax = camera_axes(camera, robot);
  const Vec2 d = ball_pos - ax.origin;
  const double dz = -ax.height;
  if (norm_sq(d) + dz * dz < 1e-24) return false;
  const double xc = dot(d, ax.f2) + dz * ax.fz;
  const double yc = dot(d, ax.l2);
  const double zc = dot(d, ax.u2) + dz * ax.uz;
  return std::abs(std::atan2(yc, xc)) <= 0.5 * camera.effective_hfov() &&
         std::abs(std::atan2(zc, xc)) <= 0.5 * camera.effective_vfov();
}

BallObservation cleared_observation(const CameraModel& camera, double dt) {
  BallObservation obs;
  obs.visible = false;
  obs.stale = true;
  obs.unseen_steps = static_cast<int>(std::ceil(camera.memory_horizon / dt - 1e-9)) + 1;
  obs.age = camera.memory_horizon + dt;
  return obs;
}

BallObservation observe_ball(const CameraModel& camera, const RobotState& robot, const BallState& ball,
                             const BallObservation& memory, double dt, CounterRng& noise) {
  BallObservation out;
  if (in_fov(camera, robot, ball.position)) {
    const Vec2 rel = to_body_frame(robot, ball.position);
    out.rel_position = Vec2{rel.x + noise.normal(0.0, camera.noise_sigma), rel.y + noise.normal(0.0, camera.noise_sigma)};
    out.visible = true;
    out.age = 0.0;
    out.stale = false;
    out.unseen_steps = 0;
    return out;
  }
  out.rel_position = memory.rel_position;
  out.visible = false;
  out.unseen_steps = memory.unseen_steps + 1;
  // Age is a step count times dt so the horizon comparison does not drift with accumulation.
  out.age = out.unseen_steps * dt;
  out.stale = out.age > camera.memory_horizon + 1e-9;
  return out;
}

namespace {

// Keeps the part of `poly` where a.(p - o) + b <= 0.
std::vector<Vec2> clip_half_plane(const std::vector<Vec2>& poly, Vec2 a, Vec2 o, double b) {
  std::vector<Vec2> out;
  if (poly.empty()) return out;
  auto eval = [&](Vec2 p) { return dot(a, p - o) + b; };
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2 p = poly[i];
    const Vec2 q = poly[(i + 1) % poly.size()];
    const double gp = eval(p);
    const double gq = eval(q);
    if (gp <= 0.0) out.push_back(p);
    if ((gp < 0.0 && gq > 0.0) || (gp > 0.0 && gq < 0.0)) {
      const double s = gp / (gp - gq);
      out.push_back(p + (q - p) * s);
    }
  }
  return out;
}

}  // namespace

std::vector<Vec2> fov_polygon(const CameraModel& camera, const RobotState& robot) {
  const double delta = camera.depression(robot);
  if (delta <= 0.0) return {};
  const double half_h = 0.5 * camera.effective_hfov();
  const double half_v = 0.5 * camera.effective_vfov();
  if (half_h >= 0.5 * kPi || half_v >= 0.5 * kPi) {
    throw ContractViolation("fov_polygon: half-angles must be below pi/2 for a bounded footprint");
  }
  const CameraAxes ax = camera_axes(camera, robot);
  const double th = std::tan(half_h);
  const double tv = std::tan(half_v);
  const double r = camera.max_range;
  const Vec2 c = ax.origin;
  std::vector<Vec2> poly{c + Vec2{-r, -r}, c + Vec2{r, -r}, c + Vec2{r, r}, c + Vec2{-r, r}};

  // Camera coordinates are affine in the ground point p: x = f2.(p-c) + h sin(delta), y = l2.(p-c),
  // z = u2.(p-c) - h cos(delta). Each frustum side is the half-plane +-y <= th x or +-z <= tv x.
  const double x0 = -ax.height * ax.fz;
  const double z0 = -ax.height * ax.uz;
  poly = clip_half_plane(poly, ax.l2 - ax.f2 * th, c, -th * x0);
  poly = clip_half_plane(poly, -ax.l2 - ax.f2 * th, c, -th * x0);
  poly = clip_half_plane(poly, ax.u2 - ax.f2 * tv, c, z0 - tv * x0);
  poly = clip_half_plane(poly, -ax.u2 - ax.f2 * tv, c, -z0 - tv * x0);
  return poly;
}

BallTracker::BallTracker(const CameraModel& camera, double dt) : dt_(dt) { set_camera(camera); }

void BallTracker::set_camera(const CameraModel& camera) {
  camera.validate();
  camera_ = camera;
  delay_steps_ = static_cast<std::size_t>(std::lround(camera.latency / dt_));
  history_.assign(delay_steps_ + 1, Snapshot{});
  head_ = 0;
}

const BallObservation& BallTracker::reset(const RobotState& robot, const BallState& ball, CounterRng& noise) {
  std::fill(history_.begin(), history_.end(), Snapshot{robot, ball});
  head_ = 0;
  const BallObservation cleared = cleared_observation(camera_, dt_);
  obs_ = observe_ball(camera_, robot, ball, cleared, dt_, noise);
  if (!obs_.visible) obs_ = cleared;
  return obs_;
}

const BallObservation& BallTracker::update(const RobotState& robot, const BallState& ball, CounterRng& noise) {
  head_ = (head_ + 1) % history_.size();
  history_[head_] = Snapshot{robot, ball};
  const Snapshot& seen = history_[(head_ + 1) % history_.size()];
  obs_ = observe_ball(camera_, seen.robot, seen.ball, obs_, dt_, noise);
  return obs_;
}

void BallTracker::restore(std::vector<Snapshot> history, std::size_t head, const BallObservation& obs) {
  if (history.size() != delay_steps_ + 1 || head >= history.size()) {
    throw ContractViolation("BallTracker::restore: history does not match the camera latency");
  }
  history_ = std::move(history);
  head_ = head;
  obs_ = obs;
}

}  // namespace dribble
