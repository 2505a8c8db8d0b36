#include "dribble/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>
#include <sstream>

#include "dribble/common.hpp"

namespace dribble {

namespace {

constexpr double kRadToDeg = 180.0 / kPi;

Vec2 line_direction(const std::vector<Vec2>& pts, const char* which) {
  const double n = static_cast<double>(pts.size());
  Vec2 c;
  for (Vec2 p : pts) c += p;
  c = c / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (Vec2 p : pts) {
    const Vec2 d = p - c;
    sxx += d.x * d.x;
    sxy += d.x * d.y;
    syy += d.y * d.y;
  }
  if (sxx + syy <= 1e-18 * n) throw UndefinedDirection(std::string(which) + " segment: all points coincide");
  const double theta = 0.5 * std::atan2(2.0 * sxy, sxx - syy);
  Vec2 dir{std::cos(theta), std::sin(theta)};
  if (dot(dir, pts.back() - pts.front()) < 0.0) dir = dir * -1.0;
  return dir;
}

}  // namespace

double fit_direction_change(const Trajectory& traj, double trigger_time, double blackout, std::size_t min_points) {
  std::vector<Vec2> before, after;
  for (const auto& tp : traj) {
    if (tp.t <= trigger_time) before.push_back(tp.p);
    else if (tp.t >= trigger_time + blackout) after.push_back(tp.p);
  }
  if (before.size() < min_points || after.size() < min_points) {
    throw UndefinedDirection("fit_direction_change: need " + std::to_string(min_points) + " points per segment, got " +
                             std::to_string(before.size()) + " before and " + std::to_string(after.size()) + " after");
  }
  const Vec2 d0 = line_direction(before, "pre-trigger");
  const Vec2 d1 = line_direction(after, "post-trigger");
  return std::atan2(cross(d0, d1), dot(d0, d1)) * kRadToDeg;
}

SpeedMetrics speed_metrics(const Trajectory& traj, double target_speed, std::optional<double> trigger_time,
                           double blackout) {
  if (traj.size() < 2 || traj.back().t - traj.front().t < 2.0 - 1e-9)
    throw ContractViolation("speed_metrics: trajectory must span at least 2 s");
  if (!(target_speed > 0.0)) throw ContractViolation("speed_metrics: target speed must be positive");
  auto blacked_out = [&](double t) { return trigger_time && t > *trigger_time && t < *trigger_time + blackout; };
  double length = 0.0, time = 0.0;
  for (std::size_t i = 1; i < traj.size(); ++i) {
    if (blacked_out(traj[i - 1].t) || blacked_out(traj[i].t)) continue;
    length += norm(traj[i].p - traj[i - 1].p);
    time += traj[i].t - traj[i - 1].t;
  }
  SpeedMetrics m;
  m.mean_speed = time > 0.0 ? length / time : 0.0;
  m.rel_error = std::abs(m.mean_speed - target_speed) / target_speed;
  return m;
}

ActionVector PolicyController::act(const Env&, const Observation& obs) {
  const ActionDistribution d = forward_actor(model_, obs);
  ActionVector a;
  a.u = d.mean;
  return a;
}

ActionVector ScriptedDribbler::act(const Env& env, const Observation&) {
  const WorldState& w = env.world();
  const RobotState& r = w.robot;
  const PhysicsConstants& k = env.config().physics;
  const CameraModel& cam = env.camera();
  const Vec2 cmd = env.command().v_cmd;
  const double speed = norm(cmd);
  const Vec2 to_ball = w.ball.position - r.position;
  const double ball_dist = norm(to_ball);

  const Vec2 dir = speed > 1e-6 ? cmd / speed : Vec2{std::cos(r.yaw), std::sin(r.yaw)};
  // Kick along the velocity error so a turn also cancels the ball's old momentum.
  const Vec2 dv = cmd - w.ball.velocity;
  const double dv_norm = norm(dv);
  const bool want_contact = speed > 1e-6 && dv_norm > 0.2;
  const Vec2 kdir = want_contact ? dv / dv_norm : dir;
  const Vec2 side{-kdir.y, kdir.x};

  // Dribble with the left foot only: it sits right behind the ball while the right foot stays out of reach.
  Vec2 goal = want_contact ? w.ball.position - kdir * (k.l_foot + 0.1) - side * k.d_foot : w.ball.position - dir * 0.6;
  const double ahead = dot(r.position - w.ball.position, kdir);
  if (ahead > -0.2) {
    // On the wrong side of the ball: go round it.
    const double s = dot(r.position - w.ball.position, side) >= 0.0 ? 1.0 : -1.0;
    goal = w.ball.position + side * (0.5 * s) - kdir * 0.4;
  }

  Vec2 v_des = (goal - r.position) * 3.0 + w.ball.velocity;
  const double vn = norm(v_des);
  if (vn > 1.8) v_des = v_des * (1.8 / vn);
  const Vec2 a_world = v_des * k.body_damping + (v_des - r.linear_velocity) * 4.0;
  const Vec2 a_body = rotate(a_world, -r.yaw) / k.accel_scale;

  const double heading = speed > 1e-6 ? std::atan2(kdir.y, kdir.x) : std::atan2(to_ball.y, to_ball.x);
  ActionVector a;
  a.fx() = a_body.x;
  a.fy() = a_body.y;
  a.yaw() = 3.0 * wrap_angle(heading - r.yaw) / k.yaw_rate_max;

  const Vec2 rel = to_body_frame(r, w.ball.position);
  const double pan_target = std::clamp(std::atan2(rel.y, rel.x), kHeadPanMin, kHeadPanMax);
  const double ground = std::max(0.3, ball_dist);
  const double tilt_target = std::clamp(cam.mount_pitch - std::atan2(cam.mount_height, ground), kHeadTiltMin, kHeadTiltMax);
  a.pan() = 5.0 * (pan_target - r.head_pan) / k.head_rate_max;
  a.tilt() = 5.0 * (tilt_target - r.head_tilt) / k.head_rate_max;

  a.kick() = want_contact ? 2.0 * (dv_norm - k.k0) / k.k1 - 1.0 : -1.0;
  return a.clamped();
}

CommandSource straight_to_target(Vec2 target, double speed) {
  return [target, speed](const WorldState& w) {
    const Vec2 d = target - w.ball.position;
    const double n = norm(d);
    return n > 1e-9 ? d * (speed / n) : Vec2{};
  };
}

CommandSource waypoint_commands(std::vector<Vec2> waypoints, double speed, double switch_radius) {
  if (waypoints.empty()) throw ContractViolation("waypoint_commands: no waypoints");
  auto index = std::make_shared<std::size_t>(0);
  return [waypoints = std::move(waypoints), speed, switch_radius, index](const WorldState& w) {
    while (*index + 1 < waypoints.size() && norm(waypoints[*index] - w.ball.position) < switch_radius) ++*index;
    const Vec2 d = waypoints[*index] - w.ball.position;
    const double n = norm(d);
    return n > 1e-9 ? d * (speed / n) : Vec2{};
  };
}

void TurnExperimentSpec::validate() const {
  if (!(trigger_radius > 0.0)) throw ConfigError("turn experiment: trigger_radius must be > 0");
  if (turn_angles_deg.empty() || rollouts_per_cell == 0) throw ConfigError("turn experiment: no trials requested");
  if (!(target_speed > 0.0) || !(perturbation >= 0.0) || perturbation >= target_speed)
    throw ConfigError("turn experiment: need 0 <= perturbation < target_speed");
  if (!(post_trigger_window > blackout) || !(blackout >= 0.0))
    throw ConfigError("turn experiment: post-trigger window must exceed the blackout");
  if (!(trigger_timeout > 0.0)) throw ConfigError("turn experiment: trigger_timeout must be > 0");
}

WorldState scenario_world(Vec2 robot, double yaw, Vec2 ball) {
  WorldState w;
  w.robot.position = robot;
  w.robot.yaw = yaw;
  w.ball.position = ball;
  return w;
}

EnvConfig evaluation_env_config(const EnvConfig& cfg) {
  EnvConfig e = cfg;
  e.randomize = false;
  return e;
}

namespace {

Env make_eval_env(const EnvConfig& cfg, std::uint64_t seed, std::uint32_t lane) {
  Env env(evaluation_env_config(cfg), seed, lane);
  env.set_stage(cfg.stage2);
  return env;
}

constexpr ScenarioOptions kScripted{false, false, false};

}  // namespace

std::vector<TrialResult> run_turn_experiment(Controller& controller, const EnvConfig& env_cfg,
                                             const TurnExperimentSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::vector<TrialResult> out;
  const std::uint64_t env_seed = derive_key(seed, StreamKind::kEval);
  for (std::size_t cell = 0; cell < spec.turn_angles_deg.size(); ++cell) {
    for (std::size_t k = 0; k < spec.rollouts_per_cell; ++k) {
      TrialResult tr;
      tr.turn_angle_deg = spec.turn_angles_deg[cell];
      tr.rollout = k;
      CounterRng rng(derive_key(seed, StreamKind::kEval, cell, k));
      tr.commanded_speed = rng.uniform(spec.target_speed - spec.perturbation, spec.target_speed + spec.perturbation);

      const std::uint32_t lane = static_cast<std::uint32_t>(cell * spec.rollouts_per_cell + k);
      Env env = make_eval_env(env_cfg, env_seed, lane);
      Vec2 cmd{tr.commanded_speed, 0.0};
      env.reset_scenario(scenario_world(spec.robot_start, 0.0, Vec2{}), Command{cmd}, kScripted);
      controller.reset();
      tr.trajectory.push_back({0.0, env.world().ball.position});
      tr.commands.push_back(cmd);
      const double t0 = env.world().t;
      bool triggered = false;
      for (;;) {
        const Observation obs = env.observation();
        env.step(controller.act(env, obs));
        const double t = env.world().t - t0;
        const Vec2 ball = env.world().ball.position;
        tr.trajectory.push_back({t, ball});
        tr.commands.push_back(cmd);
        if (!triggered && norm(ball - spec.trigger_center) <= spec.trigger_radius) {
          triggered = true;
          tr.trigger_time = t;
          tr.trigger_position = ball;
          cmd = rotate(cmd, tr.turn_angle_deg / kRadToDeg);
          env.set_command(Command{cmd});
        }
        if (triggered && t >= tr.trigger_time + spec.post_trigger_window - 1e-9) break;
        if (!triggered && t >= spec.trigger_timeout) break;
      }
      if (!triggered) {
        tr.invalid_reason = "ball never entered the trigger circle";
      } else {
        try {
          tr.fitted_direction_change = fit_direction_change(tr.trajectory, tr.trigger_time, spec.blackout);
          const SpeedMetrics sm = speed_metrics(tr.trajectory, spec.target_speed, tr.trigger_time, spec.blackout);
          tr.mean_speed = sm.mean_speed;
          tr.speed_rel_error = 100.0 * sm.rel_error;
          tr.direction_rel_error =
              100.0 * std::abs(tr.fitted_direction_change - tr.turn_angle_deg) / std::abs(tr.turn_angle_deg);
          tr.valid = true;
        } catch (const UndefinedDirection& e) {
          tr.invalid_reason = e.what();
        }
      }
      out.push_back(std::move(tr));
    }
  }
  return out;
}

std::vector<TurnCellSummary> summarize_turns(const std::vector<TrialResult>& trials, const TurnExperimentSpec& spec) {
  std::vector<TurnCellSummary> cells;
  for (double angle : spec.turn_angles_deg) {
    TurnCellSummary c;
    c.turn_angle_deg = angle;
    std::size_t valid = 0;
    for (const auto& t : trials) {
      if (t.turn_angle_deg != angle) continue;
      ++c.trials;
      if (!t.valid) {
        ++c.invalid;
        continue;
      }
      ++valid;
      c.mean_direction_change += t.fitted_direction_change;
      c.mean_direction_rel_error += t.direction_rel_error;
      c.mean_speed += t.mean_speed;
      c.mean_speed_rel_error += t.speed_rel_error;
    }
    if (valid > 0) {
      const double inv = 1.0 / static_cast<double>(valid);
      c.mean_direction_change *= inv;
      c.mean_direction_rel_error *= inv;
      c.mean_speed *= inv;
      c.mean_speed_rel_error *= inv;
    } else {
      // Nothing to average: a zero here would read as a perfect score.
      c.mean_direction_change = c.mean_direction_rel_error = c.mean_speed = c.mean_speed_rel_error =
          std::numeric_limits<double>::quiet_NaN();
    }
    cells.push_back(c);
  }
  return cells;
}

std::string format_turn_table(const std::vector<TurnCellSummary>& cells) {
  struct Ref {
    double angle, change, err, speed, speed_err;
  };
  // Published figures (left turns positive). Speeds are reported per turn side.
  const Ref refs[] = {{45.0, 43.58, 3.16, 0.898, 10.3},
                      {90.0, 88.06, 2.16, 0.898, 10.3},
                      {-45.0, -46.44, 3.20, 0.896, 10.4},
                      {-90.0, -87.98, 2.24, 0.896, 10.4}};
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof line, "%-7s %6s %8s %10s %9s %8s %9s | %10s %9s %8s %9s\n", "turn", "valid", "invalid",
                "dir_change", "dir_err%", "speed", "speed_err%", "ref_change", "ref_err%", "ref_speed", "ref_spd%");
  os << line;
  for (const auto& c : cells) {
    const Ref* ref = nullptr;
    for (const auto& r : refs)
      if (r.angle == c.turn_angle_deg) ref = &r;
    std::snprintf(line, sizeof line, "%+6.0f° %6zu %8zu %10.2f %9.2f %8.3f %9.2f |", c.turn_angle_deg,
                  c.trials - c.invalid, c.invalid, c.mean_direction_change, c.mean_direction_rel_error, c.mean_speed,
                  c.mean_speed_rel_error);
    os << line;
    if (ref) {
      std::snprintf(line, sizeof line, " %10.2f %9.2f %8.3f %9.1f\n", ref->change, ref->err, ref->speed, ref->speed_err);
    } else {
      std::snprintf(line, sizeof line, " %10s %9s %8s %9s\n", "-", "-", "-", "-");
    }
    os << line;
  }
  return os.str();
}

std::string_view task_kind_name(TaskKind k) {
  switch (k) {
    case TaskKind::kDribbleToTarget: return "dribble_to_target";
    case TaskKind::kObstacleAvoidance: return "obstacle_avoidance";
  }
  return "unknown";
}

TaskKind parse_task_kind(std::string_view name) {
  if (name == "dribble_to_target") return TaskKind::kDribbleToTarget;
  if (name == "obstacle_avoidance") return TaskKind::kObstacleAvoidance;
  throw ConfigError("unknown task '" + std::string(name) + "' (expected dribble_to_target or obstacle_avoidance)");
}

std::string_view failure_reason_name(FailureReason r) {
  switch (r) {
    case FailureReason::kNone: return "none";
    case FailureReason::kZoneExit: return "zone_exit";
    case FailureReason::kOutOfField: return "out_of_field";
    case FailureReason::kCollision: return "collision";
    case FailureReason::kOutOfRegion: return "out_of_region";
    case FailureReason::kTimeout: return "timeout";
  }
  return "unknown";
}

TaskSpec TaskSpec::dribble_to_target() {
  TaskSpec s;
  s.kind = TaskKind::kDribbleToTarget;
  s.target = {8.0, 0.0};
  s.field_boundary = {{-3.0, -6.0}, {13.0, -6.0}, {13.0, 6.0}, {-3.0, 6.0}};
  return s;
}

TaskSpec TaskSpec::obstacle_avoidance() {
  TaskSpec s;
  s.kind = TaskKind::kObstacleAvoidance;
  s.target = {8.5, 0.0};
  s.target_box = {{7.5, -1.0}, {9.5, 1.0}};
  s.obstacles = {{{3.0, 0.6}, 0.5}, {{5.5, -0.6}, 0.5}};
  s.region = {{-2.0, -4.0}, {11.0, 4.0}};
  return s;
}

void TaskSpec::validate() const {
  if (!(timeout > 0.0)) throw ConfigError("task: timeout must be > 0");
  if (kind == TaskKind::kDribbleToTarget) {
    if (!(success_radius > 0.0 && success_radius < failure_radius))
      throw ConfigError("task: need 0 < success_radius < failure_radius");
    if (!field_boundary.empty() && field_boundary.size() < 3) throw ConfigError("task: field boundary needs >= 3 vertices");
  } else {
    if (!(target_box.lo.x < target_box.hi.x && target_box.lo.y < target_box.hi.y))
      throw ConfigError("task: target box is empty");
    if (!(region.lo.x < region.hi.x && region.lo.y < region.hi.y)) throw ConfigError("task: region is empty");
    for (const auto& o : obstacles)
      if (!(o.radius > 0.0)) throw ConfigError("task: obstacle radius must be > 0");
  }
}

bool point_in_polygon(Vec2 p, const std::vector<Vec2>& poly) {
  bool inside = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const Vec2 a = poly[i], b = poly[j];
    if ((a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x) inside = !inside;
  }
  return inside;
}

TaskMonitor::TaskMonitor(TaskSpec spec, double body_radius) : spec_(std::move(spec)), body_radius_(body_radius) {
  spec_.validate();
}

const TaskStatus& TaskMonitor::update(const WorldState& world, double elapsed) {
  if (status_.result != TaskResult::kRunning) return status_;
  status_.elapsed = elapsed;
  const Vec2 ball = world.ball.position;
  const Vec2 robot = world.robot.position;
  auto fail = [&](FailureReason r) {
    status_.result = TaskResult::kFailure;
    status_.reason = r;
  };
  if (spec_.kind == TaskKind::kDribbleToTarget) {
    const double d = norm(ball - spec_.target);
    status_.ball_target_distance = d;
    if (d < spec_.success_radius) {
      status_.result = TaskResult::kSuccess;
    } else if (d <= spec_.failure_radius) {
      status_.entered_outer_zone = true;
    } else if (status_.entered_outer_zone) {
      fail(FailureReason::kZoneExit);
    }
    if (status_.result == TaskResult::kRunning && !spec_.field_boundary.empty() &&
        !point_in_polygon(ball, spec_.field_boundary))
      fail(FailureReason::kOutOfField);
  } else {
    status_.ball_target_distance = norm(ball - spec_.target);
    for (const auto& o : spec_.obstacles) {
      if (norm(robot - o.center) < o.radius + body_radius_ || norm(ball - o.center) < o.radius + spec_.ball_radius) {
        fail(FailureReason::kCollision);
        break;
      }
    }
    if (status_.result == TaskResult::kRunning && (!spec_.region.contains(ball) || !spec_.region.contains(robot)))
      fail(FailureReason::kOutOfRegion);
    if (status_.result == TaskResult::kRunning && spec_.target_box.contains(ball)) status_.result = TaskResult::kSuccess;
  }
  if (status_.result == TaskResult::kRunning && elapsed >= spec_.timeout - 1e-9) fail(FailureReason::kTimeout);
  return status_;
}

CommandSource default_task_commands(const TaskSpec& task, double speed) {
  if (task.kind == TaskKind::kDribbleToTarget) return straight_to_target(task.target, speed);
  // Pass each obstacle on the side away from its offset, then head for the target.
  std::vector<Vec2> waypoints;
  for (const auto& o : task.obstacles) {
    const double side = o.center.y >= task.target.y ? -1.0 : 1.0;
    const double y = o.center.y + side * (o.radius + 0.8);
    waypoints.push_back({o.center.x - o.radius - 0.5, y});
    waypoints.push_back({o.center.x + o.radius, y});
  }
  waypoints.push_back(task.target);
  return waypoint_commands(std::move(waypoints), speed, 0.5);
}

TaskOutcome evaluate_task(Controller& controller, const CommandSource& commands, const EnvConfig& env_cfg,
                          const TaskSpec& task, std::uint64_t seed) {
  TaskMonitor monitor(task, env_cfg.physics.body_radius);
  Env env = make_eval_env(env_cfg, derive_key(seed, StreamKind::kEval), 0);
  const WorldState start = scenario_world(task.robot_start, task.robot_yaw, task.ball_start);
  env.reset_scenario(start, Command{commands(start)}, kScripted);
  controller.reset();
  const double t0 = env.world().t;
  while (monitor.status().result == TaskResult::kRunning) {
    env.set_command(Command{commands(env.world())});
    const Observation obs = env.observation();
    env.step(controller.act(env, obs));
    monitor.update(env.world(), env.world().t - t0);
  }
  const TaskStatus& st = monitor.status();
  return TaskOutcome{st.result == TaskResult::kSuccess, st.elapsed, st.reason};
}

}  // namespace dribble
