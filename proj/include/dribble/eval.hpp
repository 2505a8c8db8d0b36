#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dribble/env.hpp"
#include "dribble/policy.hpp"

namespace dribble {

struct TrajectoryPoint {
  double t = 0.0;
  Vec2 p;
};
using Trajectory = std::vector<TrajectoryPoint>;

/// A segment is too short or collapses to a point, so it has no direction.
class UndefinedDirection : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Signed angle (degrees, counter-clockwise positive) between total-least-squares lines fitted to
/// the points with t <= trigger_time and those with t >= trigger_time + blackout. Each line is
/// oriented by chronological motion. Needs `min_points` on each side.
double fit_direction_change(const Trajectory& traj, double trigger_time, double blackout = 0.5,
                            std::size_t min_points = 10);

struct SpeedMetrics {
  double mean_speed = 0.0;
  double rel_error = 0.0;  // fraction, |mean - target| / target
};

/// Path length over elapsed time, skipping samples inside (trigger, trigger + blackout).
/// The trajectory must span at least 2 s (ContractViolation otherwise).
SpeedMetrics speed_metrics(const Trajectory& traj, double target_speed, std::optional<double> trigger_time = {},
                           double blackout = 0.5);

/// Produces an action from the environment's current observation.
class Controller {
 public:
  virtual ~Controller() = default;
  virtual void reset() {}
  virtual ActionVector act(const Env& env, const Observation& obs) = 0;
};

/// Deterministic policy: the Gaussian mean.
class PolicyController : public Controller {
 public:
  explicit PolicyController(const PolicyModel<float>& model) : model_(model) {}
  ActionVector act(const Env& env, const Observation& obs) override;

 private:
  const PolicyModel<float>& model_;
};

/// Hand-written dribbler using true state: walks behind the ball along the command and taps it.
/// A baseline for tests and for serving without a trained checkpoint.
class ScriptedDribbler : public Controller {
 public:
  ActionVector act(const Env& env, const Observation& obs) override;
};

/// Ball-velocity command as a function of the world state.
using CommandSource = std::function<Vec2(const WorldState&)>;

/// Constant-speed command from the ball toward `target`.
CommandSource straight_to_target(Vec2 target, double speed = 1.0);
/// Heads for each waypoint in turn, advancing when the ball is within `switch_radius`.
CommandSource waypoint_commands(std::vector<Vec2> waypoints, double speed = 1.0, double switch_radius = 0.75);

struct TurnExperimentSpec {
  Vec2 trigger_center{1.5, 0.0};
  double trigger_radius = 0.4;
  std::vector<double> turn_angles_deg{45.0, -45.0, 90.0, -90.0};
  double target_speed = 1.0;
  double perturbation = 0.1;
  std::size_t rollouts_per_cell = 5;
  double post_trigger_window = 4.0;
  double trigger_timeout = 20.0;
  double blackout = 0.5;
  Vec2 robot_start{-0.35, 0.0};

  /// Throws ConfigError.
  void validate() const;
};

struct TrialResult {
  double turn_angle_deg = 0.0;
  std::size_t rollout = 0;
  bool valid = false;
  std::string invalid_reason;
  double commanded_speed = 0.0;
  Trajectory trajectory;          // ball positions at control rate
  std::vector<Vec2> commands;     // command in force at each trajectory sample
  double trigger_time = 0.0;
  Vec2 trigger_position;          // ball position when the trigger fired
  double fitted_direction_change = 0.0;  // degrees
  double mean_speed = 0.0;
  double direction_rel_error = 0.0;  // percent
  double speed_rel_error = 0.0;      // percent
};

/// Runs every (angle, rollout) trial. The environment uses the stage-2 camera, nominal physics
/// and no termination. Results are ordered by cell, then rollout.
std::vector<TrialResult> run_turn_experiment(Controller& controller, const EnvConfig& env_cfg,
                                             const TurnExperimentSpec& spec, std::uint64_t seed);

struct TurnCellSummary {
  double turn_angle_deg = 0.0;
  std::size_t trials = 0;
  std::size_t invalid = 0;
  // Means over valid trials; NaN when the cell has none.
  double mean_direction_change = 0.0;
  double mean_direction_rel_error = 0.0;  // percent
  double mean_speed = 0.0;
  double mean_speed_rel_error = 0.0;  // percent
};

std::vector<TurnCellSummary> summarize_turns(const std::vector<TrialResult>& trials, const TurnExperimentSpec& spec);
/// Fixed-width table, one row per cell, with the published reference figures alongside.
std::string format_turn_table(const std::vector<TurnCellSummary>& cells);

struct Obstacle {
  Vec2 center;
  double radius = 0.5;
};

struct Box {
  Vec2 lo;
  Vec2 hi;
  bool contains(Vec2 p) const { return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y; }
};

enum class TaskKind { kDribbleToTarget, kObstacleAvoidance };
std::string_view task_kind_name(TaskKind k);
TaskKind parse_task_kind(std::string_view name);

struct TaskSpec {
  TaskKind kind = TaskKind::kDribbleToTarget;
  Vec2 target{8.0, 0.0};
  double success_radius = 1.0;
  double failure_radius = 3.0;
  std::vector<Vec2> field_boundary;  // convex or simple polygon, counter-clockwise
  Box target_box;
  std::vector<Obstacle> obstacles;
  Box region;
  double ball_radius = 0.11;
  double timeout = 60.0;
  Vec2 ball_start{0.0, 0.0};
  Vec2 robot_start{-0.35, 0.0};
  double robot_yaw = 0.0;

  static TaskSpec dribble_to_target();
  static TaskSpec obstacle_avoidance();
  /// Throws ConfigError.
  void validate() const;
};

enum class TaskResult { kRunning, kSuccess, kFailure };
enum class FailureReason { kNone, kZoneExit, kOutOfField, kCollision, kOutOfRegion, kTimeout };
std::string_view failure_reason_name(FailureReason r);

struct TaskStatus {
  TaskResult result = TaskResult::kRunning;
  FailureReason reason = FailureReason::kNone;
  double elapsed = 0.0;
  bool entered_outer_zone = false;
  double ball_target_distance = 0.0;
};

/// Applies the success and failure rules of a task to a stream of world states.
class TaskMonitor {
 public:
  explicit TaskMonitor(TaskSpec spec, double body_radius = 0.2);
  /// Evaluates the state reached at elapsed time `elapsed`; the outcome latches once decided.
  const TaskStatus& update(const WorldState& world, double elapsed);
  const TaskStatus& status() const { return status_; }
  const TaskSpec& spec() const { return spec_; }

 private:
  TaskSpec spec_;
  double body_radius_;
  TaskStatus status_;
};

bool point_in_polygon(Vec2 p, const std::vector<Vec2>& poly);

struct TaskOutcome {
  bool success = false;
  double elapsed = 0.0;
  FailureReason reason = FailureReason::kNone;
};

/// Scripted operator for a task: straight at the target, or around the obstacles via waypoints.
CommandSource default_task_commands(const TaskSpec& task, double speed = 1.0);

/// Runs one trial under the stage-2 camera with nominal physics, deterministic given the seed.
TaskOutcome evaluate_task(Controller& controller, const CommandSource& commands, const EnvConfig& env_cfg,
                          const TaskSpec& task, std::uint64_t seed);

/// World state at the start of a scripted trial: robot at `robot` facing `yaw`, ball at rest.
WorldState scenario_world(Vec2 robot, double yaw, Vec2 ball);
/// Stage-2, nominal-physics environment config used by every evaluator.
EnvConfig evaluation_env_config(const EnvConfig& cfg);

}  // namespace dribble
