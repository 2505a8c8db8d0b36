#include "dribble/env.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dribble {

const std::vector<std::string>& observation_layout() {
  static const std::vector<std::string> layout{
      "v_cmd_x",        "v_cmd_y",        "body_vel_x",       "body_vel_y",       "yaw_rate",
      "sin_yaw",        "cos_yaw",        "head_pan",         "head_tilt",        "head_pan_rate",
      "head_tilt_rate", "ball_rel_x",     "ball_rel_y",       "ball_visible",     "ball_age_norm",
      "clock_sin",      "clock_neg_sin",  "prev_u_fx",        "prev_u_fy",        "prev_u_yaw",
      "prev_u_pan",     "prev_u_tilt",    "prev_u_kick",
      // privileged suffix
      "true_ball_rel_x", "true_ball_rel_y", "true_ball_vel_x", "true_ball_vel_y", "terrain_friction",
      "kick_gain",       "rolling_decel",   "last_kick_x",     "last_kick_y"};
  return layout;
}

std::string observation_layout_descriptor() {
  std::ostringstream os;
  os << "v" << kObservationLayoutVersion << ":";
  const auto& names = observation_layout();
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i == kObsDim) os << "|";
    else if (i > 0) os << ",";
    os << names[i];
  }
  return os.str();
}

StageConfig StageConfig::stage1() {
  StageConfig s;
  s.stage_id = 1;
  s.ball_spawn_range = {8.0, 12.0};
  s.fov_scale = 2.0;
  s.weights = stage1_default_weights();
  s.gait_reference_enabled = true;
  return s;
}

StageConfig StageConfig::stage2() {
  StageConfig s;
  s.stage_id = 2;
  s.ball_spawn_range = {0.5, 2.0};
  s.fov_scale = 1.0;
  s.weights = stage2_default_weights();
  s.gait_reference_enabled = false;
  return s;
}

void StageConfig::validate() const {
  if (stage_id != 1 && stage_id != 2) throw ConfigError("stage: unknown stage_id " + std::to_string(stage_id));
  if (!(ball_spawn_range.lo >= 0.0 && ball_spawn_range.lo <= ball_spawn_range.hi)) {
    throw ConfigError("stage: ball_spawn_range must satisfy 0 <= min <= max");
  }
  if (!(fov_scale > 0.0)) throw ConfigError("stage: fov_scale must be > 0");
  for (double w : weights.as_array()) {
    if (!std::isfinite(w)) throw ConfigError("stage: reward weights must be finite");
  }
}

void EnvConfig::validate() const {
  if (!(dt > 0.0)) throw ConfigError("env.dt must be > 0");
  if (!(t_max > dt)) throw ConfigError("env.t_max must exceed dt");
  if (!(d_lost > 0.0)) throw ConfigError("env.d_lost must be > 0");
  if (!(arena_half_size > 0.0)) throw ConfigError("env.arena_half_size must be > 0");
  if (!(command.resample_period >= dt)) throw ConfigError("command.resample_period must be >= dt");
  if (!(command.speed_min >= 0.0 && command.speed_min <= command.speed_max && command.speed_max <= command.v_cmd_max)) {
    throw ConfigError("command: need 0 <= speed_min <= speed_max <= v_cmd_max");
  }
  if (!(command.zero_probability >= 0.0 && command.zero_probability <= 1.0)) {
    throw ConfigError("command.zero_probability must lie in [0, 1]");
  }
  if (!(rewards.ball_vel_sigma > 0.0 && rewards.chase_scale > 0.0 && rewards.gait_sigma > 0.0 &&
        rewards.gait_walk_speed > 0.0 && rewards.gait_baseline_tau > 0.0)) {
    throw ConfigError("rewards: kernel scales must be > 0");
  }
  randomization.validate();
  stage1.validate();
  stage2.validate();
  CameraModel cam = camera;
  cam.fov_scale = stage1.fov_scale;
  cam.validate();
  cam.fov_scale = stage2.fov_scale;
  cam.validate();
}

std::string_view termination_name(TerminationReason r) {
  switch (r) {
    case TerminationReason::kNone: return "none";
    case TerminationReason::kTimeout: return "timeout";
    case TerminationReason::kBallLost: return "ball_lost";
    case TerminationReason::kOutOfBounds: return "out_of_bounds";
  }
  return "none";
}

Observation build_observation(const WorldState& world, const BallObservation& ball_obs, const Command& cmd,
                              const ActionVector& prev_action, const ObservationOffsets& offsets) {
  const RobotState& r = world.robot;
  const Vec2 body_vel = rotate(r.linear_velocity, -r.yaw);
  const double clock = std::sin(r.gait_phase);
  const double age_norm = offsets.memory_horizon > 0.0 ? std::clamp(ball_obs.age / offsets.memory_horizon, 0.0, 1.0)
                                                        : (ball_obs.visible ? 0.0 : 1.0);
  Observation o{};
  std::size_t i = 0;
  o[i++] = cmd.v_cmd.x;
  o[i++] = cmd.v_cmd.y;
  o[i++] = body_vel.x;
  o[i++] = body_vel.y;
  o[i++] = r.yaw_rate;
  o[i++] = std::sin(r.yaw);
  o[i++] = std::cos(r.yaw);
  o[i++] = r.head_pan + offsets.head_pan;
  o[i++] = r.head_tilt + offsets.head_tilt;
  o[i++] = r.head_pan_rate;
  o[i++] = r.head_tilt_rate;
  o[i++] = ball_obs.rel_position.x;
  o[i++] = ball_obs.rel_position.y;
  o[i++] = ball_obs.visible ? 1.0 : 0.0;
  o[i++] = age_norm;
  o[i++] = clock;
  o[i++] = -clock;
  for (double u : prev_action.u) o[i++] = u;
  return o;
}

PrivilegedObservation build_privileged(const Observation& obs, const WorldState& world, const PhysicsParams& params) {
  PrivilegedObservation p{};
  std::copy(obs.begin(), obs.end(), p.begin());
  const Vec2 rel = to_body_frame(world.robot, world.ball.position);
  std::size_t i = kObsDim;
  p[i++] = rel.x;
  p[i++] = rel.y;
  p[i++] = world.ball.velocity.x;
  p[i++] = world.ball.velocity.y;
  p[i++] = params.terrain_friction;
  p[i++] = params.kick_gain;
  p[i++] = params.rolling_decel;
  p[i++] = world.last_kick.x;
  p[i++] = world.last_kick.y;
  return p;
}

Command sample_command(const CommandConfig& cfg, CounterRng& rng) {
  if (rng.uniform01() < cfg.zero_probability) return Command{};
  const double heading = rng.uniform(0.0, kTwoPi);
  const double speed = rng.uniform(cfg.speed_min, cfg.speed_max);
  return Command{Vec2{speed * std::cos(heading), speed * std::sin(heading)}};
}

namespace {

EpisodeParams nominal_params(const PhysicsConstants& k) {
  EpisodeParams p;
  p.physics.rolling_decel = k.rolling_decel_per_friction * p.physics.terrain_friction;
  return p;
}

std::uint64_t steps_for(double seconds, double dt) { return static_cast<std::uint64_t>(std::llround(seconds / dt)); }

}  // namespace

Env::Env(const EnvConfig& cfg, std::uint64_t run_seed, std::uint32_t lane)
    : cfg_((cfg.validate(), cfg)),
      run_seed_(run_seed),
      lane_(lane),
      stage_(cfg.stage1),
      pending_stage_(cfg.stage1),
      params_(nominal_params(cfg.physics)),
      tracker_(cfg.camera, cfg.dt) {}

void Env::set_stage(const StageConfig& stage) {
  stage.validate();
  pending_stage_ = stage;
}

void Env::begin_episode(const WorldState& world) {
  stage_ = pending_stage_;
  world_ = world;
  CameraModel cam = cfg_.camera;
  cam.fov_scale = stage_.fov_scale;
  tracker_.set_camera(cam);
  tracker_.reset(world_.robot, world_.ball, rng_);
  delay_.reset(params_.actuation_delay);
  prev_action_ = ActionVector{};
  u_fx_baseline_ = 0.0;
  step_count_ = 0;
  status_ = EpisodeStatus{false, TerminationReason::kNone, world_.t};
}

Env::StepResult Env::reset() {
  rng_ = CounterRng(derive_key(run_seed_, StreamKind::kEpisode, lane_, episode_index_));
  ++episode_index_;
  params_ = cfg_.randomize ? sample_episode_params(cfg_.randomization, cfg_.physics, rng_) : nominal_params(cfg_.physics);

  const StageConfig& next = pending_stage_;
  WorldState w;
  w.robot.yaw = rng_.uniform(-kPi, kPi);
  w.robot.gait_phase = rng_.uniform(0.0, kTwoPi);
  const double bearing = rng_.uniform(0.0, kTwoPi);
  const double distance = rng_.uniform(next.ball_spawn_range.lo, next.ball_spawn_range.hi);
  w.ball.position = Vec2{distance * std::cos(bearing), distance * std::sin(bearing)};
  command_ = sample_command(cfg_.command, rng_);
  options_ = ScenarioOptions{};
  begin_episode(w);

  StepResult out;
  out.obs = observation();
  out.priv = privileged();
  out.status = status_;
  return out;
}

Env::StepResult Env::reset_scenario(const WorldState& world, const Command& cmd, const ScenarioOptions& options) {
  rng_ = CounterRng(derive_key(run_seed_, StreamKind::kEpisode, lane_, episode_index_));
  ++episode_index_;
  params_ = options.randomize ? sample_episode_params(cfg_.randomization, cfg_.physics, rng_) : nominal_params(cfg_.physics);
  command_ = cmd;
  options_ = options;
  begin_episode(world);

  StepResult out;
  out.obs = observation();
  out.priv = privileged();
  out.status = status_;
  return out;
}

Observation Env::observation() const {
  return build_observation(world_, tracker_.observation(), command_, prev_action_,
                           ObservationOffsets{tracker_.camera().memory_horizon, params_.head_pan_obs_offset,
                                              params_.head_tilt_obs_offset});
}

PrivilegedObservation Env::privileged() const { return build_privileged(observation(), world_, params_.physics); }

Env::StepResult Env::step(const ActionVector& action) {
  if (status_.done) throw ContractViolation("Env::step called on a finished episode (lane " + std::to_string(lane_) + ")");
  const ActionVector a = action.clamped();
  const ActionVector applied = delay_.delayed_action(a, world_.t);
  world_ = step_dynamics(world_, applied, params_.physics, cfg_.physics, cfg_.dt, rng_);
  const BallObservation& seen = tracker_.update(world_.robot, world_.ball, rng_);
  ++step_count_;

  const RewardParams& rp = cfg_.rewards;
  RewardTerms terms;
  terms[RewardTerm::kBallVelocity] = rp.ball_vel_mode == BallVelocityMode::kProjected
                                         ? r_ball_velocity_projected(world_.ball.velocity, command_.v_cmd, rp.ball_vel_sigma)
                                         : r_ball_velocity(world_.ball.velocity, command_.v_cmd, rp.ball_vel_sigma);
  terms[RewardTerm::kChase] = r_chase(world_.robot.position, world_.ball.position, rp.chase_scale);
  terms[RewardTerm::kInView] = r_in_view(seen);
  terms[RewardTerm::kGait] = stage_.gait_reference_enabled
                                 ? r_gait(world_.robot.gait_phase, norm(world_.robot.linear_velocity), a, rp, u_fx_baseline_)
                                 : 0.0;
  terms[RewardTerm::kUprightProxy] = r_upright_proxy(a);
  terms[RewardTerm::kActionRate] = r_action_rate(a, prev_action_);
  terms[RewardTerm::kAlive] = 1.0;

  StepResult out;
  out.reward = total_reward(stage_.weights, terms);

  u_fx_baseline_ += (cfg_.dt / rp.gait_baseline_tau) * (a.fx() - u_fx_baseline_);
  prev_action_ = a;

  if (options_.auto_command && step_count_ % steps_for(cfg_.command.resample_period, cfg_.dt) == 0) {
    command_ = sample_command(cfg_.command, rng_);
  }

  status_.t = world_.t;
  if (options_.terminate) {
    const Vec2 b = world_.ball.position;
    if (std::abs(b.x) > cfg_.arena_half_size || std::abs(b.y) > cfg_.arena_half_size) {
      status_.done = true;
      status_.reason = TerminationReason::kOutOfBounds;
    } else if (norm(b - world_.robot.position) > cfg_.d_lost) {
      status_.done = true;
      status_.reason = TerminationReason::kBallLost;
    } else if (step_count_ >= steps_for(cfg_.t_max, cfg_.dt)) {
      status_.done = true;
      status_.reason = TerminationReason::kTimeout;
    }
  }

  out.obs = observation();
  out.priv = build_privileged(out.obs, world_, params_.physics);
  out.status = status_;
  return out;
}

Env::Snapshot Env::snapshot() const {
  Snapshot s;
  s.episode_index = episode_index_;
  s.step_count = step_count_;
  s.stage = stage_;
  s.pending_stage = pending_stage_;
  s.params = params_;
  s.world = world_;
  s.tracker_history = tracker_.history();
  s.tracker_head = tracker_.head();
  s.ball_obs = tracker_.observation();
  s.delay_entries = delay_.entries();
  s.delay_active = delay_.active();
  s.delay_last_time = delay_.last_time();
  s.command = command_;
  s.prev_action = prev_action_;
  s.u_fx_baseline = u_fx_baseline_;
  s.options = options_;
  s.status = status_;
  s.rng_key = rng_.key();
  s.rng_counter = rng_.counter();
  return s;
}

void Env::restore(const Snapshot& s) {
  s.stage.validate();
  s.pending_stage.validate();
  episode_index_ = s.episode_index;
  step_count_ = s.step_count;
  stage_ = s.stage;
  pending_stage_ = s.pending_stage;
  params_ = s.params;
  world_ = s.world;
  CameraModel cam = cfg_.camera;
  cam.fov_scale = stage_.fov_scale;
  tracker_.set_camera(cam);
  tracker_.restore(s.tracker_history, s.tracker_head, s.ball_obs);
  delay_.reset(params_.actuation_delay);
  delay_.restore(s.delay_entries, s.delay_active, s.delay_last_time);
  command_ = s.command;
  prev_action_ = s.prev_action;
  u_fx_baseline_ = s.u_fx_baseline;
  options_ = s.options;
  status_ = s.status;
  rng_ = CounterRng(s.rng_key, s.rng_counter);
}

EnvBatch::EnvBatch(const EnvConfig& cfg, std::uint64_t run_seed, std::size_t num_lanes) : stage_(cfg.stage1) {
  lanes_.reserve(num_lanes);
  for (std::size_t i = 0; i < num_lanes; ++i) lanes_.emplace_back(cfg, run_seed, static_cast<std::uint32_t>(i));
}

void EnvBatch::set_stage(const StageConfig& stage) {
  stage.validate();
  stage_ = stage;
  for (Env& e : lanes_) e.set_stage(stage);
}

}  // namespace dribble
