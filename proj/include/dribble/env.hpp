#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "dribble/dynamics.hpp"
#include "dribble/perception.hpp"
#include "dribble/randomization.hpp"
#include "dribble/rewards.hpp"
#include "dribble/rng.hpp"

namespace dribble {

inline constexpr std::size_t kObsDim = 23;
inline constexpr std::size_t kPrivDim = 32;
/// Bumped whenever the observation or privileged layout changes.
inline constexpr std::uint32_t kObservationLayoutVersion = 1;

using Observation = std::array<double, kObsDim>;
using PrivilegedObservation = std::array<double, kPrivDim>;

/// Field names of the observation and privileged vectors, in order.
const std::vector<std::string>& observation_layout();
/// "v<version>:" followed by the comma-joined field names; identical wherever the same build runs.
std::string observation_layout_descriptor();

struct Command {
  Vec2 v_cmd;  // global frame, m/s
};

struct CommandConfig {
  double resample_period = 4.0;
  double v_cmd_max = 1.5;
  double speed_min = 0.3;
  double speed_max = 1.5;
  double zero_probability = 0.1;
};

struct StageConfig {
  int stage_id = 1;
  Range ball_spawn_range{8.0, 12.0};
  double fov_scale = 2.0;
  RewardWeights weights;
  bool gait_reference_enabled = true;

  static StageConfig stage1();
  static StageConfig stage2();
  /// Throws ConfigError for an unknown stage id or malformed spawn range.
  void validate() const;
  friend bool operator==(const StageConfig&, const StageConfig&) = default;
};

struct EnvConfig {
  double dt = 0.02;
  double t_max = 20.0;
  double d_lost = 15.0;
  double arena_half_size = 20.0;  // 40 x 40 m arena centred on the spawn point
  bool randomize = true;
  PhysicsConstants physics;
  CameraModel camera;
  RewardParams rewards;
  RandomizationRanges randomization;
  CommandConfig command;
  StageConfig stage1 = StageConfig::stage1();
  StageConfig stage2 = StageConfig::stage2();

  void validate() const;
};

enum class TerminationReason { kNone, kTimeout, kBallLost, kOutOfBounds };
std::string_view termination_name(TerminationReason r);

struct EpisodeStatus {
  bool done = false;
  TerminationReason reason = TerminationReason::kNone;
  double t = 0.0;
};

struct ObservationOffsets {
  double memory_horizon = 0.3;
  double head_pan = 0.0;
  double head_tilt = 0.0;
};

Observation build_observation(const WorldState& world, const BallObservation& ball_obs, const Command& cmd,
                              const ActionVector& prev_action, const ObservationOffsets& offsets = {});

PrivilegedObservation build_privileged(const Observation& obs, const WorldState& world, const PhysicsParams& params);

/// Samples a command: zero with the configured probability, else uniform direction and speed.
Command sample_command(const CommandConfig& cfg, CounterRng& rng);

/// Controls for scripted scenarios (evaluation, serving) that bypass the training episode logic.
struct ScenarioOptions {
  bool auto_command = true;    // resample the command every resample_period
  bool terminate = true;       // apply the training termination rules
  bool randomize = false;      // draw episode params instead of nominal ones
};

/// One environment lane: dynamics, camera pipeline, delay queue, rewards, command schedule.
class Env {
 public:
  struct StepResult {
    Observation obs;
    PrivilegedObservation priv;
    RewardBreakdown reward;
    EpisodeStatus status;
  };

  Env(const EnvConfig& cfg, std::uint64_t run_seed, std::uint32_t lane);

  /// Starts a training episode under the pending stage.
  StepResult reset();
  /// Starts a scripted episode from an explicit world state and command.
  StepResult reset_scenario(const WorldState& world, const Command& cmd, const ScenarioOptions& options);
  /// Throws ContractViolation when called on a finished episode.
  StepResult step(const ActionVector& action);

  /// Takes effect at the next reset; the running episode keeps its stage.
  void set_stage(const StageConfig& stage);
  void set_command(const Command& cmd) { command_ = cmd; }

  const WorldState& world() const { return world_; }
  const Command& command() const { return command_; }
  const StageConfig& stage() const { return stage_; }
  const StageConfig& pending_stage() const { return pending_stage_; }
  const EpisodeParams& episode_params() const { return params_; }
  const BallTracker& tracker() const { return tracker_; }
  const CameraModel& camera() const { return tracker_.camera(); }
  const EnvConfig& config() const { return cfg_; }
  const EpisodeStatus& status() const { return status_; }
  const ActionVector& prev_action() const { return prev_action_; }
  std::uint64_t episode_index() const { return episode_index_; }
  std::uint64_t step_count() const { return step_count_; }
  std::uint32_t lane() const { return lane_; }
  Observation observation() const;
  PrivilegedObservation privileged() const;

  /// Raw state access for checkpointing a lane mid-episode.
  struct Snapshot;
  Snapshot snapshot() const;
  void restore(const Snapshot& s);

 private:
  void begin_episode(const WorldState& world);

  EnvConfig cfg_;
  std::uint64_t run_seed_;
  std::uint32_t lane_;
  std::uint64_t episode_index_ = 0;
  std::uint64_t step_count_ = 0;
  StageConfig stage_;
  StageConfig pending_stage_;
  EpisodeParams params_;
  WorldState world_;
  BallTracker tracker_;
  DelayQueue delay_;
  Command command_;
  ActionVector prev_action_{};
  double u_fx_baseline_ = 0.0;
  ScenarioOptions options_;
  EpisodeStatus status_;
  CounterRng rng_;
};

struct Env::Snapshot {
  std::uint64_t episode_index = 0;
  std::uint64_t step_count = 0;
  StageConfig stage;
  StageConfig pending_stage;
  EpisodeParams params;
  WorldState world;
  std::vector<BallTracker::Snapshot> tracker_history;
  std::size_t tracker_head = 0;
  BallObservation ball_obs;
  std::deque<DelayQueue::Entry> delay_entries;
  ActionVector delay_active{};
  double delay_last_time = 0.0;
  Command command;
  ActionVector prev_action{};
  double u_fx_baseline = 0.0;
  ScenarioOptions options;
  EpisodeStatus status;
  std::uint64_t rng_key = 0;
  std::uint64_t rng_counter = 0;
};

/// N independent lanes advanced in lockstep.
class EnvBatch {
 public:
  EnvBatch(const EnvConfig& cfg, std::uint64_t run_seed, std::size_t num_lanes);

  std::size_t size() const { return lanes_.size(); }
  Env& operator[](std::size_t i) { return lanes_[i]; }
  const Env& operator[](std::size_t i) const { return lanes_[i]; }

  /// All lanes adopt `stage` at their next reset. Only call between updates.
  void set_stage(const StageConfig& stage);
  const StageConfig& stage() const { return stage_; }

 private:
  std::vector<Env> lanes_;
  StageConfig stage_;
};

}  // namespace dribble
