#pragma once

#include <deque>
#include <string>
#include <utility>
#include <vector>

#include "dribble/dynamics.hpp"
#include "dribble/rng.hpp"

namespace dribble {

struct Range {
  double lo = 0.0;
  double hi = 0.0;
  friend bool operator==(const Range&, const Range&) = default;
};

/// Planar analogs of the full-robot randomization table. Each field documents its mapping.
struct RandomizationRanges {
  Range action_scale{0.95, 1.05};       // -> PhysicsParams::action_scale
  Range terrain_friction{0.5, 1.5};     // -> terrain_friction, rolling_decel
  Range mass_drag{-0.1, 0.1};           // base mass +-2 kg -> mass_offset
  Range com_offset{-0.04, 0.04};        // base CoM -> com_offset (x and y drawn independently)
  Range gain_p_scale{0.7, 1.3};         // joint Kp -> robot_accel_gain
  Range gain_d_scale{0.8, 1.2};         // joint Kd -> head_rate_gain
  Range torque_scale{0.95, 1.00};       // joint torque -> kick_gain
  Range joint_pos_noise{-0.02, 0.02};   // joint position -> head-joint observation offset (pan, tilt)
  Range actuation_delay{0.0, 0.020};    // s
  Range roughness{0.0, 0.05};           // rad kick-direction sigma; not in the table, rough-terrain analog

  /// Throws ConfigError on an inverted or non-finite range.
  void validate() const;
  std::vector<std::pair<std::string, Range>> named() const;
};

struct EpisodeParams {
  PhysicsParams physics;
  double actuation_delay = 0.0;
  double head_pan_obs_offset = 0.0;
  double head_tilt_obs_offset = 0.0;
};

/// Draws every parameter independently and uniformly from its closed range.
EpisodeParams sample_episode_params(const RandomizationRanges& ranges, const PhysicsConstants& k, CounterRng& rng);

/// Actuation delay: emits the newest action whose timestamp is <= now - delay, else zero.
class DelayQueue {
 public:
  DelayQueue() = default;
  explicit DelayQueue(double delay) : delay_(delay) {}

  /// Pushes `action` stamped `now` and returns the action active at now - delay.
  /// Throws ContractViolation if `now` goes backwards.
  ActionVector delayed_action(const ActionVector& action, double now);

  void reset(double delay);
  double delay() const { return delay_; }

  struct Entry {
    double stamp;
    ActionVector action;
  };
  const std::deque<Entry>& entries() const { return entries_; }
  ActionVector active() const { return active_; }
  double last_time() const { return last_time_; }
  void restore(std::deque<Entry> entries, ActionVector active, double last_time);

 private:
  double delay_ = 0.0;
  std::deque<Entry> entries_;
  ActionVector active_{};
  double last_time_ = -1e300;
};

}  // namespace dribble
