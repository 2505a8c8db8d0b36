#include "dribble/randomization.hpp"

#include <cmath>

#include "dribble/common.hpp"

namespace dribble {

std::vector<std::pair<std::string, Range>> RandomizationRanges::named() const {
  return {{"action_scale", action_scale},   {"terrain_friction", terrain_friction},
          {"mass_drag", mass_drag},         {"com_offset", com_offset},
          {"gain_p_scale", gain_p_scale},   {"gain_d_scale", gain_d_scale},
          {"torque_scale", torque_scale},   {"joint_pos_noise", joint_pos_noise},
          {"actuation_delay", actuation_delay}, {"roughness", roughness}};
}

void RandomizationRanges::validate() const {
  for (const auto& [name, r] : named()) {
    if (!std::isfinite(r.lo) || !std::isfinite(r.hi)) throw ConfigError("randomization." + name + ": non-finite bound");
    if (r.lo > r.hi) throw ConfigError("randomization." + name + ": inverted range (min > max)");
  }
  if (actuation_delay.lo < 0.0) throw ConfigError("randomization.actuation_delay: negative delay");
  if (roughness.lo < 0.0) throw ConfigError("randomization.roughness: negative sigma");
  if (mass_drag.lo <= -1.0) throw ConfigError("randomization.mass_drag: must stay above -1");
}

namespace {

double draw(const Range& r, CounterRng& rng) {
  // Degenerate ranges return the point exactly.
  if (r.lo == r.hi) return r.lo;
  return r.lo + (r.hi - r.lo) * rng.uniform01();
}

}  // namespace

EpisodeParams sample_episode_params(const RandomizationRanges& ranges, const PhysicsConstants& k, CounterRng& rng) {
  ranges.validate();
  EpisodeParams out;
  PhysicsParams& p = out.physics;
  p.action_scale = draw(ranges.action_scale, rng);
  p.terrain_friction = draw(ranges.terrain_friction, rng);
  p.rolling_decel = k.rolling_decel_per_friction * p.terrain_friction;
  p.mass_offset = draw(ranges.mass_drag, rng);
  p.com_offset.x = draw(ranges.com_offset, rng);
  p.com_offset.y = draw(ranges.com_offset, rng);
  p.robot_accel_gain = draw(ranges.gain_p_scale, rng);
  p.head_rate_gain = draw(ranges.gain_d_scale, rng);
  p.kick_gain = draw(ranges.torque_scale, rng);
  out.head_pan_obs_offset = draw(ranges.joint_pos_noise, rng);
  out.head_tilt_obs_offset = draw(ranges.joint_pos_noise, rng);
  out.actuation_delay = draw(ranges.actuation_delay, rng);
  p.roughness_sigma = draw(ranges.roughness, rng);
  return out;
}

ActionVector DelayQueue::delayed_action(const ActionVector& action, double now) {
  if (now < last_time_) throw ContractViolation("DelayQueue: time went backwards");
  last_time_ = now;
  entries_.push_back(Entry{now, action});
  const double cutoff = now - delay_ + 1e-9;
  while (!entries_.empty() && entries_.front().stamp <= cutoff) {
    active_ = entries_.front().action;
    entries_.pop_front();
  }
  return active_;
}

void DelayQueue::reset(double delay) {
  if (!(delay >= 0.0)) throw ContractViolation("DelayQueue: negative delay");
  delay_ = delay;
  entries_.clear();
  active_ = ActionVector{};
  last_time_ = -1e300;
}

void DelayQueue::restore(std::deque<Entry> entries, ActionVector active, double last_time) {
  entries_ = std::move(entries);
  active_ = active;
  last_time_ = last_time;
}

}  // namespace dribble
