#include "dribble/config.hpp"

#include <boost/crc.hpp>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <utility>

#include "dribble/common.hpp"

namespace dribble {

using Json = nlohmann::ordered_json;

MlpSpec PolicyConfig::actor() const {
  MlpSpec s = actor_spec(kObsDim, actor_hidden);
  s.activation = activation;
  return s;
}

MlpSpec PolicyConfig::critic() const {
  MlpSpec s = critic_spec(kPrivDim, critic_hidden);
  s.activation = activation;
  return s;
}

void RunConfig::validate() const {
  env.validate();
  env.stage1.validate();
  env.stage2.validate();
  ppo.validate();
  if (policy.actor_hidden.empty() || policy.critic_hidden.empty()) throw ConfigError("policy: hidden layer lists must be non-empty");
  for (std::size_t h : policy.actor_hidden)
    if (h == 0) throw ConfigError("policy.actor_hidden: widths must be >= 1");
  for (std::size_t h : policy.critic_hidden)
    if (h == 0) throw ConfigError("policy.critic_hidden: widths must be >= 1");
  if (!(policy.init_log_std >= kLogStdMin && policy.init_log_std <= kLogStdMax))
    throw ConfigError("policy.init_log_std must lie in [-4, 1]");
  if (train.checkpoint_every == 0) throw ConfigError("train.checkpoint_every must be >= 1");
  if (train.total_updates() == 0) throw ConfigError("train: at least one update is required");
  if (train.metric_window == 0) throw ConfigError("train.metric_window must be >= 1");
  if (train.control_file.empty()) throw ConfigError("train.control_file must be non-empty");
}

namespace {

template <typename E>
using Choices = std::vector<std::pair<E, const char*>>;

// Serializes one field at a time into a JSON object.
class Writer {
 public:
  explicit Writer(Json& j) : j_(j) {}

  template <typename T>
  void operator()(const char* key, T& value) {
    j_[key] = value;
  }
  void operator()(const char* key, Range& r) { j_[key] = Json::array({r.lo, r.hi}); }
  void operator()(const char* key, Vec2& v) { j_[key] = Json::array({v.x, v.y}); }
  template <typename E>
  void choice(const char* key, E& value, const Choices<E>& names) {
    for (const auto& [e, name] : names)
      if (e == value) j_[key] = name;
  }
  void nested(const char* key, const std::function<void(Writer&)>& fn) {
    Json sub = Json::object();
    Writer w(sub);
    fn(w);
    j_[key] = std::move(sub);
  }

 private:
  Json& j_;
};

// Overrides fields present in a JSON object and rejects keys no field claimed.
class Reader {
 public:
  Reader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where("") + " must be an object");
  }

  template <typename T>
  void operator()(const char* key, T& value) {
    const Json* v = take(key);
    if (!v) return;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v->is_boolean()) throw ConfigError("");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v->is_number_integer()) throw ConfigError("");
        if (std::is_unsigned_v<T> && !v->is_number_unsigned()) throw ConfigError("");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v->is_number()) throw ConfigError("");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v->is_string()) throw ConfigError("");
      } else {
        if (!v->is_array()) throw ConfigError("");
        for (const auto& e : *v)
          if (!e.is_number_unsigned()) throw ConfigError("");
      }
      value = v->template get<T>();
    } catch (const std::exception&) {
      throw ConfigError(where(key) + ": wrong type (got " + v->dump() + ")");
    }
  }
  void operator()(const char* key, Range& r) {
    const Json* v = take(key);
    if (!v) return;
    if (!v->is_array() || v->size() != 2 || !(*v)[0].is_number() || !(*v)[1].is_number())
      throw ConfigError(where(key) + ": expected [min, max]");
    r = {(*v)[0].get<double>(), (*v)[1].get<double>()};
  }
  void operator()(const char* key, Vec2& p) {
    const Json* v = take(key);
    if (!v) return;
    if (!v->is_array() || v->size() != 2 || !(*v)[0].is_number() || !(*v)[1].is_number())
      throw ConfigError(where(key) + ": expected [x, y]");
    p = {(*v)[0].get<double>(), (*v)[1].get<double>()};
  }
  template <typename E>
  void choice(const char* key, E& value, const Choices<E>& names) {
    const Json* v = take(key);
    if (!v) return;
    std::string options;
    if (v->is_string()) {
      for (const auto& [e, name] : names) {
        if (v->get<std::string>() == name) {
          value = e;
          return;
        }
      }
    }
    for (const auto& [e, name] : names) options += std::string(options.empty() ? "" : ", ") + name;
    throw ConfigError(where(key) + ": expected one of " + options + " (got " + v->dump() + ")");
  }
  void nested(const char* key, const std::function<void(Reader&)>& fn) {
    const Json* v = take(key);
    if (!v) return;
    Reader r(*v, where(key));
    fn(r);
    r.finish();
  }
  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!used_.contains(k)) throw ConfigError(where(k) + ": unknown key");
    }
  }

 private:
  const Json* take(const char* key) {
    used_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }
  std::string where(const std::string& key) const {
    if (path_.empty()) return key.empty() ? "config" : key;
    return key.empty() ? path_ : path_ + "." + key;
  }

  const Json& j_;
  std::string path_;
  std::set<std::string> used_;
};

template <typename V>
void visit(V& v, PhysicsConstants& k) {
  v("accel_scale", k.accel_scale);
  v("body_damping", k.body_damping);
  v("v_max", k.v_max);
  v("yaw_rate_max", k.yaw_rate_max);
  v("head_rate_max", k.head_rate_max);
  v("gait_omega", k.gait_omega);
  v("k0", k.k0);
  v("k1", k.k1);
  v("dv_max", k.dv_max);
  v("r_reach", k.r_reach);
  v("d_foot", k.d_foot);
  v("l_foot", k.l_foot);
  v("body_radius", k.body_radius);
  v("rolling_decel_per_friction", k.rolling_decel_per_friction);
  v("robot_jitter_ratio", k.robot_jitter_ratio);
  v("contact_window", k.contact_window);
}

template <typename V>
void visit(V& v, CameraModel& c) {
  v("hfov", c.hfov);
  v("vfov", c.vfov);
  v("mount_height", c.mount_height);
  v("mount_forward", c.mount_forward);
  v("mount_pitch", c.mount_pitch);
  v("latency", c.latency);
  v("noise_sigma", c.noise_sigma);
  v("hfov_axis_scale", c.hfov_axis_scale);
  v("vfov_axis_scale", c.vfov_axis_scale);
  v("memory_horizon", c.memory_horizon);
  v("max_range", c.max_range);
}

template <typename V>
void visit(V& v, RewardParams& r) {
  v("ball_vel_sigma", r.ball_vel_sigma);
  v("chase_scale", r.chase_scale);
  v.choice("ball_vel_mode", r.ball_vel_mode,
           Choices<BallVelocityMode>{{BallVelocityMode::kFull2d, "full_2d"}, {BallVelocityMode::kProjected, "projected"}});
  v("gait_amplitude", r.gait_amplitude);
  v("gait_sigma", r.gait_sigma);
  v("gait_walk_speed", r.gait_walk_speed);
  v("gait_baseline_tau", r.gait_baseline_tau);
}

template <typename V>
void visit(V& v, RandomizationRanges& r) {
  v("action_scale", r.action_scale);
  v("terrain_friction", r.terrain_friction);
  v("mass_drag", r.mass_drag);
  v("com_offset", r.com_offset);
  v("gain_p_scale", r.gain_p_scale);
  v("gain_d_scale", r.gain_d_scale);
  v("torque_scale", r.torque_scale);
  v("joint_pos_noise", r.joint_pos_noise);
  v("actuation_delay", r.actuation_delay);
  v("roughness", r.roughness);
}

template <typename V>
void visit(V& v, CommandConfig& c) {
  v("resample_period", c.resample_period);
  v("v_cmd_max", c.v_cmd_max);
  v("speed_min", c.speed_min);
  v("speed_max", c.speed_max);
  v("zero_probability", c.zero_probability);
}

template <typename V>
void visit(V& v, RewardWeights& w) {
  v("ball_vel", w.ball_vel);
  v("chase", w.chase);
  v("in_view", w.in_view);
  v("gait", w.gait);
  v("upright_proxy", w.upright_proxy);
  v("action_rate", w.action_rate);
  v("alive", w.alive);
}

template <typename V>
void visit(V& v, StageConfig& s) {
  v("ball_spawn_range", s.ball_spawn_range);
  v("fov_scale", s.fov_scale);
  v("gait_reference_enabled", s.gait_reference_enabled);
  v.nested("weights", [&](V& sub) { visit(sub, s.weights); });
}

template <typename V>
void visit(V& v, EnvConfig& e) {
  v("dt", e.dt);
  v("t_max", e.t_max);
  v("d_lost", e.d_lost);
  v("arena_half_size", e.arena_half_size);
  v("randomize", e.randomize);
  v.nested("physics", [&](V& sub) { visit(sub, e.physics); });
  v.nested("camera", [&](V& sub) { visit(sub, e.camera); });
  v.nested("rewards", [&](V& sub) { visit(sub, e.rewards); });
  v.nested("randomization", [&](V& sub) { visit(sub, e.randomization); });
  v.nested("command", [&](V& sub) { visit(sub, e.command); });
  v.nested("stage1", [&](V& sub) { visit(sub, e.stage1); });
  v.nested("stage2", [&](V& sub) { visit(sub, e.stage2); });
}

template <typename V>
void visit(V& v, PpoHyperparams& p) {
  v("gamma", p.gamma);
  v("gae_lambda", p.gae_lambda);
  v("clip_epsilon", p.clip_epsilon);
  v("learning_rate", p.learning_rate);
  v("linear_lr_decay", p.linear_lr_decay);
  v("epochs_per_update", p.epochs_per_update);
  v("minibatch_count", p.minibatch_count);
  v("value_coef", p.value_coef);
  v("entropy_coef", p.entropy_coef);
  v("rollout_horizon", p.rollout_horizon);
  v("num_lanes", p.num_lanes);
  v("max_grad_norm", p.max_grad_norm);
  v("adam_beta1", p.adam_beta1);
  v("adam_beta2", p.adam_beta2);
  v("adam_epsilon", p.adam_epsilon);
  v("bootstrap_on_timeout", p.bootstrap_on_timeout);
}

template <typename V>
void visit(V& v, PolicyConfig& p) {
  v("actor_hidden", p.actor_hidden);
  v("critic_hidden", p.critic_hidden);
  v.choice("activation", p.activation, Choices<Activation>{{Activation::kElu, "elu"}});
  v("init_log_std", p.init_log_std);
}

template <typename V>
void visit(V& v, TrainConfig& t) {
  v("stage1_updates", t.stage1_updates);
  v("stage2_updates", t.stage2_updates);
  v("checkpoint_every", t.checkpoint_every);
  v.choice("trigger", t.trigger, Choices<StageTrigger>{{StageTrigger::kManual, "manual"}, {StageTrigger::kMetric, "metric"}});
  v("metric_threshold", t.metric_threshold);
  v("metric_window", t.metric_window);
  v("control_file", t.control_file);
}

template <typename V>
void visit(V& v, RunConfig& c) {
  v("seed", c.seed);
  v.nested("env", [&](V& sub) { visit(sub, c.env); });
  v.nested("ppo", [&](V& sub) { visit(sub, c.ppo); });
  v.nested("policy", [&](V& sub) { visit(sub, c.policy); });
  v.nested("train", [&](V& sub) { visit(sub, c.train); });
}

}  // namespace

Json to_json(const RunConfig& cfg) {
  Json j = Json::object();
  RunConfig copy = cfg;
  Writer w(j);
  visit(w, copy);
  return j;
}

RunConfig run_config_from_json(const Json& j) {
  RunConfig cfg;
  Reader r(j, "");
  visit(r, cfg);
  r.finish();
  cfg.env.stage1.stage_id = 1;
  cfg.env.stage2.stage_id = 2;
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config file '" + path + "': " + e.what());
  }
  return run_config_from_json(j);
}

std::uint32_t config_digest(const RunConfig& cfg) {
  const std::string text = to_json(cfg).dump();
  boost::crc_32_type crc;
  crc.process_bytes(text.data(), text.size());
  return crc.checksum();
}

}  // namespace dribble
