#include "dribble/checkpoint.hpp"

#include <bit>
#include <boost/crc.hpp>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "dribble/common.hpp"

namespace dribble {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

class Out {
 public:
  template <typename T>
  void raw(const T& v) {
    const char* p = reinterpret_cast<const char*>(&v);
    buf.append(p, sizeof(T));
  }
  void operator()(double& v) { raw(v); }
  void operator()(float& v) { raw(v); }
  void operator()(std::uint64_t& v) { raw(v); }
  void operator()(std::uint32_t& v) { raw(v); }
  void operator()(std::int32_t& v) { raw(v); }
  void operator()(bool& v) { raw(static_cast<std::uint8_t>(v ? 1 : 0)); }
  void size(std::size_t& n) { raw(static_cast<std::uint64_t>(n)); }
  void floats(std::span<float> xs) {
    std::uint64_t n = xs.size();
    raw(n);
    buf.append(reinterpret_cast<const char*>(xs.data()), xs.size() * sizeof(float));
  }
  void string(std::string& s) {
    raw(static_cast<std::uint64_t>(s.size()));
    buf.append(s);
  }
  static constexpr bool kReading = false;

  std::string buf;
};

class In {
 public:
  explicit In(std::string_view bytes) : b_(bytes) {}

  template <typename T>
  T raw() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, b_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  void operator()(double& v) { v = raw<double>(); }
  void operator()(float& v) { v = raw<float>(); }
  void operator()(std::uint64_t& v) { v = raw<std::uint64_t>(); }
  void operator()(std::uint32_t& v) { v = raw<std::uint32_t>(); }
  void operator()(std::int32_t& v) { v = raw<std::int32_t>(); }
  void operator()(bool& v) {
    const auto x = raw<std::uint8_t>();
    if (x > 1) throw CorruptCheckpoint("checkpoint: invalid boolean byte");
    v = x == 1;
  }
  void size(std::size_t& n) {
    const auto v = raw<std::uint64_t>();
    if (v > b_.size()) throw CorruptCheckpoint("checkpoint: implausible element count");
    n = static_cast<std::size_t>(v);
  }
  void floats(std::span<float> xs) {
    const auto n = raw<std::uint64_t>();
    if (n != xs.size())
      throw LayoutMismatch("checkpoint: parameter block has " + std::to_string(n) + " values, network expects " +
                           std::to_string(xs.size()));
    need(n * sizeof(float));
    std::memcpy(xs.data(), b_.data() + pos_, n * sizeof(float));
    pos_ += n * sizeof(float);
  }
  void string(std::string& s) {
    std::size_t n = 0;
    size(n);
    need(n);
    s.assign(b_.data() + pos_, n);
    pos_ += n;
  }
  bool at_end() const { return pos_ == b_.size(); }
  static constexpr bool kReading = true;

 private:
  void need(std::size_t n) const {
    if (b_.size() - pos_ < n) throw CorruptCheckpoint("checkpoint: unexpected end of data");
  }
  std::string_view b_;
  std::size_t pos_ = 0;
};

template <typename A>
void io(A& a, Vec2& v) {
  a(v.x);
  a(v.y);
}

template <typename A>
void io(A& a, ActionVector& v) {
  for (double& x : v.u) a(x);
}

template <typename A>
void io(A& a, RobotState& r) {
  io(a, r.position);
  a(r.yaw);
  io(a, r.linear_velocity);
  a(r.yaw_rate);
  a(r.head_pan);
  a(r.head_tilt);
  a(r.head_pan_rate);
  a(r.head_tilt_rate);
  a(r.gait_phase);
}

template <typename A>
void io(A& a, BallState& b) {
  io(a, b.position);
  io(a, b.velocity);
}

template <typename A>
void io(A& a, WorldState& w) {
  io(a, w.robot);
  io(a, w.ball);
  a(w.t);
  a(w.contact_latched);
  io(a, w.last_kick);
}

template <typename A>
void io(A& a, StageConfig& s) {
  a(s.stage_id);
  a(s.ball_spawn_range.lo);
  a(s.ball_spawn_range.hi);
  a(s.fov_scale);
  RewardWeights& w = s.weights;
  for (double* x : {&w.ball_vel, &w.chase, &w.in_view, &w.gait, &w.upright_proxy, &w.action_rate, &w.alive}) a(*x);
  a(s.gait_reference_enabled);
}

template <typename A>
void io(A& a, EpisodeParams& e) {
  PhysicsParams& p = e.physics;
  a(p.terrain_friction);
  a(p.rolling_decel);
  a(p.robot_accel_gain);
  a(p.head_rate_gain);
  a(p.kick_gain);
  a(p.mass_offset);
  io(a, p.com_offset);
  a(p.roughness_sigma);
  a(p.restitution);
  a(p.action_scale);
  a(e.actuation_delay);
  a(e.head_pan_obs_offset);
  a(e.head_tilt_obs_offset);
}

template <typename A>
void io(A& a, BallObservation& o) {
  io(a, o.rel_position);
  a(o.visible);
  a(o.age);
  a(o.stale);
  a(o.unseen_steps);
}

template <typename A, typename T, typename F>
void io_vector(A& a, std::vector<T>& xs, F&& each) {
  std::size_t n = xs.size();
  a.size(n);
  if constexpr (A::kReading) xs.resize(n);
  for (T& x : xs) each(x);
}

template <typename A>
void io(A& a, Env::Snapshot& s) {
  a(s.episode_index);
  a(s.step_count);
  io(a, s.stage);
  io(a, s.pending_stage);
  io(a, s.params);
  io(a, s.world);
  io_vector(a, s.tracker_history, [&](BallTracker::Snapshot& h) {
    io(a, h.robot);
    io(a, h.ball);
  });
  a.size(s.tracker_head);
  io(a, s.ball_obs);
  std::vector<DelayQueue::Entry> entries(s.delay_entries.begin(), s.delay_entries.end());
  io_vector(a, entries, [&](DelayQueue::Entry& e) {
    a(e.stamp);
    io(a, e.action);
  });
  if constexpr (A::kReading) s.delay_entries.assign(entries.begin(), entries.end());
  io(a, s.delay_active);
  a(s.delay_last_time);
  io(a, s.command.v_cmd);
  io(a, s.prev_action);
  a(s.u_fx_baseline);
  a(s.options.auto_command);
  a(s.options.terminate);
  a(s.options.randomize);
  a(s.status.done);
  std::uint32_t reason = static_cast<std::uint32_t>(s.status.reason);
  a(reason);
  if constexpr (A::kReading) {
    if (reason > static_cast<std::uint32_t>(TerminationReason::kOutOfBounds))
      throw CorruptCheckpoint("checkpoint: invalid termination reason");
    s.status.reason = static_cast<TerminationReason>(reason);
  }
  a(s.status.t);
  a(s.rng_key);
  a(s.rng_counter);
}

template <typename A>
void io(A& a, ResumeState& r) {
  io_vector(a, r.lanes, [&](Env::Snapshot& s) { io(a, s); });
  io_vector(a, r.rollout.episode_return, [&](double& x) { a(x); });
  io_vector(a, r.rollout.episode_length, [&](std::uint64_t& x) { a(x); });
  a(r.rollout.global_step);
  io_vector(a, r.chase_history, [&](double& x) { a(x); });
}

void write_spec(Out& o, const MlpSpec& s) {
  o.raw(static_cast<std::uint32_t>(s.input_dim));
  o.raw(static_cast<std::uint32_t>(s.hidden_dims.size()));
  for (std::size_t h : s.hidden_dims) o.raw(static_cast<std::uint32_t>(h));
  o.raw(static_cast<std::uint32_t>(s.output_dim));
  o.raw(static_cast<std::uint32_t>(s.activation));
}

MlpSpec read_spec(In& in) {
  MlpSpec s;
  s.input_dim = in.raw<std::uint32_t>();
  const std::uint32_t n = in.raw<std::uint32_t>();
  if (n > 64) throw CorruptCheckpoint("checkpoint: implausible layer count");
  for (std::uint32_t i = 0; i < n; ++i) s.hidden_dims.push_back(in.raw<std::uint32_t>());
  s.output_dim = in.raw<std::uint32_t>();
  const std::uint32_t act = in.raw<std::uint32_t>();
  if (act != static_cast<std::uint32_t>(Activation::kElu)) throw CorruptCheckpoint("checkpoint: unknown activation");
  s.activation = Activation::kElu;
  for (std::size_t h : s.hidden_dims)
    if (h == 0 || h > (1u << 20)) throw CorruptCheckpoint("checkpoint: implausible layer width");
  if (s.input_dim == 0 || s.output_dim == 0) throw CorruptCheckpoint("checkpoint: zero network dimension");
  return s;
}

template <typename A>
void io_model(A& a, PolicyModel<float>& m) {
  for (auto blk : m.blocks()) a.floats(blk);
}

std::uint32_t crc32(std::string_view bytes) {
  boost::crc_32_type crc;
  crc.process_bytes(bytes.data(), bytes.size());
  return crc.checksum();
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt_in) {
  Checkpoint c = ckpt_in;
  Out o;
  o.buf.append(kCheckpointMagic, sizeof kCheckpointMagic);
  o.raw(kCheckpointFormatVersion);
  o.raw(c.layout_version);
  write_spec(o, c.model.actor.spec());
  write_spec(o, c.model.critic.spec());
  io_model(o, c.model);
  o(c.adam.step);
  io_model(o, c.adam.m);
  io_model(o, c.adam.v);
  o(c.counters.update);
  o(c.counters.env_steps);
  o(c.counters.stage_id);
  o(c.counters.stage_switch_update);
  o(c.config_digest);
  o.string(c.config_json);
  bool has_resume = c.resume.has_value();
  o(has_resume);
  if (has_resume) io(o, *c.resume);
  o.raw(crc32(o.buf));
  return std::move(o.buf);
}

Checkpoint parse_checkpoint(std::string_view bytes) {
  constexpr std::size_t kHeader = sizeof kCheckpointMagic + 8;
  if (bytes.size() < kHeader + 4) throw CorruptCheckpoint("checkpoint: file too short (" + std::to_string(bytes.size()) + " bytes)");
  if (std::memcmp(bytes.data(), kCheckpointMagic, sizeof kCheckpointMagic) != 0)
    throw CorruptCheckpoint("checkpoint: bad magic, not a checkpoint file");
  std::uint32_t stored = 0;
  std::memcpy(&stored, bytes.data() + bytes.size() - 4, 4);
  const std::string_view body = bytes.substr(0, bytes.size() - 4);
  if (crc32(body) != stored) throw CorruptCheckpoint("checkpoint: digest mismatch (truncated or modified file)");

  In in(body);
  in.raw<std::array<char, 8>>();
  const auto format = in.raw<std::uint32_t>();
  if (format != kCheckpointFormatVersion)
    throw CheckpointError("checkpoint: format version " + std::to_string(format) + " is not supported (this build reads " +
                          std::to_string(kCheckpointFormatVersion) + ")");
  Checkpoint c;
  c.layout_version = in.raw<std::uint32_t>();
  const MlpSpec actor = read_spec(in);
  const MlpSpec critic = read_spec(in);
  if (c.layout_version != kObservationLayoutVersion || actor.input_dim != kObsDim || critic.input_dim != kPrivDim ||
      actor.output_dim != kActionDim || critic.output_dim != 1) {
    throw LayoutMismatch("checkpoint: observation layout v" + std::to_string(c.layout_version) + " with actor input " +
                         std::to_string(actor.input_dim) + " and critic input " + std::to_string(critic.input_dim) +
                         " does not match this build (layout v" + std::to_string(kObservationLayoutVersion) + ", " +
                         std::to_string(kObsDim) + "/" + std::to_string(kPrivDim) + ")");
  }
  c.model = PolicyModel<float>(actor, critic);
  c.adam = AdamState<float>(c.model);
  io_model(in, c.model);
  in(c.adam.step);
  io_model(in, c.adam.m);
  io_model(in, c.adam.v);
  in(c.counters.update);
  in(c.counters.env_steps);
  in(c.counters.stage_id);
  in(c.counters.stage_switch_update);
  in(c.config_digest);
  in.string(c.config_json);
  bool has_resume = false;
  in(has_resume);
  if (has_resume) {
    c.resume.emplace();
    io(in, *c.resume);
  }
  if (!in.at_end()) throw CorruptCheckpoint("checkpoint: trailing bytes after payload");
  return c;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  const std::string bytes = serialize_checkpoint(ckpt);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write checkpoint '" + tmp + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError("short write to '" + tmp + "'");
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint '" + path + "'");
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_checkpoint(bytes);
}

}  // namespace dribble
