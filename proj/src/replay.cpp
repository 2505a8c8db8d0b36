#include "dribble/replay.hpp"

#include <charconv>
#include <cmath>

#include "dribble/common.hpp"

namespace dribble {

using Json = nlohmann::ordered_json;

CommandScript::CommandScript(std::vector<std::pair<double, Vec2>> keyframes) : keyframes_(std::move(keyframes)) {
  if (keyframes_.empty()) throw ConfigError("command script: needs at least one keyframe");
  if (keyframes_.front().first != 0.0) throw ConfigError("command script: first keyframe must be at t=0");
  for (std::size_t i = 0; i < keyframes_.size(); ++i) {
    const auto& [t, v] = keyframes_[i];
    if (!std::isfinite(t) || !std::isfinite(v.x) || !std::isfinite(v.y)) throw ConfigError("command script: non-finite value");
    if (i > 0 && t <= keyframes_[i - 1].first) throw ConfigError("command script: times must increase strictly");
  }
}

namespace {

double parse_number(std::string_view s) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw ConfigError("command script: bad number '" + std::string(s) + "'");
  return v;
}

}  // namespace

CommandScript CommandScript::parse(std::string_view text) {
  std::vector<std::pair<double, Vec2>> frames;
  while (!text.empty()) {
    const auto semi = text.find(';');
    const std::string_view item = text.substr(0, semi);
    text = semi == std::string_view::npos ? std::string_view{} : text.substr(semi + 1);
    if (item.empty()) continue;
    const auto colon = item.find(':');
    const auto comma = item.find(',', colon == std::string_view::npos ? 0 : colon);
    if (colon == std::string_view::npos || comma == std::string_view::npos)
      throw ConfigError("command script: expected 't:vx,vy', got '" + std::string(item) + "'");
    frames.push_back({parse_number(item.substr(0, colon)),
                      Vec2{parse_number(item.substr(colon + 1, comma - colon - 1)), parse_number(item.substr(comma + 1))}});
  }
  return CommandScript(std::move(frames));
}

CommandScript CommandScript::standard() {
  const double d = std::sqrt(0.5);
  return CommandScript({{0.0, {1.0, 0.0}}, {5.0, {d, d}}, {10.0, {0.0, 1.0}}, {15.0, {0.0, 0.0}}});
}

Vec2 CommandScript::at(double t) const {
  Vec2 v = keyframes_.front().second;
  for (const auto& [kt, kv] : keyframes_) {
    if (kt > t) break;
    v = kv;
  }
  return v;
}

void write_replay(std::ostream& out, Controller& controller, const EnvConfig& env_cfg, const PlayOptions& options,
                  const Json& header_extra) {
  if (!(options.duration > 0.0)) throw ConfigError("play: duration must be positive");
  const EnvConfig cfg = evaluation_env_config(env_cfg);
  Env env(cfg, derive_key(options.seed, StreamKind::kEval), 0);
  env.set_stage(cfg.stage2);
  env.reset_scenario(scenario_world(options.robot_start, 0.0, options.ball_start), Command{options.script.at(0.0)},
                     ScenarioOptions{false, false, false});
  controller.reset();

  Json header = Json::object();
  header["type"] = "header";
  header["format"] = "dribble-replay";
  header["version"] = kReplayFormatVersion;
  header["seed"] = options.seed;
  header["dt"] = cfg.dt;
  header["duration"] = options.duration;
  header["observation_layout"] = observation_layout_descriptor();
  Json script = Json::array();
  for (const auto& [t, v] : options.script.keyframes()) script.push_back(Json::array({t, v.x, v.y}));
  header["command_script"] = script;
  for (const auto& [k, v] : header_extra.items()) header[k] = v;
  out << header.dump() << "\n";

  const double t0 = env.world().t;
  const auto steps = static_cast<std::size_t>(std::llround(options.duration / cfg.dt));
  for (std::size_t i = 0; i < steps; ++i) {
    const Vec2 cmd = options.script.at(env.world().t - t0);
    env.set_command(Command{cmd});
    const Observation obs = env.observation();
    const ActionVector action = controller.act(env, obs);
    const Env::StepResult r = env.step(action);
    const WorldState& w = env.world();

    Json rec = Json::object();
    rec["type"] = "step";
    rec["t"] = w.t - t0;
    rec["state"] = Json{{"robot",
                         {{"x", w.robot.position.x},
                          {"y", w.robot.position.y},
                          {"yaw", w.robot.yaw},
                          {"vx", w.robot.linear_velocity.x},
                          {"vy", w.robot.linear_velocity.y},
                          {"head_pan", w.robot.head_pan},
                          {"head_tilt", w.robot.head_tilt},
                          {"gait_phase", w.robot.gait_phase}}},
                        {"ball",
                         {{"x", w.ball.position.x},
                          {"y", w.ball.position.y},
                          {"vx", w.ball.velocity.x},
                          {"vy", w.ball.velocity.y}}},
                        {"ball_visible", env.tracker().observation().visible}};
    rec["action"] = Json(std::vector<double>(action.u.begin(), action.u.end()));
    Json terms = Json::object();
    for (std::size_t k = 0; k < kRewardTermCount; ++k)
      terms[std::string(reward_term_name(static_cast<RewardTerm>(k)))] = r.reward.terms.values[k];
    rec["reward"] = Json{{"total", r.reward.total}, {"terms", terms}};
    rec["command"] = Json::array({cmd.x, cmd.y});
    out << rec.dump() << "\n";
  }
}

}  // namespace dribble
