#include "dribble/protocol.hpp"

#include <cmath>
#include <set>

namespace dribble::protocol {

std::string_view scenario_name(Scenario s) {
  switch (s) {
    case Scenario::kOpenField: return "open_field";
    case Scenario::kDribbleToTarget: return "dribble_to_target";
    case Scenario::kObstacleAvoidance: return "obstacle_avoidance";
  }
  return "unknown";
}

std::optional<Scenario> parse_scenario(std::string_view name) {
  if (name == "open_field") return Scenario::kOpenField;
  if (name == "dribble_to_target") return Scenario::kDribbleToTarget;
  if (name == "obstacle_avoidance") return Scenario::kObstacleAvoidance;
  return std::nullopt;
}

namespace {

std::optional<std::string> only_keys(const Json& j, std::initializer_list<std::string_view> allowed) {
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || k == a;
    if (!ok) return "unknown field '" + k + "'";
  }
  return std::nullopt;
}

std::string_view result_name(TaskResult r) {
  switch (r) {
    case TaskResult::kRunning: return "running";
    case TaskResult::kSuccess: return "success";
    case TaskResult::kFailure: return "failure";
  }
  return "running";
}

Json vec(Vec2 v) { return Json::array({v.x, v.y}); }

}  // namespace

std::variant<ClientMessage, std::string> parse_client_message(std::string_view text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::exception&) {
    return std::string("malformed message: not valid JSON");
  }
  if (!j.is_object()) return std::string("malformed message: expected a JSON object");
  auto type_it = j.find("type");
  if (type_it == j.end() || !type_it->is_string()) return std::string("malformed message: missing string field 'type'");
  const std::string type = type_it->get<std::string>();

  if (type == "command") {
    if (auto e = only_keys(j, {"type", "vx", "vy"})) return "command: " + *e;
    CommandMsg m;
    for (auto [key, dst] : {std::pair{"vx", &m.vx}, std::pair{"vy", &m.vy}}) {
      auto it = j.find(key);
      if (it == j.end() || !it->is_number()) return std::string("command: field '") + key + "' must be a number";
      *dst = it->get<double>();
      if (!std::isfinite(*dst)) return std::string("command: field '") + key + "' must be finite";
    }
    return ClientMessage{m};
  }
  if (type == "reset") {
    if (auto e = only_keys(j, {"type", "scenario"})) return "reset: " + *e;
    auto it = j.find("scenario");
    if (it == j.end() || !it->is_string()) return std::string("reset: field 'scenario' must be a string");
    auto s = parse_scenario(it->get<std::string>());
    if (!s) return "reset: unknown scenario '" + it->get<std::string>() + "'";
    return ClientMessage{ResetMsg{*s}};
  }
  if (type == "pause" || type == "resume") {
    if (auto e = only_keys(j, {"type"})) return type + ": " + *e;
    if (type == "pause") return ClientMessage{PauseMsg{}};
    return ClientMessage{ResumeMsg{}};
  }
  return "unknown message type '" + type + "'";
}

namespace {

Json task_geometry(const TaskSpec& spec) {
  Json g = Json::object();
  g["kind"] = task_kind_name(spec.kind);
  g["target"] = vec(spec.target);
  g["success_radius"] = spec.success_radius;
  g["failure_radius"] = spec.failure_radius;
  Json field = Json::array();
  for (Vec2 p : spec.field_boundary) field.push_back(vec(p));
  g["field_boundary"] = field;
  Json obstacles = Json::array();
  for (const auto& o : spec.obstacles) obstacles.push_back(Json{{"center", vec(o.center)}, {"radius", o.radius}});
  g["obstacles"] = obstacles;
  if (spec.kind == TaskKind::kObstacleAvoidance) {
    g["target_box"] = Json{{"lo", vec(spec.target_box.lo)}, {"hi", vec(spec.target_box.hi)}};
    g["region"] = Json{{"lo", vec(spec.region.lo)}, {"hi", vec(spec.region.hi)}};
  } else {
    g["target_box"] = nullptr;
    g["region"] = nullptr;
  }
  g["timeout"] = spec.timeout;
  return g;
}

}  // namespace

Json make_hello(const HelloInfo& info) {
  Json j = Json::object();
  j["type"] = "hello";
  j["protocol"] = kProtocolVersion;
  j["role"] = info.role == Role::kController ? "controller" : "spectator";
  j["dt"] = info.dt;
  j["stream_hz"] = info.stream_hz;
  j["v_cmd_max"] = info.v_cmd_max;
  j["scenario"] = scenario_name(info.scenario);
  j["observation_layout"] = observation_layout_descriptor();
  return j;
}

Json make_state(const StateSnapshot& s) {
  Json j = Json::object();
  j["type"] = "state";
  j["seq"] = s.seq;
  j["t"] = s.t;
  j["paused"] = s.paused;
  j["scenario"] = scenario_name(s.scenario);
  const RobotState& r = s.world.robot;
  j["robot"] = Json{{"x", r.position.x},   {"y", r.position.y},          {"yaw", r.yaw},
                    {"vx", r.linear_velocity.x}, {"vy", r.linear_velocity.y}, {"head_pan", r.head_pan},
                    {"head_tilt", r.head_tilt}};
  const BallState& b = s.world.ball;
  j["ball"] = Json{{"x", b.position.x}, {"y", b.position.y}, {"vx", b.velocity.x}, {"vy", b.velocity.y}};
  Json fov = Json::array();
  for (Vec2 p : s.fov) fov.push_back(vec(p));
  j["fov"] = fov;
  j["ball_visible"] = s.ball_visible;
  j["command"] = Json{{"vx", s.command.x}, {"vy", s.command.y}};
  Json terms = Json::object();
  Json weighted = Json::object();
  for (std::size_t k = 0; k < kRewardTermCount; ++k) {
    const std::string name(reward_term_name(static_cast<RewardTerm>(k)));
    terms[name] = s.reward.terms.values[k];
    weighted[name] = s.reward.weighted[k];
  }
  j["reward"] = Json{{"total", s.reward.total}, {"terms", terms}, {"weighted", weighted}};
  if (s.task && s.task_spec) {
    j["task"] = Json{{"kind", task_kind_name(s.task_spec->kind)},
                     {"result", result_name(s.task->result)},
                     {"reason", failure_reason_name(s.task->reason)},
                     {"elapsed", s.task->elapsed},
                     {"ball_target_distance", s.task->ball_target_distance},
                     {"entered_outer_zone", s.task->entered_outer_zone},
                     {"geometry", task_geometry(*s.task_spec)}};
  } else {
    j["task"] = nullptr;
  }
  return j;
}

Json make_task_event(Scenario scenario, const TaskStatus& status) {
  Json j = Json::object();
  j["type"] = "event";
  j["event"] = "task_result";
  j["scenario"] = scenario_name(scenario);
  j["result"] = result_name(status.result);
  j["reason"] = failure_reason_name(status.reason);
  j["elapsed"] = status.elapsed;
  return j;
}

Json make_episode_end_event(Scenario scenario, std::string_view reason, double t) {
  Json j = Json::object();
  j["type"] = "event";
  j["event"] = "episode_end";
  j["scenario"] = scenario_name(scenario);
  j["reason"] = reason;
  j["t"] = t;
  return j;
}

Json make_error(std::string_view message) {
  Json j = Json::object();
  j["type"] = "error";
  j["message"] = message;
  return j;
}

// ---- validation -------------------------------------------------------------------------------
// Mirrors docs/protocol.schema.json. Objects are closed: every listed key required, no others.

namespace {

enum class K { kNumber, kInteger, kBool, kString, kPoint, kPointList, kObject, kNullableObject, kAny };

struct Field {
  std::string_view name;
  K kind;
};

std::optional<std::string> check_kind(const Json& v, K kind, const std::string& path) {
  auto bad = [&](std::string_view what) { return std::optional<std::string>(path + ": expected " + std::string(what)); };
  auto is_point = [](const Json& p) { return p.is_array() && p.size() == 2 && p[0].is_number() && p[1].is_number(); };
  switch (kind) {
    case K::kNumber: return v.is_number() ? std::nullopt : bad("number");
    case K::kInteger: return v.is_number_integer() ? std::nullopt : bad("integer");
    case K::kBool: return v.is_boolean() ? std::nullopt : bad("boolean");
    case K::kString: return v.is_string() ? std::nullopt : bad("string");
    case K::kPoint: return is_point(v) ? std::nullopt : bad("[x, y]");
    case K::kPointList:
      if (!v.is_array()) return bad("array of [x, y]");
      for (const auto& p : v)
        if (!is_point(p)) return bad("array of [x, y]");
      return std::nullopt;
    case K::kObject: return v.is_object() ? std::nullopt : bad("object");
    case K::kNullableObject: return v.is_object() || v.is_null() ? std::nullopt : bad("object or null");
    case K::kAny: return std::nullopt;
  }
  return std::nullopt;
}

std::optional<std::string> check_object(const Json& obj, std::initializer_list<Field> fields, const std::string& path) {
  if (!obj.is_object()) return path + ": expected object";
  for (const auto& f : fields) {
    auto it = obj.find(std::string(f.name));
    if (it == obj.end()) return path + ": missing '" + std::string(f.name) + "'";
    if (auto e = check_kind(*it, f.kind, path + "." + std::string(f.name))) return e;
  }
  for (const auto& [k, v] : obj.items()) {
    bool known = false;
    for (const auto& f : fields) known = known || k == f.name;
    if (!known) return path + ": unexpected '" + k + "'";
  }
  return std::nullopt;
}

std::optional<std::string> check_enum(const Json& v, std::initializer_list<std::string_view> values, const std::string& path) {
  const std::string s = v.get<std::string>();
  for (auto x : values)
    if (s == x) return std::nullopt;
  return path + ": unexpected value '" + s + "'";
}

std::optional<std::string> check_terms(const Json& terms, const std::string& path) {
  if (!terms.is_object()) return path + ": expected object";
  if (terms.size() != kRewardTermCount) return path + ": expected " + std::to_string(kRewardTermCount) + " terms";
  for (std::size_t k = 0; k < kRewardTermCount; ++k) {
    const std::string name(reward_term_name(static_cast<RewardTerm>(k)));
    auto it = terms.find(name);
    if (it == terms.end()) return path + ": missing '" + name + "'";
    if (!it->is_number()) return path + "." + name + ": expected number";
  }
  return std::nullopt;
}

const std::initializer_list<std::string_view> kScenarios = {"open_field", "dribble_to_target", "obstacle_avoidance"};
const std::initializer_list<std::string_view> kResults = {"running", "success", "failure"};
const std::initializer_list<std::string_view> kReasons = {"none",      "zone_exit",     "out_of_field",
                                                              "collision", "out_of_region", "timeout"};

std::optional<std::string> check_box(const Json& v, const std::string& path) {
  if (v.is_null()) return std::nullopt;
  return check_object(v, {{"lo", K::kPoint}, {"hi", K::kPoint}}, path);
}

std::optional<std::string> check_task(const Json& t) {
  if (auto e = check_object(t,
                            {{"kind", K::kString},
                             {"result", K::kString},
                             {"reason", K::kString},
                             {"elapsed", K::kNumber},
                             {"ball_target_distance", K::kNumber},
                             {"entered_outer_zone", K::kBool},
                             {"geometry", K::kObject}},
                            "state.task"))
    return e;
  if (auto e = check_enum(t["kind"], {"dribble_to_target", "obstacle_avoidance"}, "state.task.kind")) return e;
  if (auto e = check_enum(t["result"], kResults, "state.task.result")) return e;
  if (auto e = check_enum(t["reason"], kReasons, "state.task.reason")) return e;
  const Json& g = t["geometry"];
  if (auto e = check_object(g,
                            {{"kind", K::kString},
                             {"target", K::kPoint},
                             {"success_radius", K::kNumber},
                             {"failure_radius", K::kNumber},
                             {"field_boundary", K::kPointList},
                             {"obstacles", K::kAny},
                             {"target_box", K::kNullableObject},
                             {"region", K::kNullableObject},
                             {"timeout", K::kNumber}},
                            "state.task.geometry"))
    return e;
  if (!g["obstacles"].is_array()) return std::string("state.task.geometry.obstacles: expected array");
  for (const auto& o : g["obstacles"])
    if (auto e = check_object(o, {{"center", K::kPoint}, {"radius", K::kNumber}}, "state.task.geometry.obstacles[]")) return e;
  if (auto e = check_box(g["target_box"], "state.task.geometry.target_box")) return e;
  return check_box(g["region"], "state.task.geometry.region");
}

}  // namespace

std::optional<std::string> validate_server_message(const Json& msg) {
  if (!msg.is_object()) return std::string("message: expected object");
  auto type_it = msg.find("type");
  if (type_it == msg.end() || !type_it->is_string()) return std::string("message: missing string 'type'");
  const std::string type = type_it->get<std::string>();
  if (msg.dump().find('\n') != std::string::npos) return std::string("message: must serialize to one line");

  if (type == "hello") {
    if (msg.contains("protocol") && msg["protocol"] != kProtocolVersion) return std::string("hello.protocol: unsupported version");
    if (auto e = check_object(msg,
                              {{"type", K::kString},
                               {"protocol", K::kInteger},
                               {"role", K::kString},
                               {"dt", K::kNumber},
                               {"stream_hz", K::kNumber},
                               {"v_cmd_max", K::kNumber},
                               {"scenario", K::kString},
                               {"observation_layout", K::kString}},
                              "hello"))
      return e;
    if (auto e = check_enum(msg["role"], {"controller", "spectator"}, "hello.role")) return e;
    return check_enum(msg["scenario"], kScenarios, "hello.scenario");
  }
  if (type == "state") {
    if (auto e = check_object(msg,
                              {{"type", K::kString},
                               {"seq", K::kInteger},
                               {"t", K::kNumber},
                               {"paused", K::kBool},
                               {"scenario", K::kString},
                               {"robot", K::kObject},
                               {"ball", K::kObject},
                               {"fov", K::kPointList},
                               {"ball_visible", K::kBool},
                               {"command", K::kObject},
                               {"reward", K::kObject},
                               {"task", K::kNullableObject}},
                              "state"))
      return e;
    if (auto e = check_enum(msg["scenario"], kScenarios, "state.scenario")) return e;
    if (auto e = check_object(msg["robot"],
                              {{"x", K::kNumber},
                               {"y", K::kNumber},
                               {"yaw", K::kNumber},
                               {"vx", K::kNumber},
                               {"vy", K::kNumber},
                               {"head_pan", K::kNumber},
                               {"head_tilt", K::kNumber}},
                              "state.robot"))
      return e;
    if (auto e = check_object(msg["ball"], {{"x", K::kNumber}, {"y", K::kNumber}, {"vx", K::kNumber}, {"vy", K::kNumber}},
                              "state.ball"))
      return e;
    if (auto e = check_object(msg["command"], {{"vx", K::kNumber}, {"vy", K::kNumber}}, "state.command")) return e;
    if (auto e = check_object(msg["reward"], {{"total", K::kNumber}, {"terms", K::kObject}, {"weighted", K::kObject}},
                              "state.reward"))
      return e;
    if (auto e = check_terms(msg["reward"]["terms"], "state.reward.terms")) return e;
    if (auto e = check_terms(msg["reward"]["weighted"], "state.reward.weighted")) return e;
    if (!msg["task"].is_null()) return check_task(msg["task"]);
    return std::nullopt;
  }
  if (type == "event") {
    auto ev = msg.find("event");
    if (ev == msg.end() || !ev->is_string()) return std::string("event: missing string 'event'");
    if (*ev == "task_result") {
      if (auto e = check_object(msg,
                                {{"type", K::kString},
                                 {"event", K::kString},
                                 {"scenario", K::kString},
                                 {"result", K::kString},
                                 {"reason", K::kString},
                                 {"elapsed", K::kNumber}},
                                "event"))
        return e;
      if (auto e = check_enum(msg["scenario"], kScenarios, "event.scenario")) return e;
      if (auto e = check_enum(msg["result"], {"success", "failure"}, "event.result")) return e;
      return check_enum(msg["reason"], kReasons, "event.reason");
    }
    if (*ev == "episode_end") {
      if (auto e = check_object(msg,
                                {{"type", K::kString},
                                 {"event", K::kString},
                                 {"scenario", K::kString},
                                 {"reason", K::kString},
                                 {"t", K::kNumber}},
                                "event"))
        return e;
      if (auto e = check_enum(msg["scenario"], kScenarios, "event.scenario")) return e;
      return check_enum(msg["reason"], {"out_of_bounds", "ball_lost"}, "event.reason");
    }
    return "event: unknown event '" + ev->get<std::string>() + "'";
  }
  if (type == "error") return check_object(msg, {{"type", K::kString}, {"message", K::kString}}, "error");
  return "message: unknown type '" + type + "'";
}

}  // namespace dribble::protocol
