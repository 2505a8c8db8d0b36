#pragma once

// Serve-mode wire protocol: one JSON object per websocket text frame, tagged by "type".
//
// client -> server
//   {"type":"command","vx":<m/s>,"vy":<m/s>}
//   {"type":"reset","scenario":"open_field"|"dribble_to_target"|"obstacle_avoidance"}
//   {"type":"pause"}   {"type":"resume"}
// server -> client
//   hello, state, event, error (see make_* below and docs/protocol.md)

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"

#include "dribble/env.hpp"
#include "dribble/eval.hpp"

namespace dribble::protocol {

using Json = nlohmann::ordered_json;

inline constexpr int kProtocolVersion = 1;

enum class Scenario { kOpenField, kDribbleToTarget, kObstacleAvoidance };
std::string_view scenario_name(Scenario s);
std::optional<Scenario> parse_scenario(std::string_view name);

struct CommandMsg {
  double vx = 0.0;
  double vy = 0.0;
};
struct ResetMsg {
  Scenario scenario = Scenario::kOpenField;
};
struct PauseMsg {};
struct ResumeMsg {};
using ClientMessage = std::variant<CommandMsg, ResetMsg, PauseMsg, ResumeMsg>;

/// Parses one client frame. On failure returns the text of the error to send back.
std::variant<ClientMessage, std::string> parse_client_message(std::string_view text);

enum class Role { kController, kSpectator };

struct HelloInfo {
  Role role = Role::kController;
  double dt = 0.02;
  double stream_hz = 25.0;
  double v_cmd_max = 1.5;
  Scenario scenario = Scenario::kOpenField;
};

/// Everything a state message reports; copied out of the loop so it can be sent from any thread.
struct StateSnapshot {
  std::uint64_t seq = 0;
  double t = 0.0;
  bool paused = false;
  Scenario scenario = Scenario::kOpenField;
  WorldState world;
  std::vector<Vec2> fov;
  bool ball_visible = false;
  Vec2 command;
  RewardBreakdown reward;
  std::optional<TaskStatus> task;
  std::optional<TaskSpec> task_spec;
};

Json make_hello(const HelloInfo& info);
Json make_state(const StateSnapshot& s);
Json make_task_event(Scenario scenario, const TaskStatus& status);
Json make_episode_end_event(Scenario scenario, std::string_view reason, double t);
Json make_error(std::string_view message);

/// Checks a server message against the published message catalog. Returns a description of the
/// first violation, or nullopt if it conforms.
std::optional<std::string> validate_server_message(const Json& msg);

}  // namespace dribble::protocol
