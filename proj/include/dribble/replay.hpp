#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

#include "dribble/eval.hpp"

namespace dribble {

/// Piecewise-constant command schedule: each keyframe holds from its time until the next.
class CommandScript {
 public:
  CommandScript() = default;
  explicit CommandScript(std::vector<std::pair<double, Vec2>> keyframes);

  /// "t:vx,vy;t:vx,vy;..." with strictly increasing times starting at 0. Throws ConfigError.
  static CommandScript parse(std::string_view text);
  /// Forward, diagonal, sideways, stop: 5 s each.
  static CommandScript standard();

  Vec2 at(double t) const;
  const std::vector<std::pair<double, Vec2>>& keyframes() const { return keyframes_; }

 private:
  std::vector<std::pair<double, Vec2>> keyframes_;
};

inline constexpr int kReplayFormatVersion = 1;

struct PlayOptions {
  double duration = 20.0;
  std::uint64_t seed = 1;
  CommandScript script = CommandScript::standard();
  Vec2 robot_start{-0.35, 0.0};
  Vec2 ball_start{0.0, 0.0};
};

/// Runs one scripted-command rollout and writes it as JSON lines: a header record, then one
/// record per control step with t, state, action, reward and command. Output depends only on the
/// inputs. `header_extra` keys are merged into the header.
void write_replay(std::ostream& out, Controller& controller, const EnvConfig& env_cfg, const PlayOptions& options,
                  const nlohmann::ordered_json& header_extra = nlohmann::ordered_json::object());

}  // namespace dribble
