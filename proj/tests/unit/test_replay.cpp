#include <gtest/gtest.h>

#include <sstream>

#include "dribble/replay.hpp"

namespace dribble {
namespace {

using Json = nlohmann::ordered_json;

std::vector<Json> parse_lines(const std::string& text) {
  std::vector<Json> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) rows.push_back(Json::parse(line));
  return rows;
}

TEST(CommandScript, ParsesAndHolds) {
  const auto s = CommandScript::parse("0:1,0; 2.5:0.5,-0.5;4:0,0");
  ASSERT_EQ(s.keyframes().size(), 3u);
  EXPECT_EQ(s.at(0.0).x, 1.0);
  EXPECT_EQ(s.at(2.49).x, 1.0);
  EXPECT_EQ(s.at(2.5).y, -0.5);
  EXPECT_EQ(s.at(100.0).x, 0.0);
}

TEST(CommandScript, RejectsMalformed) {
  for (const char* bad : {"", "1:1,0", "0:1", "0:1,0;0:2,0", "0:1,0;2:x,0", "0:1,0;3:1,0;2:1,0", "0;1,0", "0:1,nan"})
    EXPECT_THROW(CommandScript::parse(bad), ConfigError) << bad;
}

TEST(CommandScript, StandardCoversTwentySeconds) {
  const auto s = CommandScript::standard();
  EXPECT_EQ(s.at(1.0).x, 1.0);
  EXPECT_NEAR(norm(s.at(6.0)), 1.0, 1e-12);
  EXPECT_EQ(s.at(12.0).y, 1.0);
  EXPECT_EQ(norm(s.at(19.0)), 0.0);
}

TEST(Replay, DeterministicWithHeader) {
  PlayOptions opt;
  opt.duration = 4.0;
  opt.seed = 11;
  std::ostringstream a, b;
  ScriptedDribbler c1, c2;
  write_replay(a, c1, EnvConfig{}, opt, Json{{"controller", "scripted"}});
  write_replay(b, c2, EnvConfig{}, opt, Json{{"controller", "scripted"}});
  EXPECT_EQ(a.str(), b.str());

  const auto rows = parse_lines(a.str());
  ASSERT_EQ(rows.size(), 1u + 200u);
  const Json& h = rows.front();
  EXPECT_EQ(h["type"], "header");
  EXPECT_EQ(h["format"], "dribble-replay");
  EXPECT_EQ(h["version"], kReplayFormatVersion);
  EXPECT_EQ(h["seed"], 11);
  EXPECT_EQ(h["controller"], "scripted");
  EXPECT_EQ(h["observation_layout"], observation_layout_descriptor());
  EXPECT_EQ(h["command_script"].size(), 4u);

  double prev_t = 0.0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const Json& r = rows[i];
    EXPECT_EQ(r["type"], "step");
    EXPECT_GT(r["t"].get<double>(), prev_t);
    prev_t = r["t"];
    EXPECT_EQ(r["action"].size(), kActionDim);
    EXPECT_EQ(r["reward"]["terms"].size(), kRewardTermCount);
  }
  EXPECT_NEAR(prev_t, 4.0, 1e-9);
  // The scripted dribbler moves the ball forward under the initial command.
  EXPECT_GT(rows.back()["state"]["ball"]["x"].get<double>(), 1.0);

  std::ostringstream c;
  opt.seed = 12;
  ScriptedDribbler c3;
  write_replay(c, c3, EnvConfig{}, opt);
  EXPECT_NE(a.str(), c.str());
}

TEST(Replay, RejectsNonPositiveDuration) {
  PlayOptions opt;
  opt.duration = 0.0;
  std::ostringstream out;
  ScriptedDribbler c;
  EXPECT_THROW(write_replay(out, c, EnvConfig{}, opt), ConfigError);
}

}  // namespace
}  // namespace dribble
