// dribble: command-line front end for training, evaluation, replay and serving.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "dribble/checkpoint.hpp"
#include "dribble/common.hpp"
#include "dribble/config.hpp"
#include "dribble/eval.hpp"
#include "dribble/replay.hpp"
#include "dribble/server.hpp"
#include "dribble/train.hpp"

namespace fs = std::filesystem;
using namespace dribble;
using Json = nlohmann::ordered_json;

namespace {

// A controller plus the config it was trained with. Scripted mode uses the default config.
struct LoadedController {
  RunConfig cfg;
  std::optional<Checkpoint> ckpt;
  std::unique_ptr<Controller> controller;
};

LoadedController load_controller(const std::string& checkpoint, bool scripted, const std::string& config_path) {
  LoadedController out;
  if (scripted == !checkpoint.empty()) throw ConfigError("give exactly one of --checkpoint or --scripted");
  if (scripted) {
    out.cfg = config_path.empty() ? RunConfig{} : load_run_config(config_path);
    out.controller = std::make_unique<ScriptedDribbler>();
    return out;
  }
  out.ckpt = load_checkpoint(checkpoint);
  out.cfg = run_config_from_json(Json::parse(out.ckpt->config_json));
  if (!config_path.empty()) out.cfg.env = load_run_config(config_path).env;
  out.controller = std::make_unique<PolicyController>(out.ckpt->model);
  return out;
}

std::string hex32(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%08x", v);
  return buf;
}

int cmd_train(const std::string& config_path, std::optional<std::size_t> updates, std::optional<std::size_t> lanes,
              std::optional<std::uint64_t> seed, const std::string& run_dir, const std::string& resume, bool quiet) {
  std::unique_ptr<Trainer> trainer;
  if (!resume.empty()) {
    if (!config_path.empty() || updates || lanes || seed)
      throw ConfigError("--resume takes its configuration from the checkpoint; drop --config/--updates/--lanes/--seed");
    trainer = std::make_unique<Trainer>(load_checkpoint(resume), run_dir);
  } else {
    RunConfig cfg = config_path.empty() ? RunConfig{} : load_run_config(config_path);
    if (updates) {
      if (*updates < 2) throw ConfigError("--updates must be at least 2");
      // Same 1:3 split between the stages as the default plan.
      cfg.train.stage1_updates = *updates / 4 == 0 ? 1 : *updates / 4;
      cfg.train.stage2_updates = *updates - cfg.train.stage1_updates;
    }
    if (lanes) cfg.ppo.num_lanes = *lanes;
    if (seed) cfg.seed = *seed;
    cfg.validate();
    trainer = std::make_unique<Trainer>(cfg, run_dir);
  }
  const auto total = trainer->config().train.total_updates();
  trainer->set_metrics_callback([&](const Json& row) {
    if (quiet) return;
    std::printf("update %5llu/%zu  stage %d  return %8.3f  step_reward %7.4f  v_loss %8.4f  kl %.4f  %.0f steps/s\n",
                static_cast<unsigned long long>(row["update"].get<std::uint64_t>()), total, row["stage"].get<int>(),
                row["mean_episode_return"].is_null() ? 0.0 : row["mean_episode_return"].get<double>(),
                row["mean_step_reward"].get<double>(), row["value_loss"].get<double>(), row["approx_kl"].get<double>(),
                row["steps_per_second"].get<double>());
    if (row["stage_switched"].get<bool>()) std::printf("-- stage 2 from update %llu\n",
                                                      static_cast<unsigned long long>(row["update"].get<std::uint64_t>()));
    std::fflush(stdout);
  });
  trainer->run();
  const std::string final_path = checkpoint_path(run_dir, trainer->counters().update);
  std::printf("done: %llu updates, checkpoint %s\n", static_cast<unsigned long long>(trainer->counters().update),
              final_path.c_str());
  return 0;
}

int cmd_eval_turn(const LoadedController& lc, std::uint64_t seed, const std::string& log_path) {
  const TurnExperimentSpec spec;
  const auto trials = run_turn_experiment(*lc.controller, lc.cfg.env, spec, seed);
  std::cout << format_turn_table(summarize_turns(trials, spec));
  if (!log_path.empty()) {
    std::ofstream out(log_path);
    if (!out) throw ConfigError("cannot write " + log_path);
    for (const auto& t : trials) {
      Json row = Json::object();
      row["turn_angle_deg"] = t.turn_angle_deg;
      row["rollout"] = t.rollout;
      row["valid"] = t.valid;
      row["invalid_reason"] = t.invalid_reason;
      row["commanded_speed"] = t.commanded_speed;
      row["trigger_time"] = t.trigger_time;
      row["trigger_position"] = Json::array({t.trigger_position.x, t.trigger_position.y});
      row["fitted_direction_change"] = t.fitted_direction_change;
      row["direction_rel_error"] = t.direction_rel_error;
      row["mean_speed"] = t.mean_speed;
      row["speed_rel_error"] = t.speed_rel_error;
      Json traj = Json::array();
      for (std::size_t i = 0; i < t.trajectory.size(); ++i)
        traj.push_back(Json::array({t.trajectory[i].t, t.trajectory[i].p.x, t.trajectory[i].p.y, t.commands[i].x, t.commands[i].y}));
      row["trajectory"] = traj;
      out << row.dump() << "\n";
    }
  }
  return 0;
}

int cmd_eval_task(const LoadedController& lc, const std::string& task_name, std::size_t trials, std::uint64_t seed) {
  const TaskKind kind = parse_task_kind(task_name);
  const TaskSpec task = kind == TaskKind::kDribbleToTarget ? TaskSpec::dribble_to_target() : TaskSpec::obstacle_avoidance();
  std::size_t successes = 0;
  double success_time = 0.0;
  for (std::size_t i = 0; i < trials; ++i) {
    const TaskOutcome o = evaluate_task(*lc.controller, default_task_commands(task), lc.cfg.env, task, seed + i);
    std::printf("trial %2zu  %-7s  %6.2f s  %s\n", i, o.success ? "success" : "failure", o.elapsed,
                std::string(failure_reason_name(o.reason)).c_str());
    if (o.success) {
      ++successes;
      success_time += o.elapsed;
    }
  }
  std::printf("%s: %zu/%zu successes (%.1f%%)", std::string(task_kind_name(kind)).c_str(), successes, trials,
              100.0 * static_cast<double>(successes) / static_cast<double>(trials));
  if (successes > 0) std::printf(", mean time to success %.2f s", success_time / static_cast<double>(successes));
  std::printf("\n");
  return 0;
}

int cmd_play(const LoadedController& lc, const std::string& out_path, std::uint64_t seed, double duration,
             const std::string& commands, const std::string& checkpoint) {
  PlayOptions opt;
  opt.seed = seed;
  opt.duration = duration;
  if (!commands.empty()) opt.script = CommandScript::parse(commands);
  Json extra = Json::object();
  extra["controller"] = lc.ckpt ? "policy" : "scripted";
  if (lc.ckpt) {
    extra["checkpoint"] = fs::path(checkpoint).filename().string();
    extra["checkpoint_update"] = lc.ckpt->counters.update;
    extra["config_digest"] = hex32(lc.ckpt->config_digest);
  }
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + out_path);
  write_replay(out, *lc.controller, lc.cfg.env, opt, extra);
  out.close();
  if (!out) throw ConfigError("error writing " + out_path);
  std::printf("wrote %s\n", out_path.c_str());
  return 0;
}

int cmd_serve(const LoadedController& lc, const ServeOptions& opt) {
  Server server(lc.cfg.env, *lc.controller, opt);
  server.start();
  std::printf("serving on ws://%s:%u (%s, stream %.0f Hz); Ctrl-C to stop\n", opt.bind_address.c_str(), server.port(),
              lc.ckpt ? "policy" : "scripted", opt.stream_hz);
  std::fflush(stdout);
  server.wait(true);
  return 0;
}

int cmd_inspect(const std::string& path) {
  const Checkpoint c = load_checkpoint(path);
  const RunConfig cfg = run_config_from_json(Json::parse(c.config_json));
  Json j = Json::object();
  j["file"] = path;
  j["format_version"] = kCheckpointFormatVersion;
  j["layout_version"] = c.layout_version;
  j["observation_layout"] = observation_layout_descriptor();
  auto spec_json = [](const MlpSpec& s) {
    return Json{{"input", s.input_dim}, {"hidden", s.hidden_dims}, {"output", s.output_dim},
                {"activation", activation_name(s.activation)}, {"parameters", s.parameter_count()}};
  };
  j["actor"] = spec_json(c.model.actor.spec());
  j["critic"] = spec_json(c.model.critic.spec());
  std::vector<double> log_std(c.model.log_std.begin(), c.model.log_std.end());
  j["log_std"] = log_std;
  j["update"] = c.counters.update;
  j["env_steps"] = c.counters.env_steps;
  j["stage"] = c.counters.stage_id;
  j["stage_switch_update"] = c.counters.stage_switch_update;
  j["planned_updates"] = cfg.train.total_updates();
  j["adam_step"] = c.adam.step;
  j["seed"] = cfg.seed;
  j["lanes"] = cfg.ppo.num_lanes;
  j["config_digest"] = hex32(c.config_digest);
  j["resumable"] = c.resume.has_value();
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_stage_advance(const std::string& run_dir) {
  const fs::path cfg_path = fs::path(run_dir) / "config.json";
  if (!fs::exists(cfg_path)) throw ConfigError(run_dir + " is not a run directory (no config.json)");
  const RunConfig cfg = load_run_config(cfg_path.string());
  const fs::path control = fs::path(run_dir) / cfg.train.control_file;
  std::ofstream(control) << "advance\n";
  std::printf("requested stage 2: %s\n", control.string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Humanoid ball-dribbling simulator: train, evaluate, replay and serve policies"};
  app.require_subcommand(1);

  std::string config_path, run_dir, resume, checkpoint, out_path, commands, task = "dribble_to_target", log_path;
  std::optional<std::size_t> updates, lanes;
  std::optional<std::uint64_t> train_seed;
  std::uint64_t seed = 1;
  std::size_t trials = 15;
  double duration = 20.0;
  bool scripted = false, quiet = false;
  ServeOptions serve_opt;
  std::string scenario = "open_field";

  auto* train = app.add_subcommand("train", "Run PPO training with the two-stage curriculum");
  train->add_option("--config", config_path, "Run config JSON (defaults apply to missing keys)")->check(CLI::ExistingFile);
  train->add_option("--updates", updates, "Total PPO updates; a quarter go to stage 1");
  train->add_option("--lanes", lanes, "Parallel environment lanes");
  train->add_option("--seed", train_seed, "Run seed");
  train->add_option("--run-dir", run_dir, "Output directory (metrics, config, checkpoints)")->required();
  train->add_option("--resume", resume, "Continue from a checkpoint")->check(CLI::ExistingFile);
  train->add_flag("--quiet", quiet, "No per-update progress lines");

  auto add_controller = [&](CLI::App* sub) {
    sub->add_option("--checkpoint", checkpoint, "Trained checkpoint")->check(CLI::ExistingFile);
    sub->add_flag("--scripted", scripted, "Use the hand-written baseline dribbler instead of a policy");
    sub->add_option("--config", config_path, "Override the environment section from a run config")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Evaluation seed");
  };

  auto* eval_turn = app.add_subcommand("eval-turn", "Turn-tracking experiment: 4 cells x 5 rollouts");
  add_controller(eval_turn);
  eval_turn->add_option("--log", log_path, "Write per-trial records (JSON lines)");

  auto* eval_task = app.add_subcommand("eval-task", "Scripted-command task trials");
  add_controller(eval_task);
  eval_task->add_option("--task", task, "dribble_to_target | obstacle_avoidance")
      ->check(CLI::IsMember({"dribble_to_target", "obstacle_avoidance"}));
  eval_task->add_option("--trials", trials, "Number of seeded trials")->check(CLI::PositiveNumber);

  auto* play = app.add_subcommand("play", "Headless scripted-command rollout to a replay file");
  add_controller(play);
  play->add_option("--out", out_path, "Replay output (JSON lines)")->required();
  play->add_option("--duration", duration, "Seconds of simulated time")->check(CLI::PositiveNumber);
  play->add_option("--commands", commands, "Command script 't:vx,vy;...' (default: forward, diagonal, sideways, stop)");

  auto* serve = app.add_subcommand("serve", "Websocket server for live tele-operation");
  add_controller(serve);
  serve->add_option("--port", serve_opt.port, "TCP port (0 = any free port)");
  serve->add_option("--bind", serve_opt.bind_address, "Listen address");
  serve->add_option("--stream-hz", serve_opt.stream_hz, "State message rate")->check(CLI::PositiveNumber);
  serve->add_option("--grace", serve_opt.disconnect_grace, "Seconds without a controller before pausing")
      ->check(CLI::NonNegativeNumber);
  serve->add_option("--scenario", scenario, "Initial scenario")
      ->check(CLI::IsMember({"open_field", "dribble_to_target", "obstacle_avoidance"}));

  auto* inspect = app.add_subcommand("inspect", "Print checkpoint metadata as JSON");
  inspect->add_option("checkpoint", checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);

  auto* advance = app.add_subcommand("stage-advance", "Ask a running trainer to start stage 2 at its next update");
  advance->add_option("--run-dir", run_dir, "Run directory of the trainer")->required()->check(CLI::ExistingDirectory);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "dribble: %s\n", e.what());
    return 2;
  }

  try {
    if (*train) return cmd_train(config_path, updates, lanes, train_seed, run_dir, resume, quiet);
    if (*inspect) return cmd_inspect(checkpoint);
    if (*advance) return cmd_stage_advance(run_dir);
    const LoadedController lc = load_controller(checkpoint, scripted, config_path);
    if (*eval_turn) return cmd_eval_turn(lc, seed, log_path);
    if (*eval_task) return cmd_eval_task(lc, task, trials, seed);
    if (*play) return cmd_play(lc, out_path, seed, duration, commands, checkpoint);
    if (*serve) {
      serve_opt.seed = seed;
      serve_opt.scenario = *protocol::parse_scenario(scenario);
      return cmd_serve(lc, serve_opt);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "dribble: %s\n", e.what());
    return 1;
  }
  return 1;
}
