#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "dribble/eval.hpp"
#include "dribble/protocol.hpp"

namespace dribble {

/// The simulated world behind the serve loop, without networking or clocks: one environment lane,
/// a controller, the current scenario and its task monitor.
class SimSession {
 public:
  SimSession(const EnvConfig& env_cfg, Controller& controller, std::uint64_t seed,
             protocol::Scenario scenario = protocol::Scenario::kOpenField);

  void reset(protocol::Scenario scenario);
  /// Clamped to the configured command magnitude; returns the value in force.
  Vec2 set_command(Vec2 v);
  void set_paused(bool paused) { paused_ = paused; }
  bool paused() const { return paused_; }

  /// Advances one control step unless paused. Returns any events (episode end, task result).
  std::vector<protocol::Json> step();

  protocol::StateSnapshot snapshot() const;
  protocol::Scenario scenario() const { return scenario_; }
  const Env& env() const { return env_; }
  Vec2 command() const { return command_; }
  double elapsed() const { return env_.world().t - t0_; }
  std::uint64_t steps() const { return steps_; }
  double v_cmd_max() const { return env_cfg_.command.v_cmd_max; }

 private:
  EnvConfig env_cfg_;
  Controller& controller_;
  std::uint64_t seed_;
  Env env_;
  protocol::Scenario scenario_;
  std::optional<TaskMonitor> monitor_;
  Vec2 command_;
  RewardBreakdown last_reward_;
  bool paused_ = false;
  double t0_ = 0.0;
  std::uint64_t steps_ = 0;
  std::uint64_t resets_ = 0;
};

struct ServeOptions {
  std::string bind_address = "127.0.0.1";
  std::uint16_t port = 8765;  // 0 picks a free port
  double stream_hz = 25.0;
  double disconnect_grace = 2.0;  // seconds without a controller before the world pauses
  std::uint64_t seed = 1;
  protocol::Scenario scenario = protocol::Scenario::kOpenField;
  std::size_t max_queued_messages = 64;  // per client; older state messages are dropped first
};

/// Websocket front end. One network thread runs all connections; the simulation thread steps the
/// world at wall-clock dt and broadcasts immutable state snapshots. Commands are latest-wins.
class Server {
 public:
  /// Called on the simulation thread after each control step with the command the controller saw.
  using StepHook = std::function<void(double t, Vec2 command)>;

  Server(const EnvConfig& env_cfg, Controller& controller, ServeOptions options);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds and starts both threads. Throws std::runtime_error if the address cannot be bound.
  void start();
  /// Idempotent; safe from any thread, including signal handlers run on the network thread.
  void stop();
  /// Blocks until stop() (or SIGINT/SIGTERM when `handle_signals`).
  void wait(bool handle_signals = false);

  std::uint16_t port() const { return bound_port_; }
  void set_step_hook(StepHook hook) { step_hook_ = std::move(hook); }

  struct Impl;

 private:
  void sim_loop();

  std::unique_ptr<Impl> impl_;
  EnvConfig env_cfg_;
  Controller& controller_;
  ServeOptions options_;
  std::uint16_t bound_port_ = 0;
  std::atomic<bool> stopping_{false};
  std::thread net_thread_;
  std::thread sim_thread_;
  StepHook step_hook_;
};

}  // namespace dribble
