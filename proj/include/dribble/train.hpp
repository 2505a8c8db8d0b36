#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <string>

#include "json.hpp"

#include "dribble/checkpoint.hpp"
#include "dribble/config.hpp"
#include "dribble/env.hpp"
#include "dribble/ppo.hpp"

namespace dribble {

inline constexpr int kMetricsSchemaVersion = 1;

/// Runs the two-stage curriculum. The run directory receives config.json (effective config),
/// metrics.jsonl (one row per update) and checkpoints/update_NNNNNN.ckpt.
class Trainer {
 public:
  /// Fresh run. An empty run_dir disables all file output (used by tests).
  Trainer(const RunConfig& cfg, std::string run_dir);
  /// Continues from a checkpoint that carries resume state. Metric rows past the checkpoint are dropped.
  Trainer(const Checkpoint& ckpt, std::string run_dir);

  /// Runs updates until the plan is complete or `max_updates` more have run. Returns updates run.
  std::size_t run(std::size_t max_updates = std::numeric_limits<std::size_t>::max());
  /// Collect + update once; returns the metrics row.
  nlohmann::ordered_json step();

  /// Ends stage 1 at the next update boundary.
  void request_stage_advance() { advance_requested_ = true; }
  bool finished() const { return counters_.update >= cfg_.train.total_updates(); }

  Checkpoint checkpoint() const;
  /// Writes checkpoints/update_NNNNNN.ckpt and returns its path.
  std::string save_checkpoint_file() const;

  const RunConfig& config() const { return cfg_; }
  const PolicyModel<float>& model() const { return model_; }
  const TrainingCounters& counters() const { return counters_; }
  const EnvBatch& envs() const { return *envs_; }
  void set_metrics_callback(std::function<void(const nlohmann::ordered_json&)> cb) { on_metrics_ = std::move(cb); }

 private:
  void prepare_run_dir(bool resuming);
  bool should_switch_stage();
  void switch_stage();
  double current_learning_rate() const;

  RunConfig cfg_;
  std::string run_dir_;
  std::unique_ptr<EnvBatch> envs_;
  PolicyModel<float> model_;
  AdamState<float> adam_;
  TrainingCounters counters_;
  RolloutState rollout_state_;
  RolloutBuffer buffer_;
  std::vector<double> chase_history_;
  bool advance_requested_ = false;
  double elapsed_seconds_ = 0.0;
  std::function<void(const nlohmann::ordered_json&)> on_metrics_;
};

/// Path of the checkpoint file for a given update count inside `run_dir`.
std::string checkpoint_path(const std::string& run_dir, std::uint64_t update);

}  // namespace dribble
