#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "dribble/env.hpp"
#include "dribble/policy.hpp"
#include "dribble/ppo.hpp"

namespace dribble {

struct PolicyConfig {
  std::vector<std::size_t> actor_hidden{512, 256, 128};
  std::vector<std::size_t> critic_hidden{768, 256, 128};
  Activation activation = Activation::kElu;
  double init_log_std = -0.5;

  MlpSpec actor() const;
  MlpSpec critic() const;
};

enum class StageTrigger { kManual, kMetric };

struct TrainConfig {
  /// Stage 1 ends after this many updates unless a trigger fires earlier.
  std::size_t stage1_updates = 500;
  std::size_t stage2_updates = 1500;
  std::size_t checkpoint_every = 50;
  /// manual: only the update count or the control file end stage 1.
  /// metric: additionally switch once the windowed mean chase reward exceeds the threshold.
  StageTrigger trigger = StageTrigger::kManual;
  double metric_threshold = 0.6;
  std::size_t metric_window = 50;
  /// Created inside the run directory (or via `dribble stage-advance`) to end stage 1.
  std::string control_file = "ADVANCE_STAGE";

  std::size_t total_updates() const { return stage1_updates + stage2_updates; }
};

struct RunConfig {
  std::uint64_t seed = 1;
  EnvConfig env;
  PpoHyperparams ppo;
  PolicyConfig policy;
  TrainConfig train;

  /// Throws ConfigError describing the first invalid field.
  void validate() const;
};

/// Every field, defaults included.
nlohmann::ordered_json to_json(const RunConfig& cfg);
/// Starts from defaults and overrides present keys. Unknown keys and type errors throw ConfigError.
RunConfig run_config_from_json(const nlohmann::ordered_json& j);
RunConfig load_run_config(const std::string& path);
/// CRC-32 of the canonical effective-config text.
std::uint32_t config_digest(const RunConfig& cfg);

}  // namespace dribble
