#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dribble/env.hpp"
#include "dribble/policy.hpp"
#include "dribble/ppo.hpp"

namespace dribble {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Truncated, bit-flipped or otherwise unreadable file.
class CorruptCheckpoint : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

/// Readable file whose observation layout or network shapes do not match this build.
class LayoutMismatch : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

inline constexpr char kCheckpointMagic[8] = {'D', 'R', 'B', 'L', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

struct TrainingCounters {
  std::uint64_t update = 0;     // completed updates
  std::uint64_t env_steps = 0;  // transitions collected, all lanes
  std::uint32_t stage_id = 1;
  std::uint64_t stage_switch_update = 0;  // update at which stage 2 began, 0 while in stage 1
};

/// Everything beyond parameters needed to continue a run bit-exactly.
struct ResumeState {
  std::vector<Env::Snapshot> lanes;
  RolloutState rollout;
  std::vector<double> chase_history;  // per-update mean chase reward, for the metric trigger
};

struct Checkpoint {
  std::uint32_t layout_version = kObservationLayoutVersion;
  PolicyModel<float> model;
  AdamState<float> adam;
  TrainingCounters counters;
  std::uint32_t config_digest = 0;
  std::string config_json;  // effective run config
  std::optional<ResumeState> resume;
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
/// Throws CorruptCheckpoint on digest or structure errors, CheckpointError on a format-version
/// mismatch and LayoutMismatch when the observation layout differs from this build.
Checkpoint parse_checkpoint(std::string_view bytes);

/// Writes to a temporary file, then renames over `path`.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace dribble
