#include "dribble/train.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "dribble/common.hpp"

namespace dribble {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

std::string checkpoint_path(const std::string& run_dir, std::uint64_t update) {
  char name[32];
  std::snprintf(name, sizeof name, "update_%06llu.ckpt", static_cast<unsigned long long>(update));
  return (fs::path(run_dir) / "checkpoints" / name).string();
}

Trainer::Trainer(const RunConfig& cfg, std::string run_dir) : cfg_(cfg), run_dir_(std::move(run_dir)) {
  cfg_.validate();
  envs_ = std::make_unique<EnvBatch>(cfg_.env, cfg_.seed, cfg_.ppo.num_lanes);
  for (std::size_t l = 0; l < envs_->size(); ++l) (*envs_)[l].reset();
  model_ = PolicyModel<float>(cfg_.policy.actor(), cfg_.policy.critic(), cfg_.policy.init_log_std);
  model_.init(derive_key(cfg_.seed, StreamKind::kInit));
  adam_ = AdamState<float>(model_);
  prepare_run_dir(false);
}

Trainer::Trainer(const Checkpoint& ckpt, std::string run_dir) : run_dir_(std::move(run_dir)) {
  if (!ckpt.resume) throw CheckpointError("checkpoint has no resume state (saved for inference only)");
  cfg_ = run_config_from_json(Json::parse(ckpt.config_json));
  if (config_digest(cfg_) != ckpt.config_digest) throw CorruptCheckpoint("checkpoint: embedded config does not match its digest");
  if (ckpt.model.actor.spec() != cfg_.policy.actor() || ckpt.model.critic.spec() != cfg_.policy.critic())
    throw LayoutMismatch("checkpoint: network shapes differ from the embedded config");
  const ResumeState& rs = *ckpt.resume;
  if (rs.lanes.size() != cfg_.ppo.num_lanes) throw CorruptCheckpoint("checkpoint: lane count differs from config");
  envs_ = std::make_unique<EnvBatch>(cfg_.env, cfg_.seed, cfg_.ppo.num_lanes);
  model_ = ckpt.model;
  adam_ = ckpt.adam;
  counters_ = ckpt.counters;
  if (counters_.stage_id == 2) envs_->set_stage(cfg_.env.stage2);
  for (std::size_t l = 0; l < envs_->size(); ++l) (*envs_)[l].restore(rs.lanes[l]);
  rollout_state_ = rs.rollout;
  chase_history_ = rs.chase_history;
  prepare_run_dir(true);
}

void Trainer::prepare_run_dir(bool resuming) {
  if (run_dir_.empty()) return;
  fs::create_directories(fs::path(run_dir_) / "checkpoints");
  {
    std::ofstream out(fs::path(run_dir_) / "config.json");
    out << to_json(cfg_).dump(2) << "\n";
  }
  const fs::path metrics = fs::path(run_dir_) / "metrics.jsonl";
  if (!resuming) {
    std::ofstream(metrics, std::ios::trunc);
    return;
  }
  // Drop rows newer than the checkpoint so the log stays one row per update.
  std::vector<std::string> keep;
  if (std::ifstream in(metrics); in) {
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      try {
        const Json row = Json::parse(line);
        if (row.value("update", std::uint64_t{0}) <= counters_.update) keep.push_back(line);
      } catch (const nlohmann::json::exception&) {
        break;
      }
    }
  }
  std::ofstream out(metrics, std::ios::trunc);
  for (const auto& l : keep) out << l << "\n";
}

double Trainer::current_learning_rate() const {
  if (!cfg_.ppo.linear_lr_decay) return cfg_.ppo.learning_rate;
  const double frac = static_cast<double>(counters_.update) / static_cast<double>(cfg_.train.total_updates());
  return cfg_.ppo.learning_rate * std::max(0.0, 1.0 - frac);
}

bool Trainer::should_switch_stage() {
  if (counters_.stage_id != 1) return false;
  if (advance_requested_) return true;
  if (counters_.update >= cfg_.train.stage1_updates) return true;
  if (!run_dir_.empty()) {
    const fs::path control = fs::path(run_dir_) / cfg_.train.control_file;
    std::error_code ec;
    if (fs::exists(control, ec)) {
      fs::remove(control, ec);
      return true;
    }
  }
  if (cfg_.train.trigger == StageTrigger::kMetric && chase_history_.size() >= cfg_.train.metric_window) {
    const auto begin = chase_history_.end() - static_cast<std::ptrdiff_t>(cfg_.train.metric_window);
    const double mean = std::accumulate(begin, chase_history_.end(), 0.0) / static_cast<double>(cfg_.train.metric_window);
    if (mean > cfg_.train.metric_threshold) return true;
  }
  return false;
}

void Trainer::switch_stage() {
  envs_->set_stage(cfg_.env.stage2);
  counters_.stage_id = 2;
  counters_.stage_switch_update = counters_.update;
  advance_requested_ = false;
}

Json Trainer::step() {
  if (finished()) throw ContractViolation("Trainer::step: training plan already complete");
  const auto t0 = std::chrono::steady_clock::now();
  bool switched = false;
  if (should_switch_stage()) {
    switch_stage();
    switched = true;
  }
  const double lr = current_learning_rate();
  collect_rollout(*envs_, model_, cfg_.ppo, cfg_.seed, rollout_state_, buffer_);
  const UpdateMetrics um = ppo_update(buffer_, model_, adam_, cfg_.ppo, lr, cfg_.seed, counters_.update);
  counters_.update += 1;
  counters_.env_steps += buffer_.size();

  const double n = static_cast<double>(buffer_.size());
  const double chase_mean = buffer_.term_sums[static_cast<std::size_t>(RewardTerm::kChase)] / n;
  chase_history_.push_back(chase_mean);

  const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  elapsed_seconds_ += sec;

  const StageConfig& stage = envs_->stage();
  std::size_t on_stage = 0;
  for (std::size_t l = 0; l < envs_->size(); ++l) on_stage += (*envs_)[l].stage().stage_id == stage.stage_id ? 1 : 0;

  Json row = Json::object();
  row["schema"] = kMetricsSchemaVersion;
  row["update"] = counters_.update;
  row["stage"] = counters_.stage_id;
  row["stage_switched"] = switched;
  row["lanes_on_stage"] = on_stage;
  row["env_steps"] = counters_.env_steps;
  row["learning_rate"] = lr;
  const std::size_t episodes = buffer_.episode_returns.size();
  row["episodes"] = episodes;
  if (episodes > 0) {
    row["mean_episode_return"] =
        std::accumulate(buffer_.episode_returns.begin(), buffer_.episode_returns.end(), 0.0) / static_cast<double>(episodes);
    row["mean_episode_length"] =
        std::accumulate(buffer_.episode_lengths.begin(), buffer_.episode_lengths.end(), 0.0) / static_cast<double>(episodes);
  } else {
    row["mean_episode_return"] = nullptr;
    row["mean_episode_length"] = nullptr;
  }
  row["mean_step_reward"] = std::accumulate(buffer_.rewards.begin(), buffer_.rewards.end(), 0.0) / n;
  Json terms = Json::object();
  for (std::size_t k = 0; k < kRewardTermCount; ++k)
    terms[std::string(reward_term_name(static_cast<RewardTerm>(k)))] = buffer_.term_sums[k] / n;
  row["reward_terms"] = terms;
  Json weights = Json::object();
  const auto w = stage.weights.as_array();
  for (std::size_t k = 0; k < kRewardTermCount; ++k) weights[std::string(reward_term_name(static_cast<RewardTerm>(k)))] = w[k];
  row["weights"] = weights;
  row["fov_scale"] = stage.fov_scale;
  row["ball_spawn_range"] = Json::array({stage.ball_spawn_range.lo, stage.ball_spawn_range.hi});
  row["policy_loss"] = um.policy_loss;
  row["value_loss"] = um.value_loss;
  row["entropy"] = um.entropy;
  row["clip_fraction"] = um.clip_fraction;
  row["approx_kl"] = um.approx_kl;
  row["grad_norm"] = um.grad_norm;
  row["steps_per_second"] = sec > 0.0 ? n / sec : 0.0;
  row["elapsed_seconds"] = elapsed_seconds_;

  if (!run_dir_.empty()) {
    std::ofstream out(fs::path(run_dir_) / "metrics.jsonl", std::ios::app);
    out << row.dump() << "\n";
    if (counters_.update % cfg_.train.checkpoint_every == 0 || finished()) save_checkpoint_file();
  }
  if (on_metrics_) on_metrics_(row);
  return row;
}

std::size_t Trainer::run(std::size_t max_updates) {
  std::size_t done = 0;
  while (!finished() && done < max_updates) {
    step();
    ++done;
  }
  return done;
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint c;
  c.model = model_;
  c.adam = adam_;
  c.counters = counters_;
  c.config_digest = config_digest(cfg_);
  c.config_json = to_json(cfg_).dump();
  ResumeState rs;
  rs.lanes.reserve(envs_->size());
  for (std::size_t l = 0; l < envs_->size(); ++l) rs.lanes.push_back((*envs_)[l].snapshot());
  rs.rollout = rollout_state_;
  rs.chase_history = chase_history_;
  c.resume = std::move(rs);
  return c;
}

std::string Trainer::save_checkpoint_file() const {
  if (run_dir_.empty()) throw ContractViolation("Trainer has no run directory");
  const std::string path = checkpoint_path(run_dir_, counters_.update);
  save_checkpoint(path, checkpoint());
  return path;
}

}  // namespace dribble
