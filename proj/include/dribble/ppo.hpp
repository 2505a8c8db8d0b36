#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dribble/env.hpp"
#include "dribble/policy.hpp"

namespace dribble {

struct PpoHyperparams {
  double gamma = 0.994;
  double gae_lambda = 0.95;
  double clip_epsilon = 0.2;
  double learning_rate = 3e-4;
  bool linear_lr_decay = true;
  std::size_t epochs_per_update = 5;
  std::size_t minibatch_count = 4;
  double value_coef = 0.5;
  double entropy_coef = 0.005;
  std::size_t rollout_horizon = 64;
  std::size_t num_lanes = 512;
  double max_grad_norm = 1.0;  // <= 0 disables clipping
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  /// Truncated episodes (timeouts) add gamma * V(final state) to the last reward.
  bool bootstrap_on_timeout = true;

  /// Throws ConfigError on out-of-range values or indivisible minibatching.
  void validate() const;
};

/// An update produced a non-finite loss or gradient; parameters were left untouched.
class NonFiniteLoss : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

/// GAE over a time-major (horizon x lanes) layout: index t * lanes + lane.
/// dones[t] marks that the transition at t ended its episode, so nothing flows back across it.
/// Advantages are returned before normalization.
GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values,
                      std::span<const std::uint8_t> dones, std::span<const double> bootstrap, std::size_t lanes,
                      std::size_t horizon, double gamma, double lambda);

/// In-place (x - mean) / (std + eps) with the population std.
void normalize_advantages(std::span<double> adv, double eps = 1e-8);

struct RolloutBuffer {
  std::size_t lanes = 0;
  std::size_t horizon = 0;
  // Time-major: element (t, lane) at t * lanes + lane, feature vectors contiguous.
  std::vector<float> obs;
  std::vector<float> priv;
  std::vector<float> actions;
  std::vector<double> logprobs;
  std::vector<double> rewards;
  std::vector<double> values;
  std::vector<std::uint8_t> dones;
  std::vector<std::uint8_t> timeouts;
  std::vector<double> bootstrap;  // per lane, V at the state after the last step
  std::vector<double> advantages;
  std::vector<double> returns;

  std::array<double, kRewardTermCount> term_sums{};  // unweighted, summed over all transitions
  std::vector<double> episode_returns;               // episodes finished during this rollout
  std::vector<double> episode_lengths;

  void resize(std::size_t num_lanes, std::size_t rollout_horizon);
  std::size_t size() const { return lanes * horizon; }
};

/// Running per-lane episode accumulators; part of the resumable training state.
struct RolloutState {
  std::vector<double> episode_return;
  std::vector<std::uint64_t> episode_length;
  std::uint64_t global_step = 0;  // rollout steps taken so far (per lane)
};

/// Steps every lane `horizon` times with actions sampled from the policy, auto-resetting
/// finished lanes. Lanes must already be reset. A lane fault is rethrown as SimulationFault
/// naming the lane.
void collect_rollout(EnvBatch& envs, const PolicyModel<float>& model, const PpoHyperparams& hyper,
                     std::uint64_t seed, RolloutState& state, RolloutBuffer& buffer);

/// Row-major sample views used by the loss.
template <typename T>
struct MinibatchView {
  std::size_t size = 0;
  std::span<const T> obs;
  std::span<const T> priv;
  std::span<const T> actions;
  std::span<const double> old_logprobs;
  std::span<const double> advantages;
  std::span<const double> returns;
};

struct LossStats {
  double total = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
};

/// loss = -mean(min(rho A, clip(rho) A)) + value_coef mean((V - R)^2) - entropy_coef H.
/// Accumulates dloss/dparams into `grad` (which must be shaped like `model`).
template <typename T>
LossStats ppo_loss_and_grad(const PolicyModel<T>& model, const MinibatchView<T>& batch, const PpoHyperparams& hyper,
                            PolicyModel<T>& grad);

template <typename T>
struct AdamState {
  PolicyModel<T> m;
  PolicyModel<T> v;
  std::uint64_t step = 0;

  AdamState() = default;
  explicit AdamState(const PolicyModel<T>& like) : m(like.zeros_like()), v(like.zeros_like()) {}
};

/// One bias-corrected Adam step; the log-std stays clamped afterwards.
template <typename T>
void adam_step(PolicyModel<T>& params, const PolicyModel<T>& grad, AdamState<T>& state, double lr,
               const PpoHyperparams& hyper);

/// Global L2 norm of the gradient; scales it down to max_norm when larger. Returns the pre-clip norm.
template <typename T>
double clip_grad_norm(PolicyModel<T>& grad, double max_norm);

struct UpdateMetrics {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
  double grad_norm = 0.0;
  double learning_rate = 0.0;
};

/// GAE, advantage normalization, then epochs x minibatches of clipped-surrogate Adam steps.
/// Throws NonFiniteLoss (restoring params and optimizer) if any loss or gradient is non-finite.
UpdateMetrics ppo_update(RolloutBuffer& buffer, PolicyModel<float>& model, AdamState<float>& adam,
                         const PpoHyperparams& hyper, double learning_rate, std::uint64_t seed,
                         std::uint64_t update_index);

}  // namespace dribble
