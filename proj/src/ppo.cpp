#include "dribble/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dribble/common.hpp"
#include "dribble/parallel.hpp"
#include "dribble/simd/kernels.hpp"

namespace dribble {

void PpoHyperparams::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("ppo: " + m); };
  if (!(gamma > 0.0 && gamma <= 1.0)) fail("gamma must be in (0, 1]");
  if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) fail("gae_lambda must be in [0, 1]");
  if (!(clip_epsilon > 0.0 && clip_epsilon < 1.0)) fail("clip_epsilon must be in (0, 1)");
  if (!(learning_rate > 0.0)) fail("learning_rate must be positive");
  if (epochs_per_update == 0) fail("epochs_per_update must be >= 1");
  if (minibatch_count == 0) fail("minibatch_count must be >= 1");
  if (rollout_horizon == 0) fail("rollout_horizon must be >= 1");
  if (num_lanes == 0) fail("num_lanes must be >= 1");
  if ((rollout_horizon * num_lanes) % minibatch_count != 0)
    fail("rollout_horizon * num_lanes must be divisible by minibatch_count");
  if (!(value_coef >= 0.0) || !(entropy_coef >= 0.0)) fail("loss coefficients must be non-negative");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0))
    fail("adam betas must be in [0, 1)");
  if (!(adam_epsilon > 0.0)) fail("adam_epsilon must be positive");
}

GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values,
                      std::span<const std::uint8_t> dones, std::span<const double> bootstrap, std::size_t lanes,
                      std::size_t horizon, double gamma, double lambda) {
  const std::size_t n = lanes * horizon;
  if (rewards.size() != n || values.size() != n || dones.size() != n || bootstrap.size() != lanes) {
    throw ContractViolation("compute_gae: arrays must be horizon x lanes with one bootstrap value per lane");
  }
  GaeResult out;
  out.advantages.resize(n);
  out.returns.resize(n);
  for (std::size_t lane = 0; lane < lanes; ++lane) {
    double next_adv = 0.0;
    double next_value = bootstrap[lane];
    for (std::size_t t = horizon; t-- > 0;) {
      const std::size_t i = t * lanes + lane;
      const double live = dones[i] ? 0.0 : 1.0;
      const double delta = rewards[i] + gamma * next_value * live - values[i];
      const double adv = delta + gamma * lambda * live * next_adv;
      out.advantages[i] = adv;
      out.returns[i] = adv + values[i];
      next_adv = adv;
      next_value = values[i];
    }
  }
  return out;
}

void normalize_advantages(std::span<double> adv, double eps) {
  if (adv.empty()) return;
  const double n = static_cast<double>(adv.size());
  const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / n;
  double var = 0.0;
  for (double a : adv) var += (a - mean) * (a - mean);
  const double sd = std::sqrt(var / n);
  for (double& a : adv) a = (a - mean) / (sd + eps);
}

void RolloutBuffer::resize(std::size_t num_lanes, std::size_t rollout_horizon) {
  lanes = num_lanes;
  horizon = rollout_horizon;
  const std::size_t n = lanes * horizon;
  obs.assign(n * kObsDim, 0.0f);
  priv.assign(n * kPrivDim, 0.0f);
  actions.assign(n * kActionDim, 0.0f);
  logprobs.assign(n, 0.0);
  rewards.assign(n, 0.0);
  values.assign(n, 0.0);
  dones.assign(n, 0);
  timeouts.assign(n, 0);
  bootstrap.assign(lanes, 0.0);
  advantages.clear();
  returns.clear();
  term_sums.fill(0.0);
  episode_returns.clear();
  episode_lengths.clear();
}

namespace {

template <std::size_t N>
void copy_row(const std::array<double, N>& src, float* dst) {
  for (std::size_t k = 0; k < N; ++k) dst[k] = static_cast<float>(src[k]);
}

}  // namespace

void collect_rollout(EnvBatch& envs, const PolicyModel<float>& model, const PpoHyperparams& hyper,
                     std::uint64_t seed, RolloutState& state, RolloutBuffer& buffer) {
  const std::size_t lanes = envs.size();
  const std::size_t horizon = hyper.rollout_horizon;
  buffer.resize(lanes, horizon);
  if (state.episode_return.size() != lanes) {
    state.episode_return.assign(lanes, 0.0);
    state.episode_length.assign(lanes, 0);
  }

  struct LaneScratch {
    std::array<double, kRewardTermCount> terms{};
    bool finished = false;
    double finished_return = 0.0;
    double finished_length = 0.0;
    bool truncated = false;
    PrivilegedObservation terminal_priv{};
  };
  std::vector<LaneScratch> scratch(lanes);
  std::vector<float> cur_obs(lanes * kObsDim), cur_priv(lanes * kPrivDim);
  parallel_for(lanes, [&](std::size_t l) {
    copy_row(envs[l].observation(), &cur_obs[l * kObsDim]);
    copy_row(envs[l].privileged(), &cur_priv[l * kPrivDim]);
  });

  Mlp<float>::Cache actor_cache, critic_cache;
  std::vector<float> term_priv;
  std::vector<std::size_t> term_lanes;
  std::array<double, kActionDim> stds{};
  for (std::size_t j = 0; j < kActionDim; ++j)
    stds[j] = std::exp(std::clamp(static_cast<double>(model.log_std[j]), kLogStdMin, kLogStdMax));

  for (std::size_t t = 0; t < horizon; ++t) {
    const std::size_t base = t * lanes;
    std::copy(cur_obs.begin(), cur_obs.end(), buffer.obs.begin() + static_cast<std::ptrdiff_t>(base * kObsDim));
    std::copy(cur_priv.begin(), cur_priv.end(), buffer.priv.begin() + static_cast<std::ptrdiff_t>(base * kPrivDim));
    model.actor.forward(cur_obs, lanes, actor_cache);
    model.critic.forward(cur_priv, lanes, critic_cache);
    const auto means = actor_cache.output();
    const auto vals = critic_cache.output();
    const std::uint64_t step_id = state.global_step;

    parallel_for(lanes, [&](std::size_t l) {
      const std::size_t i = base + l;
      Env& env = envs[l];
      ActionDistribution dist;
      for (std::size_t j = 0; j < kActionDim; ++j) {
        dist.mean[j] = static_cast<double>(means[l * kActionDim + j]);
        dist.std[j] = stds[j];
      }
      CounterRng rng(derive_key(seed, StreamKind::kActionSampling, l, step_id));
      const SampledAction s = sample_and_logprob(dist, rng);
      for (std::size_t j = 0; j < kActionDim; ++j) buffer.actions[i * kActionDim + j] = static_cast<float>(s.action[j]);
      buffer.logprobs[i] = s.logprob;
      buffer.values[i] = static_cast<double>(vals[l]);

      ActionVector a;
      a.u = s.action;
      Env::StepResult r;
      try {
        r = env.step(a);
      } catch (const SimulationFault& e) {
        throw SimulationFault("lane " + std::to_string(l) + ": " + e.what());
      }
      buffer.rewards[i] = r.reward.total;
      LaneScratch& sc = scratch[l];
      for (std::size_t k = 0; k < kRewardTermCount; ++k) sc.terms[k] += r.reward.terms.values[k];
      state.episode_return[l] += r.reward.total;
      state.episode_length[l] += 1;
      sc.finished = r.status.done;
      sc.truncated = false;
      if (r.status.done) {
        buffer.dones[i] = 1;
        buffer.timeouts[i] = r.status.reason == TerminationReason::kTimeout ? 1 : 0;
        sc.finished_return = state.episode_return[l];
        sc.finished_length = static_cast<double>(state.episode_length[l]);
        state.episode_return[l] = 0.0;
        state.episode_length[l] = 0;
        if (buffer.timeouts[i] && hyper.bootstrap_on_timeout) {
          sc.truncated = true;
          sc.terminal_priv = r.priv;
        }
        r = env.reset();
      }
      copy_row(r.obs, &cur_obs[l * kObsDim]);
      copy_row(r.priv, &cur_priv[l * kPrivDim]);
    });

    term_priv.clear();
    term_lanes.clear();
    for (std::size_t l = 0; l < lanes; ++l) {
      const LaneScratch& sc = scratch[l];
      if (!sc.finished) continue;
      buffer.episode_returns.push_back(sc.finished_return);
      buffer.episode_lengths.push_back(sc.finished_length);
      if (sc.truncated) {
        term_lanes.push_back(l);
        for (double v : sc.terminal_priv) term_priv.push_back(static_cast<float>(v));
      }
    }
    if (!term_lanes.empty()) {
      Mlp<float>::Cache tc;
      model.critic.forward(term_priv, term_lanes.size(), tc);
      for (std::size_t k = 0; k < term_lanes.size(); ++k)
        buffer.rewards[base + term_lanes[k]] += hyper.gamma * static_cast<double>(tc.output()[k]);
    }
    ++state.global_step;
  }

  model.critic.forward(cur_priv, lanes, critic_cache);
  for (std::size_t l = 0; l < lanes; ++l) {
    buffer.bootstrap[l] = static_cast<double>(critic_cache.output()[l]);
    for (std::size_t k = 0; k < kRewardTermCount; ++k) buffer.term_sums[k] += scratch[l].terms[k];
  }
}

template <typename T>
LossStats ppo_loss_and_grad(const PolicyModel<T>& model, const MinibatchView<T>& batch, const PpoHyperparams& hyper,
                            PolicyModel<T>& grad) {
  const std::size_t n = batch.size;
  if (n == 0) throw ContractViolation("ppo_loss_and_grad: empty minibatch");
  if (batch.obs.size() != n * model.actor.spec().input_dim || batch.priv.size() != n * model.critic.spec().input_dim ||
      batch.actions.size() != n * kActionDim || batch.old_logprobs.size() != n || batch.advantages.size() != n ||
      batch.returns.size() != n) {
    throw ContractViolation("ppo_loss_and_grad: minibatch arrays have inconsistent sizes");
  }
  constexpr double kHalfLog2Pi = 0.91893853320467274178;
  typename Mlp<T>::Cache ac, cc;
  model.actor.forward(batch.obs, n, ac);
  model.critic.forward(batch.priv, n, cc);
  const auto mu = ac.output();
  const auto v = cc.output();

  std::array<double, kActionDim> log_std{}, sigma{};
  std::array<bool, kActionDim> live{};
  for (std::size_t j = 0; j < kActionDim; ++j) {
    const double raw = static_cast<double>(model.log_std[j]);
    log_std[j] = std::clamp(raw, kLogStdMin, kLogStdMax);
    live[j] = raw >= kLogStdMin && raw <= kLogStdMax;
    sigma[j] = std::exp(log_std[j]);
  }

  const double inv_n = 1.0 / static_cast<double>(n);
  const double eps = hyper.clip_epsilon;
  std::vector<T> d_mu(n * kActionDim), d_v(n);
  std::array<double, kActionDim> d_log_std{};
  LossStats st;
  std::array<double, kActionDim> z{};
  for (std::size_t i = 0; i < n; ++i) {
    double lp = 0.0;
    for (std::size_t j = 0; j < kActionDim; ++j) {
      z[j] = (static_cast<double>(batch.actions[i * kActionDim + j]) - static_cast<double>(mu[i * kActionDim + j])) /
             sigma[j];
      lp += -0.5 * z[j] * z[j] - log_std[j] - kHalfLog2Pi;
    }
    const double log_ratio = lp - batch.old_logprobs[i];
    const double rho = std::exp(log_ratio);
    const double a = batch.advantages[i];
    const double unclipped = rho * a;
    const double clipped = std::clamp(rho, 1.0 - eps, 1.0 + eps) * a;
    st.policy_loss -= std::min(unclipped, clipped) * inv_n;
    if (std::abs(rho - 1.0) > eps) st.clip_fraction += inv_n;
    st.approx_kl += ((rho - 1.0) - log_ratio) * inv_n;
    // d(-surrogate)/d(logprob); zero when the clipped branch is the active minimum.
    const double g = unclipped <= clipped ? -rho * a * inv_n : 0.0;
    for (std::size_t j = 0; j < kActionDim; ++j) {
      d_mu[i * kActionDim + j] = static_cast<T>(g * z[j] / sigma[j]);
      d_log_std[j] += g * (z[j] * z[j] - 1.0);
    }
    const double err = static_cast<double>(v[i]) - batch.returns[i];
    st.value_loss += err * err * inv_n;
    d_v[i] = static_cast<T>(hyper.value_coef * 2.0 * err * inv_n);
  }
  for (std::size_t j = 0; j < kActionDim; ++j) {
    st.entropy += log_std[j] + 0.5 + kHalfLog2Pi;
    d_log_std[j] -= hyper.entropy_coef;
    if (live[j]) grad.log_std[j] += static_cast<T>(d_log_std[j]);
  }
  st.total = st.policy_loss + hyper.value_coef * st.value_loss - hyper.entropy_coef * st.entropy;
  model.actor.backward(ac, d_mu, grad.actor.parameters());
  model.critic.backward(cc, d_v, grad.critic.parameters());
  return st;
}

template <typename T>
void adam_step(PolicyModel<T>& params, const PolicyModel<T>& grad, AdamState<T>& state, double lr,
               const PpoHyperparams& hyper) {
  const auto& kt = simd::kernels<T>();
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(hyper.adam_beta1, t);
  const double c2 = std::sqrt(1.0 - std::pow(hyper.adam_beta2, t));
  const T step_size = static_cast<T>(lr * c2 / c1);
  const T eps_hat = static_cast<T>(hyper.adam_epsilon * c2);
  auto p = params.blocks();
  const auto g = grad.blocks();
  auto m = state.m.blocks();
  auto v = state.v.blocks();
  for (std::size_t b = 0; b < p.size(); ++b) {
    if (p[b].size() != g[b].size() || p[b].size() != m[b].size()) throw ContractViolation("adam_step: shape mismatch");
    kt.adam_update(p[b].size(), p[b].data(), g[b].data(), m[b].data(), v[b].data(), static_cast<T>(hyper.adam_beta1),
                   static_cast<T>(hyper.adam_beta2), step_size, eps_hat);
  }
  params.clamp_log_std();
}

template <typename T>
double clip_grad_norm(PolicyModel<T>& grad, double max_norm) {
  const auto& kt = simd::kernels<T>();
  double sq = 0.0;
  for (auto blk : grad.blocks()) sq += static_cast<double>(kt.sum_squares(blk.size(), blk.data()));
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm && std::isfinite(norm)) {
    const T scale = static_cast<T>(max_norm / (norm + 1e-6));
    for (auto blk : grad.blocks())
      for (T& x : blk) x *= scale;
  }
  return norm;
}

UpdateMetrics ppo_update(RolloutBuffer& buffer, PolicyModel<float>& model, AdamState<float>& adam,
                         const PpoHyperparams& hyper, double learning_rate, std::uint64_t seed,
                         std::uint64_t update_index) {
  const std::size_t n = buffer.size();
  if (n == 0 || n % hyper.minibatch_count != 0) throw ContractViolation("ppo_update: buffer not divisible into minibatches");
  GaeResult gae = compute_gae(buffer.rewards, buffer.values, buffer.dones, buffer.bootstrap, buffer.lanes,
                              buffer.horizon, hyper.gamma, hyper.gae_lambda);
  buffer.advantages = std::move(gae.advantages);
  buffer.returns = std::move(gae.returns);
  std::vector<double> adv = buffer.advantages;
  normalize_advantages(adv);

  const PolicyModel<float> model_backup = model;
  const AdamState<float> adam_backup = adam;
  PolicyModel<float> grad = model.zeros_like();

  const std::size_t mb = n / hyper.minibatch_count;
  std::vector<std::size_t> order(n);
  std::vector<float> obs(mb * kObsDim), priv(mb * kPrivDim), act(mb * kActionDim);
  std::vector<double> old_lp(mb), mb_adv(mb), mb_ret(mb);

  UpdateMetrics out;
  out.learning_rate = learning_rate;
  std::size_t steps = 0;
  for (std::size_t epoch = 0; epoch < hyper.epochs_per_update; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    CounterRng rng(derive_key(seed, StreamKind::kShuffle, update_index, epoch));
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t b = 0; b < hyper.minibatch_count; ++b) {
      for (std::size_t k = 0; k < mb; ++k) {
        const std::size_t i = order[b * mb + k];
        std::copy_n(&buffer.obs[i * kObsDim], kObsDim, &obs[k * kObsDim]);
        std::copy_n(&buffer.priv[i * kPrivDim], kPrivDim, &priv[k * kPrivDim]);
        std::copy_n(&buffer.actions[i * kActionDim], kActionDim, &act[k * kActionDim]);
        old_lp[k] = buffer.logprobs[i];
        mb_adv[k] = adv[i];
        mb_ret[k] = buffer.returns[i];
      }
      for (auto blk : grad.blocks()) std::fill(blk.begin(), blk.end(), 0.0f);
      MinibatchView<float> view{mb, obs, priv, act, old_lp, mb_adv, mb_ret};
      const LossStats st = ppo_loss_and_grad(model, view, hyper, grad);
      const double norm = clip_grad_norm(grad, hyper.max_grad_norm);
      if (!std::isfinite(st.total) || !std::isfinite(norm)) {
        model = model_backup;
        adam = adam_backup;
        throw NonFiniteLoss("ppo_update " + std::to_string(update_index) + ": non-finite loss at epoch " +
                            std::to_string(epoch) + " minibatch " + std::to_string(b) +
                            " (policy=" + std::to_string(st.policy_loss) + " value=" + std::to_string(st.value_loss) +
                            " grad_norm=" + std::to_string(norm) + ")");
      }
      adam_step(model, grad, adam, learning_rate, hyper);
      out.policy_loss += st.policy_loss;
      out.value_loss += st.value_loss;
      out.entropy += st.entropy;
      out.clip_fraction += st.clip_fraction;
      out.approx_kl += st.approx_kl;
      out.grad_norm += norm;
      ++steps;
    }
  }
  const double inv = 1.0 / static_cast<double>(steps);
  out.policy_loss *= inv;
  out.value_loss *= inv;
  out.entropy *= inv;
  out.clip_fraction *= inv;
  out.approx_kl *= inv;
  out.grad_norm *= inv;
  return out;
}

template LossStats ppo_loss_and_grad(const PolicyModel<float>&, const MinibatchView<float>&, const PpoHyperparams&,
                                     PolicyModel<float>&);
template LossStats ppo_loss_and_grad(const PolicyModel<double>&, const MinibatchView<double>&,
                                     const PpoHyperparams&, PolicyModel<double>&);
template void adam_step(PolicyModel<float>&, const PolicyModel<float>&, AdamState<float>&, double,
                        const PpoHyperparams&);
template void adam_step(PolicyModel<double>&, const PolicyModel<double>&, AdamState<double>&, double,
                        const PpoHyperparams&);
template double clip_grad_norm(PolicyModel<float>&, double);
template double clip_grad_norm(PolicyModel<double>&, double);

}  // namespace dribble
