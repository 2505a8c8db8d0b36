#include <gtest/gtest.h>

#include <cmath>

#include "dribble/ppo.hpp"

using namespace dribble;

namespace {

// Direct definition: A_t = sum_l (gamma lambda)^l delta_{t+l}, stopping after a done.
std::vector<double> gae_oracle(const std::vector<double>& r, const std::vector<double>& v,
                               const std::vector<std::uint8_t>& d, const std::vector<double>& boot, std::size_t lanes,
                               std::size_t horizon, double g, double lam) {
  std::vector<double> adv(lanes * horizon);
  for (std::size_t lane = 0; lane < lanes; ++lane) {
    for (std::size_t t = 0; t < horizon; ++t) {
      double sum = 0, w = 1;
      for (std::size_t u = t; u < horizon; ++u) {
        const std::size_t i = u * lanes + lane;
        const double next_v = d[i] ? 0.0 : (u + 1 < horizon ? v[(u + 1) * lanes + lane] : boot[lane]);
        sum += w * (r[i] + g * next_v - v[i]);
        if (d[i]) break;
        w *= g * lam;
      }
      adv[t * lanes + lane] = sum;
    }
  }
  return adv;
}

struct Batch {
  std::size_t n;
  std::vector<double> obs, priv, act, old_lp, adv, ret;
  MinibatchView<double> view() const { return {n, obs, priv, act, old_lp, adv, ret}; }
};

PolicyModel<double> small_model(std::uint64_t seed) {
  PolicyModel<double> m(actor_spec(kObsDim, {12, 8}), critic_spec(kPrivDim, {12, 8}), -0.3);
  m.init(seed);
  // Larger output weights than the default init so the actor mean actually moves.
  for (double& p : m.actor.parameters()) p *= 3.0;
  return m;
}

// Old logprobs within `spread` of the current ones so every ratio stays inside the clip range.
Batch random_batch(const PolicyModel<double>& m, std::size_t n, CounterRng& rng, double spread) {
  Batch b;
  b.n = n;
  b.obs.resize(n * kObsDim);
  b.priv.resize(n * kPrivDim);
  b.act.resize(n * kActionDim);
  for (double& x : b.obs) x = rng.uniform(-1, 1);
  for (double& x : b.priv) x = rng.uniform(-1, 1);
  for (double& x : b.act) x = rng.uniform(-1, 1);
  for (std::size_t i = 0; i < n; ++i) {
    const ActionDistribution d = forward_actor(m, std::span<const double>(&b.obs[i * kObsDim], kObsDim));
    std::array<double, kActionDim> a{};
    std::copy_n(&b.act[i * kActionDim], kActionDim, a.begin());
    b.old_lp.push_back(logprob_of(d, a) + rng.uniform(-spread, spread));
    b.adv.push_back(rng.uniform(-2, 2));
    b.ret.push_back(rng.uniform(-2, 2));
  }
  return b;
}

double loss_of(const PolicyModel<double>& m, const Batch& b, const PpoHyperparams& h) {
  PolicyModel<double> g = m.zeros_like();
  return ppo_loss_and_grad(m, b.view(), h, g).total;
}

}  // namespace

TEST(Gae, ThreeStepExample) {
  // gamma 0.5, lambda 1, zero values: A = [1 + .5 + .25, 1 + .5, 1].
  const std::vector<double> r{1, 1, 1}, v{0, 0, 0}, boot{0};
  const std::vector<std::uint8_t> d{0, 0, 0};
  const GaeResult g = compute_gae(r, v, d, boot, 1, 3, 0.5, 1.0);
  EXPECT_DOUBLE_EQ(g.advantages[0], 1.75);
  EXPECT_DOUBLE_EQ(g.advantages[1], 1.5);
  EXPECT_DOUBLE_EQ(g.advantages[2], 1.0);
  EXPECT_EQ(g.returns, g.advantages);
}

TEST(Gae, DoneMaskStopsPropagation) {
  const std::vector<double> r{1, 10, 100}, v{0.5, 0.5, 0.5}, boot{7};
  const std::vector<std::uint8_t> d{0, 1, 0};
  const GaeResult g = compute_gae(r, v, d, boot, 1, 3, 0.9, 0.8);
  EXPECT_NEAR(g.advantages[1], 10 - 0.5, 1e-12);  // nothing from t=2 leaks back
  EXPECT_NEAR(g.advantages[2], 100 + 0.9 * 7 - 0.5, 1e-12);
  EXPECT_NEAR(g.advantages[0], (1 + 0.9 * 0.5 - 0.5) + 0.9 * 0.8 * 9.5, 1e-12);
}

TEST(Gae, MatchesDirectSumOracle) {
  CounterRng rng(1000);
  for (int inst = 0; inst < 1000; ++inst) {
    const std::size_t lanes = 1 + rng() % 6, horizon = 1 + rng() % 40;
    const double g = rng.uniform(0.8, 1.0), lam = rng.uniform(0.0, 1.0);
    std::vector<double> r(lanes * horizon), v(lanes * horizon), boot(lanes);
    std::vector<std::uint8_t> d(lanes * horizon);
    for (auto& x : r) x = rng.uniform(-1, 1);
    for (auto& x : v) x = rng.uniform(-5, 5);
    for (auto& x : boot) x = rng.uniform(-5, 5);
    for (auto& x : d) x = rng.uniform01() < 0.1;
    const GaeResult got = compute_gae(r, v, d, boot, lanes, horizon, g, lam);
    const auto want = gae_oracle(r, v, d, boot, lanes, horizon, g, lam);
    for (std::size_t i = 0; i < want.size(); ++i) {
      ASSERT_NEAR(got.advantages[i], want[i], 1e-10) << "instance " << inst;
      ASSERT_NEAR(got.returns[i], want[i] + v[i], 1e-10);
    }
  }
}

TEST(Gae, ShapeMismatchThrows) {
  const std::vector<double> r(6), v(6), boot(1);
  const std::vector<std::uint8_t> d(6);
  EXPECT_THROW(compute_gae(r, v, d, boot, 2, 3, 0.9, 0.9), ContractViolation);
}

TEST(Advantages, NormalizedMoments) {
  CounterRng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> a(2 + rng() % 5000);
    const double shift = rng.uniform(-100, 100), scale = rng.uniform(0.01, 50);
    for (double& x : a) x = shift + scale * rng.normal();
    normalize_advantages(a);
    double m = 0, s = 0;
    for (double x : a) m += x;
    m /= a.size();
    for (double x : a) s += (x - m) * (x - m);
    EXPECT_LT(std::abs(m), 1e-6);
    EXPECT_LT(std::abs(std::sqrt(s / a.size()) - 1.0), 1e-3);
  }
}

TEST(PpoLoss, GradientMatchesFiniteDifferences) {
  CounterRng rng(5);
  PpoHyperparams h;
  h.entropy_coef = 0.01;
  for (int draw = 0; draw < 5; ++draw) {
    PolicyModel<double> m = small_model(draw);
    const Batch b = random_batch(m, 16, rng, 0.05);
    PolicyModel<double> g = m.zeros_like();
    const LossStats st = ppo_loss_and_grad(m, b.view(), h, g);
    EXPECT_EQ(st.clip_fraction, 0.0);
    auto pb = m.blocks();
    auto gb = g.blocks();
    for (std::size_t blk = 0; blk < pb.size(); ++blk) {
      for (int t = 0; t < 30; ++t) {
        const std::size_t i = rng() % pb[blk].size();
        const double keep = pb[blk][i], step = 1e-6;
        pb[blk][i] = keep + step;
        const double up = loss_of(m, b, h);
        pb[blk][i] = keep - step;
        const double dn = loss_of(m, b, h);
        pb[blk][i] = keep;
        const double fd = (up - dn) / (2 * step);
        const double an = gb[blk][i];
        ASSERT_LT(std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-6}), 1e-4)
            << "block " << blk << " index " << i;
      }
    }
  }
}

TEST(PpoLoss, RatioOneNoClipNoKl) {
  PolicyModel<double> m = small_model(1);
  CounterRng rng(6);
  const Batch b = random_batch(m, 32, rng, 0.0);
  PolicyModel<double> g = m.zeros_like();
  const LossStats st = ppo_loss_and_grad(m, b.view(), PpoHyperparams{}, g);
  EXPECT_EQ(st.clip_fraction, 0.0);
  EXPECT_NEAR(st.approx_kl, 0.0, 1e-12);
  double mean_adv = 0;
  for (double a : b.adv) mean_adv += a / b.n;
  EXPECT_NEAR(st.policy_loss, -mean_adv, 1e-12);
}

TEST(PpoLoss, ClippedSamplesGiveZeroPolicyGradient) {
  PolicyModel<double> m = small_model(2);
  CounterRng rng(7);
  Batch b = random_batch(m, 8, rng, 0.0);
  // rho = e^1 > 1 + eps with positive advantage: the clipped branch is the minimum.
  for (std::size_t i = 0; i < b.n; ++i) {
    b.old_lp[i] -= 1.0;
    b.adv[i] = std::abs(b.adv[i]) + 0.1;
  }
  PpoHyperparams h;
  h.value_coef = 0.0;
  h.entropy_coef = 0.0;
  PolicyModel<double> g = m.zeros_like();
  const LossStats st = ppo_loss_and_grad(m, b.view(), h, g);
  EXPECT_EQ(st.clip_fraction, 1.0);
  for (auto blk : g.blocks())
    for (double x : blk) ASSERT_EQ(x, 0.0);
  // Same ratio with a negative advantage takes the unclipped branch and does move the policy.
  for (double& a : b.adv) a = -a;
  PolicyModel<double> g2 = m.zeros_like();
  ppo_loss_and_grad(m, b.view(), h, g2);
  double n2 = 0;
  for (double x : g2.actor.parameters()) n2 += x * x;
  EXPECT_GT(n2, 0.0);
}

TEST(PpoLoss, ApproxKlNonNegative) {
  CounterRng rng(8);
  for (int i = 0; i < 50; ++i) {
    PolicyModel<double> m = small_model(i);
    const Batch b = random_batch(m, 16, rng, 2.0);
    PolicyModel<double> g = m.zeros_like();
    EXPECT_GT(ppo_loss_and_grad(m, b.view(), PpoHyperparams{}, g).approx_kl, -1e-3);
  }
}

TEST(PpoLoss, ZeroAdvantageAndPerfectValueGiveOnlyEntropyGradient) {
  PolicyModel<double> m = small_model(3);
  CounterRng rng(9);
  Batch b = random_batch(m, 8, rng, 0.1);
  for (std::size_t i = 0; i < b.n; ++i) {
    b.adv[i] = 0.0;
    b.ret[i] = forward_critic(m, std::span<const double>(&b.priv[i * kPrivDim], kPrivDim));
  }
  PpoHyperparams h;
  h.entropy_coef = 0.02;
  PolicyModel<double> g = m.zeros_like();
  ppo_loss_and_grad(m, b.view(), h, g);
  for (double x : g.actor.parameters()) ASSERT_EQ(x, 0.0);
  for (double x : g.critic.parameters()) ASSERT_NEAR(x, 0.0, 1e-12);
  for (double x : g.log_std) ASSERT_NEAR(x, -0.02, 1e-15);
}

TEST(Adam, MatchesReferenceUpdate) {
  PolicyModel<double> p(actor_spec(kObsDim, {4}), critic_spec(kPrivDim, {4}));
  p.init(1);
  PolicyModel<double> g = p.zeros_like();
  CounterRng rng(1);
  for (auto blk : g.blocks())
    for (double& x : blk) x = rng.uniform(-1, 1);
  const PolicyModel<double> p0 = p;
  AdamState<double> st(p);
  PpoHyperparams h;
  adam_step(p, g, st, 1e-3, h);
  adam_step(p, g, st, 1e-3, h);
  // Two identical gradients: m_hat = g and v_hat = g^2, so each step moves by lr * g / (|g| + eps).
  const std::span<const double> a = p.actor.parameters(), a0 = p0.actor.parameters(), ga = g.actor.parameters();
  for (std::size_t i = 0; i < a.size(); ++i)
    ASSERT_NEAR(a[i], a0[i] - 2e-3 * ga[i] / (std::abs(ga[i]) + 1e-8), 1e-9);
  EXPECT_EQ(st.step, 2u);
}

TEST(GradClip, ScalesToMaxNorm) {
  PolicyModel<double> g(actor_spec(kObsDim, {4}), critic_spec(kPrivDim, {4}));
  for (auto blk : g.blocks())
    for (double& x : blk) x = 1.0;
  const double n0 = std::sqrt(static_cast<double>(g.parameter_count()));
  EXPECT_NEAR(clip_grad_norm(g, 1.0), n0, 1e-9);
  double sq = 0;
  for (auto blk : g.blocks())
    for (double x : blk) sq += x * x;
  EXPECT_NEAR(std::sqrt(sq), 1.0, 1e-5);
  EXPECT_NEAR(clip_grad_norm(g, 10.0), std::sqrt(sq), 1e-12);  // below the limit: untouched
}

TEST(PpoUpdate, RolloutAndUpdateSmoke) {
  EnvConfig cfg;
  EnvBatch envs(cfg, 3, 4);
  for (std::size_t l = 0; l < envs.size(); ++l) envs[l].reset();
  PolicyModel<float> m(actor_spec(kObsDim, {16}), critic_spec(kPrivDim, {16}));
  m.init(3);
  AdamState<float> adam(m);
  PpoHyperparams h;
  h.num_lanes = 4;
  h.rollout_horizon = 32;
  h.minibatch_count = 4;
  h.epochs_per_update = 2;
  RolloutState rs;
  RolloutBuffer buf;
  collect_rollout(envs, m, h, 3, rs, buf);
  EXPECT_EQ(buf.size(), 128u);
  EXPECT_EQ(rs.global_step, 32u);
  const PolicyModel<float> before = m;
  const UpdateMetrics u = ppo_update(buf, m, adam, h, 3e-4, 3, 0);
  EXPECT_TRUE(std::isfinite(u.policy_loss));
  EXPECT_GE(u.clip_fraction, 0.0);
  EXPECT_FALSE(std::equal(before.actor.parameters().begin(), before.actor.parameters().end(),
                          m.actor.parameters().begin()));
  EXPECT_EQ(adam.step, 8u);

  // A NaN reward aborts the update and leaves the parameters untouched.
  buf.rewards[5] = std::nan("");
  const PolicyModel<float> snap = m;
  EXPECT_THROW(ppo_update(buf, m, adam, h, 3e-4, 3, 1), NonFiniteLoss);
  EXPECT_TRUE(std::equal(snap.actor.parameters().begin(), snap.actor.parameters().end(), m.actor.parameters().begin()));
  EXPECT_EQ(adam.step, 8u);
}

TEST(PpoHyperparams, Validation) {
  PpoHyperparams h;
  h.num_lanes = 10;
  h.rollout_horizon = 3;
  h.minibatch_count = 4;
  EXPECT_THROW(h.validate(), ConfigError);
  h = PpoHyperparams{};
  h.clip_epsilon = 0.0;
  EXPECT_THROW(h.validate(), ConfigError);
}
