#include "dribble/policy.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "dribble/common.hpp"
#include "dribble/simd/kernels.hpp"

namespace dribble {

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::kElu: return "elu";
  }
  return "unknown";
}

Activation parse_activation(const std::string& name) {
  if (name == "elu") return Activation::kElu;
  throw ConfigError("unsupported activation '" + name + "' (supported: elu)");
}

void MlpSpec::validate() const {
  if (input_dim == 0 || output_dim == 0) throw ContractViolation("MlpSpec: zero input or output dimension");
  for (std::size_t h : hidden_dims) {
    if (h == 0) throw ContractViolation("MlpSpec: zero hidden width");
  }
}

std::size_t MlpSpec::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < layer_count(); ++l) n += (layer_input(l) + 1) * layer_output(l);
  return n;
}

MlpSpec actor_spec(std::size_t obs_dim, std::vector<std::size_t> hidden) {
  return MlpSpec{obs_dim, std::move(hidden), kActionDim, Activation::kElu};
}

MlpSpec critic_spec(std::size_t priv_dim, std::vector<std::size_t> hidden) {
  return MlpSpec{priv_dim, std::move(hidden), 1, Activation::kElu};
}

template <typename T>
Mlp<T>::Mlp(MlpSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  std::size_t off = 0;
  for (std::size_t l = 0; l < spec_.layer_count(); ++l) {
    offsets_.push_back(off);
    off += (spec_.layer_input(l) + 1) * spec_.layer_output(l);
  }
  params_.assign(off, T(0));
}

template <typename T>
std::span<T> Mlp<T>::weight(std::size_t l) {
  return std::span<T>(params_).subspan(offsets_.at(l), spec_.layer_input(l) * spec_.layer_output(l));
}

template <typename T>
std::span<const T> Mlp<T>::weight(std::size_t l) const {
  return std::span<const T>(params_).subspan(offsets_.at(l), spec_.layer_input(l) * spec_.layer_output(l));
}

template <typename T>
std::span<T> Mlp<T>::bias(std::size_t l) {
  return std::span<T>(params_).subspan(offsets_.at(l) + spec_.layer_input(l) * spec_.layer_output(l),
                                       spec_.layer_output(l));
}

template <typename T>
std::span<const T> Mlp<T>::bias(std::size_t l) const {
  return std::span<const T>(params_).subspan(offsets_.at(l) + spec_.layer_input(l) * spec_.layer_output(l),
                                             spec_.layer_output(l));
}

template <typename T>
void Mlp<T>::forward(std::span<const T> input, std::size_t batch, Cache& cache) const {
  if (params_.empty()) throw ContractViolation("Mlp::forward on an empty network");
  if (input.size() != batch * spec_.input_dim) {
    throw ContractViolation("Mlp::forward: input has " + std::to_string(input.size()) + " values, expected " +
                            std::to_string(batch * spec_.input_dim));
  }
  const auto& kt = simd::kernels<T>();
  const std::size_t layers = spec_.layer_count();
  cache.batch = batch;
  cache.layers.resize(layers + 1);
  cache.layers[0].assign(input.begin(), input.end());
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t in = spec_.layer_input(l), out = spec_.layer_output(l);
    auto& y = cache.layers[l + 1];
    y.resize(batch * out);
    if (batch == 0) continue;
    kt.gemm(false, false, batch, out, in, cache.layers[l].data(), in, weight(l).data(), out, false, y.data(), out);
    kt.add_bias(batch, out, bias(l).data(), y.data(), out);
    if (l + 1 < layers) kt.elu_forward(y.size(), y.data(), y.data());
  }
}

template <typename T>
void Mlp<T>::backward(const Cache& cache, std::span<const T> d_output, std::span<T> grad,
                      std::vector<T>* d_input) const {
  const std::size_t layers = spec_.layer_count();
  const std::size_t batch = cache.batch;
  if (cache.layers.size() != layers + 1) throw ContractViolation("Mlp::backward: cache from a different network");
  if (d_output.size() != batch * spec_.output_dim) throw ContractViolation("Mlp::backward: d_output size mismatch");
  if (grad.size() != params_.size()) throw ContractViolation("Mlp::backward: gradient buffer size mismatch");
  const auto& kt = simd::kernels<T>();

  std::vector<T> dz(d_output.begin(), d_output.end());
  std::vector<T> da;
  for (std::size_t l = layers; l-- > 0;) {
    const std::size_t in = spec_.layer_input(l), out = spec_.layer_output(l);
    const T* x = cache.layers[l].data();
    T* gw = grad.data() + offsets_[l];
    T* gb = gw + in * out;
    if (batch > 0) {
      kt.gemm(true, false, in, out, batch, x, in, dz.data(), out, true, gw, out);
      kt.column_sum(batch, out, dz.data(), out, gb);
    }
    if (l == 0 && d_input == nullptr) break;
    da.assign(batch * in, T(0));
    if (batch > 0) kt.gemm(false, true, batch, in, out, dz.data(), out, weight(l).data(), out, false, da.data(), in);
    if (l == 0) {
      *d_input = std::move(da);
      break;
    }
    dz.resize(batch * in);
    kt.elu_backward(da.size(), x, da.data(), dz.data());
  }
}

template <typename T>
void Mlp<T>::init_orthogonal(std::uint64_t seed, double hidden_gain, double output_gain) {
  CounterRng rng(derive_key(seed, StreamKind::kInit));
  for (std::size_t l = 0; l < spec_.layer_count(); ++l) {
    const Eigen::Index in = static_cast<Eigen::Index>(spec_.layer_input(l));
    const Eigen::Index out = static_cast<Eigen::Index>(spec_.layer_output(l));
    const bool tall = in >= out;
    const Eigen::Index rows = tall ? in : out, cols = tall ? out : in;
    Eigen::MatrixXd a(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) a(i, j) = rng.normal();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(rows, cols);
    const Eigen::MatrixXd r = qr.matrixQR().topRows(cols).template triangularView<Eigen::Upper>();
    for (Eigen::Index j = 0; j < cols; ++j) {
      if (r(j, j) < 0) q.col(j) *= -1.0;
    }
    const double gain = l + 1 == spec_.layer_count() ? output_gain : hidden_gain;
    auto w = weight(l);
    for (Eigen::Index i = 0; i < in; ++i) {
      for (Eigen::Index j = 0; j < out; ++j) {
        const double v = tall ? q(i, j) : q(j, i);
        w[static_cast<std::size_t>(i * out + j)] = static_cast<T>(gain * v);
      }
    }
    std::ranges::fill(bias(l), T(0));
  }
}

template <typename T>
PolicyModel<T>::PolicyModel(const MlpSpec& a, const MlpSpec& c, double init_log_std)
    : actor(a), critic(c), log_std(a.output_dim, static_cast<T>(init_log_std)) {
  if (c.output_dim != 1) throw ContractViolation("critic must have a single output");
  clamp_log_std();
}

template <typename T>
PolicyModel<T> PolicyModel<T>::zeros_like() const {
  PolicyModel z;
  z.actor = Mlp<T>(actor.spec());
  z.critic = Mlp<T>(critic.spec());
  z.log_std.assign(log_std.size(), T(0));
  return z;
}

template <typename T>
std::vector<std::span<T>> PolicyModel<T>::blocks() {
  return {actor.parameters(), critic.parameters(), std::span<T>(log_std)};
}

template <typename T>
std::vector<std::span<const T>> PolicyModel<T>::blocks() const {
  return {actor.parameters(), critic.parameters(), std::span<const T>(log_std)};
}

template <typename T>
std::size_t PolicyModel<T>::parameter_count() const {
  return actor.parameters().size() + critic.parameters().size() + log_std.size();
}

template <typename T>
void PolicyModel<T>::clamp_log_std() {
  for (T& v : log_std) v = std::clamp(v, static_cast<T>(kLogStdMin), static_cast<T>(kLogStdMax));
}

template <typename T>
void PolicyModel<T>::init(std::uint64_t seed) {
  actor.init_orthogonal(derive_key(seed, 0), std::sqrt(2.0), 0.01);
  critic.init_orthogonal(derive_key(seed, 1), std::sqrt(2.0), 1.0);
}

template <typename T>
ActionDistribution forward_actor(const PolicyModel<T>& model, std::span<const double> obs) {
  if (obs.size() != model.actor.spec().input_dim) throw ContractViolation("forward_actor: observation size mismatch");
  std::vector<T> x(obs.begin(), obs.end());
  typename Mlp<T>::Cache cache;
  model.actor.forward(x, 1, cache);
  ActionDistribution d;
  const auto out = cache.output();
  for (std::size_t j = 0; j < kActionDim; ++j) {
    d.mean[j] = static_cast<double>(out[j]);
    d.std[j] = std::exp(std::clamp(static_cast<double>(model.log_std[j]), kLogStdMin, kLogStdMax));
  }
  return d;
}

template <typename T>
double forward_critic(const PolicyModel<T>& model, std::span<const double> priv) {
  if (priv.size() != model.critic.spec().input_dim) throw ContractViolation("forward_critic: input size mismatch");
  std::vector<T> x(priv.begin(), priv.end());
  typename Mlp<T>::Cache cache;
  model.critic.forward(x, 1, cache);
  return static_cast<double>(cache.output()[0]);
}

namespace {
constexpr double kHalfLog2Pi = 0.91893853320467274178;
}

double gaussian_entropy(const ActionDistribution& dist) {
  double h = 0.0;
  for (std::size_t j = 0; j < kActionDim; ++j) h += std::log(dist.std[j]) + 0.5 + kHalfLog2Pi;
  return h;
}

double logprob_of(const ActionDistribution& dist, const std::array<double, kActionDim>& action) {
  double lp = 0.0;
  for (std::size_t j = 0; j < kActionDim; ++j) {
    const double z = (action[j] - dist.mean[j]) / dist.std[j];
    lp += -0.5 * z * z - std::log(dist.std[j]) - kHalfLog2Pi;
  }
  return lp;
}

SampledAction sample_and_logprob(const ActionDistribution& dist, CounterRng& rng) {
  SampledAction s;
  for (std::size_t j = 0; j < kActionDim; ++j) s.action[j] = dist.mean[j] + dist.std[j] * rng.normal();
  s.logprob = logprob_of(dist, s.action);
  return s;
}

template class Mlp<float>;
template class Mlp<double>;
template struct PolicyModel<float>;
template struct PolicyModel<double>;
template ActionDistribution forward_actor(const PolicyModel<float>&, std::span<const double>);
template ActionDistribution forward_actor(const PolicyModel<double>&, std::span<const double>);
template double forward_critic(const PolicyModel<float>&, std::span<const double>);
template double forward_critic(const PolicyModel<double>&, std::span<const double>);

}  // namespace dribble
