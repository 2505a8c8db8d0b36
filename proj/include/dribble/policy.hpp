#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dribble/dynamics.hpp"
#include "dribble/rng.hpp"

namespace dribble {

enum class Activation : std::uint32_t { kElu = 0 };

std::string activation_name(Activation a);
Activation parse_activation(const std::string& name);

struct MlpSpec {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden_dims;
  std::size_t output_dim = 0;
  Activation activation = Activation::kElu;

  /// Throws ContractViolation if any dimension is zero.
  void validate() const;
  std::size_t layer_count() const { return hidden_dims.size() + 1; }
  std::size_t layer_input(std::size_t l) const { return l == 0 ? input_dim : hidden_dims[l - 1]; }
  std::size_t layer_output(std::size_t l) const { return l == hidden_dims.size() ? output_dim : hidden_dims[l]; }
  std::size_t parameter_count() const;
  friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

MlpSpec actor_spec(std::size_t obs_dim, std::vector<std::size_t> hidden = {512, 256, 128});
MlpSpec critic_spec(std::size_t priv_dim, std::vector<std::size_t> hidden = {768, 256, 128});

/// Dense MLP with ELU hidden layers and a linear output. Parameters live in one flat buffer:
/// per layer, the weight matrix stored input-major (W[i][j] links input i to output j),
/// followed by the bias vector.
template <typename T>
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(MlpSpec spec);

  /// Intermediate activations of one batched forward pass, kept for backward.
  struct Cache {
    std::size_t batch = 0;
    std::vector<std::vector<T>> layers;  // [0] = input, [l + 1] = output of layer l
    std::span<const T> output() const { return layers.back(); }
  };

  const MlpSpec& spec() const { return spec_; }
  std::span<T> parameters() { return params_; }
  std::span<const T> parameters() const { return params_; }
  std::span<T> weight(std::size_t l);
  std::span<const T> weight(std::size_t l) const;
  std::span<T> bias(std::size_t l);
  std::span<const T> bias(std::size_t l) const;

  /// Batched forward; input is batch x input_dim row-major. Throws ContractViolation on size mismatch.
  void forward(std::span<const T> input, std::size_t batch, Cache& cache) const;
  /// Accumulates dLoss/dParams into `grad` (same layout as parameters()). When `d_input` is
  /// non-null it receives dLoss/dInput.
  void backward(const Cache& cache, std::span<const T> d_output, std::span<T> grad,
                std::vector<T>* d_input = nullptr) const;

  /// Orthogonal init: hidden layers with gain `hidden_gain`, output with `output_gain`, zero biases.
  void init_orthogonal(std::uint64_t seed, double hidden_gain, double output_gain);

 private:
  MlpSpec spec_;
  std::vector<T> params_;
  std::vector<std::size_t> offsets_;  // start of each layer's weights
};

inline constexpr double kLogStdMin = -4.0;
inline constexpr double kLogStdMax = 1.0;

/// Actor (observation -> action mean), state-independent log-std, critic (privileged -> value).
template <typename T>
struct PolicyModel {
  Mlp<T> actor;
  Mlp<T> critic;
  std::vector<T> log_std;

  PolicyModel() = default;
  PolicyModel(const MlpSpec& actor_spec, const MlpSpec& critic_spec, double init_log_std = -0.5);

  /// Zero-valued model of the same shape (gradient accumulators, optimizer moments).
  PolicyModel zeros_like() const;
  /// Views over every parameter block, in serialization order: actor, critic, log_std.
  std::vector<std::span<T>> blocks();
  std::vector<std::span<const T>> blocks() const;
  std::size_t parameter_count() const;
  void clamp_log_std();
  void init(std::uint64_t seed);
};

struct ActionDistribution {
  std::array<double, kActionDim> mean{};
  std::array<double, kActionDim> std{};
};

double gaussian_entropy(const ActionDistribution& dist);

/// Single-observation actor pass. Throws ContractViolation on dimension mismatch.
template <typename T>
ActionDistribution forward_actor(const PolicyModel<T>& model, std::span<const double> obs);
/// Single-observation critic pass.
template <typename T>
double forward_critic(const PolicyModel<T>& model, std::span<const double> priv);

struct SampledAction {
  std::array<double, kActionDim> action{};
  double logprob = 0.0;
};

SampledAction sample_and_logprob(const ActionDistribution& dist, CounterRng& rng);
/// Diagonal-Gaussian log-density of `action`, summed over dimensions.
double logprob_of(const ActionDistribution& dist, const std::array<double, kActionDim>& action);

}  // namespace dribble
