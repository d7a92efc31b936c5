#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace gflowlab {

inline constexpr double kLeakySlope = 0.01;
// Stand-in for -inf at disallowed actions; keeps arithmetic finite.
inline constexpr double kMaskedLogit = -1e9;

// 1 = action allowed.
using Mask = std::vector<std::uint8_t>;
// Column j is the mask of sample j (actions x samples).
using MaskMatrix = Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

using MatrixMap = Eigen::Map<Eigen::MatrixXd>;
using ConstMatrixMap = Eigen::Map<const Eigen::MatrixXd>;
using VectorMap = Eigen::Map<Eigen::VectorXd>;
using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;

// Flat parameter storage for a stack of affine layers. Layer i has a
// (sizes[i+1] x sizes[i]) column-major weight followed by a sizes[i+1] bias.
class LayerParams {
 public:
  LayerParams() = default;
  explicit LayerParams(std::vector<int> sizes);

  const std::vector<int>& sizes() const { return sizes_; }
  std::size_t num_layers() const { return sizes_.empty() ? 0 : sizes_.size() - 1; }

  MatrixMap weight(std::size_t layer);
  ConstMatrixMap weight(std::size_t layer) const;
  VectorMap bias(std::size_t layer);
  ConstVectorMap bias(std::size_t layer) const;

  std::span<double> flat() { return values_; }
  std::span<const double> flat() const { return values_; }
  std::size_t size() const { return values_.size(); }

  bool same_shape(const LayerParams& other) const { return sizes_ == other.sizes_; }
  void set_zero();

  friend bool operator==(const LayerParams&, const LayerParams&) = default;

 private:
  std::vector<int> sizes_;
  std::vector<std::size_t> offsets_;  // start of layer i's weight block
  // Vectorized reductions over a map peel a prefix that depends on the
  // pointer's alignment; a fixed base alignment keeps every summation order,
  // and so every result, independent of where the heap places the buffer.
  std::vector<double, Eigen::aligned_allocator<double>> values_;
};

// Feed-forward network with leaky-rectifier hidden units and a linear output.
class Mlp {
 public:
  Mlp() = default;
  // All parameters zero. Throws ConfigError on fewer than two sizes or a
  // non-positive size.
  explicit Mlp(std::vector<int> layer_sizes);

  const std::vector<int>& layer_sizes() const { return params_.sizes(); }
  std::size_t num_layers() const { return params_.num_layers(); }
  int input_dim() const { return params_.sizes().front(); }
  int output_dim() const { return params_.sizes().back(); }

  LayerParams& params() { return params_; }
  const LayerParams& params() const { return params_; }

  friend bool operator==(const Mlp&, const Mlp&) = default;

 private:
  LayerParams params_;
};

// Weights ~ U(-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out))), biases 0.
Mlp mlp_init(std::vector<int> layer_sizes, std::uint64_t seed);

Eigen::VectorXd mlp_forward(const Mlp& net, std::span<const double> features);

// Masked entries get kMaskedLogit; the rest are log-probabilities normalized
// over the allowed entries only.
std::vector<double> masked_log_softmax(std::span<const double> logits, const Mask& mask);

struct GradBuffer {
  GradBuffer() = default;
  explicit GradBuffer(const Mlp& net) : params(net.layer_sizes()) {}

  void zero() {
    params.set_zero();
    log_z = 0.0;
  }

  LayerParams params;
  double log_z = 0.0;
};

// grad += weight * d log_softmax(net(features))[action] / d theta.
void backprop_logprob(const Mlp& net, std::span<const double> features, const Mask& mask,
                      int action_index, double weight, GradBuffer& grad);

// grad += d <output_weights, net(features)> / d theta. Used for scalar heads.
void backprop_output(const Mlp& net, std::span<const double> features,
                     std::span<const double> output_weights, GradBuffer& grad);

struct AdamState {
  AdamState() = default;
  AdamState(std::size_t num_params, double learning_rate)
      : lr(learning_rate), m(num_params, 0.0), v(num_params, 0.0) {}

  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t t = 0;
  std::vector<double> m;
  std::vector<double> v;
};

inline AdamState adam_init(const Mlp& net, double lr) { return AdamState(net.params().size(), lr); }

// Bias-corrected Adam on a flat parameter vector; zeroes `grad` afterwards.
// Throws NumericError (without touching anything) on a non-finite gradient.
void adam_step(std::span<double> params, std::span<double> grad, AdamState& state);
// Updates the network from grad.params; grad.log_z is left alone because
// log Z has its own optimizer state.
void adam_step(Mlp& net, GradBuffer& grad, AdamState& state);

// max_i |analytic_i - fd_i| / max(|analytic_i|, 1e-8), fd from the
// fourth-order central difference with step h.
double finite_diff_check(const std::function<double(std::span<const double>)>& loss_fn,
                         std::span<const double> params, std::span<const double> analytic,
                         double h);
double finite_diff_check(const std::function<double(const Mlp&)>& loss_fn, const Mlp& net,
                         const GradBuffer& analytic, double h);

// ---------------------------------------------------------------------------
// Batched passes. Samples are columns.

struct ForwardPass {
  std::vector<Eigen::MatrixXd> inputs;  // inputs[i] feeds layer i
  Eigen::MatrixXd output;               // last layer pre-activation
};

ForwardPass forward_batch(const Mlp& net, Eigen::MatrixXd features);

// grad += sum_j d <upstream[:, j], output[:, j]> / d theta.
void backward_batch(const Mlp& net, const ForwardPass& pass, Eigen::MatrixXd upstream,
                    LayerParams& grad);

// Log-probabilities of one chosen action per sample under masked softmax.
struct ActionLogProbs {
  ForwardPass pass;
  Eigen::MatrixXd log_probs;  // actions x samples, masked entries kMaskedLogit
  std::vector<int> actions;
  Eigen::VectorXd chosen;     // chosen[j] = log_probs(actions[j], j)
};

ActionLogProbs action_logprobs(const Mlp& net, Eigen::MatrixXd features, const MaskMatrix& masks,
                               std::span<const int> actions);

// grad += sum_j weights[j] * d chosen[j] / d theta.
void accumulate_logprob_grad(const Mlp& net, const ActionLogProbs& lp,
                             std::span<const double> weights, GradBuffer& grad);

}  // namespace gflowlab
