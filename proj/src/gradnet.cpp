#include "gflowlab/gradnet.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "gflowlab/error.hpp"
#include "gflowlab/rng.hpp"

namespace gflowlab {
namespace {

void check_sizes(const std::vector<int>& sizes) {
  if (sizes.size() < 2) throw ConfigError("layer_sizes needs at least input and output sizes");
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (sizes[i] < 1) {
      throw ConfigError("layer_sizes[" + std::to_string(i) + "] must be >= 1, got " +
                        std::to_string(sizes[i]));
    }
  }
}

template <typename Derived>
void leaky_inplace(Eigen::MatrixBase<Derived>& m) {
  m = m.unaryExpr([](double x) { return x > 0.0 ? x : kLeakySlope * x; });
}

Eigen::MatrixXd as_column(std::span<const double> v) {
  return ConstVectorMap(v.data(), static_cast<Eigen::Index>(v.size()));
}

void check_mask(const Mask& mask, std::size_t n) {
  if (mask.size() != n) {
    throw ContractViolation("mask length " + std::to_string(mask.size()) +
                            " does not match logits length " + std::to_string(n));
  }
  if (std::none_of(mask.begin(), mask.end(), [](std::uint8_t m) { return m != 0; })) {
    throw ContractViolation("mask has no allowed action");
  }
}

}  // namespace

LayerParams::LayerParams(std::vector<int> sizes) : sizes_(std::move(sizes)) {
  check_sizes(sizes_);
  std::size_t total = 0;
  for (std::size_t i = 0; i + 1 < sizes_.size(); ++i) {
    offsets_.push_back(total);
    total += static_cast<std::size_t>(sizes_[i + 1]) * (static_cast<std::size_t>(sizes_[i]) + 1);
  }
  values_.assign(total, 0.0);
}

MatrixMap LayerParams::weight(std::size_t layer) {
  return {values_.data() + offsets_[layer], sizes_[layer + 1], sizes_[layer]};
}
ConstMatrixMap LayerParams::weight(std::size_t layer) const {
  return {values_.data() + offsets_[layer], sizes_[layer + 1], sizes_[layer]};
}
VectorMap LayerParams::bias(std::size_t layer) {
  const std::size_t off = offsets_[layer] + static_cast<std::size_t>(sizes_[layer + 1]) * sizes_[layer];
  return {values_.data() + off, sizes_[layer + 1]};
}
ConstVectorMap LayerParams::bias(std::size_t layer) const {
  const std::size_t off = offsets_[layer] + static_cast<std::size_t>(sizes_[layer + 1]) * sizes_[layer];
  return {values_.data() + off, sizes_[layer + 1]};
}

void LayerParams::set_zero() { std::fill(values_.begin(), values_.end(), 0.0); }

Mlp::Mlp(std::vector<int> layer_sizes) : params_(std::move(layer_sizes)) {}

Mlp mlp_init(std::vector<int> layer_sizes, std::uint64_t seed) {
  Mlp net(std::move(layer_sizes));
  Rng rng(seed, "mlp_init");
  for (std::size_t i = 0; i < net.num_layers(); ++i) {
    auto w = net.params().weight(i);
    const double bound = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    for (Eigen::Index c = 0; c < w.cols(); ++c) {
      for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = (2.0 * rng.uniform() - 1.0) * bound;
    }
  }
  return net;
}

ForwardPass forward_batch(const Mlp& net, Eigen::MatrixXd features) {
  if (features.rows() != net.input_dim()) {
    throw ContractViolation("feature dimension " + std::to_string(features.rows()) +
                            " does not match network input " + std::to_string(net.input_dim()));
  }
  ForwardPass pass;
  const std::size_t layers = net.num_layers();
  pass.inputs.reserve(layers);
  pass.inputs.push_back(std::move(features));
  for (std::size_t i = 0; i < layers; ++i) {
    const auto& p = net.params();
    Eigen::MatrixXd z = p.weight(i) * pass.inputs[i];
    z.colwise() += p.bias(i);
    if (i + 1 < layers) {
      leaky_inplace(z);
      pass.inputs.push_back(std::move(z));
    } else {
      pass.output = std::move(z);
    }
  }
  return pass;
}

void backward_batch(const Mlp& net, const ForwardPass& pass, Eigen::MatrixXd upstream,
                    LayerParams& grad) {
  if (!grad.same_shape(net.params())) throw ContractViolation("gradient buffer shape mismatch");
  for (std::size_t i = net.num_layers(); i-- > 0;) {
    grad.weight(i).noalias() += upstream * pass.inputs[i].transpose();
    grad.bias(i) += upstream.rowwise().sum();
    if (i == 0) break;
    Eigen::MatrixXd down = net.params().weight(i).transpose() * upstream;
    // inputs[i] = leaky(z) has the same sign as z, so it also gives the slope.
    down = (pass.inputs[i].array() > 0.0).select(down, kLeakySlope * down);
    upstream = std::move(down);
  }
}

Eigen::VectorXd mlp_forward(const Mlp& net, std::span<const double> features) {
  if (static_cast<int>(features.size()) != net.input_dim()) {
    throw ContractViolation("feature length " + std::to_string(features.size()) +
                            " does not match network input " + std::to_string(net.input_dim()));
  }
  return forward_batch(net, as_column(features)).output.col(0);
}

std::vector<double> masked_log_softmax(std::span<const double> logits, const Mask& mask) {
  check_mask(mask, logits.size());
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (mask[i]) peak = std::max(peak, logits[i]);
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (mask[i]) sum += std::exp(logits[i] - peak);
  }
  const double lse = peak + std::log(sum);
  std::vector<double> out(logits.size(), kMaskedLogit);
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (mask[i]) out[i] = logits[i] - lse;
  }
  return out;
}

namespace {

// Column-wise masked log-softmax on an (actions x samples) matrix.
Eigen::MatrixXd masked_log_softmax_cols(const Eigen::MatrixXd& logits, const MaskMatrix& masks) {
  Eigen::MatrixXd out(logits.rows(), logits.cols());
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    double peak = -std::numeric_limits<double>::infinity();
    for (Eigen::Index a = 0; a < logits.rows(); ++a) {
      if (masks(a, j)) peak = std::max(peak, logits(a, j));
    }
    if (!std::isfinite(peak) && peak < 0) throw ContractViolation("mask has no allowed action");
    double sum = 0.0;
    for (Eigen::Index a = 0; a < logits.rows(); ++a) {
      if (masks(a, j)) sum += std::exp(logits(a, j) - peak);
    }
    const double lse = peak + std::log(sum);
    for (Eigen::Index a = 0; a < logits.rows(); ++a) {
      out(a, j) = masks(a, j) ? logits(a, j) - lse : kMaskedLogit;
    }
  }
  return out;
}

}  // namespace

ActionLogProbs action_logprobs(const Mlp& net, Eigen::MatrixXd features, const MaskMatrix& masks,
                               std::span<const int> actions) {
  const auto n = features.cols();
  if (masks.cols() != n || masks.rows() != net.output_dim() ||
      static_cast<Eigen::Index>(actions.size()) != n) {
    throw ContractViolation("action_logprobs: batch shapes disagree");
  }
  ActionLogProbs lp;
  lp.pass = forward_batch(net, std::move(features));
  lp.log_probs = masked_log_softmax_cols(lp.pass.output, masks);
  lp.actions.assign(actions.begin(), actions.end());
  lp.chosen.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const int a = actions[j];
    if (a < 0 || a >= net.output_dim() || !masks(a, j)) {
      throw ContractViolation("action " + std::to_string(a) + " is masked for sample " +
                              std::to_string(j));
    }
    lp.chosen(j) = lp.log_probs(a, j);
  }
  return lp;
}

void accumulate_logprob_grad(const Mlp& net, const ActionLogProbs& lp,
                             std::span<const double> weights, GradBuffer& grad) {
  const auto n = lp.log_probs.cols();
  if (static_cast<Eigen::Index>(weights.size()) != n) {
    throw ContractViolation("accumulate_logprob_grad: one weight per sample required");
  }
  // d log p_a / d logits = onehot(a) - softmax; masked entries have softmax 0.
  // Vectorized exp clamps its argument, so the sentinel is zeroed explicitly.
  const auto masked = lp.log_probs.array() <= 0.5 * kMaskedLogit;
  Eigen::MatrixXd upstream = masked.select(0.0, -lp.log_probs.array().exp()).matrix();
  for (Eigen::Index j = 0; j < n; ++j) {
    upstream(lp.actions[j], j) += 1.0;
    upstream.col(j) *= weights[j];
  }
  backward_batch(net, lp.pass, std::move(upstream), grad.params);
}

void backprop_logprob(const Mlp& net, std::span<const double> features, const Mask& mask,
                      int action_index, double weight, GradBuffer& grad) {
  check_mask(mask, static_cast<std::size_t>(net.output_dim()));
  MaskMatrix masks(static_cast<Eigen::Index>(mask.size()), 1);
  for (std::size_t a = 0; a < mask.size(); ++a) masks(static_cast<Eigen::Index>(a), 0) = mask[a];
  const int action[1] = {action_index};
  if (static_cast<int>(features.size()) != net.input_dim()) {
    throw ContractViolation("feature length does not match network input");
  }
  const auto lp = action_logprobs(net, as_column(features), masks, action);
  const double w[1] = {weight};
  accumulate_logprob_grad(net, lp, w, grad);
}

void backprop_output(const Mlp& net, std::span<const double> features,
                     std::span<const double> output_weights, GradBuffer& grad) {
  if (static_cast<int>(output_weights.size()) != net.output_dim()) {
    throw ContractViolation("backprop_output: weight length does not match network output");
  }
  if (static_cast<int>(features.size()) != net.input_dim()) {
    throw ContractViolation("feature length does not match network input");
  }
  auto pass = forward_batch(net, as_column(features));
  backward_batch(net, pass, as_column(output_weights), grad.params);
}

void adam_step(std::span<double> params, std::span<double> grad, AdamState& state) {
  if (params.size() != grad.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw ContractViolation("adam_step: parameter, gradient and moment shapes disagree");
  }
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!std::isfinite(grad[i])) {
      throw NumericError("non-finite gradient entry at index " + std::to_string(i));
    }
  }
  state.t += 1;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grad[i];
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
    grad[i] = 0.0;
  }
}

void adam_step(Mlp& net, GradBuffer& grad, AdamState& state) {
  if (!grad.params.same_shape(net.params())) throw ContractViolation("adam_step: shape mismatch");
  adam_step(net.params().flat(), grad.params.flat(), state);
}

double finite_diff_check(const std::function<double(std::span<const double>)>& loss_fn,
                         std::span<const double> params, std::span<const double> analytic,
                         double h) {
  if (params.size() != analytic.size()) {
    throw ContractViolation("finite_diff_check: analytic gradient length mismatch");
  }
  std::vector<double> theta(params.begin(), params.end());
  double worst = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double saved = theta[i];
    auto at = [&](double offset) {
      theta[i] = saved + offset;
      return loss_fn(theta);
    };
    // Fourth-order central stencil; its O(h^4) truncation keeps small
    // components from being swamped at h = 1e-5.
    const double numeric = (8.0 * (at(h) - at(-h)) - (at(2.0 * h) - at(-2.0 * h))) / (12.0 * h);
    theta[i] = saved;
    const double err = std::abs(analytic[i] - numeric) / std::max(std::abs(analytic[i]), 1e-8);
    worst = std::max(worst, err);
  }
  return worst;
}

double finite_diff_check(const std::function<double(const Mlp&)>& loss_fn, const Mlp& net,
                         const GradBuffer& analytic, double h) {
  Mlp probe = net;
  auto as_flat = [&](std::span<const double> theta) {
    std::copy(theta.begin(), theta.end(), probe.params().flat().begin());
    return loss_fn(probe);
  };
  return finite_diff_check(as_flat, net.params().flat(), analytic.params.flat(), h);
}

}  // namespace gflowlab
