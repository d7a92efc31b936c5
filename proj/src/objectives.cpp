#include "gflowlab/objectives.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "gflowlab/error.hpp"

namespace gflowlab {
namespace {

bool backward_takes_tb_gradient(const BackwardPolicy& bp, bool stop_backward) {
  return bp.kind == BackwardKind::kLearned && bp.has_net() && !stop_backward;
}

void check_finite(const Eigen::VectorXd& residuals, const TransitionBatch& batch, bool per_transition,
                  const char* what) {
  for (Eigen::Index i = 0; i < residuals.size(); ++i) {
    if (std::isfinite(residuals(i))) continue;
    const auto traj = per_transition ? static_cast<std::size_t>(batch.traj_of[static_cast<std::size_t>(i)])
                                     : static_cast<std::size_t>(i);
    const auto id = traj < batch.traj_ids.size() ? batch.traj_ids[traj] : 0;
    throw NumericError(std::string(what) + " residual is not finite for trajectory " + std::to_string(id));
  }
}

TransitionBatch single(const Environment& env, const BackwardPolicy& bp, const Trajectory& traj) {
  const Trajectory* ptr[1] = {&traj};
  return make_transition_batch(env, bp, std::span<const Trajectory* const>(ptr, 1));
}

}  // namespace

void PolicyGrads::zero() {
  forward.zero();
  if (flow) flow->zero();
  if (backward) backward->zero();
}

PolicyGrads make_grads(const ForwardPolicy& fp, const BackwardPolicy& bp) {
  PolicyGrads g;
  g.forward = GradBuffer(fp.net);
  if (fp.flow) g.flow = GradBuffer(*fp.flow);
  if (bp.net) g.backward = GradBuffer(*bp.net);
  return g;
}

BatchLoss tb_batch(const ForwardPolicy& fp, const BackwardPolicy& bp, const TransitionBatch& batch,
                   PolicyGrads* grads, bool stop_backward) {
  const std::size_t n = batch.num_trajectories;
  if (n == 0) throw ContractViolation("trajectory balance needs a non-empty batch");
  const auto fwd = action_logprobs(fp.net, batch.src_features, batch.fwd_masks, batch.actions);
  const bool learned = bp.has_net();
  std::optional<ActionLogProbs> bwd;
  Eigen::VectorXd log_pb;
  if (learned) {
    bwd = action_logprobs(*bp.net, batch.dst_features, batch.bwd_masks, batch.actions);
    log_pb = bwd->chosen;
  } else {
    log_pb = batch_backward_logprobs(bp, batch);
  }

  BatchLoss out;
  out.residuals = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), fp.log_z);
  for (std::size_t i = 0; i < n; ++i) out.residuals(static_cast<Eigen::Index>(i)) -= batch.log_rewards[i];
  for (std::size_t j = 0; j < batch.size(); ++j) {
    const auto i = static_cast<Eigen::Index>(batch.traj_of[j]);
    out.residuals(i) += fwd.chosen(static_cast<Eigen::Index>(j)) - log_pb(static_cast<Eigen::Index>(j));
  }
  check_finite(out.residuals, batch, false, "trajectory balance");
  out.loss = out.residuals.squaredNorm() / static_cast<double>(n);
  if (!grads) return out;

  const double scale = 2.0 / static_cast<double>(n);
  std::vector<double> w(batch.size());
  for (std::size_t j = 0; j < batch.size(); ++j) w[j] = scale * out.residuals(batch.traj_of[j]);
  accumulate_logprob_grad(fp.net, fwd, w, grads->forward);
  grads->forward.log_z += scale * out.residuals.sum();
  if (learned && backward_takes_tb_gradient(bp, stop_backward)) {
    for (auto& x : w) x = -x;
    accumulate_logprob_grad(*bp.net, *bwd, w, *grads->backward);
  }
  return out;
}

TbEval tb_loss(const Environment& env, const Trajectory& traj, const ForwardPolicy& fp,
               const BackwardPolicy& bp) {
  const auto r = tb_batch(fp, bp, single(env, bp, traj), nullptr);
  return TbEval{r.loss, TbResidual{r.residuals(0)}};
}

void tb_gradients(const Environment& env, const Trajectory& traj, const ForwardPolicy& fp,
                  const BackwardPolicy& bp, PolicyGrads& grads, bool stop_backward) {
  tb_batch(fp, bp, single(env, bp, traj), &grads, stop_backward);
}

BatchLoss db_batch(const ForwardPolicy& fp, const BackwardPolicy& bp, const TransitionBatch& batch,
                   PolicyGrads* grads, bool stop_backward) {
  if (!fp.flow) throw ContractViolation("detailed balance needs a state-flow head");
  const std::size_t m = batch.size();
  if (m == 0) throw ContractViolation("detailed balance needs a non-empty batch");
  const auto fwd = action_logprobs(fp.net, batch.src_features, batch.fwd_masks, batch.actions);
  const bool learned = bp.has_net();
  std::optional<ActionLogProbs> bwd;
  Eigen::VectorXd log_pb;
  if (learned) {
    bwd = action_logprobs(*bp.net, batch.dst_features, batch.bwd_masks, batch.actions);
    log_pb = bwd->chosen;
  } else {
    log_pb = batch_backward_logprobs(bp, batch);
  }
  const auto src_flow = forward_batch(*fp.flow, batch.src_features);
  const auto dst_flow = forward_batch(*fp.flow, batch.dst_features);

  BatchLoss out;
  out.residuals.resize(static_cast<Eigen::Index>(m));
  for (std::size_t j = 0; j < m; ++j) {
    const auto c = static_cast<Eigen::Index>(j);
    const double log_f_dst = batch.dst_terminal[j]
                                 ? batch.log_rewards[static_cast<std::size_t>(batch.traj_of[j])]
                                 : dst_flow.output(0, c);
    out.residuals(c) = src_flow.output(0, c) + fwd.chosen(c) - log_f_dst - log_pb(c);
  }
  check_finite(out.residuals, batch, true, "detailed balance");
  out.loss = out.residuals.squaredNorm() / static_cast<double>(m);
  if (!grads) return out;

  const double scale = 2.0 / static_cast<double>(m);
  std::vector<double> w(m);
  for (std::size_t j = 0; j < m; ++j) w[j] = scale * out.residuals(static_cast<Eigen::Index>(j));
  accumulate_logprob_grad(fp.net, fwd, w, grads->forward);

  Eigen::MatrixXd up_src(1, static_cast<Eigen::Index>(m));
  Eigen::MatrixXd up_dst(1, static_cast<Eigen::Index>(m));
  for (std::size_t j = 0; j < m; ++j) {
    const auto c = static_cast<Eigen::Index>(j);
    up_src(0, c) = w[j];
    up_dst(0, c) = batch.dst_terminal[j] ? 0.0 : -w[j];
  }
  backward_batch(*fp.flow, src_flow, std::move(up_src), grads->flow->params);
  backward_batch(*fp.flow, dst_flow, std::move(up_dst), grads->flow->params);

  if (learned && backward_takes_tb_gradient(bp, stop_backward)) {
    for (auto& x : w) x = -x;
    accumulate_logprob_grad(*bp.net, *bwd, w, *grads->backward);
  }
  return out;
}

double db_loss(const Environment& env, const State& s, int action, const ForwardPolicy& fp,
               const BackwardPolicy& bp) {
  Trajectory edge;
  edge.states = {s, env.apply_action(s, action)};
  edge.actions = {action};
  edge.reward = edge.object().terminal ? std::max(env.reward(edge.object()), kRewardFloor) : 1.0;
  return db_batch(fp, bp, single(env, bp, edge), nullptr).loss;
}

BatchLoss pbp_batch(const BackwardPolicy& bp, const TransitionBatch& batch, GradBuffer* grad) {
  const std::size_t n = batch.num_trajectories;
  if (n == 0) throw ContractViolation("pessimistic backward loss needs a non-empty batch");
  std::optional<ActionLogProbs> bwd;
  Eigen::VectorXd log_pb;
  if (bp.has_net()) {
    bwd = action_logprobs(*bp.net, batch.dst_features, batch.bwd_masks, batch.actions);
    log_pb = bwd->chosen;
  } else {
    log_pb = batch_backward_logprobs(bp, batch);
  }
  BatchLoss out;
  out.residuals = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  for (std::size_t j = 0; j < batch.size(); ++j) {
    out.residuals(batch.traj_of[j]) -= log_pb(static_cast<Eigen::Index>(j));
  }
  check_finite(out.residuals, batch, false, "pessimistic backward");
  out.loss = out.residuals.mean();
  if (grad) {
    if (!bwd) throw ContractViolation("pessimistic backward gradient needs a backward network");
    const std::vector<double> w(batch.size(), -1.0 / static_cast<double>(n));
    accumulate_logprob_grad(*bp.net, *bwd, w, *grad);
  }
  return out;
}

double pbp_loss(const Environment& env, std::span<const Trajectory> batch, const BackwardPolicy& bp) {
  if (batch.empty()) throw ContractViolation("pessimistic backward loss needs a non-empty batch");
  return pbp_batch(bp, make_transition_batch(env, bp, batch), nullptr).loss;
}

void pbp_gradients(const Environment& env, std::span<const Trajectory> batch,
                   const BackwardPolicy& bp, GradBuffer& grad) {
  if (batch.empty()) throw ContractViolation("pessimistic backward loss needs a non-empty batch");
  pbp_batch(bp, make_transition_batch(env, bp, batch), &grad);
}

}  // namespace gflowlab
