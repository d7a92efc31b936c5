#pragma once

#include <optional>

#include "gflowlab/env.hpp"
#include "gflowlab/gradnet.hpp"
#include "gflowlab/policies.hpp"

namespace gflowlab {

// Gradient accumulators matching a (forward, backward) policy pair.
struct PolicyGrads {
  GradBuffer forward;                // forward net; log_z holds d/d log Z
  std::optional<GradBuffer> flow;    // state-flow head, when present
  std::optional<GradBuffer> backward;  // backward net, when present

  void zero();
};

PolicyGrads make_grads(const ForwardPolicy& fp, const BackwardPolicy& bp);

// delta = log Z + sum log P_F - log R(x) - sum log P_B.
struct TbResidual {
  double delta = 0.0;
};

struct TbEval {
  double loss = 0.0;
  TbResidual residual;
};

// Loss averaged over the batch plus the per-item residuals.
struct BatchLoss {
  double loss = 0.0;
  Eigen::VectorXd residuals;
};

// Single-trajectory trajectory balance. Throws NumericError naming the
// trajectory id on a non-finite residual.
TbEval tb_loss(const Environment& env, const Trajectory& traj, const ForwardPolicy& fp,
               const BackwardPolicy& bp);

// grads += d delta^2 / d theta. Learned backward nets receive weight -2 delta
// unless stop_backward is set; the pessimistic net never receives TB gradient.
void tb_gradients(const Environment& env, const Trajectory& traj, const ForwardPolicy& fp,
                  const BackwardPolicy& bp, PolicyGrads& grads, bool stop_backward = false);

// Mean of delta^2 over the batch's trajectories. With grads non-null,
// accumulates the gradient of that mean.
BatchLoss tb_batch(const ForwardPolicy& fp, const BackwardPolicy& bp, const TransitionBatch& batch,
                   PolicyGrads* grads, bool stop_backward = false);

// (log F(s) + log P_F(s'|s) - log F(s') - log P_B(s|s'))^2 with
// log F(s') = log R(s') at a terminal s'. Requires the flow head.
double db_loss(const Environment& env, const State& s, int action, const ForwardPolicy& fp,
               const BackwardPolicy& bp);

// Mean DB loss over the batch's transitions; residuals are per transition.
BatchLoss db_batch(const ForwardPolicy& fp, const BackwardPolicy& bp, const TransitionBatch& batch,
                   PolicyGrads* grads, bool stop_backward = false);

// Mean over trajectories of -log P_B(tau | x). Throws ContractViolation on an
// empty batch.
double pbp_loss(const Environment& env, std::span<const Trajectory> batch, const BackwardPolicy& bp);
void pbp_gradients(const Environment& env, std::span<const Trajectory> batch,
                   const BackwardPolicy& bp, GradBuffer& grad);

// Batched form; grad may be null for evaluation only. Residuals hold
// -log P_B(tau | x) per trajectory.
BatchLoss pbp_batch(const BackwardPolicy& bp, const TransitionBatch& batch, GradBuffer* grad);

}  // namespace gflowlab
