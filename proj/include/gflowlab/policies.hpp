#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "gflowlab/env.hpp"
#include "gflowlab/gradnet.hpp"
#include "gflowlab/rng.hpp"

namespace gflowlab {

struct ForwardPolicy {
  Mlp net;                  // features -> action logits
  double log_z = 0.0;       // learnable log partition function
  std::optional<Mlp> flow;  // features -> log F(s), present for detailed balance
};

ForwardPolicy make_forward_policy(const Environment& env, std::span<const int> hidden,
                                  std::uint64_t seed, bool with_flow_head = false);

enum class BackwardKind { kUniform, kMaxEnt, kLearned, kPessimistic };

std::string_view to_string(BackwardKind kind);
// Accepts "uniform", "maxent", "learned", "pessimistic"; throws ConfigError.
BackwardKind parse_backward_kind(std::string_view text);

// Number of s0 -> s paths for every state of an enumerable environment.
struct PathCounts {
  StateMap<double> counts;
  double at(const State& s) const;
};

// Throws UnsupportedVariant when the state space exceeds `cap`.
PathCounts maxent_counts(const Environment& env, std::size_t cap = kDefaultStateCap);

struct BackwardPolicy {
  BackwardKind kind = BackwardKind::kUniform;
  std::optional<Mlp> net;                   // learned / pessimistic
  std::shared_ptr<const PathCounts> counts; // maxent

  bool has_net() const { return net.has_value(); }
};

// The learned variants get a network with the forward net's architecture and
// their own parameters. MaxEnt computes its path counts unless given.
BackwardPolicy make_backward_policy(BackwardKind kind, const Environment& env,
                                    std::span<const int> hidden, std::uint64_t seed,
                                    std::shared_ptr<const PathCounts> counts = nullptr);

std::vector<double> forward_logprobs(const ForwardPolicy& policy, const Environment& env,
                                     const State& s);

// Per-step epsilon mixing: with probability epsilon the action is uniform over
// the allowed ones, otherwise drawn from the forward policy.
Trajectory sample_forward_trajectory(const ForwardPolicy& policy, const Environment& env,
                                     Rng& rng, double epsilon);

// Same law as sample_forward_trajectory; advances `count` trajectories in
// lockstep so each step is one batched network pass.
std::vector<Trajectory> sample_forward_batch(const ForwardPolicy& policy, const Environment& env,
                                             Rng& rng, double epsilon, int count);

// log P_B over parents(child), in the order parents() returns them.
std::vector<double> backward_logprobs(const BackwardPolicy& bp, const Environment& env,
                                      const State& child);
double backward_logprob(const BackwardPolicy& bp, const Environment& env, const State& child,
                        std::size_t parent_index);

// Walks parents from x back to s0 and returns the forward-ordered trajectory.
Trajectory sample_backward_trajectory(const BackwardPolicy& bp, const Environment& env,
                                      const State& x, Rng& rng);

// sum_t log P_F(s_{t+1} | s_t) and sum_t log P_B(s_t | s_{t+1}).
double trajectory_forward_logprob(const ForwardPolicy& fp, const Environment& env,
                                  const Trajectory& traj);
double trajectory_backward_logprob(const BackwardPolicy& bp, const Environment& env,
                                   const Trajectory& traj);

// Every transition of a trajectory batch, laid out as network-ready columns.
struct TransitionBatch {
  std::vector<int> traj_of;  // owning trajectory per transition
  std::vector<int> actions;
  Eigen::MatrixXd src_features;  // s_t
  MaskMatrix fwd_masks;
  Eigen::MatrixXd dst_features;  // s_{t+1}
  MaskMatrix bwd_masks;
  std::vector<std::uint8_t> dst_terminal;
  // log P_B(s_t | s_{t+1}) for the fixed (uniform / maxent) variants.
  std::vector<double> fixed_backward;
  std::vector<double> log_rewards;  // per trajectory
  std::vector<std::uint64_t> traj_ids;  // per trajectory
  std::size_t num_trajectories = 0;

  std::size_t size() const { return actions.size(); }
};

TransitionBatch make_transition_batch(const Environment& env, const BackwardPolicy& bp,
                                      std::span<const Trajectory* const> trajs);
TransitionBatch make_transition_batch(const Environment& env, const BackwardPolicy& bp,
                                      std::span<const Trajectory> trajs);

// log P_B per transition of the batch, whatever the variant.
Eigen::VectorXd batch_backward_logprobs(const BackwardPolicy& bp, const TransitionBatch& batch);

}  // namespace gflowlab
