#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <vector>

#include "gflowlab/env.hpp"
#include "gflowlab/policies.hpp"

namespace gflowlab {

inline constexpr std::size_t kDefaultTrajectoryCap = 10'000'000;

// Every complete trajectory, grouped by terminal object.
using TrajectorySets = std::map<State, std::vector<Trajectory>>;

// Exhaustive DFS from s0. Throws OracleScaleError past `cap` trajectories.
TrajectorySets enumerate_trajectories(const Environment& env,
                                      std::size_t cap = kDefaultTrajectoryCap);

// A distribution over the terminal objects of an enumerated space, in the
// order of StateSpace::terminals.
struct Distribution {
  std::vector<State> objects;
  std::vector<double> probs;

  double at(const State& x) const;
};

// Reach-probability DP in topological order.
Distribution marginal_dp(const Environment& env, const StateSpace& space, const ForwardPolicy& fp);
Distribution marginal_dp(const Environment& env, const ForwardPolicy& fp,
                         std::size_t cap = kDefaultStateCap);

// R(x) / sum R over the objects of `space`.
Distribution target_distribution(const Environment& env, const StateSpace& space);

// Normalized histogram of sampled objects over the objects of `space`.
Distribution empirical_distribution(const StateSpace& space, std::span<const State> samples);

// R(x) * sum of P_B(tau | x) over the distinct trajectories of `buffer` that
// end at x. Throws ContractViolation when none does.
double observed_backward_flow(const Environment& env, const BackwardPolicy& bp,
                              std::span<const Trajectory> buffer, const State& x);

// Sum of P_F(tau) over the distinct trajectories of `buffer` that end at x;
// zero when none does.
double observed_forward_flow(const Environment& env, const ForwardPolicy& fp,
                             std::span<const Trajectory> buffer, const State& x);

struct ExactReport {
  Distribution forward;  // P_F^T
  Distribution target;   // P_B^T = R / Z
  double log_partition = 0.0;
  double lhs = 0.0;               // sum_x |P_F^T - P_B^T|
  double observed_backward = 0.0; // sum over buffer of P_B(tau) = P_B^T(x) P_B(tau | x)
  double observed_forward = 0.0;  // sum over buffer of P_F(tau)
  double epsilon = 0.0;           // sum_x |sum_{tau in B(x)} (P_F(tau) - P_B(tau))|
  double rhs = 0.0;               // 2 - 2 observed_backward + epsilon
  // epsilon + 2 - observed_forward - observed_backward: the bound obtained by
  // splitting each object's mass into observed and unobserved trajectories.
  double rhs_split = 0.0;

  double slack() const { return rhs - lhs; }
  double split_slack() const { return rhs_split - lhs; }
};

// Buffer trajectories are de-duplicated by action sequence before summing.
ExactReport bound_eval(const Environment& env, const ForwardPolicy& fp, const BackwardPolicy& bp,
                       std::span<const Trajectory> buffer, std::size_t cap = kDefaultStateCap);

}  // namespace gflowlab
