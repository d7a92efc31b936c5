#pragma once

#include "gflowlab/env.hpp"

namespace gflowlab {

// The two-object DAG of the under-exploitation example:
//   s0 -a-> A -0-> x1,  s0 -b-> B -1-> x1,  s0 -c-> C -2-> x1,  s0 -d-> D -3-> x2
// Action k leaves s0 for node k+1 and leaves node k+1 for its terminal, so
// every parent of a node is reached through a distinct action.
class ToyDagEnv final : public Environment {
 public:
  enum Node : int { kS0 = 0, kA = 1, kB = 2, kC = 3, kD = 4, kX1 = 5, kX2 = 6 };
  static constexpr int kNumNodes = 7;

  std::string name() const override { return "toy"; }
  int num_actions() const override { return 4; }
  int feature_dim() const override { return kNumNodes; }
  int max_depth() const override { return 2; }

  State initial_state() const override { return node(kS0); }
  Mask allowed_actions(const State& s) const override;
  State apply_action(const State& s, int action) const override;
  std::vector<Parent> parents(const State& s) const override;
  double reward(const State& x) const override;
  void encode_features(const State& s, std::span<double> out) const override;

  static State node(int id) { return State{{id}, id == kX1 || id == kX2}; }
};

}  // namespace gflowlab
