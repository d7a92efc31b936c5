#pragma once

#include "gflowlab/env.hpp"

namespace gflowlab {

// D-dimensional H^D hyper-grid. Actions 0..D-1 increment one coordinate,
// action D stops and turns the current cell into a terminal object.
class GridEnv final : public Environment {
 public:
  GridEnv(int dim, int size, double r0 = 1e-3);

  std::string name() const override;
  int num_actions() const override { return dim_ + 1; }
  int feature_dim() const override { return dim_ * size_; }
  int max_depth() const override { return dim_ * (size_ - 1) + 1; }

  State initial_state() const override;
  Mask allowed_actions(const State& s) const override;
  State apply_action(const State& s, int action) const override;
  std::vector<Parent> parents(const State& s) const override;
  double reward(const State& x) const override;
  void encode_features(const State& s, std::span<double> out) const override;

  int dim() const { return dim_; }
  int size() const { return size_; }
  int stop_action() const { return dim_; }
  double reward_at(std::span<const int> coords) const;

 private:
  void check(const State& s) const;

  int dim_;
  int size_;
  double r0_;
};

}  // namespace gflowlab
