#pragma once

#include <cstdint>

#include "gflowlab/env.hpp"

namespace gflowlab {

struct BagParams {
  int num_items = 7;
  int capacity = 15;
  int repeat_threshold = 7;
  double high_reward = 30.0;
  double low_reward = 10.0;
  double high_probability = 0.25;
  double base_reward = 0.01;
  std::uint64_t seed = 0;
};

// Multiset construction: each action adds one item; the bag becomes terminal
// once it holds `capacity` items. Bags with `repeat_threshold` or more copies
// of some item score high_reward or low_reward, picked per bag by a seeded
// hash so the assignment is fixed once the env is built.
class BagEnv final : public Environment {
 public:
  explicit BagEnv(BagParams params = {});

  std::string name() const override { return "bag"; }
  int num_actions() const override { return params_.num_items; }
  int feature_dim() const override { return params_.num_items + 1; }
  int max_depth() const override { return params_.capacity; }

  State initial_state() const override;
  Mask allowed_actions(const State& s) const override;
  State apply_action(const State& s, int action) const override;
  std::vector<Parent> parents(const State& s) const override;
  double reward(const State& x) const override;
  void encode_features(const State& s, std::span<double> out) const override;

  const BagParams& params() const { return params_; }

 private:
  int bag_size(const State& s) const;
  void check(const State& s) const;

  BagParams params_;
};

}  // namespace gflowlab
