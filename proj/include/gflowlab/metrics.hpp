#pragma once

#include <functional>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "gflowlab/env.hpp"
#include "gflowlab/envs/sequence.hpp"
#include "gflowlab/exact.hpp"

namespace gflowlab {

// sum |p - q| after renormalizing each side. Throws ContractViolation on a
// length mismatch or a side with no mass.
double l1_distance(std::span<const double> p, std::span<const double> q);
// Also requires both distributions to list the same objects in the same order.
double l1_distance(const Distribution& p, const Distribution& q);

// Distinct modes seen so far. A sample counts when `is_mode` accepts it; its
// identity is `key(x)`, so several cells may collapse into one cluster.
class ModeTracker {
 public:
  using Predicate = std::function<bool(const State&, double reward)>;
  using Key = std::function<State(const State&)>;

  ModeTracker(Predicate is_mode, Key key = nullptr);

  // True when x opens a new mode.
  bool observe(const State& x, double reward);
  std::size_t count() const { return found_.size(); }
  const std::set<State>& modes() const { return found_; }

 private:
  Predicate is_mode_;
  Key key_;
  std::set<State> found_;
};

// reward >= threshold; clusters by orthant (which half of each coordinate)
// when `corner_clusters` is set.
ModeTracker threshold_mode_tracker(double threshold, bool corner_clusters = false, int grid_size = 0);

// Top-k mean reward over the unique objects seen so far.
class RewardHistory {
 public:
  void observe(const State& x, double reward);
  double topk_mean(std::size_t k) const;
  std::size_t unique() const { return seen_.size(); }

 private:
  std::set<State> seen_;
  std::multiset<double, std::greater<>> rewards_;
};

// Mean of the k largest values, or of all of them when fewer than k.
double topk_mean(std::span<const double> unique_rewards, std::size_t k);

// E_target R = sum R^2 / sum R over the objects of `rewards`.
double target_mean_reward(std::span<const double> rewards);
// (mean sampled R - target) / target.
double relative_mean_error(std::span<const double> sample_rewards, double target_mean);
// Same with the sample mean replaced by sum_x w(x) R(x).
double relative_mean_error_exact(std::span<const double> weights, std::span<const double> rewards,
                                 double target_mean);

// A sequence is a new mode iff its reward reaches the threshold, no sequence
// within Hamming distance `radius` scores higher, and it lies farther than
// `radius` from every mode accepted before it. Neighbors missing from the
// reward table are skipped.
class HammingModeTracker {
 public:
  HammingModeTracker(std::shared_ptr<const SequenceEnv> env, int radius, double threshold);

  bool observe(const State& x);
  std::size_t count() const { return accepted_.size(); }
  const std::vector<std::vector<int>>& accepted() const { return accepted_; }

  bool is_ball_maximum(std::span<const int> letters) const;

 private:
  std::shared_ptr<const SequenceEnv> env_;
  int radius_;
  double threshold_;
  std::vector<std::vector<int>> accepted_;
};

int hamming_distance(std::span<const int> a, std::span<const int> b);

// Exhaustive scan over every full-length sequence of the table.
std::vector<std::vector<int>> hamming_ball_maxima(const SequenceEnv& env, int radius, double threshold);

}  // namespace gflowlab
