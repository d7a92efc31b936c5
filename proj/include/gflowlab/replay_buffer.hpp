#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <vector>

#include "gflowlab/env.hpp"
#include "gflowlab/rng.hpp"

namespace gflowlab {

// Observed trajectories grouped by round, with an object -> trajectory-id
// index over the retained rounds. Every object ever pushed stays in the
// seen-reward index even after its trajectories are evicted.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t retention_rounds);

  // Assigns fresh ids, appends one round and evicts the oldest beyond the
  // retention window.
  void push_round(std::vector<Trajectory> trajs);

  std::size_t retention() const { return retention_; }
  std::size_t num_rounds() const { return rounds_.size(); }
  std::size_t size() const { return size_; }
  bool empty() const { return size_ == 0; }

  // Flat index across retained rounds, oldest first.
  const Trajectory& at(std::size_t i) const;
  std::vector<Trajectory> all() const;

  // min(k, size) distinct trajectories drawn uniformly without replacement.
  std::vector<const Trajectory*> sample(std::size_t k, Rng& rng) const;

  // Ids of retained trajectories ending at x.
  const std::vector<std::uint64_t>& ids_for(const State& x) const;
  const Trajectory* find(std::uint64_t id) const;

  const std::map<State, double>& seen_rewards() const { return seen_; }
  // Records x as seen without storing a trajectory.
  void note_seen(const State& x, double reward) { seen_.emplace(x, reward); }

  // Rebuilds the object index from scratch and compares it to the live one.
  bool index_consistent() const;

 private:
  using Index = StateMap<std::vector<std::uint64_t>>;
  Index rebuild_index() const;

  std::size_t retention_;
  std::deque<std::vector<Trajectory>> rounds_;
  std::size_t size_ = 0;
  std::uint64_t next_id_ = 1;
  Index by_object_;
  std::map<State, double> seen_;
};

// Picks k objects uniformly from the top-rho fraction of seen objects by
// reward (ties at the cut-off included). Throws ContractViolation when nothing
// has been seen.
std::vector<State> select_offline_objects(const std::map<State, double>& seen, std::size_t k,
                                          double rho, Rng& rng);

}  // namespace gflowlab
