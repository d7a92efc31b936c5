#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "gflowlab/gradnet.hpp"

namespace gflowlab {

// A node of the generation DAG. `data` is the env-specific payload (grid
// coordinates, bag counts, sequence letters, toy node id).
struct State {
  std::vector<int> data;
  bool terminal = false;

  friend bool operator==(const State&, const State&) = default;
  friend auto operator<=>(const State&, const State&) = default;
};

struct StateHash {
  std::size_t operator()(const State& s) const noexcept;
};

template <typename V>
using StateMap = std::unordered_map<State, V, StateHash>;

// (parent, action) with apply_action(parent, action) == child.
struct Parent {
  State state;
  int action = 0;
};

inline constexpr double kRewardFloor = 1e-12;

class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::string name() const = 0;
  virtual int num_actions() const = 0;
  virtual int feature_dim() const = 0;
  // Longest possible trajectory, in transitions.
  virtual int max_depth() const = 0;

  virtual State initial_state() const = 0;
  virtual Mask allowed_actions(const State& s) const = 0;
  virtual State apply_action(const State& s, int action) const = 0;
  // Each parent is reached through a distinct action.
  virtual std::vector<Parent> parents(const State& s) const = 0;
  virtual double reward(const State& x) const = 0;
  virtual void encode_features(const State& s, std::span<double> out) const = 0;

  std::vector<double> features(const State& s) const;
  double log_reward(const State& x) const;
  // Mask over actions that produced one of s's parents.
  Mask backward_mask(const State& s) const;
  bool is_initial(const State& s) const { return s == initial_state(); }
};

struct Trajectory {
  std::vector<State> states;  // s_0 .. s_T; s_T is the terminal object
  std::vector<int> actions;   // actions[t] takes states[t] to states[t+1]
  double reward = 0.0;        // R(s_T), floored
  std::uint64_t id = 0;

  const State& start() const { return states.front(); }
  const State& object() const { return states.back(); }
  std::size_t length() const { return actions.size(); }
};

// Builds a trajectory by applying `actions` from the initial state.
Trajectory replay_actions(const Environment& env, std::span<const int> actions);

// True when every transition is allowed, reproduces the stored state and the
// last state is terminal with the cached reward.
bool is_consistent(const Environment& env, const Trajectory& traj);

// Exhaustively discovered state space in topological order (parents first).
struct StateSpace {
  std::vector<State> states;
  StateMap<int> index;
  std::vector<int> terminals;  // indices into states, in topological order
  // children[i] = (action, child index) for each allowed action of states[i]
  std::vector<std::vector<std::pair<int, int>>> children;

  int index_of(const State& s) const;
};

inline constexpr std::size_t kDefaultStateCap = 1'000'000;

// Throws OracleScaleError when more than `cap` states are reachable.
StateSpace enumerate_states(const Environment& env, std::size_t cap = kDefaultStateCap);

}  // namespace gflowlab
