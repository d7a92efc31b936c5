#include "gflowlab/env.hpp"

#include <cmath>
#include <deque>
#include <string>

#include "gflowlab/error.hpp"
#include "gflowlab/rng.hpp"

namespace gflowlab {

std::size_t StateHash::operator()(const State& s) const noexcept {
  std::uint64_t h = s.terminal ? 0x7465726dULL : 0x6e6f6e74ULL;
  for (int v : s.data) h = mix64(h ^ static_cast<std::uint64_t>(static_cast<std::uint32_t>(v)));
  return static_cast<std::size_t>(h);
}

std::vector<double> Environment::features(const State& s) const {
  std::vector<double> out(static_cast<std::size_t>(feature_dim()), 0.0);
  encode_features(s, out);
  return out;
}

double Environment::log_reward(const State& x) const {
  return std::log(std::max(reward(x), kRewardFloor));
}

Mask Environment::backward_mask(const State& s) const {
  Mask mask(static_cast<std::size_t>(num_actions()), 0);
  for (const auto& p : parents(s)) mask[static_cast<std::size_t>(p.action)] = 1;
  return mask;
}

Trajectory replay_actions(const Environment& env, std::span<const int> actions) {
  Trajectory traj;
  traj.states.push_back(env.initial_state());
  for (int a : actions) {
    traj.states.push_back(env.apply_action(traj.states.back(), a));
    traj.actions.push_back(a);
  }
  if (!traj.object().terminal) {
    throw ContractViolation("replayed action sequence does not end in a terminal state");
  }
  traj.reward = std::max(env.reward(traj.object()), kRewardFloor);
  return traj;
}

bool is_consistent(const Environment& env, const Trajectory& traj) {
  if (traj.states.size() != traj.actions.size() + 1) return false;
  if (traj.start() != env.initial_state()) return false;
  for (std::size_t t = 0; t < traj.actions.size(); ++t) {
    const State& s = traj.states[t];
    if (s.terminal) return false;
    const Mask mask = env.allowed_actions(s);
    const int a = traj.actions[t];
    if (a < 0 || a >= env.num_actions() || !mask[static_cast<std::size_t>(a)]) return false;
    if (env.apply_action(s, a) != traj.states[t + 1]) return false;
  }
  return traj.object().terminal && traj.reward == std::max(env.reward(traj.object()), kRewardFloor);
}

int StateSpace::index_of(const State& s) const {
  const auto it = index.find(s);
  if (it == index.end()) throw ContractViolation("state is not part of the enumerated space");
  return it->second;
}

StateSpace enumerate_states(const Environment& env, std::size_t cap) {
  // Discovery in BFS order, then Kahn's algorithm for a topological order.
  std::vector<State> found;
  StateMap<int> where;
  std::vector<std::vector<std::pair<int, int>>> edges;
  std::deque<int> frontier;

  auto intern = [&](State s) {
    auto [it, inserted] = where.try_emplace(s, static_cast<int>(found.size()));
    if (inserted) {
      if (found.size() >= cap) {
        throw OracleScaleError(env.name() + ": more than " + std::to_string(cap) +
                               " reachable states");
      }
      found.push_back(std::move(s));
      edges.emplace_back();
      frontier.push_back(it->second);
    }
    return it->second;
  };

  intern(env.initial_state());
  while (!frontier.empty()) {
    const int i = frontier.front();
    frontier.pop_front();
    if (found[static_cast<std::size_t>(i)].terminal) continue;
    const State s = found[static_cast<std::size_t>(i)];
    const Mask mask = env.allowed_actions(s);
    for (int a = 0; a < env.num_actions(); ++a) {
      if (!mask[static_cast<std::size_t>(a)]) continue;
      const int child = intern(env.apply_action(s, a));
      edges[static_cast<std::size_t>(i)].emplace_back(a, child);
    }
  }

  std::vector<int> indegree(found.size(), 0);
  for (const auto& out : edges) {
    for (const auto& [a, c] : out) ++indegree[static_cast<std::size_t>(c)];
  }
  std::vector<int> order;
  order.reserve(found.size());
  std::deque<int> ready;
  for (std::size_t i = 0; i < found.size(); ++i) {
    if (indegree[i] == 0) ready.push_back(static_cast<int>(i));
  }
  while (!ready.empty()) {
    const int i = ready.front();
    ready.pop_front();
    order.push_back(i);
    for (const auto& [a, c] : edges[static_cast<std::size_t>(i)]) {
      if (--indegree[static_cast<std::size_t>(c)] == 0) ready.push_back(c);
    }
  }
  if (order.size() != found.size()) throw ContractViolation(env.name() + ": generation graph has a cycle");

  std::vector<int> rank(found.size());
  for (std::size_t r = 0; r < order.size(); ++r) rank[static_cast<std::size_t>(order[r])] = static_cast<int>(r);

  StateSpace space;
  space.states.reserve(found.size());
  space.children.resize(found.size());
  for (std::size_t r = 0; r < order.size(); ++r) {
    const auto old = static_cast<std::size_t>(order[r]);
    auto& out = space.children[r];
    for (const auto& [a, c] : edges[old]) out.emplace_back(a, rank[static_cast<std::size_t>(c)]);
    space.index.emplace(found[old], static_cast<int>(r));
    if (found[old].terminal) space.terminals.push_back(static_cast<int>(r));
    space.states.push_back(std::move(found[old]));
  }
  return space;
}

}  // namespace gflowlab
