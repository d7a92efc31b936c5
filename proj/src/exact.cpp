#include "gflowlab/exact.hpp"

#include <cmath>
#include <set>
#include <string>

#include "gflowlab/error.hpp"

namespace gflowlab {
namespace {

void dfs(const Environment& env, Trajectory& path, TrajectorySets& out, std::size_t& count,
         std::size_t cap) {
  const State& s = path.object();
  if (s.terminal) {
    if (++count > cap) {
      throw OracleScaleError(env.name() + ": more than " + std::to_string(cap) + " trajectories");
    }
    Trajectory copy = path;
    copy.reward = std::max(env.reward(s), kRewardFloor);
    out[s].push_back(std::move(copy));
    return;
  }
  const Mask mask = env.allowed_actions(s);
  for (int a = 0; a < env.num_actions(); ++a) {
    if (!mask[static_cast<std::size_t>(a)]) continue;
    path.states.push_back(env.apply_action(path.object(), a));
    path.actions.push_back(a);
    dfs(env, path, out, count, cap);
    path.states.pop_back();
    path.actions.pop_back();
  }
}

// Distinct trajectories of the buffer, keyed by their action sequence.
std::vector<const Trajectory*> distinct(std::span<const Trajectory> buffer) {
  std::set<std::vector<int>> seen;
  std::vector<const Trajectory*> out;
  for (const auto& t : buffer) {
    if (seen.insert(t.actions).second) out.push_back(&t);
  }
  return out;
}

}  // namespace

TrajectorySets enumerate_trajectories(const Environment& env, std::size_t cap) {
  TrajectorySets out;
  Trajectory path;
  path.states.push_back(env.initial_state());
  std::size_t count = 0;
  dfs(env, path, out, count, cap);
  return out;
}

double Distribution::at(const State& x) const {
  for (std::size_t i = 0; i < objects.size(); ++i) {
    if (objects[i] == x) return probs[i];
  }
  throw ContractViolation("object is not part of the distribution");
}

Distribution marginal_dp(const Environment& env, const StateSpace& space, const ForwardPolicy& fp) {
  const auto n = space.states.size();
  const int f = env.feature_dim();
  std::vector<std::size_t> inner;
  for (std::size_t i = 0; i < n; ++i) {
    if (!space.states[i].terminal) inner.push_back(i);
  }
  // One batched pass over every non-terminal state, in chunks to bound memory.
  constexpr std::size_t kChunk = 8192;
  std::vector<double> mass(n, 0.0);
  mass[0] = 1.0;
  std::vector<Eigen::MatrixXd> probs_of_chunk;
  std::vector<std::size_t> slot(n, 0);
  for (std::size_t start = 0; start < inner.size(); start += kChunk) {
    const std::size_t len = std::min(kChunk, inner.size() - start);
    Eigen::MatrixXd feats(f, static_cast<Eigen::Index>(len));
    for (std::size_t j = 0; j < len; ++j) {
      env.encode_features(space.states[inner[start + j]],
                          std::span<double>(feats.col(static_cast<Eigen::Index>(j)).data(), static_cast<std::size_t>(f)));
      slot[inner[start + j]] = probs_of_chunk.size() * kChunk + j;
    }
    Eigen::MatrixXd logits = forward_batch(fp.net, std::move(feats)).output;
    for (std::size_t j = 0; j < len; ++j) {
      const auto c = static_cast<Eigen::Index>(j);
      const Mask mask = env.allowed_actions(space.states[inner[start + j]]);
      const auto lp = masked_log_softmax(
          std::span<const double>(logits.col(c).data(), static_cast<std::size_t>(logits.rows())), mask);
      for (Eigen::Index a = 0; a < logits.rows(); ++a) {
        logits(a, c) = mask[static_cast<std::size_t>(a)] ? std::exp(lp[static_cast<std::size_t>(a)]) : 0.0;
      }
    }
    probs_of_chunk.push_back(std::move(logits));
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (space.states[i].terminal || mass[i] == 0.0) continue;
    const auto& p = probs_of_chunk[slot[i] / kChunk];
    const auto c = static_cast<Eigen::Index>(slot[i] % kChunk);
    for (const auto& [a, child] : space.children[i]) {
      mass[static_cast<std::size_t>(child)] += mass[i] * p(a, c);
    }
  }
  Distribution d;
  d.objects.reserve(space.terminals.size());
  d.probs.reserve(space.terminals.size());
  for (int t : space.terminals) {
    d.objects.push_back(space.states[static_cast<std::size_t>(t)]);
    d.probs.push_back(mass[static_cast<std::size_t>(t)]);
  }
  return d;
}

Distribution marginal_dp(const Environment& env, const ForwardPolicy& fp, std::size_t cap) {
  return marginal_dp(env, enumerate_states(env, cap), fp);
}

Distribution target_distribution(const Environment& env, const StateSpace& space) {
  Distribution d;
  double z = 0.0;
  for (int t : space.terminals) {
    const State& x = space.states[static_cast<std::size_t>(t)];
    d.objects.push_back(x);
    d.probs.push_back(std::max(env.reward(x), kRewardFloor));
    z += d.probs.back();
  }
  for (auto& p : d.probs) p /= z;
  return d;
}

Distribution empirical_distribution(const StateSpace& space, std::span<const State> samples) {
  Distribution d;
  StateMap<std::size_t> where;
  for (int t : space.terminals) {
    where.emplace(space.states[static_cast<std::size_t>(t)], d.objects.size());
    d.objects.push_back(space.states[static_cast<std::size_t>(t)]);
  }
  d.probs.assign(d.objects.size(), 0.0);
  if (samples.empty()) return d;
  for (const auto& x : samples) {
    const auto it = where.find(x);
    if (it == where.end()) throw ContractViolation("sample is not an object of the enumerated space");
    d.probs[it->second] += 1.0;
  }
  for (auto& p : d.probs) p /= static_cast<double>(samples.size());
  return d;
}

double observed_backward_flow(const Environment& env, const BackwardPolicy& bp,
                              std::span<const Trajectory> buffer, const State& x) {
  double total = 0.0;
  bool any = false;
  for (const auto* t : distinct(buffer)) {
    if (t->object() != x) continue;
    any = true;
    total += std::exp(trajectory_backward_logprob(bp, env, *t));
  }
  if (!any) throw ContractViolation("object has no trajectory in the buffer");
  return std::max(env.reward(x), kRewardFloor) * total;
}

double observed_forward_flow(const Environment& env, const ForwardPolicy& fp,
                             std::span<const Trajectory> buffer, const State& x) {
  double total = 0.0;
  for (const auto* t : distinct(buffer)) {
    if (t->object() == x) total += std::exp(trajectory_forward_logprob(fp, env, *t));
  }
  return total;
}

ExactReport bound_eval(const Environment& env, const ForwardPolicy& fp, const BackwardPolicy& bp,
                       std::span<const Trajectory> buffer, std::size_t cap) {
  const StateSpace space = enumerate_states(env, cap);
  ExactReport r;
  r.forward = marginal_dp(env, space, fp);
  r.target = target_distribution(env, space);
  double z = 0.0;
  for (int t : space.terminals) z += std::max(env.reward(space.states[static_cast<std::size_t>(t)]), kRewardFloor);
  r.log_partition = std::log(z);
  for (std::size_t i = 0; i < r.forward.objects.size(); ++i) {
    r.lhs += std::abs(r.forward.probs[i] - r.target.probs[i]);
  }

  std::map<State, double> gap;  // sum over B(x) of P_F(tau) - P_B(tau)
  for (const auto* t : distinct(buffer)) {
    const State& x = t->object();
    const double pf = std::exp(trajectory_forward_logprob(fp, env, *t));
    const double pb = r.target.at(x) * std::exp(trajectory_backward_logprob(bp, env, *t));
    r.observed_forward += pf;
    r.observed_backward += pb;
    gap[x] += pf - pb;
  }
  for (const auto& [x, g] : gap) r.epsilon += std::abs(g);
  r.rhs = 2.0 - 2.0 * r.observed_backward + r.epsilon;
  r.rhs_split = r.epsilon + 2.0 - r.observed_forward - r.observed_backward;
  return r;
}

}  // namespace gflowlab
