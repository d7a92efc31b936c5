#include "gflowlab/policies.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gflowlab/error.hpp"

namespace gflowlab {
namespace {

std::vector<int> layer_sizes(int input, std::span<const int> hidden, int output) {
  std::vector<int> sizes{input};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(output);
  return sizes;
}

// Draws an index from log-probabilities; masked entries carry zero mass.
int sample_categorical(std::span<const double> log_probs, const Mask& mask, Rng& rng) {
  const double u = rng.uniform();
  double cum = 0.0;
  int last = -1;
  for (std::size_t a = 0; a < log_probs.size(); ++a) {
    if (!mask[a]) continue;
    cum += std::exp(log_probs[a]);
    last = static_cast<int>(a);
    if (u < cum) return last;
  }
  return last;
}

int sample_uniform_allowed(const Mask& mask, Rng& rng) {
  const auto allowed = static_cast<std::uint64_t>(std::count(mask.begin(), mask.end(), 1));
  auto pick = rng.below(allowed);
  for (std::size_t a = 0; a < mask.size(); ++a) {
    if (mask[a] && pick-- == 0) return static_cast<int>(a);
  }
  throw ContractViolation("mask has no allowed action");
}

int choose_action(std::span<const double> log_probs, const Mask& mask, double epsilon, Rng& rng) {
  if (epsilon > 0.0 && rng.uniform() < epsilon) return sample_uniform_allowed(mask, rng);
  return sample_categorical(log_probs, mask, rng);
}

void check_epsilon(double epsilon) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ContractViolation("epsilon must lie in [0, 1]");
}

std::size_t step_cap(const Environment& env) { return 10 * static_cast<std::size_t>(env.max_depth()); }

[[noreturn]] void wiring_error(const Environment& env) {
  throw ContractViolation(env.name() + ": trajectory exceeded 10x the maximum depth; environment wiring is broken");
}

double fixed_backward_logprob(const BackwardPolicy& bp, const Environment& env, const State& child,
                              int action) {
  const auto ps = env.parents(child);
  if (bp.kind == BackwardKind::kUniform) return -std::log(static_cast<double>(ps.size()));
  double total = 0.0;
  double mine = -1.0;
  for (const auto& p : ps) {
    const double n = bp.counts->at(p.state);
    total += n;
    if (p.action == action) mine = n;
  }
  if (mine < 0.0) throw ContractViolation("action does not lead to this state");
  return std::log(mine / total);
}

}  // namespace

ForwardPolicy make_forward_policy(const Environment& env, std::span<const int> hidden,
                                  std::uint64_t seed, bool with_flow_head) {
  ForwardPolicy fp;
  fp.net = mlp_init(layer_sizes(env.feature_dim(), hidden, env.num_actions()), seed);
  if (with_flow_head) fp.flow = mlp_init(layer_sizes(env.feature_dim(), hidden, 1), mix64(seed ^ 0xF10ULL));
  return fp;
}

std::string_view to_string(BackwardKind kind) {
  switch (kind) {
    case BackwardKind::kUniform: return "uniform";
    case BackwardKind::kMaxEnt: return "maxent";
    case BackwardKind::kLearned: return "learned";
    case BackwardKind::kPessimistic: return "pessimistic";
  }
  return "?";
}

BackwardKind parse_backward_kind(std::string_view text) {
  if (text == "uniform") return BackwardKind::kUniform;
  if (text == "maxent") return BackwardKind::kMaxEnt;
  if (text == "learned") return BackwardKind::kLearned;
  if (text == "pessimistic") return BackwardKind::kPessimistic;
  throw ConfigError("unknown backward policy '" + std::string(text) +
                    "' (expected uniform, maxent, learned or pessimistic)");
}

double PathCounts::at(const State& s) const {
  const auto it = counts.find(s);
  if (it == counts.end()) throw ContractViolation("state missing from the path-count table");
  return it->second;
}

PathCounts maxent_counts(const Environment& env, std::size_t cap) {
  StateSpace space;
  try {
    space = enumerate_states(env, cap);
  } catch (const OracleScaleError& e) {
    throw UnsupportedVariant(std::string("maxent backward policy needs an enumerable environment: ") + e.what());
  }
  std::vector<double> n(space.states.size(), 0.0);
  n[0] = 1.0;  // topological order starts at s0
  for (std::size_t i = 0; i < space.states.size(); ++i) {
    for (const auto& [a, c] : space.children[i]) n[static_cast<std::size_t>(c)] += n[i];
  }
  PathCounts out;
  out.counts.reserve(space.states.size());
  for (std::size_t i = 0; i < space.states.size(); ++i) out.counts.emplace(std::move(space.states[i]), n[i]);
  return out;
}

BackwardPolicy make_backward_policy(BackwardKind kind, const Environment& env,
                                    std::span<const int> hidden, std::uint64_t seed,
                                    std::shared_ptr<const PathCounts> counts) {
  BackwardPolicy bp;
  bp.kind = kind;
  if (kind == BackwardKind::kLearned || kind == BackwardKind::kPessimistic) {
    bp.net = mlp_init(layer_sizes(env.feature_dim(), hidden, env.num_actions()), seed);
  } else if (kind == BackwardKind::kMaxEnt) {
    bp.counts = counts ? std::move(counts) : std::make_shared<const PathCounts>(maxent_counts(env));
  }
  return bp;
}

std::vector<double> forward_logprobs(const ForwardPolicy& policy, const Environment& env,
                                     const State& s) {
  const Mask mask = env.allowed_actions(s);
  const auto feats = env.features(s);
  const Eigen::VectorXd logits = mlp_forward(policy.net, feats);
  return masked_log_softmax(std::span<const double>(logits.data(), static_cast<std::size_t>(logits.size())), mask);
}

Trajectory sample_forward_trajectory(const ForwardPolicy& policy, const Environment& env,
                                     Rng& rng, double epsilon) {
  check_epsilon(epsilon);
  Trajectory traj;
  traj.states.push_back(env.initial_state());
  while (!traj.object().terminal) {
    if (traj.actions.size() >= step_cap(env)) wiring_error(env);
    const State& s = traj.object();
    const Mask mask = env.allowed_actions(s);
    const auto lp = forward_logprobs(policy, env, s);
    const int a = choose_action(lp, mask, epsilon, rng);
    traj.actions.push_back(a);
    traj.states.push_back(env.apply_action(s, a));
  }
  traj.reward = std::max(env.reward(traj.object()), kRewardFloor);
  return traj;
}

std::vector<Trajectory> sample_forward_batch(const ForwardPolicy& policy, const Environment& env,
                                             Rng& rng, double epsilon, int count) {
  check_epsilon(epsilon);
  std::vector<Trajectory> trajs(static_cast<std::size_t>(std::max(count, 0)));
  for (auto& t : trajs) t.states.push_back(env.initial_state());
  const int f = env.feature_dim();
  const int na = env.num_actions();
  std::vector<std::size_t> active(trajs.size());
  for (std::size_t i = 0; i < active.size(); ++i) active[i] = i;
  std::size_t steps = 0;
  while (!active.empty()) {
    if (steps++ >= step_cap(env)) wiring_error(env);
    const auto n = static_cast<Eigen::Index>(active.size());
    Eigen::MatrixXd feats(f, n);
    std::vector<Mask> masks(active.size());
    for (Eigen::Index j = 0; j < n; ++j) {
      const State& s = trajs[active[static_cast<std::size_t>(j)]].object();
      env.encode_features(s, std::span<double>(feats.col(j).data(), static_cast<std::size_t>(f)));
      masks[static_cast<std::size_t>(j)] = env.allowed_actions(s);
    }
    const Eigen::MatrixXd logits = forward_batch(policy.net, std::move(feats)).output;
    std::vector<std::size_t> still;
    still.reserve(active.size());
    std::vector<double> col(static_cast<std::size_t>(na));
    for (Eigen::Index j = 0; j < n; ++j) {
      Trajectory& t = trajs[active[static_cast<std::size_t>(j)]];
      const Mask& mask = masks[static_cast<std::size_t>(j)];
      for (int a = 0; a < na; ++a) col[static_cast<std::size_t>(a)] = logits(a, j);
      const auto lp = masked_log_softmax(col, mask);
      const int a = choose_action(lp, mask, epsilon, rng);
      t.states.push_back(env.apply_action(t.object(), a));
      t.actions.push_back(a);
      if (t.object().terminal) {
        t.reward = std::max(env.reward(t.object()), kRewardFloor);
      } else {
        still.push_back(active[static_cast<std::size_t>(j)]);
      }
    }
    active = std::move(still);
  }
  return trajs;
}

std::vector<double> backward_logprobs(const BackwardPolicy& bp, const Environment& env,
                                      const State& child) {
  const auto ps = env.parents(child);
  std::vector<double> out;
  out.reserve(ps.size());
  switch (bp.kind) {
    case BackwardKind::kUniform:
      out.assign(ps.size(), -std::log(static_cast<double>(ps.size())));
      break;
    case BackwardKind::kMaxEnt: {
      if (!bp.counts) throw UnsupportedVariant("maxent backward policy has no path counts");
      double total = 0.0;
      for (const auto& p : ps) total += bp.counts->at(p.state);
      for (const auto& p : ps) out.push_back(std::log(bp.counts->at(p.state) / total));
      break;
    }
    case BackwardKind::kLearned:
    case BackwardKind::kPessimistic: {
      if (!bp.net) throw ContractViolation("learned backward policy has no network");
      const Mask mask = env.backward_mask(child);
      const auto feats = env.features(child);
      const Eigen::VectorXd logits = mlp_forward(*bp.net, feats);
      const auto lp = masked_log_softmax(
          std::span<const double>(logits.data(), static_cast<std::size_t>(logits.size())), mask);
      for (const auto& p : ps) out.push_back(lp[static_cast<std::size_t>(p.action)]);
      break;
    }
  }
  return out;
}

double backward_logprob(const BackwardPolicy& bp, const Environment& env, const State& child,
                        std::size_t parent_index) {
  const auto lp = backward_logprobs(bp, env, child);
  if (parent_index >= lp.size()) throw ContractViolation("parent index out of range");
  return lp[parent_index];
}

Trajectory sample_backward_trajectory(const BackwardPolicy& bp, const Environment& env,
                                      const State& x, Rng& rng) {
  if (!x.terminal) throw ContractViolation("backward sampling must start from a terminal object");
  std::vector<State> rev{x};
  std::vector<int> rev_actions;
  const State s0 = env.initial_state();
  while (rev.back() != s0) {
    if (rev_actions.size() >= step_cap(env)) wiring_error(env);
    const auto ps = env.parents(rev.back());
    const auto lp = backward_logprobs(bp, env, rev.back());
    const Mask all(lp.size(), 1);
    const auto k = static_cast<std::size_t>(sample_categorical(lp, all, rng));
    rev_actions.push_back(ps[k].action);
    rev.push_back(ps[k].state);
  }
  Trajectory traj;
  traj.states.assign(rev.rbegin(), rev.rend());
  traj.actions.assign(rev_actions.rbegin(), rev_actions.rend());
  traj.reward = std::max(env.reward(x), kRewardFloor);
  return traj;
}

double trajectory_forward_logprob(const ForwardPolicy& fp, const Environment& env,
                                  const Trajectory& traj) {
  double total = 0.0;
  for (std::size_t t = 0; t < traj.length(); ++t) {
    total += forward_logprobs(fp, env, traj.states[t])[static_cast<std::size_t>(traj.actions[t])];
  }
  return total;
}

double trajectory_backward_logprob(const BackwardPolicy& bp, const Environment& env,
                                   const Trajectory& traj) {
  double total = 0.0;
  for (std::size_t t = 0; t < traj.length(); ++t) {
    const State& child = traj.states[t + 1];
    const auto ps = env.parents(child);
    const auto lp = backward_logprobs(bp, env, child);
    bool found = false;
    for (std::size_t k = 0; k < ps.size(); ++k) {
      if (ps[k].action == traj.actions[t]) {
        total += lp[k];
        found = true;
        break;
      }
    }
    if (!found) throw ContractViolation("trajectory transition is not a parent edge");
  }
  return total;
}

TransitionBatch make_transition_batch(const Environment& env, const BackwardPolicy& bp,
                                      std::span<const Trajectory* const> trajs) {
  std::size_t n = 0;
  for (const auto* t : trajs) n += t->length();
  const int f = env.feature_dim();
  const int na = env.num_actions();
  TransitionBatch b;
  b.num_trajectories = trajs.size();
  b.traj_of.reserve(n);
  b.actions.reserve(n);
  b.src_features.setZero(f, static_cast<Eigen::Index>(n));
  b.dst_features.setZero(f, static_cast<Eigen::Index>(n));
  b.fwd_masks.setZero(na, static_cast<Eigen::Index>(n));
  b.bwd_masks.setZero(na, static_cast<Eigen::Index>(n));
  b.dst_terminal.reserve(n);
  const bool fixed = !bp.has_net();
  if (fixed) b.fixed_backward.reserve(n);
  b.log_rewards.reserve(trajs.size());
  b.traj_ids.reserve(trajs.size());

  Eigen::Index col = 0;
  for (std::size_t i = 0; i < trajs.size(); ++i) {
    const Trajectory& traj = *trajs[i];
    b.log_rewards.push_back(std::log(std::max(traj.reward, kRewardFloor)));
    b.traj_ids.push_back(traj.id);
    for (std::size_t t = 0; t < traj.length(); ++t, ++col) {
      const State& src = traj.states[t];
      const State& dst = traj.states[t + 1];
      const int a = traj.actions[t];
      b.traj_of.push_back(static_cast<int>(i));
      b.actions.push_back(a);
      env.encode_features(src, std::span<double>(b.src_features.col(col).data(), static_cast<std::size_t>(f)));
      env.encode_features(dst, std::span<double>(b.dst_features.col(col).data(), static_cast<std::size_t>(f)));
      const Mask fm = env.allowed_actions(src);
      for (int k = 0; k < na; ++k) b.fwd_masks(k, col) = fm[static_cast<std::size_t>(k)];
      const Mask bm = env.backward_mask(dst);
      for (int k = 0; k < na; ++k) b.bwd_masks(k, col) = bm[static_cast<std::size_t>(k)];
      b.dst_terminal.push_back(dst.terminal ? 1 : 0);
      if (fixed) b.fixed_backward.push_back(fixed_backward_logprob(bp, env, dst, a));
    }
  }
  return b;
}

TransitionBatch make_transition_batch(const Environment& env, const BackwardPolicy& bp,
                                      std::span<const Trajectory> trajs) {
  std::vector<const Trajectory*> ptrs;
  ptrs.reserve(trajs.size());
  for (const auto& t : trajs) ptrs.push_back(&t);
  return make_transition_batch(env, bp, ptrs);
}

Eigen::VectorXd batch_backward_logprobs(const BackwardPolicy& bp, const TransitionBatch& batch) {
  if (!bp.has_net()) {
    return ConstVectorMap(batch.fixed_backward.data(), static_cast<Eigen::Index>(batch.fixed_backward.size()));
  }
  return action_logprobs(*bp.net, batch.dst_features, batch.bwd_masks, batch.actions).chosen;
}

}  // namespace gflowlab
