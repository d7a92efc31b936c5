#include "gflowlab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gflowlab/error.hpp"

namespace gflowlab {

double l1_distance(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw ContractViolation("l1_distance: distributions differ in length");
  const double sp = std::accumulate(p.begin(), p.end(), 0.0);
  const double sq = std::accumulate(q.begin(), q.end(), 0.0);
  if (!(sp > 0.0) || !(sq > 0.0)) throw ContractViolation("l1_distance: distribution has no mass");
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) total += std::abs(p[i] / sp - q[i] / sq);
  return total;
}

double l1_distance(const Distribution& p, const Distribution& q) {
  if (p.objects != q.objects) throw ContractViolation("l1_distance: distributions cover different objects");
  return l1_distance(p.probs, q.probs);
}

ModeTracker::ModeTracker(Predicate is_mode, Key key) : is_mode_(std::move(is_mode)), key_(std::move(key)) {}

bool ModeTracker::observe(const State& x, double reward) {
  if (!is_mode_(x, reward)) return false;
  return found_.insert(key_ ? key_(x) : x).second;
}

ModeTracker threshold_mode_tracker(double threshold, bool corner_clusters, int grid_size) {
  auto pred = [threshold](const State&, double r) { return r >= threshold; };
  if (!corner_clusters) return ModeTracker(pred);
  if (grid_size < 2) throw ConfigError("corner clusters need a grid size of at least 2");
  return ModeTracker(pred, [grid_size](const State& x) {
    State key{{}, true};
    for (int c : x.data) key.data.push_back(2 * c < grid_size ? 0 : 1);
    return key;
  });
}

void RewardHistory::observe(const State& x, double reward) {
  if (seen_.insert(x).second) rewards_.insert(reward);
}

double RewardHistory::topk_mean(std::size_t k) const {
  if (rewards_.empty() || k == 0) return 0.0;
  double total = 0.0;
  std::size_t n = 0;
  for (auto it = rewards_.begin(); it != rewards_.end() && n < k; ++it, ++n) total += *it;
  return total / static_cast<double>(n);
}

double topk_mean(std::span<const double> unique_rewards, std::size_t k) {
  if (unique_rewards.empty() || k == 0) return 0.0;
  std::vector<double> r(unique_rewards.begin(), unique_rewards.end());
  const std::size_t n = std::min(k, r.size());
  std::partial_sort(r.begin(), r.begin() + static_cast<std::ptrdiff_t>(n), r.end(), std::greater<>());
  return std::accumulate(r.begin(), r.begin() + static_cast<std::ptrdiff_t>(n), 0.0) / static_cast<double>(n);
}

double target_mean_reward(std::span<const double> rewards) {
  double s1 = 0.0;
  double s2 = 0.0;
  for (double r : rewards) {
    s1 += r;
    s2 += r * r;
  }
  if (!(s1 > 0.0)) throw ContractViolation("target mean needs positive rewards");
  return s2 / s1;
}

double relative_mean_error(std::span<const double> sample_rewards, double target_mean) {
  if (sample_rewards.empty()) throw ContractViolation("relative mean error needs samples");
  const double mean = std::accumulate(sample_rewards.begin(), sample_rewards.end(), 0.0) /
                      static_cast<double>(sample_rewards.size());
  return (mean - target_mean) / target_mean;
}

double relative_mean_error_exact(std::span<const double> weights, std::span<const double> rewards,
                                 double target_mean) {
  if (weights.size() != rewards.size()) throw ContractViolation("one weight per reward required");
  double mean = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) mean += weights[i] * rewards[i];
  return (mean - target_mean) / target_mean;
}

int hamming_distance(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw ContractViolation("hamming distance needs equal-length sequences");
  int d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += a[i] != b[i];
  return d;
}

HammingModeTracker::HammingModeTracker(std::shared_ptr<const SequenceEnv> env, int radius, double threshold)
    : env_(std::move(env)), radius_(radius), threshold_(threshold) {
  if (radius_ < 0) throw ConfigError("hamming radius must be non-negative");
}

namespace {

// Visits every sequence within distance `budget` of `seq`, changing positions
// from `from` onward; stops early when `visit` returns false.
template <typename Visit>
bool for_each_neighbor(std::vector<int>& seq, std::size_t from, int budget, int alphabet, Visit& visit) {
  if (budget == 0) return true;
  for (std::size_t i = from; i < seq.size(); ++i) {
    const int orig = seq[i];
    for (int c = 0; c < alphabet; ++c) {
      if (c == orig) continue;
      seq[i] = c;
      const bool go = visit(seq) && for_each_neighbor(seq, i + 1, budget - 1, alphabet, visit);
      seq[i] = orig;
      if (!go) return false;
    }
  }
  return true;
}

}  // namespace

bool HammingModeTracker::is_ball_maximum(std::span<const int> letters) const {
  const double own = env_->reward_of(letters);
  std::vector<int> seq(letters.begin(), letters.end());
  const auto& table = env_->table();
  auto visit = [&](const std::vector<int>& nb) {
    return !table.contains(nb) || env_->reward_of(nb) <= own;
  };
  return for_each_neighbor(seq, 0, radius_, env_->alphabet_size(), visit);
}

bool HammingModeTracker::observe(const State& x) {
  if (!x.terminal || static_cast<int>(x.data.size()) != env_->length()) {
    throw ContractViolation("hamming modes need complete fixed-length sequences");
  }
  if (env_->reward_of(x.data) < threshold_) return false;
  for (const auto& m : accepted_) {
    if (hamming_distance(m, x.data) <= radius_) return false;
  }
  if (!is_ball_maximum(x.data)) return false;
  accepted_.push_back(x.data);
  return true;
}

std::vector<std::vector<int>> hamming_ball_maxima(const SequenceEnv& env, int radius, double threshold) {
  auto shared = std::shared_ptr<const SequenceEnv>(&env, [](const SequenceEnv*) {});
  HammingModeTracker probe(shared, radius, threshold);
  std::vector<std::vector<int>> out;
  for (const auto& [text, raw] : env.table().entries()) {
    const auto letters = env.table().encode(text);
    if (static_cast<int>(letters.size()) != env.length()) continue;
    if (env.reward_of(letters) >= threshold && probe.is_ball_maximum(letters)) out.push_back(letters);
  }
  return out;
}

}  // namespace gflowlab
