#include "gflowlab/envs/bag.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "gflowlab/error.hpp"
#include "gflowlab/rng.hpp"

namespace gflowlab {

BagEnv::BagEnv(BagParams params) : params_(params) {
  if (params_.num_items < 2) throw ConfigError("bag num_items must be >= 2");
  if (params_.capacity < 1) throw ConfigError("bag capacity must be >= 1");
  if (!(params_.base_reward > 0.0) || !(params_.low_reward > 0.0) || !(params_.high_reward > 0.0)) {
    throw ConfigError("bag rewards must be positive");
  }
  if (params_.high_probability < 0.0 || params_.high_probability > 1.0) {
    throw ConfigError("bag high_probability must lie in [0, 1]");
  }
}

int BagEnv::bag_size(const State& s) const { return std::accumulate(s.data.begin(), s.data.end(), 0); }

void BagEnv::check(const State& s) const {
  if (static_cast<int>(s.data.size()) != params_.num_items) throw ContractViolation("bag state has wrong item count");
  if (std::any_of(s.data.begin(), s.data.end(), [](int c) { return c < 0; })) {
    throw ContractViolation("bag count is negative");
  }
  const int n = bag_size(s);
  if (n > params_.capacity) throw ContractViolation("bag exceeds capacity");
  if (s.terminal != (n == params_.capacity)) throw ContractViolation("bag terminal flag inconsistent with size");
}

State BagEnv::initial_state() const {
  return State{std::vector<int>(static_cast<std::size_t>(params_.num_items), 0), params_.capacity == 0};
}

Mask BagEnv::allowed_actions(const State& s) const {
  check(s);
  if (s.terminal) throw ContractViolation("allowed_actions on a full bag");
  return Mask(static_cast<std::size_t>(params_.num_items), 1);
}

State BagEnv::apply_action(const State& s, int action) const {
  check(s);
  if (s.terminal || action < 0 || action >= params_.num_items) {
    throw ContractViolation("bag action " + std::to_string(action) + " is not allowed here");
  }
  State next = s;
  ++next.data[static_cast<std::size_t>(action)];
  next.terminal = bag_size(next) == params_.capacity;
  return next;
}

std::vector<Parent> BagEnv::parents(const State& s) const {
  check(s);
  std::vector<Parent> out;
  for (int i = 0; i < params_.num_items; ++i) {
    if (s.data[static_cast<std::size_t>(i)] > 0) {
      State p{s.data, false};
      --p.data[static_cast<std::size_t>(i)];
      out.push_back(Parent{std::move(p), i});
    }
  }
  if (out.empty()) throw ContractViolation("the empty bag has no parents");
  return out;
}

double BagEnv::reward(const State& x) const {
  check(x);
  if (!x.terminal) throw ContractViolation("bag reward requested for an incomplete bag");
  if (*std::max_element(x.data.begin(), x.data.end()) < params_.repeat_threshold) {
    return params_.base_reward;
  }
  std::uint64_t h = mix64(params_.seed ^ 0x626167ULL);
  for (int c : x.data) h = mix64(h ^ static_cast<std::uint64_t>(c));
  const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
  return u < params_.high_probability ? params_.high_reward : params_.low_reward;
}

void BagEnv::encode_features(const State& s, std::span<double> out) const {
  const double cap = params_.capacity;
  for (int i = 0; i < params_.num_items; ++i) {
    out[static_cast<std::size_t>(i)] = s.data[static_cast<std::size_t>(i)] / cap;
  }
  out[static_cast<std::size_t>(params_.num_items)] = bag_size(s) / cap;
}

}  // namespace gflowlab
