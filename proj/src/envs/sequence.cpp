#include "gflowlab/envs/sequence.hpp"

#include <cmath>
#include <string>

#include "gflowlab/error.hpp"

namespace gflowlab {

SequenceEnv::SequenceEnv(std::shared_ptr<const RewardTable> table, double reward_exponent)
    : table_(std::move(table)), length_(table_ ? table_->length() : 0), exponent_(reward_exponent) {
  if (!table_) throw ConfigError("sequence env needs a reward table");
  if (!(reward_exponent > 0.0)) throw ConfigError("reward exponent must be positive");
}

Mask SequenceEnv::allowed_actions(const State& s) const {
  if (s.terminal || static_cast<int>(s.data.size()) >= length_) {
    throw ContractViolation("allowed_actions on a complete sequence");
  }
  const int k = alphabet_size();
  Mask mask(static_cast<std::size_t>(2 * k), 1);
  if (s.data.empty()) std::fill(mask.begin() + k, mask.end(), 0);
  return mask;
}

State SequenceEnv::apply_action(const State& s, int action) const {
  const Mask mask = allowed_actions(s);
  if (action < 0 || action >= num_actions() || !mask[static_cast<std::size_t>(action)]) {
    throw ContractViolation("sequence action " + std::to_string(action) + " is not allowed here");
  }
  const int k = alphabet_size();
  State next;
  next.data.reserve(s.data.size() + 1);
  if (action < k) {
    next.data = s.data;
    next.data.push_back(action);
  } else {
    next.data.push_back(action - k);
    next.data.insert(next.data.end(), s.data.begin(), s.data.end());
  }
  next.terminal = static_cast<int>(next.data.size()) == length_;
  return next;
}

std::vector<Parent> SequenceEnv::parents(const State& s) const {
  const auto n = s.data.size();
  if (n == 0) throw ContractViolation("the empty sequence has no parents");
  if (static_cast<int>(n) > length_) throw ContractViolation("sequence longer than the configured length");
  const int k = alphabet_size();
  std::vector<Parent> out;
  out.push_back(Parent{State{{s.data.begin(), s.data.end() - 1}, false}, s.data.back()});
  if (n >= 2) out.push_back(Parent{State{{s.data.begin() + 1, s.data.end()}, false}, k + s.data.front()});
  return out;
}

double SequenceEnv::reward_of(std::span<const int> letters) const {
  const double span = table_->max_raw() - table_->min_raw();
  const double raw = table_->raw(letters);
  const double scaled = span > 0.0 ? 0.001 + 0.999 * (raw - table_->min_raw()) / span : 1.0;
  return std::pow(scaled, exponent_);
}

double SequenceEnv::reward(const State& x) const {
  if (!x.terminal) throw ContractViolation("sequence reward requested for an incomplete sequence");
  return reward_of(x.data);
}

void SequenceEnv::encode_features(const State& s, std::span<double> out) const {
  const int k = alphabet_size();
  std::fill(out.begin(), out.end(), 0.0);
  for (int i = 0; i < length_; ++i) {
    const int slot = i < static_cast<int>(s.data.size()) ? s.data[static_cast<std::size_t>(i)] : k;
    out[static_cast<std::size_t>(i * (k + 1) + slot)] = 1.0;
  }
  out[static_cast<std::size_t>(length_ * (k + 1))] = static_cast<double>(s.data.size()) / length_;
}

State SequenceEnv::from_string(std::string_view text) const {
  State s{table_->encode(text), false};
  if (static_cast<int>(s.data.size()) > length_) throw ContractViolation("sequence longer than the configured length");
  s.terminal = static_cast<int>(s.data.size()) == length_;
  return s;
}

}  // namespace gflowlab
