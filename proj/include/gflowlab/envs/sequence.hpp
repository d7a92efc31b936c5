#pragma once

#include <memory>

#include "gflowlab/env.hpp"
#include "gflowlab/reward_table.hpp"

namespace gflowlab {

// Fixed-length strings built by appending (actions 0..k-1) or prepending
// (actions k..2k-1) one letter. The empty string only allows appends, so every
// length-1 string has exactly one parent and every length-L object has
// 2^(L-1) construction orders.
class SequenceEnv final : public Environment {
 public:
  SequenceEnv(std::shared_ptr<const RewardTable> table, double reward_exponent);

  std::string name() const override { return "sequence"; }
  int num_actions() const override { return 2 * alphabet_size(); }
  int feature_dim() const override { return length_ * (alphabet_size() + 1) + 1; }
  int max_depth() const override { return length_; }

  State initial_state() const override { return State{{}, false}; }
  Mask allowed_actions(const State& s) const override;
  State apply_action(const State& s, int action) const override;
  std::vector<Parent> parents(const State& s) const override;
  // Raw score mapped affinely onto [0.001, 1] then raised to the exponent.
  double reward(const State& x) const override;
  void encode_features(const State& s, std::span<double> out) const override;

  int length() const { return length_; }
  int alphabet_size() const { return static_cast<int>(table_->alphabet().size()); }
  const RewardTable& table() const { return *table_; }
  double reward_exponent() const { return exponent_; }
  double reward_of(std::span<const int> letters) const;
  std::string to_string(const State& s) const { return table_->decode(s.data); }
  State from_string(std::string_view text) const;

 private:
  std::shared_ptr<const RewardTable> table_;
  int length_;
  double exponent_;
};

}  // namespace gflowlab
