#include "gflowlab/envs/toy_dag.hpp"

#include <string>

#include "gflowlab/error.hpp"

namespace gflowlab {
namespace {

int node_id(const State& s) {
  if (s.data.size() != 1 || s.data[0] < 0 || s.data[0] >= ToyDagEnv::kNumNodes) {
    throw ContractViolation("not a toy DAG state");
  }
  return s.data[0];
}

}  // namespace

Mask ToyDagEnv::allowed_actions(const State& s) const {
  const int id = node_id(s);
  if (s.terminal) throw ContractViolation("allowed_actions on a terminal toy state");
  Mask mask(4, 0);
  if (id == kS0) {
    mask.assign(4, 1);
  } else {
    mask[static_cast<std::size_t>(id - 1)] = 1;
  }
  return mask;
}

State ToyDagEnv::apply_action(const State& s, int action) const {
  const Mask mask = allowed_actions(s);
  if (action < 0 || action >= 4 || !mask[static_cast<std::size_t>(action)]) {
    throw ContractViolation("toy action " + std::to_string(action) + " is not allowed here");
  }
  const int id = node_id(s);
  if (id == kS0) return node(action + 1);
  return node(id == kD ? kX2 : kX1);
}

std::vector<Parent> ToyDagEnv::parents(const State& s) const {
  switch (node_id(s)) {
    case kS0:
      throw ContractViolation("the toy source has no parents");
    case kA:
    case kB:
    case kC:
    case kD:
      return {Parent{node(kS0), s.data[0] - 1}};
    case kX1:
      return {Parent{node(kA), 0}, Parent{node(kB), 1}, Parent{node(kC), 2}};
    default:
      return {Parent{node(kD), 3}};
  }
}

double ToyDagEnv::reward(const State& x) const {
  const int id = node_id(x);
  if (id == kX1) return 1.0;
  if (id == kX2) return 0.5;
  throw ContractViolation("toy reward requested for a non-terminal node");
}

void ToyDagEnv::encode_features(const State& s, std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  out[static_cast<std::size_t>(node_id(s))] = 1.0;
}

}  // namespace gflowlab
