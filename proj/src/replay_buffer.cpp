#include "gflowlab/replay_buffer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gflowlab/error.hpp"

namespace gflowlab {

ReplayBuffer::ReplayBuffer(std::size_t retention_rounds) : retention_(retention_rounds) {
  if (retention_ == 0) throw ConfigError("buffer retention must be at least one round");
}

void ReplayBuffer::push_round(std::vector<Trajectory> trajs) {
  for (auto& t : trajs) {
    t.id = next_id_++;
    by_object_[t.object()].push_back(t.id);
    seen_.emplace(t.object(), t.reward);
  }
  size_ += trajs.size();
  rounds_.push_back(std::move(trajs));
  while (rounds_.size() > retention_) {
    for (const auto& t : rounds_.front()) {
      auto it = by_object_.find(t.object());
      auto& ids = it->second;
      ids.erase(std::find(ids.begin(), ids.end(), t.id));
      if (ids.empty()) by_object_.erase(it);
    }
    size_ -= rounds_.front().size();
    rounds_.pop_front();
  }
}

const Trajectory& ReplayBuffer::at(std::size_t i) const {
  for (const auto& r : rounds_) {
    if (i < r.size()) return r[i];
    i -= r.size();
  }
  throw ContractViolation("buffer index out of range");
}

std::vector<Trajectory> ReplayBuffer::all() const {
  std::vector<Trajectory> out;
  out.reserve(size_);
  for (const auto& r : rounds_) out.insert(out.end(), r.begin(), r.end());
  return out;
}

std::vector<const Trajectory*> ReplayBuffer::sample(std::size_t k, Rng& rng) const {
  std::vector<const Trajectory*> flat;
  flat.reserve(size_);
  for (const auto& r : rounds_) {
    for (const auto& t : r) flat.push_back(&t);
  }
  if (k >= flat.size()) return flat;
  // Partial Fisher-Yates: the first k slots end up a uniform k-subset.
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(flat.size() - i));
    std::swap(flat[i], flat[j]);
  }
  flat.resize(k);
  return flat;
}

const std::vector<std::uint64_t>& ReplayBuffer::ids_for(const State& x) const {
  static const std::vector<std::uint64_t> kNone;
  const auto it = by_object_.find(x);
  return it == by_object_.end() ? kNone : it->second;
}

const Trajectory* ReplayBuffer::find(std::uint64_t id) const {
  for (const auto& r : rounds_) {
    if (r.empty() || id < r.front().id || id > r.back().id) continue;
    return &r[static_cast<std::size_t>(id - r.front().id)];
  }
  return nullptr;
}

ReplayBuffer::Index ReplayBuffer::rebuild_index() const {
  Index idx;
  for (const auto& r : rounds_) {
    for (const auto& t : r) idx[t.object()].push_back(t.id);
  }
  return idx;
}

bool ReplayBuffer::index_consistent() const {
  if (rounds_.size() > retention_) return false;
  std::size_t n = 0;
  for (const auto& r : rounds_) n += r.size();
  return n == size_ && rebuild_index() == by_object_;
}

std::vector<State> select_offline_objects(const std::map<State, double>& seen, std::size_t k,
                                          double rho, Rng& rng) {
  if (seen.empty()) throw ContractViolation("no objects seen yet");
  if (!(rho > 0.0 && rho <= 1.0)) throw ConfigError("top fraction must lie in (0, 1]");
  std::vector<std::pair<double, const State*>> ranked;
  ranked.reserve(seen.size());
  for (const auto& [x, r] : seen) ranked.emplace_back(r, &x);
  // Stable on the State order, so ties rank deterministically.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  const auto keep = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(rho * static_cast<double>(ranked.size()) - 1e-9)));
  const double cutoff = ranked[keep - 1].first;
  std::size_t support = keep;
  while (support < ranked.size() && ranked[support].first >= cutoff) ++support;
  std::vector<State> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.push_back(*ranked[static_cast<std::size_t>(rng.below(support))].second);
  return out;
}

}  // namespace gflowlab
