#include "gflowlab/reward_table.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>

#include <fmt/format.h>

#include "gflowlab/error.hpp"
#include "gflowlab/rng.hpp"

namespace gflowlab {

RewardTable::RewardTable(std::string alphabet, int length)
    : alphabet_(std::move(alphabet)), length_(length) {
  if (alphabet_.size() < 2) throw ConfigError("alphabet needs at least two letters");
  for (std::size_t i = 0; i < alphabet_.size(); ++i) {
    if (alphabet_.find(alphabet_[i]) != i) throw ConfigError("alphabet has a repeated letter");
  }
  if (length_ < 1) throw ConfigError("sequence length must be >= 1");
  if (std::pow(static_cast<double>(alphabet_.size()), length_) > 0x1.0p63) {
    throw ConfigError("alphabet^length does not fit a 64-bit key");
  }
}

std::vector<int> RewardTable::encode(std::string_view sequence) const {
  std::vector<int> letters;
  letters.reserve(sequence.size());
  for (char c : sequence) {
    const auto pos = alphabet_.find(c);
    if (pos == std::string::npos) {
      throw DataError(fmt::format("letter '{}' is not in alphabet {}", c, alphabet_));
    }
    letters.push_back(static_cast<int>(pos));
  }
  return letters;
}

std::string RewardTable::decode(std::span<const int> letters) const {
  std::string out;
  out.reserve(letters.size());
  for (int l : letters) out.push_back(alphabet_.at(static_cast<std::size_t>(l)));
  return out;
}

std::uint64_t RewardTable::key(std::span<const int> letters) const {
  std::uint64_t k = 0;
  for (int l : letters) k = k * alphabet_.size() + static_cast<std::uint64_t>(l);
  return k;
}

void RewardTable::insert(std::string_view sequence, double raw) {
  if (static_cast<int>(sequence.size()) != length_) {
    throw DataError(fmt::format("sequence '{}' has length {}, expected {}", sequence, sequence.size(), length_));
  }
  if (!std::isfinite(raw)) throw DataError(fmt::format("score for '{}' is not finite", sequence));
  const auto [it, inserted] = scores_.emplace(key(encode(sequence)), raw);
  if (!inserted) throw DataError(fmt::format("sequence '{}' appears twice", sequence));
  if (scores_.size() == 1) {
    min_ = max_ = raw;
  } else {
    min_ = std::min(min_, raw);
    max_ = std::max(max_, raw);
  }
}

double RewardTable::raw(std::span<const int> letters) const {
  if (static_cast<int>(letters.size()) == length_) {
    const auto it = scores_.find(key(letters));
    if (it != scores_.end()) return it->second;
  }
  throw DataError(fmt::format("sequence '{}' is not in the reward table", decode(letters)));
}

double RewardTable::raw(std::string_view sequence) const { return raw(encode(sequence)); }

bool RewardTable::contains(std::span<const int> letters) const {
  return static_cast<int>(letters.size()) == length_ && scores_.count(key(letters)) != 0;
}

std::vector<std::pair<std::string, double>> RewardTable::entries() const {
  std::vector<std::pair<std::uint64_t, double>> keyed(scores_.begin(), scores_.end());
  std::sort(keyed.begin(), keyed.end());
  std::vector<std::pair<std::string, double>> out;
  out.reserve(keyed.size());
  std::vector<int> letters(static_cast<std::size_t>(length_));
  for (const auto& [k, v] : keyed) {
    std::uint64_t rest = k;
    for (int i = length_ - 1; i >= 0; --i) {
      letters[static_cast<std::size_t>(i)] = static_cast<int>(rest % alphabet_.size());
      rest /= alphabet_.size();
    }
    out.emplace_back(decode(letters), v);
  }
  return out;
}

RewardTable RewardTable::load_tsv(const std::filesystem::path& path, std::string alphabet) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open reward table " + path.string());
  std::string line;
  std::size_t line_no = 0;
  std::optional<RewardTable> table;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos) {
      throw DataError(fmt::format("{}:{}: expected <sequence>TAB<score>", path.string(), line_no));
    }
    const std::string_view seq(line.data(), tab);
    const std::string score_text = line.substr(tab + 1);
    double score = 0.0;
    const auto [end, ec] = std::from_chars(score_text.data(), score_text.data() + score_text.size(), score);
    if (ec != std::errc{} || end != score_text.data() + score_text.size()) {
      throw DataError(fmt::format("{}:{}: bad score '{}'", path.string(), line_no, score_text));
    }
    if (!table) table.emplace(alphabet, static_cast<int>(seq.size()));
    try {
      table->insert(seq, score);
    } catch (const DataError& e) {
      throw DataError(fmt::format("{}:{}: {}", path.string(), line_no, e.what()));
    }
  }
  if (!table) throw DataError("reward table " + path.string() + " is empty");
  return std::move(*table);
}

void RewardTable::save_tsv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write reward table " + path.string());
  for (const auto& [seq, v] : entries()) out << seq << '\t' << fmt::format("{:.17g}", v) << '\n';
  if (!out) throw DataError("write failed for " + path.string());
}

RewardTable RewardTable::synthetic(int length, std::string alphabet, std::uint64_t seed) {
  if (length > kMaxSyntheticLength) {
    throw ConfigError(fmt::format("synthetic tables are limited to length {}", kMaxSyntheticLength));
  }
  RewardTable table(std::move(alphabet), length);
  const int k = static_cast<int>(table.alphabet_.size());
  Rng rng(seed, "reward_table");

  struct Peak {
    std::vector<int> motif;
    double height;
  };
  std::vector<Peak> peaks(static_cast<std::size_t>(std::max(4, 2 * length)));
  for (auto& p : peaks) {
    p.motif.resize(static_cast<std::size_t>(length));
    for (auto& l : p.motif) l = static_cast<int>(rng.below(static_cast<std::uint64_t>(k)));
    p.height = 0.6 + 0.4 * rng.uniform();
  }
  const std::uint64_t noise_key = rng();

  std::uint64_t total = 1;
  for (int i = 0; i < length; ++i) total *= static_cast<std::uint64_t>(k);
  table.scores_.reserve(total);
  std::vector<int> letters(static_cast<std::size_t>(length), 0);
  for (std::uint64_t code = 0; code < total; ++code) {
    std::uint64_t rest = code;
    for (int i = length - 1; i >= 0; --i) {
      letters[static_cast<std::size_t>(i)] = static_cast<int>(rest % static_cast<std::uint64_t>(k));
      rest /= static_cast<std::uint64_t>(k);
    }
    double best = 0.0;
    for (const auto& p : peaks) {
      int dist = 0;
      for (int i = 0; i < length; ++i) dist += letters[static_cast<std::size_t>(i)] != p.motif[static_cast<std::size_t>(i)];
      best = std::max(best, p.height * std::pow(0.5, dist));
    }
    const double noise = static_cast<double>(mix64(noise_key ^ code) >> 11) * 0x1.0p-53;
    const double raw = best + 0.3 * noise;
    table.scores_.emplace(code, raw);
    if (code == 0) {
      table.min_ = table.max_ = raw;
    } else {
      table.min_ = std::min(table.min_, raw);
      table.max_ = std::max(table.max_, raw);
    }
  }
  return table;
}

}  // namespace gflowlab
