#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace gflowlab {

// Raw scores for fixed-length sequences over a small alphabet.
// TSV format: `<sequence>\t<raw-score>\n`, no header.
class RewardTable {
 public:
  RewardTable(std::string alphabet, int length);

  static RewardTable load_tsv(const std::filesystem::path& path, std::string alphabet);
  void save_tsv(const std::filesystem::path& path) const;

  // Seeded random landscape: background noise plus planted peaks whose score
  // decays geometrically with Hamming distance. Covers all |alphabet|^length
  // sequences, enumerated in lexicographic order.
  static RewardTable synthetic(int length, std::string alphabet, std::uint64_t seed);

  void insert(std::string_view sequence, double raw);
  // Throws DataError when the sequence is absent.
  double raw(std::string_view sequence) const;
  double raw(std::span<const int> letters) const;
  bool contains(std::span<const int> letters) const;

  const std::string& alphabet() const { return alphabet_; }
  int length() const { return length_; }
  std::size_t size() const { return scores_.size(); }
  double min_raw() const { return min_; }
  double max_raw() const { return max_; }

  std::vector<int> encode(std::string_view sequence) const;
  std::string decode(std::span<const int> letters) const;

  // Entries sorted by sequence, for deterministic iteration.
  std::vector<std::pair<std::string, double>> entries() const;

 private:
  std::uint64_t key(std::span<const int> letters) const;

  std::string alphabet_;
  int length_;
  std::unordered_map<std::uint64_t, double> scores_;
  double min_ = 0.0;
  double max_ = 0.0;
};

// Largest length the synthetic generator accepts (4^12 entries).
inline constexpr int kMaxSyntheticLength = 12;

}  // namespace gflowlab
