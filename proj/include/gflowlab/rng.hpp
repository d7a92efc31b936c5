#pragma once

#include <cstdint>
#include <limits>
#include <string_view>

namespace gflowlab {

// SplitMix64 finalizer; a bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

// Counter-based generator: output i is a pure function of (key, i), so every
// (run seed, purpose) pair owns an isolated stream and drawing from one
// stream never shifts another. Satisfies UniformRandomBitGenerator.
class Rng {
  __extension__ using Wide = unsigned __int128;

 public:
  using result_type = std::uint64_t;

  Rng() = default;
  Rng(std::uint64_t seed, std::string_view purpose)
      : key_(mix64(mix64(seed) ^ fnv1a(purpose))) {}
  explicit Rng(std::uint64_t key) : key_(mix64(key)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return mix64(key_ ^ mix64(counter_++)); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n); n > 0.
  std::uint64_t below(std::uint64_t n) {
    // Lemire's nearly-divisionless rejection.
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const Wide m = static_cast<Wide>((*this)()) * n;
      if (static_cast<std::uint64_t>(m) >= threshold) return static_cast<std::uint64_t>(m >> 64);
    }
  }

  // Child stream, independent of this one's future draws.
  Rng fork(std::string_view purpose) const { return Rng(key_ ^ fnv1a(purpose)); }

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace gflowlab
