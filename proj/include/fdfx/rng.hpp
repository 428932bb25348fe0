#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace fdfx {

// Counter-based 64-bit generator (SplitMix64). The output at step k is a pure
// function of (key, k), so independent substreams only need distinct keys.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t key = 0) : key_(key) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return mix(key_ + (++counter_) * kGolden); }

  // Deterministic child stream; stream ids may be nested (replicate, then purpose).
  Rng substream(std::uint64_t id) const { return Rng(mix(key_ ^ mix(id + kGolden))); }

  double uniform() {  // [0, 1)
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
  }

  // Uniform on {0, ..., n-1}; rejection sampling keeps it unbiased.
  std::uint64_t index(std::uint64_t n) {
    const std::uint64_t limit = max() - max() % n;
    std::uint64_t r;
    do {
      r = (*this)();
    } while (r >= limit);
    return r % n;
  }

  double normal() { return normal_(*this); }

  std::uint64_t key() const { return key_; }

 private:
  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

// Substream ids used across modules, so that e.g. the bootstrap draws of a
// simulation replicate never collide with its data-generation draws.
namespace stream {
inline constexpr std::uint64_t kData = 1;
inline constexpr std::uint64_t kBootstrap = 2;
inline constexpr std::uint64_t kBand = 3;
inline constexpr std::uint64_t kTest = 4;
}  // namespace stream

}  // namespace fdfx
