#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <utility>

namespace xdv {

// SplitMix64 output finalizer. Also used as the 64-bit seed mixer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Derived seed for stream `index` of a master seed:
//   mix64(mix64(master) ^ (index * 0xD1B54A32D192ED03 + 0x8CB92BA72F3D8DD7))
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept {
  return mix64(mix64(master) ^ (index * 0xD1B54A32D192ED03ULL + 0x8CB92BA72F3D8DD7ULL));
}

// Counter-based SplitMix64 generator. Output depends only on the seed and the
// number of draws, so sequences are identical on every platform. Distribution
// transforms are implemented here rather than taken from <random>, whose
// distributions are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) noexcept : counter_(seed) {}

  std::uint64_t next_u64() noexcept {
    counter_ += 0x9E3779B97F4A7C15ULL;
    return mix64(counter_);
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) noexcept;

  // Standard normal via Box-Muller; each call consumes two draws.
  double normal() noexcept;

  template <class T>
  void shuffle(std::span<T> items) noexcept {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      using std::swap;
      swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t counter_;
};

// Order-sensitive 64-bit hash accumulator used for fingerprints.
class Fingerprint {
 public:
  Fingerprint& add(std::uint64_t v) noexcept {
    state_ = mix64(state_ ^ (v + 0x9E3779B97F4A7C15ULL + (state_ << 6) + (state_ >> 2)));
    return *this;
  }
  Fingerprint& add(double v) noexcept;
  Fingerprint& add(std::string_view s) noexcept;
  std::uint64_t value() const noexcept { return state_; }

 private:
  std::uint64_t state_ = 0x6A09E667F3BCC909ULL;
};

}  // namespace xdv
