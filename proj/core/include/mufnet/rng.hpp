#pragma once

#include <cstdint>
#include <string_view>

namespace mufnet {

// FNV-1a, 64-bit, over raw bytes.
constexpr std::uint64_t fnv1a64(std::string_view bytes,
                                std::uint64_t hash = 0xcbf29ce484222325ULL) noexcept {
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

// splitmix64 stream. The standard library's distributions are
// implementation-defined, so every draw in this project goes through here to
// stay bit-identical across platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) noexcept : state_(seed) {}

  std::uint64_t next() noexcept {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // [0, 1) with 53 bits of precision.
  double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  // [-1, 1)
  double symmetric() noexcept { return 2.0 * uniform() - 1.0; }
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  // Unbiased integer in [0, n), n >= 1. Draws below 2^64 mod n are rejected.
  std::uint64_t below(std::uint64_t n) noexcept {
    const std::uint64_t floor = -n % n;
    for (;;) {
      const std::uint64_t x = next();
      if (x >= floor) return x % n;
    }
  }

 private:
  std::uint64_t state_;
};

// Derives an independent child seed from a parent seed and a label.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view label) noexcept {
  Rng r(fnv1a64(label) ^ seed);
  return r.next();
}

}  // namespace mufnet
