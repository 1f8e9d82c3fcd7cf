#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace xnec {

using Rng = std::mt19937_64;

// FNV-1a, stable across platforms and runs (std::hash is not).
constexpr std::uint64_t stable_hash(std::string_view text) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// Independent stream for (seed, key); used so per-clip draws do not depend on
// processing order.
inline Rng make_stream(std::uint64_t seed, std::string_view key) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stable_hash(key)),
                    static_cast<std::uint32_t>(stable_hash(key) >> 32)};
  return Rng(seq);
}

inline Rng make_rng(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  return Rng(seq);
}

// Uniform double in [0, 1) from 53 random bits; unlike
// std::uniform_real_distribution the result is specified bit-for-bit.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace xnec
