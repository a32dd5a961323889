#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace chordroll {

/// 53-bit uniform draw in [0,1). Bypasses std::uniform_real_distribution so
/// sequences are reproducible independent of the standard library.
inline double uniform_double(std::mt19937_64& rng) {
  return double(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_in(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform_double(rng);
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

/// Deterministic per-stage sub-seed: one pipeline seed fans out to
/// independent streams keyed by stage name.
inline std::uint64_t seed_for(std::uint64_t seed, std::string_view stage) {
  std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
  for (char ch : stage) {
    h ^= std::uint8_t(ch);
    h *= 0x100000001b3ull;
  }
  return splitmix64(seed ^ h);
}

}  // namespace chordroll
