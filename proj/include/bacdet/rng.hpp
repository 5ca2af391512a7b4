#pragma once

#include <cstdint>

namespace bacdet {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

/// Stable per-(stream, index) seed derivation, so parallel work items get
/// independent deterministic generators.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) {
  std::uint64_t h = splitmix64(base ^ 0x5bd1e995ull);
  h = splitmix64(h ^ a);
  return splitmix64(h ^ b);
}

}  // namespace bacdet
