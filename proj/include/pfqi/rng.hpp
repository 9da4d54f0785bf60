#pragma once

#include <cstdint>
#include <random>

namespace pfqi::rng {

// SplitMix64 finalizer. Used for seed derivation and content hashing.
inline std::uint64_t hash64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

inline std::uint64_t combine(std::uint64_t a, std::uint64_t b) {
  return hash64(a ^ (hash64(b) + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2)));
}

// Fans a master seed out into independent streams. Every consumer of
// randomness derives its own seed as derive(master, tag, index...), so
// adding workers or reordering work never perturbs another stream.
template <class... Tags>
std::uint64_t derive(std::uint64_t seed, Tags... tags) {
  ((seed = combine(seed, static_cast<std::uint64_t>(tags))), ...);
  return seed;
}

// Stream tags for derive(). Values are arbitrary but frozen: changing them
// changes every seeded artifact.
enum Stream : std::uint64_t {
  kCollect = 1,
  kPolicy = 2,
  kEnv = 3,
  kEval = 4,
  kRegressor = 5,
  kTree = 6,
  kRun = 7,
  kVerify = 8,
};

inline std::mt19937_64 engine(std::uint64_t seed) { return std::mt19937_64(seed); }

// Uniform double in [0, 1) built directly from the top 53 bits; avoids the
// implementation-defined behavior of std::uniform_real_distribution.
inline double unit(std::mt19937_64& g) {
  return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

inline double range(std::mt19937_64& g, double lo, double hi) {
  return lo + (hi - lo) * unit(g);
}

inline int index(std::mt19937_64& g, int n) {
  int i = static_cast<int>(unit(g) * n);
  return i < n ? i : n - 1;
}

}  // namespace pfqi::rng
