#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace relaysim {

using Rng = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Labeled sub-seed derivation: each subsystem ("channel", "l2sm", ...) draws
// from its own stream so that changes in one never shift another's draws.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view label,
                                    std::uint64_t a = 0, std::uint64_t b = 0) {
  std::uint64_t h = splitmix64(master ^ fnv1a(label));
  h = splitmix64(h ^ splitmix64(a + 0x632be59bd9b4e019ULL));
  h = splitmix64(h ^ splitmix64(b + 0x8cb92ba72f3d8dd7ULL));
  return h;
}

inline Rng make_stream(std::uint64_t master, std::string_view label, std::uint64_t a = 0,
                       std::uint64_t b = 0) {
  return Rng(derive_seed(master, label, a, b));
}

inline double uniform01(Rng& rng) {
  // 53 random bits, independent of the standard library's distribution internals.
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace relaysim

namespace relaysim {

/// Box-Muller on top of uniform01, so draws are identical across standard libraries.
inline double standard_normal(Rng& rng) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

inline double exponential(Rng& rng, double mean) {
  double u = uniform01(rng);
  while (u <= 0.0) u = uniform01(rng);
  return -mean * std::log(u);
}

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

}  // namespace relaysim
