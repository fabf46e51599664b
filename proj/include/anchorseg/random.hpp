#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace anchorseg {

// 64-bit FNV-1a over the bytes of `name`.
constexpr std::uint64_t fnv1a(std::string_view name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Named, seeded uniform generator.
///
/// The engine is `std::mt19937_64` seeded with `splitmix64(seed ^ fnv1a(name))`;
/// a unit draw is `(engine() >> 11) * 2^-53`. Both pieces are fully specified by
/// the standard, so streams are identical across toolchains.
class SeededUniform {
 public:
  SeededUniform(std::uint64_t seed, std::string_view name) : engine_(splitmix64(seed ^ fnv1a(name))) {}

  // Uniform in [0, 1).
  double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform in [-bound, bound).
  double symmetric(double bound) { return (2.0 * unit() - 1.0) * bound; }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return static_cast<std::uint64_t>(unit() * static_cast<double>(n)); }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace anchorseg
