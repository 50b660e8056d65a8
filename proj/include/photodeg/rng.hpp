#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace photodeg {

// splitmix64 finalizer; used to derive independent stream keys.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Counter-based generator: the n-th output of stream (seed, key) is a pure
// function of (seed, key, n), so results never depend on how work is
// scheduled across threads. Normals are produced with Box-Muller from our
// own uniforms to stay bit-identical across standard libraries.
class StreamRng {
 public:
  StreamRng(std::uint64_t seed, std::uint64_t key)
      : base_(mix64(mix64(seed) ^ mix64(key + 0x632be59bd9b4e019ULL))) {}

  std::uint64_t next_u64() { return mix64(base_ ^ mix64(counter_++)); }

  // Uniform on the open interval (0, 1).
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(t);
    has_spare_ = true;
    return r * std::cos(t);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

 private:
  std::uint64_t base_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Stable 64-bit key for a string identifier (FNV-1a).
inline std::uint64_t string_key(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace photodeg
