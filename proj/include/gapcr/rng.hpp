#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "gapcr/errors.hpp"

namespace gapcr {

// splitmix64 finalizer; used to derive well-separated engine seeds.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Deterministic substream seed from a master seed and up to three stream ids.
// Replicate b of repetition r uses stream_seed(seed, tag, r, b).
inline std::uint64_t stream_seed(std::uint64_t master, std::uint64_t id0,
                                 std::uint64_t id1 = 0, std::uint64_t id2 = 0) {
  std::uint64_t h = mix_seed(master);
  h = mix_seed(h ^ (id0 + 0x1000000001b3ULL));
  h = mix_seed(h ^ (id1 + 0x100000001b3ULL));
  h = mix_seed(h ^ (id2 + 0x1b3ULL));
  return h;
}

// mt19937_64 engine with hand-rolled distribution transforms.  The standard
// pins the engine's output sequence, so results are bit-identical across
// platforms; std::*_distribution would not be.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(mix_seed(seed)) {}

  std::uint64_t next() { return engine_(); }

  // 53-bit uniform on [0, 1).
  double uniform01() {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  // uniform on (0, 1); rejects the single zero atom.
  double uniform_open() {
    for (;;) {
      double u = uniform01();
      if (u > 0.0) return u;
    }
  }

  double uniform(double a, double b) { return a + (b - a) * uniform01(); }

  // uniform integer in [0, n); multiply-shift map of a full 64-bit draw.
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next()) * n) >> 64);
  }

  double exponential(double rate) { return -std::log(uniform_open()) / rate; }

  double normal() {
    double u1 = uniform_open();
    double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  // Marsaglia-Tsang for shape >= 1, boosted by u^(1/shape) below 1.
  double gamma(double shape, double scale) {
    if (!(shape > 0.0) || !(scale > 0.0))
      throw ConfigError("gamma: shape and scale must be positive");
    if (shape < 1.0) {
      double g = gamma(shape + 1.0, 1.0);
      return scale * g * std::pow(uniform_open(), 1.0 / shape);
    }
    double d = shape - 1.0 / 3.0;
    double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x = normal();
      double v = 1.0 + c * x;
      if (v <= 0.0) continue;
      v = v * v * v;
      double u = uniform_open();
      if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v))
        return scale * d * v;
    }
  }

private:
  std::mt19937_64 engine_;
};

}  // namespace gapcr
