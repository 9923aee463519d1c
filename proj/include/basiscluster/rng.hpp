#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>

#include "basiscluster/ndarray.hpp"

namespace basiscluster {

// Deterministic RNG. mt19937_64 output is fully specified by the standard;
// the distribution transforms below are explicit because the std::*_distribution
// classes are implementation-defined and would break cross-platform determinism.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed = 0) : engine_(seed) {}

  // Derives an independent stream for restart/worker `index`.
  static SeededRng stream(std::uint64_t seed, std::uint64_t index) {
    return SeededRng(splitmix64(seed + 0x9E3779B97F4A7C15ULL * (index + 1)));
  }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform in (0, 1].
  double uniform01_open_left() { return 1.0 - uniform01(); }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  std::size_t below(std::size_t n) {
    // Lemire-style modulo without bias is overkill here; 53-bit scaling is fine
    // at desk scale and keeps the draw count per call fixed.
    return static_cast<std::size_t>(uniform01() * static_cast<double>(n)) % n;
  }

  // Standard normal via Box-Muller (no cached second draw, so the engine state
  // is the only state that needs serializing).
  double normal() {
    const double u1 = uniform01_open_left();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  void fill_normal(NdArray& a) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = normal();
  }

  // Gamma(shape, scale) via Marsaglia-Tsang; shape < 1 boosted through u^(1/shape).
  double gamma(double shape, double scale);

  // Poisson; splits large means so the Knuth product never underflows.
  std::uint64_t poisson(double mean);

  std::string serialize() const {
    std::ostringstream os;
    os << engine_;
    return os.str();
  }

  void deserialize(const std::string& state) {
    std::istringstream is(state);
    is >> engine_;
  }

  static std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace basiscluster
