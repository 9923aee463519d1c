#include "basiscluster/rng.hpp"

#include <stdexcept>

namespace basiscluster {

double SeededRng::gamma(double shape, double scale) {
  if (shape <= 0.0 || scale <= 0.0)
    throw std::domain_error("gamma sampler requires shape > 0 and scale > 0");
  if (shape < 1.0) {
    const double u = uniform01_open_left();
    return gamma(shape + 1.0, scale) * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform01_open_left();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v * scale;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v * scale;
  }
}

std::uint64_t SeededRng::poisson(double mean) {
  if (mean < 0.0) throw std::domain_error("poisson sampler requires mean >= 0");
  if (mean == 0.0) return 0;
  if (mean > 500.0) {
    const double half = mean / 2.0;
    return poisson(half) + poisson(mean - half);
  }
  const double limit = std::exp(-mean);
  std::uint64_t k = 0;
  double prod = uniform01_open_left();
  while (prod > limit) {
    ++k;
    prod *= uniform01_open_left();
  }
  return k;
}

}  // namespace basiscluster
