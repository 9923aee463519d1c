#pragma once

// Test-only numerical oracles, independent of the library implementation:
// adaptive Simpson quadrature and the K=2 marginalized-prior integral
// ln \int_0^1 t^(a-1) (1-t)^(b-1) dt computed with endpoint-singularity
// substitutions so a, b < 1 stays accurate.

#include <cmath>
#include <functional>

namespace testsupport {

inline double simpson(const std::function<double(double)>& f, double a, double b, double fa,
                      double fm, double fb, double eps, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double h = b - a;
  const double whole = h / 6.0 * (fa + 4.0 * fm + fb);
  const double left = h / 12.0 * (fa + 4.0 * flm + fm);
  const double right = h / 12.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) < 15.0 * eps)
    return left + right + (left + right - whole) / 15.0;
  return simpson(f, a, m, fa, flm, fm, eps * 0.5, depth - 1) +
         simpson(f, m, b, fm, frm, fb, eps * 0.5, depth - 1);
}

inline double integrate(const std::function<double(double)>& f, double a, double b,
                        double eps = 1e-12) {
  const double m = 0.5 * (a + b);
  return simpson(f, a, b, f(a), f(m), f(b), eps, 48);
}

// \int_0^1 t^(a-1) (1-t)^(b-1) dt, a, b > 0. Split at 1/2; substitute
// u = t^a on the left (du = a t^(a-1) dt) and symmetrically on the right,
// which removes both integrable endpoint singularities.
inline double beta_integral(double a, double b) {
  auto left = [&](double u) {  // u in (0, (1/2)^a]
    const double t = std::pow(u, 1.0 / a);
    return std::pow(1.0 - t, b - 1.0) / a;
  };
  auto right = [&](double u) {
    const double t = std::pow(u, 1.0 / b);
    return std::pow(1.0 - t, a - 1.0) / b;
  };
  const double ua = std::pow(0.5, a);
  const double ub = std::pow(0.5, b);
  return integrate(left, 0.0, ua) + integrate(right, 0.0, ub);
}

inline double log_beta_integral(double a, double b) { return std::log(beta_integral(a, b)); }

}  // namespace testsupport
