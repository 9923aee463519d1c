#include "basiscluster/specialfn.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace basiscluster {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * ln(2*pi)

// Lanczos approximation, g = 7, 9 coefficients.
constexpr double kLanczos[9] = {
    0.99999999999980993,      676.5203681218851,     -1259.1392167224028,
    771.32342877765313,       -176.61502916214059,   12.507343278686905,
    -0.13857109526572012,     9.9843695780195716e-6, 1.5056327351493116e-7};

double log_gamma_lanczos(double x) {
  // valid for x >= 0.5
  const double xm1 = x - 1.0;
  double a = kLanczos[0];
  for (int i = 1; i < 9; ++i) a += kLanczos[i] / (xm1 + i);
  const double t = xm1 + 7.5;
  return kHalfLog2Pi + (xm1 + 0.5) * std::log(t) - t + std::log(a);
}

}  // namespace

double log_gamma(double x) {
  if (!(x > 0.0)) throw std::domain_error("log_gamma: requires x > 0, got " + std::to_string(x));
  if (x < 0.5) {
    // reflection: ln Gamma(x) = ln(pi / sin(pi x)) - ln Gamma(1 - x)
    return std::log(M_PI / std::sin(M_PI * x)) - log_gamma_lanczos(1.0 - x);
  }
  return log_gamma_lanczos(x);
}

double digamma(double x) {
  if (!(x > 0.0)) throw std::domain_error("digamma: requires x > 0, got " + std::to_string(x));
  double acc = 0.0;
  while (x < 6.0) {
    acc -= 1.0 / x;
    x += 1.0;
  }
  const double f = 1.0 / (x * x);
  const double series =
      f * (1.0 / 12.0 -
           f * (1.0 / 120.0 - f * (1.0 / 252.0 - f * (1.0 / 240.0 - f * (1.0 / 132.0)))));
  return acc + std::log(x) - 0.5 / x - series;
}

double trigamma(double x) {
  if (!(x > 0.0)) throw std::domain_error("trigamma: requires x > 0, got " + std::to_string(x));
  double acc = 0.0;
  while (x < 6.0) {
    acc += 1.0 / (x * x);
    x += 1.0;
  }
  const double f = 1.0 / (x * x);
  return acc +
         (1.0 + 0.5 / x +
          f * (1.0 / 6.0 - f * (1.0 / 30.0 - f * (1.0 / 42.0 - f / 30.0)))) /
             x;
}

double log_multivariate_beta(std::span<const double> alpha) {
  if (alpha.empty()) throw std::domain_error("log_multivariate_beta: empty concentration vector");
  double sum = 0.0, acc = 0.0;
  for (double a : alpha) {
    if (!(a > 0.0)) throw std::domain_error("log_multivariate_beta: entries must be > 0");
    sum += a;
    acc += log_gamma(a);
  }
  return acc - log_gamma(sum);
}

double gaussian_logpdf(double y, double mean, double variance) {
  if (!(variance > 0.0)) throw std::domain_error("gaussian_logpdf: variance must be > 0");
  const double r = y - mean;
  return -kHalfLog2Pi - 0.5 * std::log(variance) - r * r / (2.0 * variance);
}

double gamma_logpdf(double x, double shape, double rate) {
  if (!(x > 0.0)) throw std::domain_error("gamma_logpdf: requires x > 0");
  if (!(shape > 0.0) || !(rate > 0.0))
    throw std::domain_error("gamma_logpdf: shape and rate must be > 0");
  return shape * std::log(rate) + (shape - 1.0) * std::log(x) - rate * x - log_gamma(shape);
}

double gaussian_kl_std(double mu, double log_var) {
  return 0.5 * (mu * mu + std::exp(log_var) - 1.0 - log_var);
}

double gaussian_kl_std(std::span<const double> mu, std::span<const double> log_var) {
  if (mu.size() != log_var.size())
    throw std::invalid_argument("gaussian_kl_std: mu/log_var length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) acc += gaussian_kl_std(mu[i], log_var[i]);
  return acc;
}

double dirichlet_kl(std::span<const double> psi, std::span<const double> alpha) {
  if (psi.size() != alpha.size() || psi.empty())
    throw std::domain_error("dirichlet_kl: size mismatch or empty");
  double psi_sum = 0.0, alpha_sum = 0.0;
  for (std::size_t k = 0; k < psi.size(); ++k) {
    if (!(psi[k] > 0.0) || !(alpha[k] > 0.0))
      throw std::domain_error("dirichlet_kl: entries must be > 0");
    psi_sum += psi[k];
    alpha_sum += alpha[k];
  }
  double kl = log_gamma(psi_sum) - log_gamma(alpha_sum);
  const double dg_sum = digamma(psi_sum);
  for (std::size_t k = 0; k < psi.size(); ++k) {
    kl += log_gamma(alpha[k]) - log_gamma(psi[k]);
    kl += (psi[k] - alpha[k]) * (digamma(psi[k]) - dg_sum);
  }
  return kl;
}

double categorical_entropy(std::span<const double> phi_row) {
  double sum = 0.0, h = 0.0;
  for (double p : phi_row) {
    if (p < -1e-12) throw std::domain_error("categorical_entropy: negative probability");
    sum += p;
    if (p >= 1e-12) h -= p * std::log(p);
  }
  if (std::abs(sum - 1.0) > 1e-8)
    throw std::domain_error("categorical_entropy: probabilities sum to " + std::to_string(sum));
  return h;
}

namespace {
void check_count(double y) {
  if (y < 0.0 || std::abs(y - std::nearbyint(y)) > 1e-9)
    throw std::domain_error("nb/zinb log-mass: y must be a nonnegative integer");
}
}  // namespace

double nb_logpmf(double y, double mu, double inv_dispersion) {
  check_count(y);
  if (!(mu > 0.0) || !(inv_dispersion > 0.0))
    throw std::domain_error("nb_logpmf: mu and inv_dispersion must be > 0");
  const double phi = inv_dispersion;
  const double log_ratio = std::log(phi + mu);
  return log_gamma(y + phi) - log_gamma(y + 1.0) - log_gamma(phi) +
         phi * (std::log(phi) - log_ratio) + y * (std::log(mu) - log_ratio);
}

void ZinbParams::validate() const {
  if (!(mu > 0.0)) throw std::domain_error("ZinbParams: mu must be > 0");
  if (!(inv_dispersion > 0.0)) throw std::domain_error("ZinbParams: inv_dispersion must be > 0");
  if (!(dropout_prob >= 0.0 && dropout_prob <= 1.0))
    throw std::domain_error("ZinbParams: dropout_prob must be in [0, 1]");
}

double zinb_logpmf(double y, const ZinbParams& params) {
  check_count(y);
  params.validate();
  const double pi = params.dropout_prob;
  if (y == 0.0) {
    if (pi == 1.0) return 0.0;
    const double nb0 = nb_logpmf(0.0, params.mu, params.inv_dispersion);
    if (pi == 0.0) return nb0;
    return log_add_exp(std::log(pi), std::log1p(-pi) + nb0);
  }
  const double nb = nb_logpmf(y, params.mu, params.inv_dispersion);
  if (pi == 0.0) return nb;
  if (pi == 1.0) return -INFINITY;
  return std::log1p(-pi) + nb;
}

}  // namespace basiscluster
