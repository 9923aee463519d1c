#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "basiscluster/rng.hpp"
#include "basiscluster/specialfn.hpp"
#include "quadrature.hpp"

using namespace basiscluster;

namespace {
constexpr double kEulerGamma = 0.57721566490153286;
}

TEST_CASE("log_gamma known values") {
  CHECK(log_gamma(1.0) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(log_gamma(0.5) == doctest::Approx(0.5 * std::log(M_PI)).epsilon(1e-12));
  CHECK(log_gamma(6.0) == doctest::Approx(std::log(120.0)).epsilon(1e-12));
  CHECK_THROWS_AS(log_gamma(0.0), std::domain_error);
  CHECK_THROWS_AS(log_gamma(-1.5), std::domain_error);
}

TEST_CASE("log_gamma recurrence accuracy over the working range") {
  // ln Gamma(x+1) = ln Gamma(x) + ln x
  for (double x : {1e-3, 0.02, 0.3, 1.7, 12.0, 345.6, 1e5, 9.9e5}) {
    const double lhs = log_gamma(x + 1.0);
    const double rhs = log_gamma(x) + std::log(x);
    CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max(1.0, std::abs(rhs)));
  }
}

TEST_CASE("digamma known values and recurrence") {
  CHECK(digamma(1.0) == doctest::Approx(-kEulerGamma).epsilon(1e-10));
  CHECK(digamma(0.5) == doctest::Approx(-kEulerGamma - 2.0 * std::log(2.0)).epsilon(1e-10));
  SeededRng rng(1);
  for (int i = 0; i < 50; ++i) {
    const double x = 0.05 + 20.0 * rng.uniform01();
    CHECK(digamma(x + 1.0) == doctest::Approx(digamma(x) + 1.0 / x).epsilon(1e-9));
  }
  CHECK_THROWS_AS(digamma(-0.1), std::domain_error);
}

TEST_CASE("trigamma recurrence") {
  SeededRng rng(2);
  for (int i = 0; i < 50; ++i) {
    const double x = 0.05 + 10.0 * rng.uniform01();
    CHECK(trigamma(x + 1.0) ==
          doctest::Approx(trigamma(x) - 1.0 / (x * x)).epsilon(1e-9));
  }
}

TEST_CASE("log_multivariate_beta values") {
  std::vector<double> a11 = {1.0, 1.0};
  CHECK(log_multivariate_beta(a11) == doctest::Approx(0.0).epsilon(1e-14));
  std::vector<double> a111 = {1.0, 1.0, 1.0};
  CHECK(log_multivariate_beta(a111) == doctest::Approx(std::log(0.5)).epsilon(1e-12));
  std::vector<double> sparse(20, 0.1);
  double oracle = 0.0;
  for (double v : sparse) oracle += log_gamma(v);
  oracle -= log_gamma(2.0);
  CHECK(log_multivariate_beta(sparse) == doctest::Approx(oracle).epsilon(1e-13));
  std::vector<double> bad = {1.0, 0.0};
  CHECK_THROWS_AS(log_multivariate_beta(bad), std::domain_error);
}

TEST_CASE("log_multivariate_beta is permutation symmetric") {
  SeededRng rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> a(5);
    for (auto& v : a) v = 0.05 + 3.0 * rng.uniform01();
    std::vector<double> b = a;
    for (std::size_t i = b.size(); i > 1; --i) std::swap(b[i - 1], b[rng.below(i)]);
    CHECK(log_multivariate_beta(a) == doctest::Approx(log_multivariate_beta(b)).epsilon(1e-12));
  }
}

TEST_CASE("gaussian_logpdf values") {
  CHECK(gaussian_logpdf(0.0, 0.0, 1.0) == doctest::Approx(-0.9189385332046727).epsilon(1e-14));
  CHECK(gaussian_logpdf(1.0, 0.0, 1.0) == doctest::Approx(-1.4189385332046727).epsilon(1e-14));
  CHECK(gaussian_logpdf(3.0, 3.0, 0.25) ==
        doctest::Approx(-0.5 * std::log(2.0 * M_PI * 0.25)).epsilon(1e-14));
  CHECK_THROWS_AS(gaussian_logpdf(0.0, 0.0, 0.0), std::domain_error);
}

TEST_CASE("gamma_logpdf values") {
  CHECK(gamma_logpdf(1.0, 1.0, 1.0) == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK(gamma_logpdf(0.5, 1.0, 1.0) == doctest::Approx(-0.5).epsilon(1e-14));
  CHECK(gamma_logpdf(2.0, 2.0, 1.0) == doctest::Approx(std::log(2.0) - 2.0).epsilon(1e-13));
  CHECK_THROWS_AS(gamma_logpdf(0.0), std::domain_error);
}

TEST_CASE("gaussian_kl_std values and nonnegativity") {
  CHECK(gaussian_kl_std(0.0, 0.0) == 0.0);
  CHECK(gaussian_kl_std(1.0, 0.0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(gaussian_kl_std(0.0, 1.0) == doctest::Approx(0.5 * (std::exp(1.0) - 2.0)).epsilon(1e-14));
  SeededRng rng(4);
  for (int i = 0; i < 200; ++i) {
    const double mu = 3.0 * rng.normal();
    const double lv = 2.0 * rng.normal();
    const double kl = gaussian_kl_std(mu, lv);
    CHECK(kl >= 0.0);
    if (mu != 0.0 || lv != 0.0) CHECK(kl > 1e-12 * (mu * mu + lv * lv));
  }
}

TEST_CASE("dirichlet_kl zero at equality and nonnegative") {
  std::vector<double> a = {0.7, 1.3, 2.0};
  CHECK(dirichlet_kl(a, a) == doctest::Approx(0.0).epsilon(1e-13));
  SeededRng rng(5);
  for (int i = 0; i < 100; ++i) {
    std::vector<double> psi(3), alpha(3);
    for (auto& v : psi) v = 0.1 + 4.0 * rng.uniform01();
    for (auto& v : alpha) v = 0.1 + 4.0 * rng.uniform01();
    CHECK(dirichlet_kl(psi, alpha) >= -1e-12);
  }
}

TEST_CASE("dirichlet_kl matches quadrature for Beta(2,1) vs Beta(1,1)") {
  std::vector<double> psi = {2.0, 1.0}, alpha = {1.0, 1.0};
  // densities on the simplex reduce to q(t) = 2t, p(t) = 1 on (0,1)
  const double oracle =
      testsupport::integrate([](double t) { return 2.0 * t * std::log(2.0 * t); }, 1e-12, 1.0);
  CHECK(dirichlet_kl(psi, alpha) == doctest::Approx(oracle).epsilon(1e-5));
  // and the closed form ln 2 - 1/2
  CHECK(dirichlet_kl(psi, alpha) == doctest::Approx(std::log(2.0) - 0.5).epsilon(1e-12));
}

TEST_CASE("categorical_entropy conventions") {
  std::vector<double> onehot = {0.0, 1.0, 0.0};
  CHECK(categorical_entropy(onehot) == 0.0);
  std::vector<double> uniform(8, 1.0 / 8.0);
  CHECK(categorical_entropy(uniform) == doctest::Approx(std::log(8.0)).epsilon(1e-14));
  std::vector<double> mix = {0.5, 0.25, 0.25};
  CHECK(categorical_entropy(mix) == doctest::Approx(1.5 * std::log(2.0)).epsilon(1e-14));
  std::vector<double> neg = {-0.1, 1.1};
  CHECK_THROWS_AS(categorical_entropy(neg), std::domain_error);
  std::vector<double> badsum = {0.5, 0.4};
  CHECK_THROWS_AS(categorical_entropy(badsum), std::domain_error);
}

TEST_CASE("nb_logpmf zero case and geometric special case") {
  const double mu = 2.5, phi = 1.7;
  CHECK(nb_logpmf(0.0, mu, phi) ==
        doctest::Approx(phi * std::log(phi / (phi + mu))).epsilon(1e-14));
  CHECK(nb_logpmf(1.0, 1.0, 1.0) == doctest::Approx(std::log(0.25)).epsilon(1e-13));
  CHECK_THROWS_AS(nb_logpmf(-1.0, 1.0, 1.0), std::domain_error);
  CHECK_THROWS_AS(nb_logpmf(1.5, 1.0, 1.0), std::domain_error);
}

TEST_CASE("nb_logpmf normalizes for mu=3, phi=2 and for random parameters") {
  auto mass = [](double mu, double phi, int cap) {
    double total = 0.0;
    for (int y = 0; y <= cap; ++y) total += std::exp(nb_logpmf(y, mu, phi));
    return total;
  };
  CHECK(mass(3.0, 2.0, 500) == doctest::Approx(1.0).epsilon(1e-6));
  SeededRng rng(6);
  for (int rep = 0; rep < 10; ++rep) {
    const double mu = 0.2 + 8.0 * rng.uniform01();
    const double phi = 0.3 + 6.0 * rng.uniform01();
    CHECK(mass(mu, phi, 2000) == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("zinb_logpmf mixture cases") {
  CHECK(zinb_logpmf(0.0, {1.0, 1.0, 1.0}) == 0.0);  // pure point mass
  // dropout 0 reduces to the plain NB exactly
  SeededRng rng(7);
  for (int rep = 0; rep < 20; ++rep) {
    const double mu = 0.2 + 5.0 * rng.uniform01();
    const double phi = 0.2 + 5.0 * rng.uniform01();
    const double y = static_cast<double>(rng.below(10));
    CHECK(zinb_logpmf(y, {mu, phi, 0.0}) == nb_logpmf(y, mu, phi));
  }
  // NB(0 | mu=1, phi=1) = 0.5, so the mixture mass at zero is 0.75
  CHECK(zinb_logpmf(0.0, {1.0, 1.0, 0.5}) == doctest::Approx(std::log(0.75)).epsilon(1e-13));
  // dropout 1 puts all mass at zero
  CHECK(zinb_logpmf(3.0, {1.0, 1.0, 1.0}) == -INFINITY);
}

TEST_CASE("softplus and sigmoid stability") {
  CHECK(softplus(0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  CHECK(softplus(100.0) == doctest::Approx(100.0).epsilon(1e-14));
  CHECK(softplus(-100.0) > 0.0);
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(-800.0) >= 0.0);
  CHECK(sigmoid(800.0) <= 1.0);
}
