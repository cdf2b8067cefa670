#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "hcrm/errors.hpp"
#include "hcrm/levy.hpp"

using namespace hcrm;

namespace {

double rel(double a, double b) { return std::fabs(a - b) / std::max(std::fabs(b), 1e-300); }

}  // namespace

TEST_SUITE("levy") {

TEST_CASE("closed forms at known points") {
  CHECK(psi({0.0, 1.0}, 1.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(psi({0.25, 1.0}, 0.0) == 0.0);
  CHECK(psi({0.0, 2.0}, 0.0) == 0.0);
  CHECK(tau({0.0, 1.0}, 1, 0.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(upper_incomplete_gamma(0.5, 0.0) == doctest::Approx(std::sqrt(M_PI)).epsilon(1e-14));
  // stable case: psi(u) = u^sigma / sigma
  CHECK(psi({0.5, 0.0}, 4.0) == doctest::Approx(4.0).epsilon(1e-14));
}

TEST_CASE("closed forms match quadrature across the parameter grid") {
  for (double sigma : {0.0, 0.25, 0.5, 0.9})
    for (double beta : {0.1, 1.0, 10.0})
      for (double u : {0.003, 0.4, 3.0, 70.0}) {
        CAPTURE(sigma);
        CAPTURE(beta);
        CAPTURE(u);
        const GGMeasure gg{sigma, beta};
        CHECK(rel(psi(gg, u), psi_quadrature(gg, u)) < 1e-8);
        for (int m = 1; m <= 3; ++m) CHECK(rel(tau(gg, m, u), tau_quadrature(gg, m, u)) < 1e-8);
        const double K = 1.7;
        CHECK(rel(psi_tilted(gg, K, u), psi_quadrature(gg, u, K)) < 1e-8);
        CHECK(rel(tau_tilted(gg, K, 2, u), tau_quadrature(gg, 2, u, K)) < 1e-8);
      }
}

TEST_CASE("tilted forms reduce at zero tilt and zero argument") {
  const GGMeasure gg{0.3, 0.8};
  CHECK(psi_tilted(gg, 0.0, 2.5) == doctest::Approx(psi(gg, 2.5)).epsilon(1e-15));
  CHECK(psi_tilted(gg, 1.5, 0.0) == 0.0);
  CHECK(tau_tilted(gg, 0.0, 2, 1.1) == doctest::Approx(tau(gg, 2, 1.1)).epsilon(1e-15));
  CHECK(tau_tilted(gg, 1.1, 3, 0.0) == doctest::Approx(tau(gg, 3, 1.1)).epsilon(1e-15));
  CHECK(psi_tilted(gg, 1.5, 2.0) == doctest::Approx(psi(gg, 3.5) - psi(gg, 1.5)).epsilon(1e-13));
  CHECK(log_tau_ratio(gg, 2, 1.5, 0.7) ==
        doctest::Approx(log_tau(gg, 2, 2.2) - log_tau(gg, 2, 1.5)).epsilon(1e-13));
}

TEST_CASE("cumulant ratio identity") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int k = 0; k < 100; ++k) {
    const GGMeasure gg{0.99 * U(rng), 0.01 + 5 * U(rng)};
    const int m = 1 + static_cast<int>(20 * U(rng));
    const double u = 10 * U(rng);
    CHECK(tau(gg, m + 1, u) / tau(gg, m, u) == doctest::Approx((m - gg.sigma) / (gg.beta + u)).epsilon(1e-12));
  }
}

TEST_CASE("log cumulants stay finite for large orders") {
  const double v = log_tau({0.25, 1.0}, 400, 3.0);
  CHECK(std::isfinite(v));
  CHECK(v > 0.0);
}

TEST_CASE("cumulants are signed derivatives of the Laplace exponent") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (double sigma : {0.0, 0.25, 0.6})
    for (int k = 0; k < 50; ++k) {
      const GGMeasure gg{sigma, 0.5 + U(rng)};
      const double u = 0.05 + 5 * U(rng);
      const double h = 1e-3 * (1.0 + u);
      const double d1 = (psi(gg, u + h) - psi(gg, u - h)) / (2 * h);
      const double d2 = (psi(gg, u + h) - 2 * psi(gg, u) + psi(gg, u - h)) / (h * h);
      const double d3 = (psi(gg, u + 2 * h) - 2 * psi(gg, u + h) + 2 * psi(gg, u - h) - psi(gg, u - 2 * h)) /
                        (2 * h * h * h);
      CHECK(rel(d1, tau(gg, 1, u)) < 1e-5);
      CHECK(rel(-d2, tau(gg, 2, u)) < 1e-5);
      CHECK(rel(d3, tau(gg, 3, u)) < 1e-4);
      // tau(m) = -d/du tau(m - 1)
      const double dt = (tau(gg, 2, u + h) - tau(gg, 2, u - h)) / (2 * h);
      CHECK(rel(-dt, tau(gg, 3, u)) < 1e-5);
    }
}

TEST_CASE("shape properties on random grids") {
  const GGMeasure gg{0.4, 0.7};
  double prev = psi(gg, 0.0), prev_slope = std::numeric_limits<double>::infinity();
  for (double u = 0.37; u < 50.0; u += 0.37) {
    const double p = psi(gg, u);
    CHECK(p > prev);
    const double slope = (p - prev) / 0.37;
    CHECK(slope < prev_slope);
    prev_slope = slope;
    prev = p;
    CHECK(tau(gg, 2, u) < tau(gg, 2, u - 0.05));
  }
}

TEST_CASE("incomplete gamma against quadrature and the recurrence") {
  CHECK(rel(upper_incomplete_gamma(-0.25, 1.0), upper_incomplete_gamma_quadrature(-0.25, 1.0)) < 1e-10);
  for (double a : {-0.9, -0.5, -0.1, 0.0, 0.3, 1.0})
    for (double x : {1e-4, 0.2, 0.9, 1.0, 2.5, 12.0, 60.0}) {
      CAPTURE(a);
      CAPTURE(x);
      CHECK(rel(upper_incomplete_gamma(a, x), upper_incomplete_gamma_quadrature(a, x)) < 1e-10);
      CHECK(rel(log_upper_incomplete_gamma(a, x), std::log(upper_incomplete_gamma(a, x))) < 1e-12);
    }
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int k = 0; k < 1000; ++k) {
    const double a = -0.999 + 0.998 * U(rng);
    const double x = std::exp(-6.0 + 10.0 * U(rng));
    const double lhs = upper_incomplete_gamma(a + 1.0, x);
    const double rhs = a * upper_incomplete_gamma(a, x) + std::pow(x, a) * std::exp(-x);
    CHECK(rel(rhs, lhs) < 1e-12);
  }
}

TEST_CASE("domain errors") {
  CHECK_THROWS_AS(upper_incomplete_gamma(-1.0, 1.0), NumericError);
  CHECK_THROWS_AS(upper_incomplete_gamma(-0.5, 0.0), NumericError);
  CHECK_THROWS_AS(upper_incomplete_gamma(1.5, 1.0), NumericError);
  CHECK_THROWS_AS(check_measure({0.0, 0.0}, "bottom"), ConfigError);
  CHECK_THROWS_AS(check_measure({1.0, 1.0}, "bottom"), ConfigError);
  CHECK_THROWS_AS(check_measure({0.2, -1.0}, "bottom"), ConfigError);
  CHECK_NOTHROW(check_measure({0.2, 0.0}, "bottom"));
}

}  // TEST_SUITE
