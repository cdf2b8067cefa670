#include "hcrm/levy.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <limits>
#include <string>

#include "hcrm/errors.hpp"

namespace hcrm {

namespace {

constexpr double kEulerGamma = 0.57721566490153286060651209;
constexpr int kMaxTerms = 10000;

// psi of a measure whose rate has already been shifted to `base`.
double psi_at_base(double sigma, double base, double u) {
  if (u <= 0.0) return 0.0;
  if (sigma == 0.0) return std::log1p(u / base);
  if (base == 0.0) return std::pow(u, sigma) / sigma;
  return std::pow(base, sigma) * std::expm1(sigma * std::log1p(u / base)) / sigma;
}

// Lower series gamma(a, x) for a > 0.
double lower_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  double ap = a;
  for (int n = 0; n < kMaxTerms; ++n) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::fabs(term) < std::fabs(sum) * 1e-17) break;
  }
  return sum * std::exp(-x + a * std::log(x));
}

// Modified Lentz evaluation of the continued fraction; returns log Gamma(a, x).
double log_upper_fraction(double a, double x) {
  const double fpmin = std::numeric_limits<double>::min() / std::numeric_limits<double>::epsilon();
  double b = x + 1.0 - a;
  double c = 1.0 / fpmin;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxTerms; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < fpmin) d = fpmin;
    c = b + an / c;
    if (std::fabs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-16) return -x + a * std::log(x) + std::log(h);
  }
  throw NumericError("incomplete gamma continued fraction did not converge");
}

// Exponential integral E1(x) = Gamma(0, x) for 0 < x < 1.
double exponential_integral_series(double x) {
  double sum = 0.0;
  double term = 1.0;
  for (int k = 1; k < kMaxTerms; ++k) {
    term *= -x / k;
    const double add = term / k;
    sum += add;
    if (std::fabs(add) < 1e-17 * std::fabs(sum)) break;
  }
  return -kEulerGamma - std::log(x) - sum;
}

double fraction_threshold(double a) { return std::max(1.0, a + 1.0); }

}  // namespace

void check_measure(const GGMeasure& gg, const char* label) {
  const std::string name(label);
  if (!(gg.sigma >= 0.0 && gg.sigma < 1.0))
    throw ConfigError(name + ": discount parameter must lie in [0, 1)");
  if (!(gg.beta >= 0.0) || !std::isfinite(gg.beta))
    throw ConfigError(name + ": rate parameter must be non-negative and finite");
  if (gg.sigma == 0.0 && gg.beta == 0.0)
    throw ConfigError(name + ": not infinitely active (discount 0 with rate 0)");
}

double psi(const GGMeasure& gg, double u) { return psi_at_base(gg.sigma, gg.beta, u); }

double log_tau(const GGMeasure& gg, int m, double u) {
  const double base = gg.beta + u;
  if (base <= 0.0) return std::numeric_limits<double>::infinity();
  return (gg.sigma - m) * std::log(base) + std::lgamma(m - gg.sigma) - std::lgamma(1.0 - gg.sigma);
}

double tau(const GGMeasure& gg, int m, double u) { return std::exp(log_tau(gg, m, u)); }

double psi_tilted(const GGMeasure& gg, double K, double u) {
  return psi_at_base(gg.sigma, gg.beta + K, u);
}

double log_tau_tilted(const GGMeasure& gg, double K, int m, double u) { return log_tau(gg, m, u + K); }

double tau_tilted(const GGMeasure& gg, double K, int m, double u) { return tau(gg, m, u + K); }

double log_tau_ratio(const GGMeasure& gg, int m, double K, double u) {
  if (u == 0.0) return 0.0;
  return (gg.sigma - m) * std::log1p(u / (gg.beta + K));
}

double upper_incomplete_gamma(double a, double x) {
  if (!(a > -1.0 && a <= 1.0)) throw NumericError("incomplete gamma: order outside (-1, 1]");
  if (!(x >= 0.0)) throw NumericError("incomplete gamma: negative argument");
  if (x == 0.0) {
    if (a <= 0.0) throw NumericError("incomplete gamma: zero argument needs positive order");
    return std::tgamma(a);
  }
  if (x >= fraction_threshold(a)) return std::exp(log_upper_fraction(a, x));
  if (a > 0.0) return std::tgamma(a) - lower_series(a, x);
  if (a == 0.0) return exponential_integral_series(x);
  return (upper_incomplete_gamma(a + 1.0, x) - std::exp(a * std::log(x) - x)) / a;
}

double log_upper_incomplete_gamma(double a, double x) {
  if (x > 0.0 && x >= fraction_threshold(a) && a > -1.0 && a <= 1.0) return log_upper_fraction(a, x);
  return std::log(upper_incomplete_gamma(a, x));
}

namespace {

template <class F>
double integrate_half_line(F f, double split, const char* what) {
  boost::math::quadrature::tanh_sinh<double> head;
  boost::math::quadrature::exp_sinh<double> tail;
  double err_head = 0.0, err_tail = 0.0, l1_head = 0.0, l1_tail = 0.0;
  const double tol = 1e-13;
  const double a = head.integrate(f, 0.0, split, tol, &err_head, &l1_head);
  const double b = tail.integrate(f, split, std::numeric_limits<double>::infinity(), tol, &err_tail, &l1_tail);
  const double total = a + b;
  if (!std::isfinite(total) || err_head > 1e-9 * std::max(1.0, l1_head) ||
      err_tail > 1e-9 * std::max(1.0, l1_tail)) {
    throw NumericError(std::string("quadrature did not converge: ") + what);
  }
  return total;
}

}  // namespace

double psi_quadrature(const GGMeasure& gg, double u, double K) {
  if (u == 0.0) return 0.0;
  auto f = [&](double s) {
    if (s <= 0.0) return 0.0;
    return std::exp(std::log(-std::expm1(-u * s)) - (1.0 + gg.sigma) * std::log(s) - (gg.beta + K) * s -
                    std::lgamma(1.0 - gg.sigma));
  };
  return integrate_half_line(f, 1.0 / u, "psi");
}

double tau_quadrature(const GGMeasure& gg, int m, double u, double K) {
  const double rate = u + K + gg.beta;
  const double split = rate > 0.0 ? 1.0 / rate : 1.0;
  auto f = [&](double s) {
    if (s <= 0.0) return 0.0;
    return std::exp((m - 1.0 - gg.sigma) * std::log(s) - (u + gg.beta + K) * s - std::lgamma(1.0 - gg.sigma));
  };
  return integrate_half_line(f, split, "tau");
}

double upper_incomplete_gamma_quadrature(double a, double x) {
  boost::math::quadrature::exp_sinh<double> tail;
  double err = 0.0, l1 = 0.0;
  auto f = [&](double s) { return std::exp((a - 1.0) * std::log(s) - s); };
  const double v = tail.integrate(f, x, std::numeric_limits<double>::infinity(), 1e-14, &err, &l1);
  if (err > 1e-10 * l1) throw NumericError("quadrature did not converge: incomplete gamma");
  return v;
}

}  // namespace hcrm
