#pragma once

namespace hcrm {

/**
 * Generalized gamma Levy intensity rho(ds) = s^(-1-sigma) e^(-beta s) / Gamma(1-sigma) ds.
 * sigma = 0 is the gamma process, beta = 0 the stable process.
 */
struct GGMeasure {
  double sigma = 0.25;
  double beta = 1.0;
};

// Throws ConfigError unless sigma in [0,1), beta >= 0 and beta > 0 when sigma == 0.
void check_measure(const GGMeasure& gg, const char* label);

// Laplace exponent: integral of (1 - e^(-u s)) rho(ds).
double psi(const GGMeasure& gg, double u);

// Cumulant of order m: integral of s^m e^(-u s) rho(ds), and its logarithm.
double log_tau(const GGMeasure& gg, int m, double u);
double tau(const GGMeasure& gg, int m, double u);

// Laplace exponent of the intensity tilted by e^(-K s): psi(u + K) - psi(K).
double psi_tilted(const GGMeasure& gg, double K, double u);

// Cumulant under the same tilt: tau(m; u + K).
double log_tau_tilted(const GGMeasure& gg, double K, int m, double u);
double tau_tilted(const GGMeasure& gg, double K, int m, double u);

// log tau(m; K + u) - log tau(m; K), computed without cancellation.
double log_tau_ratio(const GGMeasure& gg, int m, double K, double u);

// Upper incomplete gamma Gamma(a, x) for a in (-1, 1], x >= 0 (x > 0 when a <= 0).
double upper_incomplete_gamma(double a, double x);
double log_upper_incomplete_gamma(double a, double x);

// Quadrature evaluations of the defining integrals, for validation.
// Both accept an optional tilt K (intensity multiplied by e^(-K s)).
double psi_quadrature(const GGMeasure& gg, double u, double K = 0.0);
double tau_quadrature(const GGMeasure& gg, int m, double u, double K = 0.0);
double upper_incomplete_gamma_quadrature(double a, double x);

}  // namespace hcrm
