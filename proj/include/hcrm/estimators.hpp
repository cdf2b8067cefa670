#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "hcrm/kernels.hpp"
#include "hcrm/model.hpp"
#include "hcrm/partition.hpp"
#include "hcrm/posterior_measures.hpp"
#include "hcrm/sampler.hpp"

namespace hcrm {

/**
 * Closed-form posterior estimates given one latent state: survival, cause-specific
 * incidence and the prediction curve at any time. `cox_profile` is the hazard
 * multiplier exp(eta . z) of the subject being predicted (1 for a baseline subject).
 */
class ConditionalEstimator {
 public:
  ConditionalEstimator(const LatentState& state, const KernelAggregate& agg, const HCRMParams& params,
                       double cox_profile = 1.0);

  double survival(double t) const;
  // Incidence of every cause at t (index cause - 1).
  std::vector<double> incidence(double t) const;
  // Survival and incidences from one quadrature pass.
  double evaluate(double t, std::vector<double>& incidence) const;
  // Predictive cause probabilities at t from the one-step-ahead predictive law.
  std::vector<double> prediction(double t) const;

 private:
  struct ClusterTerms {
    double location;
    double exposure;
    double root_arg;  // D psi(exposure)
    int size;
    int tables;
    std::vector<std::vector<int>> table_sizes;
  };
  // Exposure-only quantities at a quadrature node.
  struct NodeTerms {
    double base;       // beta + K
    double base_pow;   // (beta + K)^sigma
    double root;       // beta0 + D psi(K)
    double root_pow;   // (beta0 + D psi(K))^sigma0
  };
  NodeTerms node_terms(double exposure) const;

  const KernelAggregate* agg_;
  HCRMParams params_;
  std::vector<NodeTerms> nodes_;
  double profile_;
  std::vector<ClusterTerms> clusters_;
};

double conditional_survival(const LatentState& state, const KernelAggregate& agg, const HCRMParams& params, double t);
double conditional_incidence(const LatentState& state, const KernelAggregate& agg, const HCRMParams& params, double t,
                             int cause);
std::vector<double> prediction_curve(const LatentState& state, const KernelAggregate& agg, const HCRMParams& params,
                                     double t);

// 200 (by default) uniform points on [0, 1.05 * max observed time].
std::vector<double> default_grid(const Dataset& data, int points = 200);

struct AggregateOptions {
  int conditional_draws = 0;
  TruncationPolicy truncation;
  std::uint64_t seed = 1;
  double lower_quantile = 0.025;
  double upper_quantile = 0.975;
  double cox_profile = 1.0;
};

/**
 * Monte Carlo average of the conditional estimates over chain samples. `params`
 * supplies the fixed hierarchy parameters; theta, the kernel and the Cox
 * coefficients come from each sample. Bands (when conditional_draws > 0) are
 * pointwise quantiles over posterior-measure functional draws.
 */
EstimateGrid aggregate_chain(const std::vector<ChainSample>& samples, const Dataset& data,
                             const HCRMParams& params, const std::vector<double>& times,
                             const AggregateOptions& options = {});

/** Right-continuous step function: `initial` before the first jump, values[k] from times[k] on. */
struct StepFunction {
  double initial = 1.0;
  std::vector<double> times;
  std::vector<double> values;

  double operator()(double t) const;
};

StepFunction kaplan_meier(const Dataset& data);
StepFunction aalen_johansen(const Dataset& data, int cause);

// Frequentist curves on a grid: KM survival, AJ subdistributions and their increments as incidence.
EstimateGrid baseline_grid(const Dataset& data, const std::vector<double>& times);

struct ErrorMetrics {
  std::vector<double> total_variation;  // per cause, rescaled by 1 / (2 pi)
  std::vector<double> kolmogorov;       // per cause, rescaled by 1 / pi
  double survival_kolmogorov = 0.0;
};

// `truth` holds true curves on the same grid as `est`; `pi` the true cause probabilities.
ErrorMetrics error_metrics(const EstimateGrid& est, const EstimateGrid& truth, const std::vector<double>& pi);

// Exact sup over [0, horizon] of |step(t) - truth(t)| for a continuous truth.
double step_kolmogorov_distance(const StepFunction& step, const std::function<double(double)>& truth,
                                double horizon);

// Linear-interpolation quantile (type 7) of an unsorted sample; reorders `values`.
double quantile(std::vector<double>& values, double p);

}  // namespace hcrm
