#pragma once

#include <vector>

#include "hcrm/kernels.hpp"
#include "hcrm/model.hpp"
#include "hcrm/partition.hpp"
#include "hcrm/sampler.hpp"

namespace hcrm {

struct Atom {
  double location = 0.0;
  double mass = 0.0;
};

/** Finite list of weighted atoms approximating one random measure draw. */
struct AtomicMeasure {
  std::vector<Atom> atoms;
  double total_mass = 0.0;
  // Expected mass of the jumps dropped by truncation (an upper bound under the untilted intensity).
  double discarded_mass_bound = 0.0;

  void add(double location, double mass) {
    atoms.push_back({location, mass});
    total_mass += mass;
  }
};

struct TruncationPolicy {
  double epsilon = 1e-4;
  std::size_t max_atoms = 1000000;
};

/** One posterior draw: the root measure (empty in independent mode) and one measure per cause. */
struct PosteriorDraw {
  AtomicMeasure root;
  std::vector<AtomicMeasure> causes;
};

/** Survival, incidence, subdistribution and prediction curves implied by one draw. */
struct FunctionalDraw {
  std::vector<double> survival;
  std::vector<std::vector<double>> incidence;
  std::vector<std::vector<double>> subdistribution;
  std::vector<std::vector<double>> prediction;
};

/**
 * Jump size v at unit-rate Poisson arrival time `poisson_time` for a generalized
 * gamma intensity with total location mass `mass`, tilted to rate `rate`: solves
 * mass * rate^sigma * Gamma(-sigma, rate v) / Gamma(1 - sigma) = poisson_time.
 */
double inverse_levy_jump(const GGMeasure& gg, double mass, double rate, double poisson_time);

// Poisson time at which the untilted jump (rate = beta) equals epsilon; sampling stops past it.
double truncation_threshold(const GGMeasure& gg, double mass, double epsilon);

// Masses of the root measure at the existing cluster locations, in cluster order.
std::vector<double> sample_fixed_atoms_root(const LatentState& state, const KernelAggregate& agg,
                                            const HCRMParams& params, Rng& rng);

AtomicMeasure sample_root_measure(const LatentState& state, const KernelAggregate& agg, const HCRMParams& params,
                                  const TruncationPolicy& policy, Rng& rng);

AtomicMeasure sample_bottom_measure(int cause, const AtomicMeasure& root, const LatentState& state,
                                    const KernelAggregate& agg, const HCRMParams& params,
                                    const TruncationPolicy& policy, Rng& rng);

// Independent mode: the cause-specific measure with base mass theta dx on the window.
AtomicMeasure sample_independent_measure(int cause, const LatentState& state, const KernelAggregate& agg,
                                         const HCRMParams& params, const TruncationPolicy& policy, Rng& rng);

PosteriorDraw draw_posterior(const LatentState& state, const KernelAggregate& agg, const HCRMParams& params,
                             const TruncationPolicy& policy, Rng& rng);

// `times` must be sorted ascending; `cox_profile` multiplies every hazard (1 for a baseline subject).
FunctionalDraw functional_draw(const std::vector<AtomicMeasure>& causes, const KernelSpec& kernel,
                               const std::vector<double>& times, double cox_profile = 1.0);

}  // namespace hcrm
