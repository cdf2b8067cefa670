#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "hcrm/estimators.hpp"
#include "hcrm/model.hpp"
#include "hcrm/posterior_measures.hpp"
#include "hcrm/sampler.hpp"
#include "hcrm/synth.hpp"

namespace hcrm {

/** Simulate -> fit -> estimate -> score loop over replicate datasets of one scenario. */
struct StudySettings {
  LatentTimesModel model;
  std::size_t n = 300;
  std::uint64_t seed = 1;  // replicate r uses seed + r for both data and chain
  int replicates = 20;
  KernelSpec kernel = KernelSpec::dykstra_laud(1.0);
  HCRMParams params;
  HyperPriors priors;
  ChainConfig chain;
  TruncationPolicy truncation;
  int threads = 1;
};

struct ReplicateOutcome {
  std::uint64_t seed = 0;
  ErrorMetrics posterior;
  ErrorMetrics baseline;
  // Exact sup distance of the Kaplan-Meier step function over the grid span.
  double km_survival_kolmogorov = 0.0;
  // Fraction of grid points whose true survival lies inside the pointwise band (NaN without bands).
  double band_coverage = 0.0;
  double mean_clusters = 0.0;
  double location_acceptance = 0.0;
  double kernel_acceptance = 0.0;
};

ReplicateOutcome run_replicate(const StudySettings& settings, int replicate);

// Replicates run on `threads` workers; the result order and values do not depend on the worker count.
std::vector<ReplicateOutcome> run_study(const StudySettings& settings);

nlohmann::json to_json(const ReplicateOutcome& r);
// Mean and standard error of every scalar metric across replicates.
nlohmann::json summarize(const std::vector<ReplicateOutcome>& outcomes);

}  // namespace hcrm
