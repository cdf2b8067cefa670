#pragma once

#include <random>
#include <vector>

#include "hcrm/kernels.hpp"
#include "hcrm/model.hpp"
#include "hcrm/partition.hpp"

namespace oracle {

// Joint density of the observations from mixed derivatives of the Laplace functional,
// with every Levy integral and every location integral done by adaptive quadrature.
// Supports 1 to 3 uncensored observations (any number of censored ones).
double direct_marginal_density(const hcrm::Dataset& data, const hcrm::KernelSpec& kernel,
                               const hcrm::HCRMParams& params, const std::vector<double>& eta = {});

// Every nested partition of the uncensored observations compatible with the model mode.
std::vector<hcrm::LatentState> enumerate_partitions(const hcrm::Dataset& data, bool independent_mode);

// Sum over enumerate_partitions of exp(log_marginal) integrated over all cluster locations
// by nested adaptive quadrature.
double partition_sum_marginal(const hcrm::Dataset& data, const hcrm::KernelSpec& kernel,
                              const hcrm::HCRMParams& params, const std::vector<double>& eta = {});

// Kinks of location integrands: observed times, plus T - bandwidth for the rectangular kernel.
std::vector<double> location_breaks(const hcrm::Dataset& data, const hcrm::KernelSpec& kernel);

// Random dataset of `n` observations (about a fifth censored) on `causes` causes.
hcrm::Dataset random_small_data(std::size_t n, int causes, std::mt19937_64& rng);

// Random complete nested partition with every location inside its members' kernel support.
hcrm::LatentState random_small_state(const hcrm::Dataset& data, const hcrm::KernelSpec& kernel,
                                     bool independent_mode, std::mt19937_64& rng);

}  // namespace oracle
