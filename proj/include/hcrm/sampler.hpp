#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "hcrm/kernels.hpp"
#include "hcrm/model.hpp"
#include "hcrm/partition.hpp"

namespace hcrm {

using Rng = std::mt19937_64;

// Independent generator for (seed, stream); the same pair always gives the same sequence.
Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0);

enum class VisitOrder { Forward, Reverse, Shuffled };

struct ChainConfig {
  int iterations = 25000;
  int burn_in = 5000;
  int thin = 10;  // keeps (iterations - burn_in) / thin = 2000 samples by default
  std::uint64_t seed = 1;
  double kernel_step = 0.5;    // sd of the log-scale random walk on the kernel parameter
  double eta_step = 0.5;       // sd of the random walk on each Cox coefficient
  bool adapt_steps = true;     // Robbins-Monro tuning during burn-in only
  double adapt_target = 0.44;
  double location_step = 0.25; // random-walk sd as a fraction of the location's support width
  int conditional_draws = 10;  // posterior-measure draws per retained sample (0 disables bands)
  int grid_points = 200;
  VisitOrder visit_order = VisitOrder::Forward;
  bool audit_every_sweep = false;  // throws std::logic_error on the first failed audit
  bool likelihood_masked = false;  // MH updates target the hyperprior alone (diagnostic mode)
  int checkpoint_every = 0;

  void validate() const;
};

struct AcceptanceCounter {
  long accepted = 0;
  long proposed = 0;
  double rate() const { return proposed > 0 ? static_cast<double>(accepted) / proposed : 0.0; }
  void record(bool ok) {
    ++proposed;
    accepted += ok ? 1 : 0;
  }
};

struct ChainSample {
  int iteration = 0;
  LatentState state;
  double theta = 0.0;
  KernelSpec kernel;
  std::vector<double> eta;
  double log_marginal = 0.0;
};

struct ChainDiagnostics {
  AcceptanceCounter kernel, eta, location;
  double kernel_step = 0.0;
  std::vector<double> eta_steps;
  // Per-iteration traces over the whole run.
  std::vector<int> cluster_trace;
  std::vector<double> theta_trace, kernel_trace, log_marginal_trace;
  int audits_passed = 0;
};

struct ChainResult {
  std::vector<ChainSample> samples;
  ChainDiagnostics diagnostics;
};

/** Unnormalized log-weights over the reinsertion choices of one observation. */
struct CategoricalLaw {
  std::vector<Choice> choices;
  std::vector<double> log_weights;

  std::vector<double> probabilities() const;
};

/**
 * Cached new-location law for the current aggregate and parameters: the density
 * g(x) = tau(1; K_n(x)) tau0(1; D psi(K_n(x))) (tau(1; K_n(x)) in independent mode)
 * on the quadrature panels, and per observation the integral of k(T_i; x) g(x) over x.
 */
class NewClusterLaw {
 public:
  NewClusterLaw() = default;
  NewClusterLaw(const KernelAggregate& agg, const HCRMParams& params);

  // log of theta * integral of w_i k(T_i; x) g(x) dx.
  double log_weight(std::size_t i, double theta) const { return std::log(theta) + log_integral_[i]; }
  double density(double x_exposure) const;
  // Draws a location in (0, T_i] from the density proportional to k(T_i; x) g(x).
  double sample(std::size_t i, Rng& rng) const;

 private:
  const KernelAggregate* agg_ = nullptr;
  HCRMParams params_;
  std::vector<double> node_density_;
  std::vector<double> break_density_;
  std::vector<double> log_integral_;
};

// Case weights for reinserting observation i (which must be unassigned).
CategoricalLaw full_conditional_weights(std::size_t i, const LatentState& state, const KernelAggregate& agg,
                                        const HCRMParams& params, const NewClusterLaw& law);
double sample_new_location(std::size_t i, const NewClusterLaw& law, Rng& rng);

/**
 * Marginal Gibbs sampler over the nested partition, the base-measure mass, the
 * kernel parameter and the Cox coefficients. One instance owns one chain.
 */
class GibbsSampler {
 public:
  GibbsSampler(const Dataset& data, const KernelSpec& kernel, const HCRMParams& params, const HyperPriors& priors,
               const ChainConfig& config);
  GibbsSampler(const GibbsSampler&) = delete;
  GibbsSampler& operator=(const GibbsSampler&) = delete;

  // Sequential allocation of every uncensored observation into an empty partition.
  void initialize();
  void sweep();
  void acceleration_step();
  void update_theta();
  void update_kernel_param();
  void update_eta();
  // One full iteration in the fixed order: sweep, locations, theta, kernel, coefficients.
  void iterate();

  const LatentState& state() const { return state_; }
  void set_state(LatentState state);
  const KernelAggregate& aggregate() const { return agg_; }
  const HCRMParams& params() const { return params_; }
  const NewClusterLaw& new_cluster_law() const { return law_; }
  double current_log_marginal() const;
  double cached_base_integral() const { return base_integral_; }
  Rng& rng() { return rng_; }
  const ChainDiagnostics& diagnostics() const { return diag_; }
  int iteration() const { return iteration_; }
  ChainSample snapshot() const;

  nlohmann::json checkpoint() const;
  void restore(const nlohmann::json& checkpoint);

 private:
  void refresh_caches();
  void refresh_cluster_cache(int j);
  double location_log_target(int j, double x) const;
  void reinsert(std::size_t i);
  bool metropolis(double log_ratio);

  HCRMParams params_;
  HyperPriors priors_;
  ChainConfig config_;
  KernelAggregate agg_;
  LatentState state_;
  NewClusterLaw law_;
  Rng rng_;
  double base_integral_ = 0.0;
  double kernel_log_step_ = 0.0;
  std::vector<double> eta_log_steps_;
  int iteration_ = 0;
  ChainDiagnostics diag_;

  // Per-cluster: log(beta + K), and log(beta0 + D psi(K)).
  std::vector<double> log_bottom_rate_;
  std::vector<double> log_root_rate_;
  std::vector<double> log_count_bottom_;  // log(q - sigma) indexed by q
  std::vector<double> log_count_root_;    // log(r - sigma0) indexed by r
  std::vector<std::size_t> visit_;
  CategoricalLaw scratch_;
};

/**
 * Runs a chain: initialization, then `iterations` full iterations, keeping every
 * `thin`-th post-burn-in state. `on_checkpoint` (optional) receives the JSON
 * checkpoint every `checkpoint_every` iterations; `resume` restarts from one.
 */
ChainResult run_chain(const Dataset& data, const KernelSpec& kernel, const HCRMParams& params,
                      const HyperPriors& priors, const ChainConfig& config,
                      const std::function<void(const nlohmann::json&)>& on_checkpoint = {},
                      const nlohmann::json* resume = nullptr);

// Initial-positive-sequence effective sample size of a scalar trace.
double effective_sample_size(const std::vector<double>& trace);

nlohmann::json to_json(const ChainSample& s);
ChainSample chain_sample_from_json(const nlohmann::json& j);

}  // namespace hcrm
