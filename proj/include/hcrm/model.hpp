#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hcrm/levy.hpp"

namespace hcrm {

/** One subject: event or censoring time, cause (0 = right-censored) and predictors. */
struct Observation {
  double time = 0.0;
  int cause = 0;
  std::vector<double> predictors;

  bool censored() const { return cause == 0; }
};

/** Observations plus the number of competing causes and the latent window [0, t_max]. */
struct Dataset {
  std::vector<Observation> observations;
  int num_causes = 1;
  double t_max = 0.0;

  std::size_t size() const { return observations.size(); }
  double max_time() const;
  std::size_t num_predictors() const;
  std::size_t num_uncensored() const;
};

enum class KernelKind { DykstraLaud, Rectangular, OrnsteinUhlenbeck };

/**
 * Mixing kernel k(t; x). `param` is the height for Dykstra-Laud and rectangular
 * kernels and the decay rate for Ornstein-Uhlenbeck; `bandwidth` is only used
 * by the rectangular kernel.
 */
struct KernelSpec {
  KernelKind kind = KernelKind::DykstraLaud;
  double param = 1.0;
  double bandwidth = 0.0;

  static KernelSpec dykstra_laud(double height) { return {KernelKind::DykstraLaud, height, 0.0}; }
  static KernelSpec rectangular(double height, double width) { return {KernelKind::Rectangular, height, width}; }
  static KernelSpec ornstein_uhlenbeck(double decay) { return {KernelKind::OrnsteinUhlenbeck, decay, 0.0}; }

  KernelSpec with_param(double value) const {
    KernelSpec k = *this;
    k.param = value;
    return k;
  }
};

std::string kernel_name(KernelKind kind);
KernelKind parse_kernel_name(const std::string& name);

/** Generalized gamma parameters of both hierarchy levels plus the base-measure mass. */
struct HCRMParams {
  double sigma = 0.25;
  double sigma0 = 0.25;
  double beta = 1.0;
  double beta0 = 1.0;
  double theta = 1.0;
  bool independent_mode = false;

  GGMeasure bottom() const { return {sigma, beta}; }
  GGMeasure root() const { return {sigma0, beta0}; }
};

struct GammaPrior {
  double shape = 1.0;
  double rate = 0.1;
};

struct HyperPriors {
  GammaPrior theta{1.0, 0.1};
  double kernel_rate = 0.1;      // exponential prior on the kernel parameter
  double eta_variance = 100.0;   // normal prior, mean zero, per coefficient
  bool fix_theta = false;
  bool fix_kernel = false;
  bool fix_eta = false;
};

struct Bands {
  std::vector<double> survival_lower, survival_upper;
  std::vector<std::vector<double>> incidence_lower, incidence_upper;
  std::vector<std::vector<double>> subdistribution_lower, subdistribution_upper;
  std::vector<std::vector<double>> prediction_lower, prediction_upper;
};

/** Curves on a time grid; per-cause arrays are indexed [cause - 1][time]. */
struct EstimateGrid {
  std::vector<double> times;
  std::vector<double> survival;
  std::vector<std::vector<double>> incidence;
  std::vector<std::vector<double>> subdistribution;
  std::vector<std::vector<double>> prediction;
  std::optional<Bands> bands;

  int num_causes() const { return static_cast<int>(incidence.size()); }
};

// Throws ConfigError when the kernel/parameter combination or the window is invalid.
void validate_config(const Dataset& data, const KernelSpec& kernel, const HCRMParams& params);

// CSV dialect: optional header, columns time,cause[,z1,...].
Dataset parse_dataset(std::istream& in, std::optional<int> num_causes = std::nullopt,
                      std::optional<double> t_max = std::nullopt);
Dataset read_dataset(const std::string& path, std::optional<int> num_causes = std::nullopt,
                     std::optional<double> t_max = std::nullopt);
void write_dataset(std::ostream& out, const Dataset& data);
void write_dataset(const std::string& path, const Dataset& data);

std::vector<double> cumulative_trapezoid(const std::vector<double>& times, const std::vector<double>& values);

nlohmann::json to_json(const EstimateGrid& grid);
EstimateGrid estimate_grid_from_json(const nlohmann::json& j);
// Throws DataError describing the first violated invariant.
void check_estimate_grid(const EstimateGrid& grid);

nlohmann::json to_json(const KernelSpec& k);
KernelSpec kernel_from_json(const nlohmann::json& j);
nlohmann::json to_json(const HCRMParams& p);
HCRMParams params_from_json(const nlohmann::json& j);

}  // namespace hcrm
