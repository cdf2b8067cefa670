#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "hcrm/model.hpp"
#include "hcrm/sampler.hpp"

namespace hcrm {

/** Weibull law with survival exp(-((t - shift) / scale)^shape) for t > shift. */
struct WeibullLaw {
  double shape = 1.0;
  double scale = 1.0;
  double shift = 0.0;

  double density(double t) const;
  double survival(double t) const;
  // Time beyond which the survival is below `tail`.
  double upper_quantile(double tail) const;
  double sample(Rng& rng) const;
};

/** Finite mixture of Weibull laws; a single component is a plain Weibull law. */
struct LatentLaw {
  std::vector<double> weights;
  std::vector<WeibullLaw> components;

  static LatentLaw weibull(double shape, double scale = 1.0) { return {{1.0}, {{shape, scale, 0.0}}}; }

  double density(double t) const;
  double survival(double t) const;
  double sample(Rng& rng) const;
};

struct CensoringLaw {
  enum class Kind { None, Exponential, Uniform };
  Kind kind = Kind::None;
  double param = 1.0;  // rate for Exponential, upper end for Uniform

  double sample(Rng& rng) const;
};

/** Independent latent failure times, one law per cause, plus optional independent censoring. */
struct LatentTimesModel {
  std::vector<LatentLaw> causes;
  CensoringLaw censoring;

  int num_causes() const { return static_cast<int>(causes.size()); }
  // Throws ConfigError on empty causes, bad weights or non-positive shapes/scales.
  void validate() const;
  double survival(double t) const;
  double incidence(int cause, double t) const;
  double hazard(int cause, double t) const;
  // Time where every component survival is below 1e-8.
  double horizon() const;
};

// Named scenarios: weibull3, weibull2, mixture3. Throws ConfigError for other names.
LatentTimesModel scenario(const std::string& name);
std::vector<std::string> scenario_names();

Dataset generate(const LatentTimesModel& model, std::size_t n, std::uint64_t seed);

struct TrueCurves {
  EstimateGrid curves;
  std::vector<std::vector<double>> hazard;  // [cause - 1][time]
  std::vector<double> cause_probability;
};

TrueCurves true_curves(const LatentTimesModel& model, const std::vector<double>& times);

nlohmann::json to_json(const TrueCurves& truth);
TrueCurves true_curves_from_json(const nlohmann::json& j);
nlohmann::json to_json(const LatentTimesModel& model);
LatentTimesModel latent_model_from_json(const nlohmann::json& j);

}  // namespace hcrm
