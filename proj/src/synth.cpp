#include "hcrm/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <limits>
#include <random>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "hcrm/errors.hpp"

namespace hcrm {

double WeibullLaw::density(double t) const {
  const double z = (t - shift) / scale;
  if (z <= 0.0) return 0.0;
  return shape / scale * std::pow(z, shape - 1.0) * std::exp(-std::pow(z, shape));
}

double WeibullLaw::survival(double t) const {
  const double z = (t - shift) / scale;
  if (z <= 0.0) return 1.0;
  return std::exp(-std::pow(z, shape));
}

double WeibullLaw::upper_quantile(double tail) const { return shift + scale * std::pow(-std::log(tail), 1.0 / shape); }

double WeibullLaw::sample(Rng& rng) const { return shift + std::weibull_distribution<double>(shape, scale)(rng); }

double LatentLaw::density(double t) const {
  double v = 0.0;
  for (std::size_t k = 0; k < weights.size(); ++k) v += weights[k] * components[k].density(t);
  return v;
}

double LatentLaw::survival(double t) const {
  double v = 0.0;
  for (std::size_t k = 0; k < weights.size(); ++k) v += weights[k] * components[k].survival(t);
  return v;
}

double LatentLaw::sample(Rng& rng) const {
  if (components.size() == 1) return components[0].sample(rng);
  const std::size_t k = std::discrete_distribution<std::size_t>(weights.begin(), weights.end())(rng);
  return components[k].sample(rng);
}

double CensoringLaw::sample(Rng& rng) const {
  switch (kind) {
    case Kind::None:
      return std::numeric_limits<double>::infinity();
    case Kind::Exponential:
      return std::exponential_distribution<double>(param)(rng);
    case Kind::Uniform:
      return std::uniform_real_distribution<double>(0.0, param)(rng);
  }
  return std::numeric_limits<double>::infinity();
}

void LatentTimesModel::validate() const {
  if (causes.empty()) throw ConfigError("latent-times model needs at least one cause");
  for (const auto& law : causes) {
    if (law.weights.empty() || law.weights.size() != law.components.size())
      throw ConfigError("mixture weights and components differ in length");
    double total = 0.0;
    for (double w : law.weights) {
      if (!(w >= 0.0)) throw ConfigError("mixture weights must be non-negative");
      total += w;
    }
    if (std::fabs(total - 1.0) > 1e-12) throw ConfigError("mixture weights must sum to 1");
    for (const auto& c : law.components)
      if (!(c.shape > 0.0) || !(c.scale > 0.0) || !(c.shift >= 0.0))
        throw ConfigError("Weibull shape and scale must be positive and the shift non-negative");
  }
  if (censoring.kind != CensoringLaw::Kind::None && !(censoring.param > 0.0))
    throw ConfigError("censoring parameter must be positive");
}

double LatentTimesModel::survival(double t) const {
  double s = 1.0;
  for (const auto& law : causes) s *= law.survival(t);
  return s;
}

double LatentTimesModel::incidence(int cause, double t) const {
  double v = causes.at(cause - 1).density(t);
  for (int c = 0; c < num_causes(); ++c)
    if (c != cause - 1) v *= causes[c].survival(t);
  return v;
}

double LatentTimesModel::hazard(int cause, double t) const {
  const double s = causes.at(cause - 1).survival(t);
  // Past the support of every component the hazard is undefined; report 0.
  return s > 0.0 ? causes[cause - 1].density(t) / s : 0.0;
}

double LatentTimesModel::horizon() const {
  double h = 0.0;
  for (const auto& law : causes)
    for (const auto& c : law.components) h = std::max(h, c.upper_quantile(1e-8));
  return h;
}

LatentTimesModel scenario(const std::string& name) {
  LatentTimesModel m;
  if (name == "weibull3") {
    m.causes = {LatentLaw::weibull(1.2), LatentLaw::weibull(1.6), LatentLaw::weibull(2.4)};
  } else if (name == "weibull2") {
    m.causes = {LatentLaw::weibull(1.2), LatentLaw::weibull(2.4)};
  } else if (name == "mixture3") {
    // Half cause-specific Weibull, half a common law that is itself an even mix of
    // Weibull(1.2) and a Weibull(3.0) shifted to start at t = 1.
    for (double shape : {1.5, 2.0, 2.5})
      m.causes.push_back({{0.5, 0.25, 0.25}, {{shape, 1.0, 0.0}, {1.2, 1.0, 0.0}, {3.0, 1.0, 1.0}}});
  } else {
    throw ConfigError("unknown scenario '" + name + "'");
  }
  return m;
}

std::vector<std::string> scenario_names() { return {"weibull3", "weibull2", "mixture3"}; }

Dataset generate(const LatentTimesModel& model, std::size_t n, std::uint64_t seed) {
  model.validate();
  if (n == 0) throw ConfigError("sample size must be positive");
  Rng rng = make_rng(seed, 0);
  Dataset data;
  data.num_causes = model.num_causes();
  data.observations.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    int cause = 0;
    for (int c = 0; c < model.num_causes(); ++c) {
      const double y = model.causes[c].sample(rng);
      if (y < best) {
        best = y;
        cause = c + 1;
      }
    }
    const double censor = model.censoring.sample(rng);
    if (censor < best) data.observations.push_back({censor, 0, {}});
    else data.observations.push_back({best, cause, {}});
  }
  data.t_max = data.max_time();
  return data;
}

namespace {

// Integral of a cause incidence over [a, b], split at the mixture kinks.
double integrate_incidence(const LatentTimesModel& model, int cause, double a, double b,
                           const std::vector<double>& kinks) {
  if (b <= a) return 0.0;
  auto f = [&](double t) { return model.incidence(cause, t); };
  double total = 0.0;
  double lo = a;
  for (double k : kinks) {
    if (k <= lo || k >= b) continue;
    total += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, lo, k, 12, 1e-11);
    lo = k;
  }
  return total + boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, lo, b, 12, 1e-11);
}

}  // namespace

TrueCurves true_curves(const LatentTimesModel& model, const std::vector<double>& times) {
  model.validate();
  if (!std::is_sorted(times.begin(), times.end()) || (!times.empty() && times.front() < 0.0))
    throw ConfigError("truth grid must be sorted and non-negative");
  const int nc = model.num_causes();
  const std::size_t nt = times.size();
  std::vector<double> kinks;
  for (const auto& law : model.causes)
    for (const auto& c : law.components)
      if (c.shift > 0.0) kinks.push_back(c.shift);
  std::sort(kinks.begin(), kinks.end());

  TrueCurves out;
  EstimateGrid& g = out.curves;
  g.times = times;
  g.survival.resize(nt);
  g.incidence.assign(nc, std::vector<double>(nt));
  g.subdistribution.assign(nc, std::vector<double>(nt));
  g.prediction.assign(nc, std::vector<double>(nt));
  out.hazard.assign(nc, std::vector<double>(nt));
  for (std::size_t i = 0; i < nt; ++i) g.survival[i] = model.survival(times[i]);
  for (int c = 1; c <= nc; ++c) {
    double cum = 0.0, prev = 0.0;
    for (std::size_t i = 0; i < nt; ++i) {
      g.incidence[c - 1][i] = model.incidence(c, times[i]);
      out.hazard[c - 1][i] = model.hazard(c, times[i]);
      cum += integrate_incidence(model, c, prev, times[i], kinks);
      prev = times[i];
      g.subdistribution[c - 1][i] = cum;
    }
    out.cause_probability.push_back(integrate_incidence(model, c, 0.0, model.horizon(), kinks));
  }
  for (std::size_t i = 0; i < nt; ++i) {
    double total = 0.0;
    for (int c = 0; c < nc; ++c) total += g.incidence[c][i];
    for (int c = 0; c < nc; ++c) g.prediction[c][i] = total > 0.0 ? g.incidence[c][i] / total : 1.0 / nc;
  }
  return out;
}

nlohmann::json to_json(const TrueCurves& truth) {
  nlohmann::json j = to_json(truth.curves);
  j["hazard"] = truth.hazard;
  j["cause_probability"] = truth.cause_probability;
  return j;
}

TrueCurves true_curves_from_json(const nlohmann::json& j) {
  TrueCurves t;
  t.curves = estimate_grid_from_json(j);
  t.hazard = j.at("hazard").get<std::vector<std::vector<double>>>();
  t.cause_probability = j.at("cause_probability").get<std::vector<double>>();
  return t;
}

nlohmann::json to_json(const LatentTimesModel& model) {
  nlohmann::json causes = nlohmann::json::array();
  for (const auto& law : model.causes) {
    nlohmann::json comps = nlohmann::json::array();
    for (const auto& c : law.components) comps.push_back({{"shape", c.shape}, {"scale", c.scale}, {"shift", c.shift}});
    causes.push_back({{"weights", law.weights}, {"components", comps}});
  }
  static const char* kinds[] = {"none", "exponential", "uniform"};
  return {{"causes", causes},
          {"censoring", {{"kind", kinds[static_cast<int>(model.censoring.kind)]}, {"param", model.censoring.param}}}};
}

LatentTimesModel latent_model_from_json(const nlohmann::json& j) {
  LatentTimesModel m;
  try {
    for (const auto& cj : j.at("causes")) {
      LatentLaw law;
      law.weights = cj.at("weights").get<std::vector<double>>();
      for (const auto& c : cj.at("components"))
        law.components.push_back({c.at("shape").get<double>(), c.value("scale", 1.0), c.value("shift", 0.0)});
      m.causes.push_back(std::move(law));
    }
    if (j.contains("censoring")) {
      const auto& cj = j.at("censoring");
      const std::string kind = cj.value("kind", "none");
      if (kind == "none") m.censoring.kind = CensoringLaw::Kind::None;
      else if (kind == "exponential") m.censoring.kind = CensoringLaw::Kind::Exponential;
      else if (kind == "uniform") m.censoring.kind = CensoringLaw::Kind::Uniform;
      else throw ConfigError("unknown censoring kind '" + kind + "'");
      m.censoring.param = cj.value("param", 1.0);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad latent-times model: ") + e.what());
  }
  m.validate();
  return m;
}

}  // namespace hcrm
