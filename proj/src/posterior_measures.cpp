#include "hcrm/posterior_measures.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hcrm/errors.hpp"
#include "hcrm/levy.hpp"

namespace hcrm {

namespace {

constexpr double kEulerGamma = 0.57721566490153286060651209;

double exponential(Rng& rng) { return std::exponential_distribution<double>(1.0)(rng); }

double gamma_draw(double shape, double rate, Rng& rng) {
  return std::gamma_distribution<double>(shape, 1.0 / rate)(rng);
}

// Solves log Gamma(a, z) = log_target for z > 0 (a <= 0), Newton on log z with a bisection guard.
// Roots outside [z_lo, z_hi] come back clamped to the nearer end.
double solve_log_upper_gamma(double a, double log_target, double z_lo, double z_hi) {
  double ylo = std::log(z_lo), yhi = std::log(z_hi);
  // small z: Gamma(a, z) ~ z^a / (-a), or -log z - gamma_E when a = 0
  double y = a < 0.0 ? (log_target + std::log(-a)) / a : -kEulerGamma - std::exp(log_target);
  if (!(y < 0.0)) {
    // large z: Gamma(a, z) ~ z^(a-1) e^-z
    const double z1 = std::max(1.0, -log_target);
    y = std::log(std::max(1.0, -log_target + (a - 1.0) * std::log(z1)));
  }
  y = std::clamp(y, ylo, yhi);
  for (int it = 0; it < 200; ++it) {
    const double z = std::exp(y);
    const double lg = log_upper_incomplete_gamma(a, z);
    const double hv = lg - log_target;
    if (hv > 0.0) ylo = y; else yhi = y;
    const double slope = -std::exp(a * y - z - lg);
    double next = y - hv / slope;
    if (!(next > ylo && next < yhi) || !std::isfinite(next)) next = 0.5 * (ylo + yhi);
    if (std::fabs(next - y) < 1e-10 || yhi - ylo < 1e-12) return std::exp(next);
    y = next;
  }
  throw NumericError("jump equation did not converge");
}

double root_rate(const KernelAggregate& agg, const HCRMParams& params, double K) {
  return params.beta0 + agg.num_causes() * psi(params.bottom(), K);
}

double discarded_bound(const GGMeasure& gg, double mass, double epsilon) {
  return mass * std::pow(epsilon, 1.0 - gg.sigma) / ((1.0 - gg.sigma) * std::tgamma(1.0 - gg.sigma));
}

template <class LocationDraw>
void add_random_jumps(AtomicMeasure& out, const GGMeasure& gg, double mass, const TruncationPolicy& policy,
                      const KernelAggregate& agg, LocationDraw&& draw_location, bool root_level,
                      const HCRMParams& params, Rng& rng) {
  if (!(mass > 0.0)) return;
  const double stop = truncation_threshold(gg, mass, policy.epsilon);
  double arrival = 0.0;
  while (true) {
    arrival += exponential(rng);
    if (arrival > stop) break;
    if (out.atoms.size() >= policy.max_atoms)
      throw NumericError("posterior measure exceeded the atom limit; increase the truncation level");
    const double x = draw_location(rng);
    const double K = agg.exposure(x);
    const double rate = root_level ? root_rate(agg, params, K) : params.beta + K;
    out.add(x, inverse_levy_jump(gg, mass, rate, arrival));
  }
  out.discarded_mass_bound = discarded_bound(gg, mass, policy.epsilon);
}

}  // namespace

double inverse_levy_jump(const GGMeasure& gg, double mass, double rate, double poisson_time) {
  const double sigma = gg.sigma;
  if (rate <= 0.0) {
    if (sigma == 0.0) throw NumericError("jump equation undefined at zero rate for the gamma process");
    return std::pow(poisson_time * sigma * std::tgamma(1.0 - sigma) / mass, -1.0 / sigma);
  }
  const double log_target =
      std::log(poisson_time) + std::lgamma(1.0 - sigma) - sigma * std::log(rate) - std::log(mass);
  const double z = solve_log_upper_gamma(-sigma, log_target, rate * 1e-300, rate * 1e6);
  return z / rate;
}

double truncation_threshold(const GGMeasure& gg, double mass, double epsilon) {
  if (gg.beta > 0.0)
    return mass * upper_incomplete_gamma(-gg.sigma, gg.beta * epsilon) * std::pow(gg.beta, gg.sigma) /
           std::tgamma(1.0 - gg.sigma);
  return mass * std::pow(epsilon, -gg.sigma) / (gg.sigma * std::tgamma(1.0 - gg.sigma));
}

std::vector<double> sample_fixed_atoms_root(const LatentState& state, const KernelAggregate& agg,
                                            const HCRMParams& params, Rng& rng) {
  std::vector<double> out;
  out.reserve(state.num_clusters());
  for (const auto& cl : state.clusters()) {
    const double K = agg.exposure(cl.location);
    out.push_back(gamma_draw(cl.num_tables() - params.sigma0, root_rate(agg, params, K), rng));
  }
  return out;
}

AtomicMeasure sample_root_measure(const LatentState& state, const KernelAggregate& agg, const HCRMParams& params,
                                  const TruncationPolicy& policy, Rng& rng) {
  AtomicMeasure out;
  const auto fixed = sample_fixed_atoms_root(state, agg, params, rng);
  for (int j = 0; j < state.num_clusters(); ++j) out.add(state.cluster(j).location, fixed[j]);
  const double t_max = agg.t_max();
  auto uniform_location = [t_max](Rng& r) { return std::uniform_real_distribution<double>(0.0, t_max)(r); };
  add_random_jumps(out, params.root(), params.theta * t_max, policy, agg, uniform_location, true, params, rng);
  return out;
}

AtomicMeasure sample_bottom_measure(int cause, const AtomicMeasure& root, const LatentState& state,
                                    const KernelAggregate& agg, const HCRMParams& params,
                                    const TruncationPolicy& policy, Rng& rng) {
  AtomicMeasure out;
  for (const auto& cl : state.clusters()) {
    const int n = cl.cause_size(cause);
    if (n == 0) continue;
    const double shape = n - cl.cause_tables(cause) * params.sigma;
    out.add(cl.location, gamma_draw(shape, params.beta + agg.exposure(cl.location), rng));
  }
  std::vector<double> cum(root.atoms.size());
  double total = 0.0;
  for (std::size_t k = 0; k < root.atoms.size(); ++k) cum[k] = (total += root.atoms[k].mass);
  auto root_location = [&](Rng& r) {
    const double u = std::uniform_real_distribution<double>(0.0, total)(r);
    const auto it = std::upper_bound(cum.begin(), cum.end(), u);
    return root.atoms[std::min(static_cast<std::size_t>(it - cum.begin()), cum.size() - 1)].location;
  };
  add_random_jumps(out, params.bottom(), total, policy, agg, root_location, false, params, rng);
  return out;
}

AtomicMeasure sample_independent_measure(int cause, const LatentState& state, const KernelAggregate& agg,
                                         const HCRMParams& params, const TruncationPolicy& policy, Rng& rng) {
  AtomicMeasure out;
  for (const auto& cl : state.clusters()) {
    const int n = cl.cause_size(cause);
    if (n == 0) continue;
    out.add(cl.location, gamma_draw(n - cl.cause_tables(cause) * params.sigma,
                                    params.beta + agg.exposure(cl.location), rng));
  }
  const double t_max = agg.t_max();
  auto uniform_location = [t_max](Rng& r) { return std::uniform_real_distribution<double>(0.0, t_max)(r); };
  add_random_jumps(out, params.bottom(), params.theta * t_max, policy, agg, uniform_location, false, params, rng);
  return out;
}

PosteriorDraw draw_posterior(const LatentState& state, const KernelAggregate& agg, const HCRMParams& params,
                             const TruncationPolicy& policy, Rng& rng) {
  PosteriorDraw draw;
  if (params.independent_mode) {
    for (int c = 1; c <= agg.num_causes(); ++c)
      draw.causes.push_back(sample_independent_measure(c, state, agg, params, policy, rng));
    return draw;
  }
  draw.root = sample_root_measure(state, agg, params, policy, rng);
  for (int c = 1; c <= agg.num_causes(); ++c)
    draw.causes.push_back(sample_bottom_measure(c, draw.root, state, agg, params, policy, rng));
  return draw;
}

namespace {

// Sum over atoms of mass * K_1(x; t) and mass * k(t; x) at each sorted time.
void atom_sums(const AtomicMeasure& measure, const KernelSpec& kernel, const std::vector<double>& times,
               std::vector<double>& cumulative, std::vector<double>& hazard) {
  std::vector<Atom> atoms = measure.atoms;
  std::sort(atoms.begin(), atoms.end(), [](const Atom& a, const Atom& b) { return a.location < b.location; });
  const std::size_t na = atoms.size();
  std::vector<double> loc(na), pm(na + 1, 0.0), pmx(na + 1, 0.0);
  for (std::size_t k = 0; k < na; ++k) {
    loc[k] = atoms[k].location;
    pm[k + 1] = pm[k] + atoms[k].mass;
    pmx[k + 1] = pmx[k] + atoms[k].mass * atoms[k].location;
  }
  auto upper = [&](double v) { return static_cast<std::size_t>(std::upper_bound(loc.begin(), loc.end(), v) - loc.begin()); };
  auto lower = [&](double v) { return static_cast<std::size_t>(std::lower_bound(loc.begin(), loc.end(), v) - loc.begin()); };
  const std::size_t nt = times.size();
  cumulative.assign(nt, 0.0);
  hazard.assign(nt, 0.0);
  const double g = kernel.param;
  switch (kernel.kind) {
    case KernelKind::DykstraLaud:
      for (std::size_t i = 0; i < nt; ++i) {
        const std::size_t m = upper(times[i]);
        cumulative[i] = std::max(0.0, g * (times[i] * pm[m] - pmx[m]));
        hazard[i] = g * pm[m];
      }
      break;
    case KernelKind::Rectangular: {
      const double w = kernel.bandwidth;
      for (std::size_t i = 0; i < nt; ++i) {
        const double t = times[i];
        const std::size_t i0 = lower(t - w), i1 = upper(t - w), i2 = upper(t);
        const double ramp = t * (pm[i2] - pm[i1]) - (pmx[i2] - pmx[i1]);
        cumulative[i] = std::max(0.0, g * (w * pm[i1] + ramp));
        hazard[i] = g * (pm[i2] - pm[i0]);
      }
      break;
    }
    case KernelKind::OrnsteinUhlenbeck: {
      double decayed = 0.0;  // sum of mass * exp(-kappa (t - x)) over atoms with x <= t
      double prev = times.empty() ? 0.0 : times[0];
      std::size_t next = 0;
      for (std::size_t i = 0; i < nt; ++i) {
        const double t = times[i];
        decayed *= std::exp(-g * (t - prev));
        while (next < na && loc[next] <= t) {
          decayed += atoms[next].mass * std::exp(-g * (t - loc[next]));
          ++next;
        }
        prev = t;
        cumulative[i] = std::max(0.0, std::sqrt(2.0 / g) * (pm[next] - decayed));
        hazard[i] = std::sqrt(2.0 * g) * decayed;
      }
      break;
    }
  }
}

}  // namespace

FunctionalDraw functional_draw(const std::vector<AtomicMeasure>& causes, const KernelSpec& kernel,
                               const std::vector<double>& times, double cox_profile) {
  if (!std::is_sorted(times.begin(), times.end())) throw std::invalid_argument("times must be sorted");
  const std::size_t d = causes.size(), nt = times.size();
  FunctionalDraw out;
  std::vector<std::vector<double>> cum(d), haz(d);
  for (std::size_t c = 0; c < d; ++c) atom_sums(causes[c], kernel, times, cum[c], haz[c]);
  out.survival.assign(nt, 1.0);
  for (std::size_t i = 0; i < nt; ++i) {
    double total = 0.0;
    for (std::size_t c = 0; c < d; ++c) total += cum[c][i];
    out.survival[i] = std::exp(-cox_profile * total);
  }
  out.incidence.assign(d, std::vector<double>(nt));
  out.prediction.assign(d, std::vector<double>(nt));
  for (std::size_t i = 0; i < nt; ++i) {
    double hz = 0.0;
    for (std::size_t c = 0; c < d; ++c) hz += haz[c][i];
    for (std::size_t c = 0; c < d; ++c) {
      out.incidence[c][i] = cox_profile * haz[c][i] * out.survival[i];
      out.prediction[c][i] = hz > 0.0 ? haz[c][i] / hz : 1.0 / d;
    }
  }
  out.subdistribution.resize(d);
  for (std::size_t c = 0; c < d; ++c) out.subdistribution[c] = cumulative_trapezoid(times, out.incidence[c]);
  return out;
}

}  // namespace hcrm
