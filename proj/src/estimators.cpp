#include "hcrm/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hcrm/errors.hpp"
#include "hcrm/levy.hpp"

namespace hcrm {

ConditionalEstimator::ConditionalEstimator(const LatentState& state, const KernelAggregate& agg,
                                           const HCRMParams& params, double cox_profile)
    : agg_(&agg), params_(params), profile_(cox_profile) {
  const double d = agg.num_causes();
  for (const auto& cl : state.clusters()) {
    const double K = agg.exposure(cl.location);
    clusters_.push_back({cl.location, K, d * psi(params.bottom(), K), cl.size(), cl.num_tables(), cl.tables});
  }
  nodes_.reserve(agg.node_exposure().size());
  for (double K : agg.node_exposure()) nodes_.push_back(node_terms(K));
}

ConditionalEstimator::NodeTerms ConditionalEstimator::node_terms(double K) const {
  NodeTerms n;
  n.base = params_.beta + K;
  n.base_pow = std::pow(n.base, params_.sigma);
  n.root = params_.beta0 + agg_->num_causes() * psi(params_.bottom(), K);
  n.root_pow = std::pow(n.root, params_.sigma0);
  return n;
}

namespace {

// (base + u)^sigma and ((base + u)^sigma - base^sigma) / sigma, the latter read as log1p at sigma = 0.
struct TiltedPower {
  double power;
  double increment;
};

double psi_at_base_exact(double sigma, double base, double base_pow, double u) {
  if (base == 0.0) return std::pow(u, sigma) / sigma;
  return base_pow * std::expm1(sigma * std::log1p(u / base)) / sigma;
}

TiltedPower tilted_power(double sigma, double base, double base_pow, double u) {
  if (u <= 0.0) return {base_pow, 0.0};
  if (sigma == 0.0) return {1.0, std::log1p(u / base)};
  if (base == 0.0 || u < 1e-3 * base) {
    const double inc = psi_at_base_exact(sigma, base, base_pow, u);
    return {base_pow + sigma * inc, inc};
  }
  const double p = std::pow(base + u, sigma);
  return {p, (p - base_pow) / sigma};
}

}  // namespace

double ConditionalEstimator::evaluate(double t, std::vector<double>& incidence) const {
  const KernelAggregate& agg = *agg_;
  const KernelSpec& ker = agg.kernel();
  const GGMeasure bottom = params_.bottom();
  const GGMeasure root = params_.root();
  const int nc = agg.num_causes();
  const double d = nc;
  const double c = profile_;
  const bool indep = params_.independent_mode;
  incidence.assign(nc, 0.0);

  double log_s = 0.0;
  double shared = 0.0;  // terms common to every cause
  for (const auto& cl : clusters_) {
    const double u = c * kernel_primitive(ker, t, cl.location);
    const double k_t = c * eval_kernel(ker, t, cl.location);
    const double next = cl.exposure + u;
    for (const auto& sizes : cl.table_sizes)
      for (int q : sizes) log_s += log_tau_ratio(bottom, q, cl.exposure, u);
    double root_next = 0.0;
    if (!indep) {
      const double root_step = d * psi_tilted(bottom, cl.exposure, u);
      log_s += log_tau_ratio(root, cl.tables, cl.root_arg, root_step);
      root_next = root.beta + cl.root_arg + root_step;
    }
    if (k_t <= 0.0) continue;
    for (int cause = 1; cause <= nc; ++cause) {
      const auto& sizes = cl.table_sizes[cause - 1];
      if (sizes.empty()) continue;
      const double weight = std::accumulate(sizes.begin(), sizes.end(), 0.0) - sizes.size() * bottom.sigma;
      incidence[cause - 1] += k_t * weight / (bottom.beta + next);
    }
    if (!indep)
      shared += k_t * std::exp((bottom.sigma - 1.0) * std::log(bottom.beta + next)) * (cl.tables - root.sigma) /
                root_next;
  }

  const double extra = ker.kind == KernelKind::Rectangular ? t - ker.bandwidth : -1.0;
  auto integrand = [&](std::ptrdiff_t node, double x, double K) {
    const NodeTerms n = node >= 0 ? nodes_[node] : node_terms(K);
    const double u = c * kernel_primitive(ker, t, x);
    const double k_t = c * eval_kernel(ker, t, x);
    const TiltedPower b = tilted_power(bottom.sigma, n.base, n.base_pow, u);
    // (beta + K + u)^(sigma - 1)
    const double bottom_density = bottom.sigma == 0.0 ? 1.0 / (n.base + u) : b.power / (n.base + u);
    if (indep) return detail::Pair{d * b.increment, k_t > 0.0 ? k_t * bottom_density : 0.0};
    const double s = d * b.increment;
    const TiltedPower r = tilted_power(root.sigma, n.root, n.root_pow, s);
    const double root_density = root.sigma == 0.0 ? 1.0 / (n.root + s) : r.power / (n.root + s);
    return detail::Pair{r.increment, k_t > 0.0 ? k_t * bottom_density * root_density : 0.0};
  };
  const detail::Pair integral = agg.integrate_indexed(integrand, t, extra);
  log_s -= params_.theta * integral.first;
  shared += params_.theta * integral.second;
  const double survival = std::exp(log_s);
  for (double& f : incidence) f = survival * (f + shared);
  return survival;
}

double ConditionalEstimator::survival(double t) const {
  std::vector<double> f;
  return evaluate(t, f);
}

std::vector<double> ConditionalEstimator::incidence(double t) const {
  std::vector<double> f;
  evaluate(t, f);
  return f;
}

std::vector<double> ConditionalEstimator::prediction(double t) const {
  const KernelAggregate& agg = *agg_;
  const KernelSpec& ker = agg.kernel();
  const GGMeasure bottom = params_.bottom();
  const GGMeasure root = params_.root();
  const int nc = agg.num_causes();
  const double d = nc;
  const double c = profile_;
  const bool indep = params_.independent_mode;
  std::vector<double> weight(nc, 0.0);
  double shared = 0.0;
  for (const auto& cl : clusters_) {
    const double k_t = c * eval_kernel(ker, t, cl.location);
    if (k_t <= 0.0) continue;
    const double next = cl.exposure + c * kernel_primitive(ker, t, cl.location);
    for (int cause = 1; cause <= nc; ++cause)
      for (int q : cl.table_sizes[cause - 1])
        weight[cause - 1] += k_t * std::exp(log_tau(bottom, q + 1, next) - log_tau(bottom, q, next));
    if (!indep) {
      const double arg = d * psi(bottom, next);
      shared += k_t * tau(bottom, 1, next) * std::exp(log_tau(root, cl.tables + 1, arg) - log_tau(root, cl.tables, arg));
    }
  }
  const double extra = ker.kind == KernelKind::Rectangular ? t - ker.bandwidth : -1.0;
  auto integrand = [&](double x, double K) {
    const double k_t = c * eval_kernel(ker, t, x);
    if (k_t <= 0.0) return 0.0;
    const double next = K + c * kernel_primitive(ker, t, x);
    double v = k_t * tau(bottom, 1, next);
    if (!indep) v *= tau(root, 1, d * psi(bottom, next));
    return v;
  };
  shared += params_.theta * agg.integrate(integrand, t, extra);
  // No cause-specific term: the law is exactly uniform (w / (D w) need not round to 1 / D).
  if (std::all_of(weight.begin(), weight.end(), [](double w) { return w == 0.0; }))
    return std::vector<double>(nc, 1.0 / nc);
  double total = 0.0;
  for (double& w : weight) total += (w += shared);
  if (!(total > 0.0)) return std::vector<double>(nc, 1.0 / nc);
  for (double& w : weight) w /= total;
  return weight;
}

double conditional_survival(const LatentState& state, const KernelAggregate& agg, const HCRMParams& params, double t) {
  return ConditionalEstimator(state, agg, params).survival(t);
}

double conditional_incidence(const LatentState& state, const KernelAggregate& agg, const HCRMParams& params, double t,
                             int cause) {
  return ConditionalEstimator(state, agg, params).incidence(t).at(cause - 1);
}

std::vector<double> prediction_curve(const LatentState& state, const KernelAggregate& agg, const HCRMParams& params,
                                     double t) {
  return ConditionalEstimator(state, agg, params).prediction(t);
}

std::vector<double> default_grid(const Dataset& data, int points) {
  if (points < 2) throw ConfigError("grid needs at least two points");
  const double end = 1.05 * data.max_time();
  std::vector<double> g(points);
  for (int k = 0; k < points; ++k) g[k] = end * k / (points - 1);
  return g;
}

double quantile(std::vector<double>& values, double p) {
  if (values.empty()) throw std::invalid_argument("quantile of an empty sample");
  const double h = (values.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  std::nth_element(values.begin(), values.begin() + lo, values.end());
  const double a = values[lo];
  if (lo + 1 >= values.size()) return a;
  const double b = *std::min_element(values.begin() + lo + 1, values.end());
  return a + (h - lo) * (b - a);
}

EstimateGrid aggregate_chain(const std::vector<ChainSample>& samples, const Dataset& data, const HCRMParams& params,
                             const std::vector<double>& times, const AggregateOptions& options) {
  if (samples.empty()) throw DataError("cannot aggregate an empty chain");
  if (!std::is_sorted(times.begin(), times.end())) throw ConfigError("estimate grid must be sorted");
  const int nc = data.num_causes;
  const std::size_t nt = times.size();
  EstimateGrid out;
  out.times = times;
  out.survival.assign(nt, 0.0);
  out.incidence.assign(nc, std::vector<double>(nt, 0.0));
  out.prediction.assign(nc, std::vector<double>(nt, 0.0));

  const std::size_t total_draws = samples.size() * options.conditional_draws;
  // Draw storage laid out [draw][time]; single precision keeps large budgets affordable.
  std::vector<float> ds, di, dsub, dp;
  if (total_draws > 0) {
    ds.reserve(total_draws * nt);
    di.reserve(total_draws * nt * nc);
    dsub.reserve(total_draws * nt * nc);
    dp.reserve(total_draws * nt * nc);
  }

  std::vector<double> f;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const ChainSample& s = samples[k];
    KernelAggregate agg(data, s.kernel, s.eta);
    HCRMParams p = params;
    p.theta = s.theta;
    ConditionalEstimator est(s.state, agg, p, options.cox_profile);
    for (std::size_t i = 0; i < nt; ++i) {
      out.survival[i] += est.evaluate(times[i], f);
      double total = 0.0;
      for (int c = 0; c < nc; ++c) {
        out.incidence[c][i] += f[c];
        total += f[c];
      }
      for (int c = 0; c < nc; ++c) out.prediction[c][i] += total > 0.0 ? f[c] / total : 1.0 / nc;
    }
    if (options.conditional_draws > 0) {
      Rng rng = make_rng(options.seed, k);
      for (int r = 0; r < options.conditional_draws; ++r) {
        const PosteriorDraw draw = draw_posterior(s.state, agg, p, options.truncation, rng);
        const FunctionalDraw fd = functional_draw(draw.causes, s.kernel, times, options.cox_profile);
        ds.insert(ds.end(), fd.survival.begin(), fd.survival.end());
        for (int c = 0; c < nc; ++c) {
          di.insert(di.end(), fd.incidence[c].begin(), fd.incidence[c].end());
          dsub.insert(dsub.end(), fd.subdistribution[c].begin(), fd.subdistribution[c].end());
          dp.insert(dp.end(), fd.prediction[c].begin(), fd.prediction[c].end());
        }
      }
    }
  }
  const double m = static_cast<double>(samples.size());
  for (std::size_t i = 0; i < nt; ++i) {
    out.survival[i] /= m;
    for (int c = 0; c < nc; ++c) {
      out.incidence[c][i] /= m;
      out.prediction[c][i] /= m;
    }
  }
  out.subdistribution.resize(nc);
  for (int c = 0; c < nc; ++c) out.subdistribution[c] = cumulative_trapezoid(times, out.incidence[c]);

  if (total_draws > 0) {
    Bands b;
    std::vector<double> column(total_draws);
    auto band = [&](const std::vector<float>& store, std::size_t stride, std::size_t offset, std::vector<double>& lo,
                    std::vector<double>& hi) {
      lo.resize(nt);
      hi.resize(nt);
      for (std::size_t i = 0; i < nt; ++i) {
        for (std::size_t r = 0; r < total_draws; ++r) column[r] = store[r * stride + offset + i];
        lo[i] = quantile(column, options.lower_quantile);
        hi[i] = quantile(column, options.upper_quantile);
      }
    };
    band(ds, nt, 0, b.survival_lower, b.survival_upper);
    b.incidence_lower.resize(nc);
    b.incidence_upper.resize(nc);
    b.subdistribution_lower.resize(nc);
    b.subdistribution_upper.resize(nc);
    b.prediction_lower.resize(nc);
    b.prediction_upper.resize(nc);
    for (int c = 0; c < nc; ++c) {
      band(di, nt * nc, c * nt, b.incidence_lower[c], b.incidence_upper[c]);
      band(dsub, nt * nc, c * nt, b.subdistribution_lower[c], b.subdistribution_upper[c]);
      band(dp, nt * nc, c * nt, b.prediction_lower[c], b.prediction_upper[c]);
    }
    out.bands = std::move(b);
  }
  return out;
}

double StepFunction::operator()(double t) const {
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return initial;
  return values[static_cast<std::size_t>(it - times.begin()) - 1];
}

namespace {

struct EventTable {
  std::vector<double> times;
  std::vector<int> at_risk;
  std::vector<std::vector<int>> events;  // [cause - 1][time]
};

EventTable event_table(const Dataset& data) {
  std::vector<const Observation*> obs;
  for (const auto& o : data.observations) obs.push_back(&o);
  std::sort(obs.begin(), obs.end(), [](const Observation* a, const Observation* b) { return a->time < b->time; });
  EventTable tab;
  tab.events.resize(data.num_causes);
  const int n = static_cast<int>(obs.size());
  int k = 0;
  while (k < n) {
    const double t = obs[k]->time;
    int end = k;
    std::vector<int> counts(data.num_causes, 0);
    bool any = false;
    while (end < n && obs[end]->time == t) {
      if (!obs[end]->censored()) {
        ++counts[obs[end]->cause - 1];
        any = true;
      }
      ++end;
    }
    if (any) {
      tab.times.push_back(t);
      tab.at_risk.push_back(n - k);
      for (int c = 0; c < data.num_causes; ++c) tab.events[c].push_back(counts[c]);
    }
    k = end;
  }
  return tab;
}

}  // namespace

StepFunction kaplan_meier(const Dataset& data) {
  const EventTable tab = event_table(data);
  StepFunction s;
  s.initial = 1.0;
  double surv = 1.0;
  for (std::size_t k = 0; k < tab.times.size(); ++k) {
    int d = 0;
    for (const auto& e : tab.events) d += e[k];
    surv *= 1.0 - static_cast<double>(d) / tab.at_risk[k];
    s.times.push_back(tab.times[k]);
    s.values.push_back(surv);
  }
  return s;
}

StepFunction aalen_johansen(const Dataset& data, int cause) {
  if (cause < 1 || cause > data.num_causes) throw ConfigError("cause out of range");
  const EventTable tab = event_table(data);
  StepFunction f;
  f.initial = 0.0;
  double surv = 1.0, cum = 0.0;
  for (std::size_t k = 0; k < tab.times.size(); ++k) {
    int d = 0;
    for (const auto& e : tab.events) d += e[k];
    cum += surv * tab.events[cause - 1][k] / tab.at_risk[k];
    surv *= 1.0 - static_cast<double>(d) / tab.at_risk[k];
    f.times.push_back(tab.times[k]);
    f.values.push_back(cum);
  }
  return f;
}

EstimateGrid baseline_grid(const Dataset& data, const std::vector<double>& times) {
  const int nc = data.num_causes;
  const std::size_t nt = times.size();
  EstimateGrid g;
  g.times = times;
  const StepFunction km = kaplan_meier(data);
  for (double t : times) g.survival.push_back(km(t));
  g.incidence.assign(nc, std::vector<double>(nt, 0.0));
  g.subdistribution.assign(nc, std::vector<double>(nt, 0.0));
  g.prediction.assign(nc, std::vector<double>(nt, 1.0 / nc));
  for (int c = 1; c <= nc; ++c) {
    const StepFunction aj = aalen_johansen(data, c);
    for (std::size_t i = 0; i < nt; ++i) g.subdistribution[c - 1][i] = aj(times[i]);
    // Incidence as the grid slope of the subdistribution.
    for (std::size_t i = 0; i + 1 < nt; ++i) {
      const double dt = times[i + 1] - times[i];
      g.incidence[c - 1][i] = dt > 0.0 ? (g.subdistribution[c - 1][i + 1] - g.subdistribution[c - 1][i]) / dt : 0.0;
    }
  }
  for (std::size_t i = 0; i < nt; ++i) {
    double total = 0.0;
    for (int c = 0; c < nc; ++c) total += g.incidence[c][i];
    if (total > 0.0)
      for (int c = 0; c < nc; ++c) g.prediction[c][i] = g.incidence[c][i] / total;
  }
  return g;
}

ErrorMetrics error_metrics(const EstimateGrid& est, const EstimateGrid& truth, const std::vector<double>& pi) {
  const std::size_t nt = est.times.size();
  if (truth.times.size() != nt) throw DataError("estimate and truth grids differ in length");
  for (std::size_t i = 0; i < nt; ++i)
    if (std::fabs(truth.times[i] - est.times[i]) > 1e-9 * std::max(1.0, std::fabs(est.times[i])))
      throw DataError("estimate and truth grids differ");
  const int nc = est.num_causes();
  if (truth.num_causes() != nc || static_cast<int>(pi.size()) != nc) throw DataError("cause counts differ");
  ErrorMetrics m;
  for (int c = 0; c < nc; ++c) {
    if (!(pi[c] > 0.0)) throw DataError("true cause probability must be positive");
    std::vector<double> gap(nt);
    double sup = 0.0;
    for (std::size_t i = 0; i < nt; ++i) {
      gap[i] = std::fabs(est.incidence[c][i] - truth.incidence[c][i]);
      sup = std::max(sup, std::fabs(est.subdistribution[c][i] - truth.subdistribution[c][i]));
    }
    const auto cum = cumulative_trapezoid(est.times, gap);
    m.total_variation.push_back(cum.empty() ? 0.0 : cum.back() / (2.0 * pi[c]));
    m.kolmogorov.push_back(sup / pi[c]);
  }
  for (std::size_t i = 0; i < nt; ++i)
    m.survival_kolmogorov = std::max(m.survival_kolmogorov, std::fabs(est.survival[i] - truth.survival[i]));
  return m;
}

double step_kolmogorov_distance(const StepFunction& step, const std::function<double(double)>& truth, double horizon) {
  double sup = std::fabs(step(0.0) - truth(0.0));
  double before = step.initial;
  for (std::size_t k = 0; k < step.times.size() && step.times[k] <= horizon; ++k) {
    const double tv = truth(step.times[k]);
    sup = std::max({sup, std::fabs(before - tv), std::fabs(step.values[k] - tv)});
    before = step.values[k];
  }
  return std::max(sup, std::fabs(step(horizon) - truth(horizon)));
}

}  // namespace hcrm
