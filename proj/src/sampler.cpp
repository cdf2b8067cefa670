#include "hcrm/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "hcrm/errors.hpp"
#include "hcrm/levy.hpp"

namespace hcrm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

double standard_normal(Rng& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }

std::size_t sample_log_weights(const std::vector<double>& lw, Rng& rng) {
  const double top = *std::max_element(lw.begin(), lw.end());
  double total = 0.0;
  std::vector<double> cum(lw.size());
  for (std::size_t k = 0; k < lw.size(); ++k) {
    total += std::exp(lw[k] - top);
    cum[k] = total;
  }
  const double u = uniform01(rng) * total;
  const auto it = std::upper_bound(cum.begin(), cum.end(), u);
  return std::min(static_cast<std::size_t>(it - cum.begin()), lw.size() - 1);
}

// Draws s in [0, h] from the linear density through (0, da) and (h, db).
double linear_panel_draw(double da, double db, double h, double u) {
  const double denom = da + std::sqrt(da * da + u * (db * db - da * da));
  if (!(denom > 0.0)) return u * h;
  return h * u * (da + db) / denom;
}

double reflect(double y, double lo, double hi) {
  const double width = hi - lo;
  if (width <= 0.0) return lo;
  double z = std::fmod(y - lo, 2.0 * width);
  if (z < 0.0) z += 2.0 * width;
  return z <= width ? lo + z : hi - (z - width);
}

}  // namespace

Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

void ChainConfig::validate() const {
  if (iterations < 1) throw ConfigError("iterations must be positive");
  if (burn_in < 0 || burn_in >= iterations) throw ConfigError("burn-in must be non-negative and below iterations");
  if (thin < 1) throw ConfigError("thinning interval must be at least 1");
  if (!(kernel_step >= 0.0) || !(eta_step >= 0.0)) throw ConfigError("MH step sizes must be non-negative");
  if (!(location_step > 0.0)) throw ConfigError("location step must be positive");
  if (!(adapt_target > 0.0 && adapt_target < 1.0)) throw ConfigError("adaptation target must lie in (0, 1)");
  if (conditional_draws < 0) throw ConfigError("conditional draws must be non-negative");
  if (grid_points < 2) throw ConfigError("estimate grid needs at least two points");
  if (checkpoint_every < 0) throw ConfigError("checkpoint interval must be non-negative");
}

std::vector<double> CategoricalLaw::probabilities() const {
  std::vector<double> p(log_weights.size(), 0.0);
  if (p.empty()) return p;
  const double top = *std::max_element(log_weights.begin(), log_weights.end());
  double total = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) total += (p[k] = std::exp(log_weights[k] - top));
  for (double& v : p) v /= total;
  return p;
}

NewClusterLaw::NewClusterLaw(const KernelAggregate& agg, const HCRMParams& params) : agg_(&agg), params_(params) {
  const auto& nx = agg.node_x();
  const auto& nw = agg.node_weight();
  const auto& nk = agg.node_exposure();
  const auto& br = agg.breakpoints();
  node_density_.resize(nx.size());
  for (std::size_t k = 0; k < nx.size(); ++k) node_density_[k] = density(nk[k]);
  break_density_.resize(br.size());
  for (std::size_t p = 0; p < br.size(); ++p) break_density_[p] = density(agg.breakpoint_exposure()[p]);

  const std::size_t panels = agg.num_panels();
  const KernelSpec& ker = agg.kernel();
  // cum[p]: integral of the kernel-free part (or the decayed part for OU) up to breakpoint p.
  std::vector<double> cum(panels + 1, 0.0);
  for (std::size_t p = 0; p < panels; ++p) {
    if (ker.kind == KernelKind::OrnsteinUhlenbeck) {
      const double right = br[p + 1];
      cum[p + 1] = std::exp(-ker.param * (right - br[p])) * cum[p];
      for (std::size_t k = 2 * p; k < 2 * p + 2; ++k)
        cum[p + 1] += nw[k] * std::exp(-ker.param * (right - nx[k])) * node_density_[k];
    } else {
      cum[p + 1] = cum[p] + nw[2 * p] * node_density_[2 * p] + nw[2 * p + 1] * node_density_[2 * p + 1];
    }
  }
  log_integral_.assign(agg.size(), kNegInf);
  for (std::size_t i = 0; i < agg.size(); ++i) {
    if (agg.cause(i) == 0) continue;
    const double t = agg.time(i);
    const std::size_t end = agg.breakpoint_index(t);
    double value = 0.0;
    switch (ker.kind) {
      case KernelKind::DykstraLaud: value = ker.param * cum[end]; break;
      case KernelKind::Rectangular: {
        const std::size_t start = agg.breakpoint_index(std::max(0.0, t - ker.bandwidth));
        value = ker.param * (cum[end] - cum[start]);
        break;
      }
      case KernelKind::OrnsteinUhlenbeck: value = std::sqrt(2.0 * ker.param) * cum[end]; break;
    }
    log_integral_[i] = std::log(agg.cox_weight(i) * value);
  }
}

double NewClusterLaw::density(double K) const {
  const GGMeasure bottom = params_.bottom();
  const double log_bottom = (bottom.sigma - 1.0) * std::log(bottom.beta + K);
  if (params_.independent_mode) return std::exp(log_bottom);
  const GGMeasure root = params_.root();
  const double root_rate = root.beta + agg_->num_causes() * psi(bottom, K);
  return std::exp(log_bottom + (root.sigma - 1.0) * std::log(root_rate));
}

double NewClusterLaw::sample(std::size_t i, Rng& rng) const {
  const KernelAggregate& agg = *agg_;
  const KernelSpec& ker = agg.kernel();
  const double t = agg.time(i);
  const auto& br = agg.breakpoints();
  const auto& nx = agg.node_x();
  const auto& nw = agg.node_weight();
  const std::size_t end = agg.breakpoint_index(t);
  const std::size_t start =
      ker.kind == KernelKind::Rectangular ? agg.breakpoint_index(std::max(0.0, t - ker.bandwidth)) : 0;
  std::vector<double> cum(end - start, 0.0);
  double total = 0.0;
  for (std::size_t p = start; p < end; ++p) {
    for (std::size_t k = 2 * p; k < 2 * p + 2; ++k) total += nw[k] * eval_kernel(ker, t, nx[k]) * node_density_[k];
    cum[p - start] = total;
  }
  const double u = uniform01(rng) * total;
  std::size_t p = start + std::min(static_cast<std::size_t>(std::upper_bound(cum.begin(), cum.end(), u) - cum.begin()),
                                   cum.size() - 1);
  const double a = br[p], b = br[p + 1];
  const double da = eval_kernel(ker, t, a) * break_density_[p];
  const double db = eval_kernel(ker, t, b) * break_density_[p + 1];
  double x = a + linear_panel_draw(da, db, b - a, uniform01(rng));
  x = std::min(x, t);
  if (x <= 0.0) x = std::min(t, std::nextafter(0.0, 1.0));
  return x;
}

double sample_new_location(std::size_t i, const NewClusterLaw& law, Rng& rng) { return law.sample(i, rng); }

CategoricalLaw full_conditional_weights(std::size_t i, const LatentState& state, const KernelAggregate& agg,
                                        const HCRMParams& params, const NewClusterLaw& law) {
  if (state.assigned(i)) throw std::logic_error("observation must be removed before computing its weights");
  const int c = state.cause(i);
  if (c == 0) throw std::logic_error("censored observations have no allocation law");
  const GGMeasure bottom = params.bottom();
  const GGMeasure root = params.root();
  const double d = agg.num_causes();
  CategoricalLaw law_out;
  for (int j = 0; j < state.num_clusters(); ++j) {
    const Cluster& cl = state.cluster(j);
    const double kv = agg.kernel_at(i, cl.location);
    const double lk = kv > 0.0 ? std::log(kv) : kNegInf;
    const double K = agg.exposure(cl.location);
    const double log_rate = std::log(bottom.beta + K);
    const auto& sizes = cl.tables[c - 1];
    if (params.independent_mode) {
      if (sizes.empty()) continue;
      law_out.choices.push_back(Choice::existing_table(j, 0));
      law_out.log_weights.push_back(lk + std::log(sizes[0] - bottom.sigma) - log_rate);
      continue;
    }
    for (int h = 0; h < static_cast<int>(sizes.size()); ++h) {
      law_out.choices.push_back(Choice::existing_table(j, h));
      law_out.log_weights.push_back(lk + std::log(sizes[h] - bottom.sigma) - log_rate);
    }
    const double root_rate = root.beta + d * psi(bottom, K);
    law_out.choices.push_back(Choice::new_table(j));
    law_out.log_weights.push_back(lk + (bottom.sigma - 1.0) * log_rate + std::log(cl.num_tables() - root.sigma) -
                                  std::log(root_rate));
  }
  law_out.choices.push_back(Choice::new_cluster(0.0));
  law_out.log_weights.push_back(law.log_weight(i, params.theta));
  return law_out;
}

GibbsSampler::GibbsSampler(const Dataset& data, const KernelSpec& kernel, const HCRMParams& params,
                           const HyperPriors& priors, const ChainConfig& config)
    : params_(params),
      priors_(priors),
      config_(config),
      agg_(data, kernel, std::vector<double>(data.num_predictors(), 0.0)),
      rng_(make_rng(config.seed)) {
  config_.validate();
  validate_config(data, kernel, params);
  if (data.num_uncensored() == 0) throw DataError("fitting needs at least one uncensored observation");
  if (!(priors.theta.shape > 0.0 && priors.theta.rate > 0.0 && priors.kernel_rate > 0.0 && priors.eta_variance > 0.0))
    throw ConfigError("hyperprior shapes, rates and variances must be positive");
  state_ = LatentState::for_data(agg_);
  kernel_log_step_ = std::log(config_.kernel_step);
  eta_log_steps_.assign(agg_.num_predictors(), std::log(config_.eta_step));
  const std::size_t n = agg_.size();
  log_count_bottom_.resize(n + 2);
  log_count_root_.resize(n + 2);
  for (std::size_t q = 0; q < n + 2; ++q) {
    log_count_bottom_[q] = std::log(q - params_.sigma);
    log_count_root_[q] = std::log(q - params_.sigma0);
  }
  for (std::size_t i = 0; i < n; ++i)
    if (agg_.cause(i) != 0) visit_.push_back(i);
  diag_.kernel_step = config_.kernel_step;
  diag_.eta_steps.assign(agg_.num_predictors(), config_.eta_step);
  refresh_caches();
}

void GibbsSampler::refresh_caches() {
  base_integral_ = base_integral(agg_, params_);
  law_ = NewClusterLaw(agg_, params_);
  log_bottom_rate_.resize(state_.num_clusters());
  log_root_rate_.resize(state_.num_clusters());
  for (int j = 0; j < state_.num_clusters(); ++j) refresh_cluster_cache(j);
}

void GibbsSampler::refresh_cluster_cache(int j) {
  const double K = agg_.exposure(state_.cluster(j).location);
  log_bottom_rate_[j] = std::log(params_.beta + K);
  log_root_rate_[j] = std::log(params_.beta0 + agg_.num_causes() * psi(params_.bottom(), K));
}

void GibbsSampler::set_state(LatentState state) {
  if (auto msg = state.audit(&agg_, false, params_.independent_mode); !msg.empty())
    throw DataError("latent state fails audit: " + msg);
  state_ = std::move(state);
  refresh_caches();
}

void GibbsSampler::reinsert(std::size_t i) {
  const int c = state_.cause(i);
  if (state_.assigned(i)) {
    const int k_before = state_.num_clusters();
    const int j = state_.assignment(i).cluster;
    state_.remove_observation(i);
    if (state_.num_clusters() < k_before) {
      if (j < state_.num_clusters()) {
        log_bottom_rate_[j] = log_bottom_rate_.back();
        log_root_rate_[j] = log_root_rate_.back();
      }
      log_bottom_rate_.pop_back();
      log_root_rate_.pop_back();
    }
  }
  auto& choices = scratch_.choices;
  auto& lw = scratch_.log_weights;
  choices.clear();
  lw.clear();
  const double sigma = params_.sigma;
  for (int j = 0; j < state_.num_clusters(); ++j) {
    const Cluster& cl = state_.cluster(j);
    const auto& sizes = cl.tables[c - 1];
    if (params_.independent_mode && sizes.empty()) continue;
    const double kv = agg_.kernel_at(i, cl.location);
    if (!(kv > 0.0)) continue;  // zero weight for every choice in this cluster
    const double lk = std::log(kv);
    if (params_.independent_mode) {
      choices.push_back(Choice::existing_table(j, 0));
      lw.push_back(lk + log_count_bottom_[sizes[0]] - log_bottom_rate_[j]);
      continue;
    }
    for (int h = 0; h < static_cast<int>(sizes.size()); ++h) {
      choices.push_back(Choice::existing_table(j, h));
      lw.push_back(lk + log_count_bottom_[sizes[h]] - log_bottom_rate_[j]);
    }
    choices.push_back(Choice::new_table(j));
    lw.push_back(lk + (sigma - 1.0) * log_bottom_rate_[j] + log_count_root_[cl.num_tables()] - log_root_rate_[j]);
  }
  choices.push_back(Choice::new_cluster(0.0));
  lw.push_back(law_.log_weight(i, params_.theta));
  Choice pick = choices[sample_log_weights(lw, rng_)];
  if (pick.kind == Choice::Kind::NewCluster) pick.location = law_.sample(i, rng_);
  const int j = state_.insert_observation(i, pick);
  if (pick.kind == Choice::Kind::NewCluster) {
    log_bottom_rate_.push_back(0.0);
    log_root_rate_.push_back(0.0);
    refresh_cluster_cache(j);
  }
}

void GibbsSampler::initialize() {
  for (std::size_t i : visit_)
    if (!state_.assigned(i)) reinsert(i);
}

void GibbsSampler::sweep() {
  switch (config_.visit_order) {
    case VisitOrder::Forward:
      for (std::size_t i : visit_) reinsert(i);
      break;
    case VisitOrder::Reverse:
      for (auto it = visit_.rbegin(); it != visit_.rend(); ++it) reinsert(*it);
      break;
    case VisitOrder::Shuffled: {
      std::vector<std::size_t> order = visit_;
      std::shuffle(order.begin(), order.end(), rng_);
      for (std::size_t i : order) reinsert(i);
      break;
    }
  }
}

double GibbsSampler::location_log_target(int j, double x) const {
  const Cluster& cl = state_.cluster(j);
  const double K = agg_.exposure(x);
  const double n = cl.size();
  double v = 0.0;
  if (agg_.kernel().kind == KernelKind::OrnsteinUhlenbeck) v += n * agg_.kernel().param * x;
  if (params_.independent_mode) return v + (params_.sigma - n) * std::log(params_.beta + K);
  const double r = cl.num_tables();
  v += (r * params_.sigma - n) * std::log(params_.beta + K);
  v += (params_.sigma0 - r) * std::log(params_.beta0 + agg_.num_causes() * psi(params_.bottom(), K));
  return v;
}

bool GibbsSampler::metropolis(double log_ratio) {
  if (std::isnan(log_ratio)) return false;
  if (log_ratio >= 0.0) return true;
  return std::log(uniform01(rng_)) < log_ratio;
}

void GibbsSampler::acceleration_step() {
  for (int j = 0; j < state_.num_clusters(); ++j) {
    const Cluster& cl = state_.cluster(j);
    double lo_t = std::numeric_limits<double>::infinity(), hi_t = 0.0;
    for (int m : cl.members) {
      lo_t = std::min(lo_t, agg_.time(m));
      hi_t = std::max(hi_t, agg_.time(m));
    }
    auto [lo, hi] = location_support(agg_.kernel(), lo_t, hi_t);
    hi = std::min(hi, agg_.t_max());
    if (!(hi > lo)) continue;
    const double x = cl.location;
    const double y = reflect(x + config_.location_step * (hi - lo) * standard_normal(rng_), lo, hi);
    if (y <= 0.0) continue;
    const bool ok = metropolis(location_log_target(j, y) - location_log_target(j, x));
    diag_.location.record(ok);
    if (ok) {
      state_.set_location(j, y);
      refresh_cluster_cache(j);
    }
  }
}

void GibbsSampler::update_theta() {
  if (priors_.fix_theta) return;
  double shape = priors_.theta.shape;
  double rate = priors_.theta.rate;
  if (!config_.likelihood_masked) {
    shape += state_.num_clusters();
    rate += base_integral_;
  }
  params_.theta = std::gamma_distribution<double>(shape, 1.0 / rate)(rng_);
  if (!(params_.theta > 0.0)) params_.theta = std::numeric_limits<double>::min();
}

double GibbsSampler::current_log_marginal() const { return log_marginal(state_, agg_, params_, base_integral_); }

void GibbsSampler::update_kernel_param() {
  if (priors_.fix_kernel) return;
  const double step = config_.kernel_step > 0.0 ? std::exp(kernel_log_step_) : 0.0;
  const double cur = agg_.kernel().param;
  const double prop = cur * std::exp(step * standard_normal(rng_));
  double log_ratio = -priors_.kernel_rate * (prop - cur) + std::log(prop) - std::log(cur);
  KernelAggregate proposal = agg_;
  if (!config_.likelihood_masked && prop != cur) {
    proposal.set_kernel(agg_.kernel().with_param(prop));
    log_ratio += log_marginal(state_, proposal, params_) - current_log_marginal();
  }
  const bool ok = metropolis(log_ratio);
  diag_.kernel.record(ok);
  if (ok && prop != cur) {
    if (config_.likelihood_masked) proposal.set_kernel(agg_.kernel().with_param(prop));
    agg_ = std::move(proposal);
    refresh_caches();
  }
  if (config_.adapt_steps && config_.kernel_step > 0.0 && iteration_ <= config_.burn_in) {
    kernel_log_step_ += ((ok ? 1.0 : 0.0) - config_.adapt_target) / std::pow(std::max(iteration_, 1), 0.6);
    diag_.kernel_step = std::exp(kernel_log_step_);
  }
}

void GibbsSampler::update_eta() {
  if (priors_.fix_eta || agg_.num_predictors() == 0) return;
  for (std::size_t k = 0; k < agg_.num_predictors(); ++k) {
    const double step = config_.eta_step > 0.0 ? std::exp(eta_log_steps_[k]) : 0.0;
    std::vector<double> eta = agg_.eta();
    const double cur = eta[k];
    const double prop = cur + step * standard_normal(rng_);
    eta[k] = prop;
    double log_ratio = -(prop * prop - cur * cur) / (2.0 * priors_.eta_variance);
    KernelAggregate proposal = agg_;
    proposal.set_eta(eta);
    if (!config_.likelihood_masked && prop != cur)
      log_ratio += log_marginal(state_, proposal, params_) - current_log_marginal();
    const bool ok = metropolis(log_ratio);
    diag_.eta.record(ok);
    if (ok && prop != cur) {
      agg_ = std::move(proposal);
      refresh_caches();
    }
    if (config_.adapt_steps && config_.eta_step > 0.0 && iteration_ <= config_.burn_in) {
      eta_log_steps_[k] += ((ok ? 1.0 : 0.0) - config_.adapt_target) / std::pow(std::max(iteration_, 1), 0.6);
      diag_.eta_steps[k] = std::exp(eta_log_steps_[k]);
    }
  }
}

void GibbsSampler::iterate() {
  ++iteration_;
  sweep();
  if (config_.audit_every_sweep) {
    if (auto msg = state_.audit(&agg_, true, params_.independent_mode); !msg.empty())
      throw std::logic_error("audit failed after sweep " + std::to_string(iteration_) + ": " + msg);
    ++diag_.audits_passed;
  }
  acceleration_step();
  update_theta();
  update_kernel_param();
  update_eta();
  diag_.cluster_trace.push_back(state_.num_clusters());
  diag_.theta_trace.push_back(params_.theta);
  diag_.kernel_trace.push_back(agg_.kernel().param);
  diag_.log_marginal_trace.push_back(current_log_marginal());
}

ChainSample GibbsSampler::snapshot() const {
  ChainSample s;
  s.iteration = iteration_;
  s.state = state_;
  s.theta = params_.theta;
  s.kernel = agg_.kernel();
  s.eta = agg_.eta();
  s.log_marginal = current_log_marginal();
  return s;
}

nlohmann::json GibbsSampler::checkpoint() const {
  std::ostringstream rng_text;
  rng_text << rng_;
  return {{"iteration", iteration_},
          {"state", state_.to_json()},
          {"theta", params_.theta},
          {"kernel", to_json(agg_.kernel())},
          {"eta", agg_.eta()},
          {"rng", rng_text.str()},
          {"kernel_log_step", kernel_log_step_},
          {"eta_log_steps", eta_log_steps_},
          {"acceptance",
           {{"kernel", {diag_.kernel.accepted, diag_.kernel.proposed}},
            {"eta", {diag_.eta.accepted, diag_.eta.proposed}},
            {"location", {diag_.location.accepted, diag_.location.proposed}}}},
          {"traces",
           {{"clusters", diag_.cluster_trace},
            {"theta", diag_.theta_trace},
            {"kernel", diag_.kernel_trace},
            {"log_marginal", diag_.log_marginal_trace}}},
          {"audits_passed", diag_.audits_passed}};
}

void GibbsSampler::restore(const nlohmann::json& j) {
  try {
    iteration_ = j.at("iteration").get<int>();
    params_.theta = j.at("theta").get<double>();
    agg_.set_kernel(kernel_from_json(j.at("kernel")));
    agg_.set_eta(j.at("eta").get<std::vector<double>>());
    std::istringstream rng_text(j.at("rng").get<std::string>());
    rng_text >> rng_;
    kernel_log_step_ = j.at("kernel_log_step").get<double>();
    j.at("eta_log_steps").get_to(eta_log_steps_);
    const auto& acc = j.at("acceptance");
    auto counter = [](const nlohmann::json& a) { return AcceptanceCounter{a.at(0).get<long>(), a.at(1).get<long>()}; };
    diag_.kernel = counter(acc.at("kernel"));
    diag_.eta = counter(acc.at("eta"));
    diag_.location = counter(acc.at("location"));
    const auto& tr = j.at("traces");
    tr.at("clusters").get_to(diag_.cluster_trace);
    tr.at("theta").get_to(diag_.theta_trace);
    tr.at("kernel").get_to(diag_.kernel_trace);
    tr.at("log_marginal").get_to(diag_.log_marginal_trace);
    diag_.audits_passed = j.at("audits_passed").get<int>();
    diag_.kernel_step = std::exp(kernel_log_step_);
    diag_.eta_steps.resize(eta_log_steps_.size());
    for (std::size_t k = 0; k < eta_log_steps_.size(); ++k) diag_.eta_steps[k] = std::exp(eta_log_steps_[k]);
    set_state(LatentState::from_json(j.at("state")));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  }
}

ChainResult run_chain(const Dataset& data, const KernelSpec& kernel, const HCRMParams& params,
                      const HyperPriors& priors, const ChainConfig& config,
                      const std::function<void(const nlohmann::json&)>& on_checkpoint, const nlohmann::json* resume) {
  GibbsSampler sampler(data, kernel, params, priors, config);
  ChainResult result;
  if (resume) {
    sampler.restore(resume->at("sampler"));
    for (const auto& js : resume->at("samples")) result.samples.push_back(chain_sample_from_json(js));
  } else {
    sampler.initialize();
  }
  for (int it = sampler.iteration() + 1; it <= config.iterations; ++it) {
    sampler.iterate();
    if (it > config.burn_in && (it - config.burn_in) % config.thin == 0) result.samples.push_back(sampler.snapshot());
    if (config.checkpoint_every > 0 && on_checkpoint && it % config.checkpoint_every == 0) {
      nlohmann::json samples = nlohmann::json::array();
      for (const auto& s : result.samples) samples.push_back(to_json(s));
      on_checkpoint({{"sampler", sampler.checkpoint()}, {"samples", std::move(samples)}});
    }
  }
  result.diagnostics = sampler.diagnostics();
  return result;
}

double effective_sample_size(const std::vector<double>& trace) {
  const std::size_t n = trace.size();
  if (n < 4) return static_cast<double>(n);
  const double mean = std::accumulate(trace.begin(), trace.end(), 0.0) / n;
  auto autocov = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t t = 0; t + lag < n; ++t) s += (trace[t] - mean) * (trace[t + lag] - mean);
    return s / n;
  };
  const double c0 = autocov(0);
  if (!(c0 > 0.0)) return static_cast<double>(n);
  double sum = 0.0;
  for (std::size_t m = 0; 2 * m + 1 < n; ++m) {
    const double pair = autocov(2 * m) + autocov(2 * m + 1);
    if (pair <= 0.0) break;
    sum += pair;
  }
  const double tau = -1.0 + 2.0 * sum / c0;
  return n / std::max(tau, 1e-12);
}

nlohmann::json to_json(const ChainSample& s) {
  return {{"iteration", s.iteration}, {"state", s.state.to_json()}, {"theta", s.theta},
          {"kernel", to_json(s.kernel)}, {"eta", s.eta},             {"log_marginal", s.log_marginal}};
}

ChainSample chain_sample_from_json(const nlohmann::json& j) {
  try {
    ChainSample s;
    s.iteration = j.at("iteration").get<int>();
    s.state = LatentState::from_json(j.at("state"));
    s.theta = j.at("theta").get<double>();
    s.kernel = kernel_from_json(j.at("kernel"));
    j.at("eta").get_to(s.eta);
    s.log_marginal = j.at("log_marginal").get<double>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed chain sample: ") + e.what());
  }
}

}  // namespace hcrm
