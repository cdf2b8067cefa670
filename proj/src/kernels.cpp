#include "hcrm/kernels.hpp"

#include <algorithm>
#include <numeric>

#include "hcrm/errors.hpp"

namespace hcrm {

double eval_kernel(const KernelSpec& spec, double t, double x) {
  const double lag = t - x;
  if (lag < 0.0) return 0.0;
  switch (spec.kind) {
    case KernelKind::DykstraLaud: return spec.param;
    case KernelKind::Rectangular: return lag <= spec.bandwidth ? spec.param : 0.0;
    case KernelKind::OrnsteinUhlenbeck: return std::sqrt(2.0 * spec.param) * std::exp(-spec.param * lag);
  }
  return 0.0;
}

double kernel_primitive(const KernelSpec& spec, double t, double x) {
  const double lag = t - x;
  if (lag <= 0.0) return 0.0;
  switch (spec.kind) {
    case KernelKind::DykstraLaud: return spec.param * lag;
    case KernelKind::Rectangular: return spec.param * std::min(lag, spec.bandwidth);
    case KernelKind::OrnsteinUhlenbeck: return -std::sqrt(2.0 / spec.param) * std::expm1(-spec.param * lag);
  }
  return 0.0;
}

std::pair<double, double> location_support(const KernelSpec& spec, double min_time, double max_time) {
  if (spec.kind == KernelKind::Rectangular) return {std::max(0.0, max_time - spec.bandwidth), min_time};
  return {0.0, min_time};
}

KernelAggregate::KernelAggregate(const Dataset& data, const KernelSpec& kernel, std::vector<double> eta,
                                 int uniform_points)
    : kernel_(kernel), eta_(std::move(eta)), num_causes_(data.num_causes), t_max_(data.t_max) {
  if (uniform_points < 2) throw ConfigError("quadrature grid needs at least two points");
  num_predictors_ = data.num_predictors();
  if (!eta_.empty() && eta_.size() != num_predictors_)
    throw ConfigError("coefficient vector length differs from predictor count");
  const std::size_t n = data.size();
  times_.reserve(n);
  causes_.reserve(n);
  predictors_.reserve(n * num_predictors_);
  for (const auto& o : data.observations) {
    times_.push_back(o.time);
    causes_.push_back(o.cause);
    predictors_.insert(predictors_.end(), o.predictors.begin(), o.predictors.end());
  }
  order_.resize(n);
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  std::stable_sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) { return times_[a] < times_[b]; });
  sorted_times_.resize(n);
  for (std::size_t k = 0; k < n; ++k) sorted_times_[k] = times_[order_[k]];

  std::vector<double> pts;
  pts.reserve(uniform_points + 2 * n + 1);
  for (int k = 0; k < uniform_points; ++k) pts.push_back(t_max_ * k / (uniform_points - 1));
  for (double t : times_) {
    if (t <= t_max_) pts.push_back(t);
    if (kernel_.kind == KernelKind::Rectangular && t - kernel_.bandwidth > 0.0 && t - kernel_.bandwidth < t_max_)
      pts.push_back(t - kernel_.bandwidth);
  }
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  // Merge slivers against the uniform grid but never drop an observed time.
  const double sliver = 1e-12 * t_max_;
  breaks_.clear();
  for (double p : pts) {
    if (!breaks_.empty() && p - breaks_.back() < sliver) {
      if (std::binary_search(sorted_times_.begin(), sorted_times_.end(), p)) breaks_.back() = p;
      continue;
    }
    breaks_.push_back(p);
  }
  breaks_.front() = 0.0;

  const std::size_t panels = breaks_.size() - 1;
  node_x_.resize(2 * panels);
  node_w_.resize(2 * panels);
  for (std::size_t p = 0; p < panels; ++p) {
    const double mid = 0.5 * (breaks_[p] + breaks_[p + 1]);
    const double half = 0.5 * (breaks_[p + 1] - breaks_[p]);
    node_x_[2 * p] = mid - half * detail::kGaussOffset;
    node_x_[2 * p + 1] = mid + half * detail::kGaussOffset;
    node_w_[2 * p] = half;
    node_w_[2 * p + 1] = half;
  }
  rebuild_weights();
}

void KernelAggregate::set_kernel(const KernelSpec& kernel) {
  if (kernel.kind != kernel_.kind || kernel.bandwidth != kernel_.bandwidth)
    throw ConfigError("kernel family and bandwidth are fixed for an aggregate");
  kernel_ = kernel;
  rebuild_exposure();
}

void KernelAggregate::set_eta(std::vector<double> eta) {
  if (!eta.empty() && eta.size() != num_predictors_)
    throw ConfigError("coefficient vector length differs from predictor count");
  eta_ = std::move(eta);
  rebuild_weights();
}

void KernelAggregate::rebuild_weights() {
  const std::size_t n = times_.size();
  weights_.assign(n, 1.0);
  if (!eta_.empty()) {
    for (std::size_t i = 0; i < n; ++i) {
      double lin = 0.0;
      for (std::size_t k = 0; k < num_predictors_; ++k) lin += eta_[k] * predictor(i, k);
      weights_[i] = std::exp(lin);
    }
  }
  rebuild_exposure();
}

void KernelAggregate::rebuild_exposure() {
  const std::size_t n = sorted_times_.size();
  suffix_weight_.assign(n + 1, 0.0);
  suffix_weighted_time_.assign(n + 1, 0.0);
  suffix_decay_.assign(n + 1, 0.0);
  for (std::size_t k = n; k-- > 0;) {
    const double w = weights_[order_[k]];
    suffix_weight_[k] = suffix_weight_[k + 1] + w;
    suffix_weighted_time_[k] = suffix_weighted_time_[k + 1] + w * sorted_times_[k];
    if (kernel_.kind == KernelKind::OrnsteinUhlenbeck) {
      const double carry = k + 1 < n ? std::exp(-kernel_.param * (sorted_times_[k + 1] - sorted_times_[k])) : 0.0;
      suffix_decay_[k] = w + carry * suffix_decay_[k + 1];
    }
  }
  break_exposure_.resize(breaks_.size());
  for (std::size_t p = 0; p < breaks_.size(); ++p) break_exposure_[p] = exposure(breaks_[p]);
  node_exposure_.resize(node_x_.size());
  for (std::size_t p = 0; p < node_x_.size(); ++p) node_exposure_[p] = exposure(node_x_[p]);
}

double KernelAggregate::exposure(double x) const {
  const auto first_after = [&](double v) {
    return static_cast<std::size_t>(std::upper_bound(sorted_times_.begin(), sorted_times_.end(), v) -
                                    sorted_times_.begin());
  };
  const std::size_t m = first_after(x);
  if (m == sorted_times_.size()) return 0.0;
  switch (kernel_.kind) {
    case KernelKind::DykstraLaud:
      return std::max(0.0, kernel_.param * (suffix_weighted_time_[m] - x * suffix_weight_[m]));
    case KernelKind::Rectangular: {
      const double edge = x + kernel_.bandwidth;
      const auto m2 = static_cast<std::size_t>(
          std::lower_bound(sorted_times_.begin() + m, sorted_times_.end(), edge) - sorted_times_.begin());
      const double ramp = (suffix_weighted_time_[m] - suffix_weighted_time_[m2]) -
                          x * (suffix_weight_[m] - suffix_weight_[m2]);
      return std::max(0.0, kernel_.param * (ramp + kernel_.bandwidth * suffix_weight_[m2]));
    }
    case KernelKind::OrnsteinUhlenbeck: {
      const double decay = std::exp(-kernel_.param * (sorted_times_[m] - x)) * suffix_decay_[m];
      return std::max(0.0, std::sqrt(2.0 / kernel_.param) * (suffix_weight_[m] - decay));
    }
  }
  return 0.0;
}

std::size_t KernelAggregate::breakpoint_index(double x) const {
  return static_cast<std::size_t>(std::lower_bound(breaks_.begin(), breaks_.end(), x) - breaks_.begin());
}

}  // namespace hcrm
