#pragma once

#include <algorithm>
#include <cmath>
#include <type_traits>
#include <cstddef>
#include <utility>
#include <vector>

#include "hcrm/model.hpp"

namespace hcrm {

// k(t; x).
double eval_kernel(const KernelSpec& spec, double t, double x);

// Closed-form integral of k(s; x) over s in [0, t].
double kernel_primitive(const KernelSpec& spec, double t, double x);

// Locations x where k(T; x) > 0 for every member time T in [min_time, max_time]:
// returns {lo, hi}; the interval is empty when lo > hi.
std::pair<double, double> location_support(const KernelSpec& spec, double min_time, double max_time);

/**
 * Data-aggregated kernel quantities for one dataset, kernel and Cox coefficient
 * vector. Holds the Cox weights, a closed-form evaluator of the cumulative
 * exposure sum_i w_i * kernel_primitive(T_i, x), and the quadrature panels on
 * [0, t_max] (observed-time knots merged with a uniform grid, two Gauss-Legendre
 * nodes per panel) with the exposure cached at every node.
 */
class KernelAggregate {
 public:
  KernelAggregate(const Dataset& data, const KernelSpec& kernel, std::vector<double> eta = {},
                  int uniform_points = 512);

  const KernelSpec& kernel() const { return kernel_; }
  const std::vector<double>& eta() const { return eta_; }
  void set_kernel(const KernelSpec& kernel);
  void set_eta(std::vector<double> eta);

  std::size_t size() const { return times_.size(); }
  int num_causes() const { return num_causes_; }
  double t_max() const { return t_max_; }
  std::size_t num_predictors() const { return num_predictors_; }
  double time(std::size_t i) const { return times_[i]; }
  int cause(std::size_t i) const { return causes_[i]; }
  double cox_weight(std::size_t i) const { return weights_[i]; }
  double predictor(std::size_t i, std::size_t k) const { return predictors_[i * num_predictors_ + k]; }

  // Cumulative exposure at location x, summed over all observations including censored ones.
  double exposure(double x) const;
  // Cox-weighted kernel of observation i at location x.
  double kernel_at(std::size_t i, double x) const { return weights_[i] * eval_kernel(kernel_, times_[i], x); }

  const std::vector<double>& breakpoints() const { return breaks_; }
  const std::vector<double>& breakpoint_exposure() const { return break_exposure_; }
  std::size_t num_panels() const { return breaks_.size() - 1; }
  // Nodes 2p and 2p+1 belong to panel p.
  const std::vector<double>& node_x() const { return node_x_; }
  const std::vector<double>& node_weight() const { return node_w_; }
  const std::vector<double>& node_exposure() const { return node_exposure_; }
  // Index of the breakpoint equal to x (within rounding), or the first one above it.
  std::size_t breakpoint_index(double x) const;

  /**
   * Integral over [0, min(upper, t_max)] of f(x, exposure(x)). Panels containing
   * `extra1` or `extra2` (extra kinks of the integrand) are split there.
   */
  template <class F>
  auto integrate(F&& f, double upper, double extra1 = -1.0, double extra2 = -1.0) const;
  // Same, with f(node, x, exposure) where node indexes node_x() or is -1 off the cached nodes.
  template <class F>
  auto integrate_indexed(F&& f, double upper, double extra1 = -1.0, double extra2 = -1.0) const;

 private:
  void rebuild_weights();
  void rebuild_exposure();
  template <class F>
  auto integrate_piece(F& f, double a, double b, double extra1, double extra2) const;

  KernelSpec kernel_;
  std::vector<double> eta_;
  int num_causes_ = 1;
  double t_max_ = 0.0;
  std::size_t num_predictors_ = 0;
  std::vector<double> times_;
  std::vector<int> causes_;
  std::vector<double> predictors_;
  std::vector<double> weights_;

  // Observations sorted by time with suffix sums for closed-form exposure.
  std::vector<std::size_t> order_;
  std::vector<double> sorted_times_;
  std::vector<double> suffix_weight_;
  std::vector<double> suffix_weighted_time_;
  std::vector<double> suffix_decay_;

  std::vector<double> breaks_;
  std::vector<double> break_exposure_;
  std::vector<double> node_x_;
  std::vector<double> node_w_;
  std::vector<double> node_exposure_;
};

namespace detail {
inline constexpr double kGaussOffset = 0.57735026918962576451;  // 1/sqrt(3)

// Two integrands carried through one quadrature pass.
struct Pair {
  double first = 0.0;
  double second = 0.0;
};
inline Pair operator+(Pair a, Pair b) { return {a.first + b.first, a.second + b.second}; }
inline Pair operator*(double w, Pair a) { return {w * a.first, w * a.second}; }
}  // namespace detail

template <class F>
auto KernelAggregate::integrate_piece(F& f, double a, double b, double extra1, double extra2) const {
  using R = std::decay_t<decltype(f(std::ptrdiff_t{-1}, 0.0, 0.0))>;
  if (b <= a) return R{};
  if (extra1 > a && extra1 < b)
    return integrate_piece(f, a, extra1, -1.0, extra2) + integrate_piece(f, extra1, b, -1.0, extra2);
  if (extra2 > a && extra2 < b)
    return integrate_piece(f, a, extra2, extra1, -1.0) + integrate_piece(f, extra2, b, extra1, -1.0);
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double x1 = mid - half * detail::kGaussOffset;
  const double x2 = mid + half * detail::kGaussOffset;
  return half * (f(std::ptrdiff_t{-1}, x1, exposure(x1)) + f(std::ptrdiff_t{-1}, x2, exposure(x2)));
}

template <class F>
auto KernelAggregate::integrate(F&& f, double upper, double extra1, double extra2) const {
  return integrate_indexed([&f](std::ptrdiff_t, double x, double K) { return f(x, K); }, upper, extra1, extra2);
}

template <class F>
auto KernelAggregate::integrate_indexed(F&& f, double upper, double extra1, double extra2) const {
  using R = std::decay_t<decltype(f(std::ptrdiff_t{-1}, 0.0, 0.0))>;
  upper = std::min(upper, t_max_);
  R total{};
  if (upper <= 0.0) return total;
  const std::size_t end = breakpoint_index(upper);  // breaks_[end] >= upper
  auto inside = [](double e, double a, double b) { return e > a && e < b; };
  const std::size_t full = (end < breaks_.size() && breaks_[end] <= upper) ? end : end - 1;
  for (std::size_t p = 0; p < full; ++p) {
    const double a = breaks_[p], b = breaks_[p + 1];
    if (inside(extra1, a, b) || inside(extra2, a, b)) {
      total = total + integrate_piece(f, a, b, extra1, extra2);
    } else {
      const auto n0 = static_cast<std::ptrdiff_t>(2 * p), n1 = n0 + 1;
      total = total + (node_w_[n0] * f(n0, node_x_[n0], node_exposure_[n0]) +
                       node_w_[n1] * f(n1, node_x_[n1], node_exposure_[n1]));
    }
  }
  if (breaks_[full] < upper) total = total + integrate_piece(f, breaks_[full], upper, extra1, extra2);
  return total;
}

}  // namespace hcrm
