#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <stdexcept>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "hcrm/levy.hpp"

namespace oracle {

using hcrm::Dataset;
using hcrm::HCRMParams;
using hcrm::KernelSpec;

namespace {

template <class F>
double integrate_pieces(F&& f, const std::vector<double>& breaks) {
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < breaks.size(); ++k)
    total += boost::math::quadrature::gauss_kronrod<double, 21>::integrate(f, breaks[k], breaks[k + 1], 12, 1e-12);
  return total;
}

std::vector<double> cox_weights(const Dataset& data, const std::vector<double>& eta) {
  std::vector<double> w;
  for (const auto& o : data.observations) {
    double lin = 0.0;
    for (std::size_t k = 0; k < eta.size(); ++k) lin += eta[k] * o.predictors.at(k);
    w.push_back(std::exp(lin));
  }
  return w;
}

// Levy-integral quantities at one location, all from quadrature.
struct Terms {
  double exposure;
  double tau[4];   // bottom tau(m; K), m = 1..3
  double tau0[4];  // root tau0(m; D psi(K))
  double base;     // exponent density: psi0(D psi(K)) or D psi(K)
};

}  // namespace

std::vector<double> location_breaks(const Dataset& data, const KernelSpec& kernel) {
  std::vector<double> b{0.0, data.t_max};
  for (const auto& o : data.observations) {
    b.push_back(o.time);
    if (kernel.kind == hcrm::KernelKind::Rectangular && o.time - kernel.bandwidth > 0.0)
      b.push_back(o.time - kernel.bandwidth);
  }
  std::sort(b.begin(), b.end());
  b.erase(std::unique(b.begin(), b.end()), b.end());
  b.erase(std::remove_if(b.begin(), b.end(), [&](double x) { return x > data.t_max; }), b.end());
  return b;
}

double direct_marginal_density(const Dataset& data, const KernelSpec& kernel, const HCRMParams& params,
                               const std::vector<double>& eta) {
  const auto w = cox_weights(data, eta);
  std::vector<std::size_t> events;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (!data.observations[i].censored()) events.push_back(i);
  const std::size_t n = events.size();
  if (n < 1 || n > 3) throw std::invalid_argument("direct oracle handles 1 to 3 events");
  const double d = data.num_causes;
  const double theta = params.theta;
  const hcrm::GGMeasure bottom = params.bottom(), root = params.root();

  std::map<double, Terms> memo;
  auto terms = [&](double x) -> const Terms& {
    auto it = memo.find(x);
    if (it != memo.end()) return it->second;
    Terms t{};
    for (std::size_t i = 0; i < data.size(); ++i)
      t.exposure += w[i] * hcrm::kernel_primitive(kernel, data.observations[i].time, x);
    for (int m = 1; m <= 3; ++m) t.tau[m] = hcrm::tau_quadrature(bottom, m, t.exposure);
    const double s = d * hcrm::psi_quadrature(bottom, t.exposure);
    if (params.independent_mode) {
      t.base = s;
    } else {
      for (int m = 1; m <= 3; ++m) t.tau0[m] = hcrm::tau_quadrature(root, m, s);
      t.base = hcrm::psi_quadrature(root, s);
    }
    return memo.emplace(x, t).first->second;
  };
  auto k = [&](std::size_t e, double x) {
    const std::size_t i = events[e];
    return w[i] * hcrm::eval_kernel(kernel, data.observations[i].time, x);
  };
  auto cause = [&](std::size_t e) { return data.observations[events[e]].cause; };
  const bool indep = params.independent_mode;

  // Derivatives of the exponent density G with respect to the event perturbations.
  // psi' = tau(1), psi'' = -tau(2), psi''' = tau(3); likewise at the root.
  auto g1 = [&](const Terms& t) { return indep ? t.tau[1] : t.tau0[1] * t.tau[1]; };
  auto g2 = [&](const Terms& t, bool same) {
    if (indep) return same ? -t.tau[2] : 0.0;
    return -t.tau0[2] * t.tau[1] * t.tau[1] - (same ? t.tau0[1] * t.tau[2] : 0.0);
  };
  auto g3 = [&](const Terms& t, int pairs_same, bool all_same) {
    if (indep) return all_same ? t.tau[3] : 0.0;
    return t.tau0[3] * std::pow(t.tau[1], 3) + t.tau0[2] * t.tau[2] * t.tau[1] * pairs_same +
           (all_same ? t.tau0[1] * t.tau[3] : 0.0);
  };

  const auto breaks = location_breaks(data, kernel);
  const double phi0 = theta * integrate_pieces([&](double x) { return terms(x).base; }, breaks);
  std::vector<double> phi1(n);
  for (std::size_t a = 0; a < n; ++a)
    phi1[a] = theta * integrate_pieces([&](double x) { return g1(terms(x)) * k(a, x); }, breaks);
  auto phi2 = [&](std::size_t a, std::size_t b) {
    const bool same = cause(a) == cause(b);
    return theta * integrate_pieces([&](double x) { return g2(terms(x), same) * k(a, x) * k(b, x); }, breaks);
  };
  double bracket = 0.0;
  if (n == 1) {
    bracket = phi1[0];
  } else if (n == 2) {
    bracket = phi1[0] * phi1[1] - phi2(0, 1);
  } else {
    const int pairs = (cause(0) == cause(1)) + (cause(0) == cause(2)) + (cause(1) == cause(2));
    const bool all = cause(0) == cause(1) && cause(1) == cause(2);
    const double phi123 = theta * integrate_pieces(
                                      [&](double x) { return g3(terms(x), pairs, all) * k(0, x) * k(1, x) * k(2, x); },
                                      breaks);
    bracket = phi1[0] * phi1[1] * phi1[2] - phi2(0, 1) * phi1[2] - phi2(0, 2) * phi1[1] - phi2(1, 2) * phi1[0] +
              phi123;
  }
  return std::exp(-phi0) * bracket;
}

namespace {

// All set partitions of `items` (restricted growth order).
std::vector<std::vector<std::vector<int>>> set_partitions(const std::vector<int>& items) {
  std::vector<std::vector<std::vector<int>>> out;
  std::vector<std::vector<int>> blocks;
  std::function<void(std::size_t)> rec = [&](std::size_t pos) {
    if (pos == items.size()) {
      out.push_back(blocks);
      return;
    }
    for (std::size_t k = 0; k < blocks.size(); ++k) {
      blocks[k].push_back(items[pos]);
      rec(pos + 1);
      blocks[k].pop_back();
    }
    blocks.push_back({items[pos]});
    rec(pos + 1);
    blocks.pop_back();
  };
  rec(0);
  return out;
}

}  // namespace

std::vector<hcrm::LatentState> enumerate_partitions(const Dataset& data, bool independent_mode) {
  std::vector<int> causes, events;
  for (std::size_t i = 0; i < data.size(); ++i) {
    causes.push_back(data.observations[i].cause);
    if (!data.observations[i].censored()) events.push_back(static_cast<int>(i));
  }
  const double placeholder = 0.5 * data.max_time();
  std::vector<hcrm::LatentState> out;
  for (const auto& clusters : set_partitions(events)) {
    // Per cluster, the list of alternative table layouts: vector of tables (each a member list).
    std::vector<std::vector<std::vector<std::vector<int>>>> layouts;
    bool valid = true;
    for (const auto& cl : clusters) {
      std::vector<std::vector<std::vector<int>>> options{{}};
      for (int c = 1; c <= data.num_causes; ++c) {
        std::vector<int> members;
        for (int i : cl)
          if (causes[i] == c) members.push_back(i);
        if (members.empty()) continue;
        std::vector<std::vector<std::vector<int>>> parts;
        if (independent_mode) parts = {{members}};
        else parts = set_partitions(members);
        std::vector<std::vector<std::vector<int>>> next;
        for (const auto& o : options)
          for (const auto& p : parts) {
            auto merged = o;
            merged.insert(merged.end(), p.begin(), p.end());
            next.push_back(merged);
          }
        options = std::move(next);
      }
      if (independent_mode) {
        const int first = causes[cl.front()];
        for (int i : cl) valid = valid && causes[i] == first;
      }
      layouts.push_back(options);
    }
    if (!valid) continue;
    std::vector<std::size_t> pick(layouts.size(), 0);
    while (true) {
      hcrm::LatentState s(data.num_causes, causes);
      for (std::size_t j = 0; j < layouts.size(); ++j) {
        bool first = true;
        std::vector<int> table_count(data.num_causes + 1, 0);
        for (const auto& table : layouts[j][pick[j]]) {
          const int c = causes[table.front()];
          const int h = table_count[c]++;
          for (std::size_t m = 0; m < table.size(); ++m) {
            if (first) {
              s.insert_observation(table[m], hcrm::Choice::new_cluster(placeholder));
              first = false;
            } else if (m == 0) {
              s.insert_observation(table[m], hcrm::Choice::new_table(static_cast<int>(j)));
            } else {
              s.insert_observation(table[m], hcrm::Choice::existing_table(static_cast<int>(j), h));
            }
          }
        }
      }
      out.push_back(std::move(s));
      std::size_t pos = 0;
      while (pos < pick.size() && ++pick[pos] == layouts[pos].size()) pick[pos++] = 0;
      if (pos == pick.size()) break;
    }
  }
  return out;
}

double partition_sum_marginal(const Dataset& data, const KernelSpec& kernel, const HCRMParams& params,
                              const std::vector<double>& eta) {
  const hcrm::KernelAggregate agg(data, kernel, eta);
  const double base = hcrm::base_integral(agg, params);
  const auto breaks = location_breaks(data, kernel);
  double total = 0.0;
  for (auto state : enumerate_partitions(data, params.independent_mode)) {
    const int k = state.num_clusters();
    std::function<double(int)> nest = [&](int j) -> double {
      if (j == k) {
        const double lm = hcrm::log_marginal(state, agg, params, base);
        return std::isfinite(lm) ? std::exp(lm) : 0.0;
      }
      return integrate_pieces(
          [&](double x) {
            state.set_location(j, x);
            return nest(j + 1);
          },
          breaks);
    };
    total += nest(0);
  }
  return total;
}

Dataset random_small_data(std::size_t n, int causes, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  Dataset d;
  d.num_causes = causes;
  for (std::size_t i = 0; i < n; ++i) {
    const int cause = U(rng) < 0.2 && i > 0 ? 0 : 1 + static_cast<int>(rng() % causes);
    d.observations.push_back({0.1 + 2.0 * U(rng), cause, {}});
  }
  d.t_max = d.max_time() * (1.0 + 0.2 * U(rng));
  return d;
}

hcrm::LatentState random_small_state(const Dataset& data, const KernelSpec& kernel, bool independent_mode,
                                     std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::vector<int> causes;
  for (const auto& o : data.observations) causes.push_back(o.cause);
  hcrm::LatentState s(data.num_causes, causes);
  auto fits = [&](int j, std::size_t i) {
    double lo_t = data.observations[i].time, hi_t = lo_t;
    for (int m : s.cluster(j).members) {
      lo_t = std::min(lo_t, data.observations[m].time);
      hi_t = std::max(hi_t, data.observations[m].time);
    }
    const auto [lo, hi] = hcrm::location_support(kernel, lo_t, hi_t);
    const double x = s.cluster(j).location;
    return x >= lo && x <= hi;
  };
  for (std::size_t i = 0; i < data.size(); ++i) {
    const int c = causes[i];
    if (c == 0) continue;
    std::vector<hcrm::Choice> options;
    for (int j = 0; j < s.num_clusters(); ++j) {
      if (!fits(j, i)) continue;
      const int tables = s.cluster(j).cause_tables(c);
      if (independent_mode) {
        if (tables == 1 && s.cluster(j).cause_size(c) == s.cluster(j).size())
          options.push_back(hcrm::Choice::existing_table(j, 0));
        continue;
      }
      for (int h = 0; h < tables; ++h) options.push_back(hcrm::Choice::existing_table(j, h));
      options.push_back(hcrm::Choice::new_table(j));
    }
    const double t = data.observations[i].time;
    const auto [lo, hi] = hcrm::location_support(kernel, t, t);
    options.push_back(hcrm::Choice::new_cluster(lo + (std::min(hi, data.t_max) - lo) * (0.05 + 0.9 * U(rng))));
    s.insert_observation(i, options[rng() % options.size()]);
  }
  return s;
}

}  // namespace oracle
