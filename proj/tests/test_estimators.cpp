#include <doctest.h>

#include <cmath>
#include <random>

#include "hcrm/errors.hpp"
#include "hcrm/estimators.hpp"
#include "oracles.hpp"

using namespace hcrm;

namespace {

Dataset rows(std::vector<std::pair<double, int>> r, int causes) {
  Dataset d;
  d.num_causes = causes;
  for (auto [t, c] : r) d.observations.push_back({t, c, {}});
  d.t_max = d.max_time();
  return d;
}

KernelSpec kernel_for(int k) {
  switch (k % 3) {
    case 0: return KernelSpec::dykstra_laud(0.7);
    case 1: return KernelSpec::rectangular(1.1, 0.8);
    default: return KernelSpec::ornstein_uhlenbeck(1.3);
  }
}

HCRMParams params_for(int k, bool indep) {
  HCRMParams p;
  p.sigma = 0.1 * (k % 5);
  p.sigma0 = 0.15 * (k % 4);
  p.beta = 0.5 + 0.1 * (k % 7);
  p.theta = 0.8 + 0.05 * (k % 11);
  p.independent_mode = indep;
  return p;
}

}  // namespace

TEST_SUITE("estimators") {

TEST_CASE("empty state: uniform prediction, exchangeable incidence, prior survival") {
  const Dataset d = rows({{0.6, 0}, {1.4, 0}}, 3);
  for (int k = 0; k < 6; ++k) {
    const KernelSpec kernel = kernel_for(k);
    const HCRMParams p = params_for(k + 1, k >= 3);
    const KernelAggregate agg(d, kernel);
    const LatentState s = LatentState::for_data(agg);
    const ConditionalEstimator est(s, agg, p);
    for (double t : {0.0, 0.3, 1.0, 2.5}) {
      for (double v : est.prediction(t)) CHECK(v == 1.0 / 3.0);
      const auto f = est.incidence(t);
      CHECK(f[0] == doctest::Approx(f[1]).epsilon(1e-14));
      CHECK(f[0] == doctest::Approx(f[2]).epsilon(1e-14));
    }
    CHECK(est.survival(0.0) == 1.0);
  }
}

TEST_CASE("prediction equals the normalized incidence on random small states") {
  std::mt19937_64 rng(21);
  for (int k = 0; k < 100; ++k) {
    const Dataset d = oracle::random_small_data(1 + rng() % 5, 1 + static_cast<int>(rng() % 3), rng);
    const KernelSpec kernel = kernel_for(k);
    const HCRMParams p = params_for(k, k % 4 == 3);
    const KernelAggregate agg(d, kernel);
    const LatentState s = oracle::random_small_state(d, kernel, p.independent_mode, rng);
    REQUIRE(s.audit(&agg, true, p.independent_mode).empty());
    const ConditionalEstimator est(s, agg, p);
    for (double t : {0.05, 0.5, 1.1, 2.3}) {
      std::vector<double> f;
      est.evaluate(t, f);
      double total = 0.0;
      for (double v : f) total += v;
      const auto pred = est.prediction(t);
      if (total == 0.0) {
        // No incidence mass at t (past every kernel's reach): the ratio is undefined, prediction is uniform.
        for (double v : pred) CHECK(v == 1.0 / pred.size());
        continue;
      }
      double norm = 0.0;
      for (std::size_t c = 0; c < f.size(); ++c) {
        CAPTURE(k);
        CAPTURE(t);
        CHECK(std::fabs(pred[c] - f[c] / total) < 1e-8);
        norm += pred[c];
      }
      CHECK(std::fabs(norm - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("incidences sum to the negative survival derivative") {
  std::mt19937_64 rng(5);
  for (int k = 0; k < 12; ++k) {
    const Dataset d = oracle::random_small_data(5, 2, rng);
    const KernelSpec kernel = kernel_for(k);
    const HCRMParams p = params_for(k, k % 4 == 1);
    const KernelAggregate agg(d, kernel);
    const LatentState s = oracle::random_small_state(d, kernel, p.independent_mode, rng);
    const ConditionalEstimator est(s, agg, p);
    for (int g = 1; g <= 20; ++g) {
      const double t = 2.4 * g / 21.0;
      const double h = 1e-5;
      const double deriv = -(est.survival(t + h) - est.survival(t - h)) / (2 * h);
      double total = 0.0;
      for (double v : est.incidence(t)) total += v;
      CAPTURE(k);
      CAPTURE(t);
      // Skip the jump points of the hazard (a location or rectangular edge inside (t-h, t+h)).
      bool kink = false;
      for (const auto& cl : s.clusters())
        kink = kink || std::fabs(cl.location - t) < 2 * h || std::fabs(cl.location + kernel.bandwidth - t) < 2 * h;
      if (kink) continue;
      CHECK(std::fabs(total - deriv) <= 1e-4 * std::fabs(total));
    }
  }
}

TEST_CASE("properness over a long horizon") {
  const Dataset d = rows({{0.5, 1}, {0.9, 2}, {1.2, 1}, {1.5, 0}}, 2);
  const KernelSpec kernel = KernelSpec::dykstra_laud(1.0);
  const KernelAggregate agg(d, kernel);
  HCRMParams p;
  LatentState s = LatentState::for_data(agg);
  s.insert_observation(0, Choice::new_cluster(0.3));
  s.insert_observation(1, Choice::new_table(0));
  s.insert_observation(2, Choice::new_cluster(1.0));
  const ConditionalEstimator est(s, agg, p);
  std::vector<double> times;
  for (int i = 0; i <= 20000; ++i) times.push_back(60.0 * i / 20000.0);
  std::vector<std::vector<double>> f(2);
  double last = 1.0;
  for (double t : times) {
    std::vector<double> inc;
    last = est.evaluate(t, inc);
    f[0].push_back(inc[0]);
    f[1].push_back(inc[1]);
  }
  const double mass = cumulative_trapezoid(times, f[0]).back() + cumulative_trapezoid(times, f[1]).back();
  CHECK(std::fabs(mass + last - 1.0) < 1e-3);
}

TEST_CASE("independent mode factorizes over single-risk fits") {
  std::mt19937_64 rng(9);
  for (int k = 0; k < 30; ++k) {
    const Dataset d = oracle::random_small_data(5, 2 + static_cast<int>(rng() % 2), rng);
    const KernelSpec kernel = kernel_for(k);
    const HCRMParams p = params_for(k, true);
    const KernelAggregate agg(d, kernel);
    const LatentState s = oracle::random_small_state(d, kernel, true, rng);
    const ConditionalEstimator joint(s, agg, p);
    std::vector<Dataset> single_data;
    std::vector<KernelAggregate> single_agg;
    single_data.reserve(d.num_causes);
    single_agg.reserve(d.num_causes);
    std::vector<LatentState> single_state;
    for (int c = 1; c <= d.num_causes; ++c) {
      Dataset dc = d;
      dc.num_causes = 1;
      for (auto& o : dc.observations) o.cause = o.cause == c ? 1 : 0;
      single_data.push_back(dc);
      single_agg.emplace_back(single_data.back(), kernel);
      std::vector<int> causes;
      for (const auto& o : dc.observations) causes.push_back(o.cause);
      LatentState sc(1, causes);
      for (const auto& cl : s.clusters()) {
        if (cl.cause_size(c) == 0) continue;
        bool first = true;
        int j = -1;
        for (int m : cl.members) {
          if (first) j = sc.insert_observation(m, Choice::new_cluster(cl.location));
          else sc.insert_observation(m, Choice::existing_table(j, 0));
          first = false;
        }
      }
      single_state.push_back(sc);
    }
    for (double t : {0.2, 0.7, 1.5, 2.2}) {
      double product = 1.0;
      for (int c = 0; c < d.num_causes; ++c)
        product *= ConditionalEstimator(single_state[c], single_agg[c], p).survival(t);
      CHECK(std::fabs(joint.survival(t) - product) <= 1e-10 * product);
    }
  }
}

TEST_CASE("estimates are valid probabilities") {
  std::mt19937_64 rng(13);
  for (int k = 0; k < 20; ++k) {
    const Dataset d = oracle::random_small_data(5, 2, rng);
    const KernelSpec kernel = kernel_for(k);
    const HCRMParams p = params_for(k, false);
    const KernelAggregate agg(d, kernel);
    const LatentState s = oracle::random_small_state(d, kernel, false, rng);
    double prev = 1.0;
    for (double t = 0.0; t < 3.0; t += 0.1) {
      const double v = conditional_survival(s, agg, p, t);
      CHECK(v > 0.0);
      CHECK(v <= prev + 1e-15);
      prev = v;
      CHECK(conditional_incidence(s, agg, p, t, 1) >= 0.0);
      const auto pc = prediction_curve(s, agg, p, t);
      CHECK(pc[0] + pc[1] == doctest::Approx(1.0));
    }
  }
}

TEST_CASE("Kaplan-Meier and Aalen-Johansen hand examples") {
  const StepFunction km = kaplan_meier(rows({{1.0, 1}, {2.0, 0}, {3.0, 1}}, 1));
  CHECK(km(0.5) == 1.0);
  CHECK(km(1.0) == doctest::Approx(2.0 / 3.0));
  CHECK(km(2.9) == doctest::Approx(2.0 / 3.0));
  CHECK(km(3.0) == 0.0);
  CHECK(kaplan_meier(rows({{1.0, 0}, {2.0, 0}}, 1))(5.0) == 1.0);
  const StepFunction emp = kaplan_meier(rows({{1.0, 1}, {2.0, 1}, {3.0, 1}, {4.0, 1}}, 1));
  CHECK(emp(2.5) == doctest::Approx(0.5));

  const Dataset two = rows({{1.0, 1}, {2.0, 2}}, 2);
  CHECK(aalen_johansen(two, 1)(0.5) == 0.0);
  CHECK(aalen_johansen(two, 1)(1.0) == doctest::Approx(0.5));
  CHECK(aalen_johansen(two, 1)(7.0) == doctest::Approx(0.5));
  CHECK(aalen_johansen(two, 2)(1.5) == 0.0);
  CHECK(aalen_johansen(two, 2)(2.0) == doctest::Approx(0.5));

  std::mt19937_64 rng(1);
  const Dataset single = oracle::random_small_data(30, 1, rng);
  const StepFunction s1 = kaplan_meier(single), f1 = aalen_johansen(single, 1);
  for (double t = 0.0; t < 3.0; t += 0.01) CHECK(f1(t) == doctest::Approx(1.0 - s1(t)).epsilon(1e-12));

  Dataset uncensored = oracle::random_small_data(40, 3, rng);
  for (auto& o : uncensored.observations)
    if (o.cause == 0) o.cause = 2;
  const StepFunction su = kaplan_meier(uncensored);
  for (const auto& o : uncensored.observations) {
    double total = su(o.time);
    for (int c = 1; c <= 3; ++c) total += aalen_johansen(uncensored, c)(o.time);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("error metrics") {
  EstimateGrid truth;
  truth.times = {0.0, 1.0, 2.0};
  truth.survival = {1.0, 0.7, 0.4};
  truth.incidence = {{0.3, 0.3, 0.3}};
  truth.subdistribution = {{0.0, 0.3, 0.6}};
  truth.prediction = {{1.0, 1.0, 1.0}};
  const ErrorMetrics zero = error_metrics(truth, truth, {0.5});
  CHECK(zero.total_variation[0] == 0.0);
  CHECK(zero.kolmogorov[0] == 0.0);
  CHECK(zero.survival_kolmogorov == 0.0);

  EstimateGrid shifted = truth;
  for (double& v : shifted.subdistribution[0]) v += 0.1;
  for (double& v : shifted.incidence[0]) v += 0.05;
  shifted.survival[1] = 0.6;
  const ErrorMetrics m = error_metrics(shifted, truth, {0.5});
  CHECK(m.kolmogorov[0] == doctest::Approx(0.2));
  CHECK(m.survival_kolmogorov == doctest::Approx(0.1));
  const ErrorMetrics m2 = error_metrics(shifted, truth, {1.0});
  CHECK(m2.total_variation[0] == doctest::Approx(0.5 * m.total_variation[0]));
  CHECK(m.total_variation[0] == doctest::Approx(0.05 * 2.0 / (2.0 * 0.5)));

  CHECK_THROWS_AS(error_metrics(truth, truth, {0.0}), DataError);
  EstimateGrid other = truth;
  other.times[1] = 1.5;
  CHECK_THROWS_AS(error_metrics(other, truth, {0.5}), DataError);
}

TEST_CASE("step Kolmogorov distance is exact at jumps") {
  StepFunction step;
  step.times = {1.0};
  step.values = {0.5};
  // truth 1 - t/2 on [0, 2]: worst gap is just before the jump (|1 - 0.5|) = 0.5, after it 0
  CHECK(step_kolmogorov_distance(step, [](double t) { return 1.0 - t / 2; }, 2.0) == doctest::Approx(0.5));
}

TEST_CASE("quantiles and grids") {
  std::vector<double> v{4.0, 1.0, 3.0, 2.0};
  CHECK(quantile(v, 0.0) == 1.0);
  CHECK(quantile(v, 1.0) == 4.0);
  CHECK(quantile(v, 0.5) == doctest::Approx(2.5));
  CHECK(quantile(v, 0.25) == doctest::Approx(1.75));
  const Dataset d = rows({{1.0, 1}, {2.0, 1}}, 1);
  const auto g = default_grid(d);
  REQUIRE(g.size() == 200);
  CHECK(g.front() == 0.0);
  CHECK(g.back() == doctest::Approx(2.1));
}

TEST_CASE("aggregate of one sample equals its conditional estimate") {
  std::mt19937_64 rng(3);
  const Dataset d = oracle::random_small_data(5, 2, rng);
  const KernelSpec kernel = KernelSpec::ornstein_uhlenbeck(1.2);
  const KernelAggregate agg(d, kernel);
  HCRMParams p;
  p.theta = 2.0;
  ChainSample sample;
  sample.state = oracle::random_small_state(d, kernel, false, rng);
  sample.theta = 2.0;
  sample.kernel = kernel;
  sample.eta = {};
  const auto times = default_grid(d, 40);
  const EstimateGrid g = aggregate_chain({sample}, d, p, times);
  CHECK_NOTHROW(check_estimate_grid(g));
  CHECK(!g.bands);
  const ConditionalEstimator est(sample.state, agg, p);
  for (std::size_t i = 0; i < times.size(); ++i) {
    std::vector<double> f;
    const double s = est.evaluate(times[i], f);
    CHECK(g.survival[i] == doctest::Approx(s).epsilon(1e-13));
    const auto pred = est.prediction(times[i]);
    for (int c = 0; c < 2; ++c) {
      CHECK(g.incidence[c][i] == doctest::Approx(f[c]).epsilon(1e-13));
      CHECK(g.prediction[c][i] == doctest::Approx(pred[c]).epsilon(1e-8));
    }
  }
  CHECK_THROWS(aggregate_chain({}, d, p, times));
}

TEST_CASE("bands contain the point estimate") {
  const Dataset d = rows({{0.5, 1}, {0.9, 2}, {1.2, 1}, {1.5, 0}}, 2);
  const KernelSpec kernel = KernelSpec::dykstra_laud(1.0);
  const KernelAggregate agg(d, kernel);
  HCRMParams p;
  ChainSample sample;
  sample.state = LatentState::for_data(agg);
  sample.state.insert_observation(0, Choice::new_cluster(0.3));
  sample.state.insert_observation(1, Choice::new_table(0));
  sample.state.insert_observation(2, Choice::new_cluster(1.0));
  sample.theta = 1.0;
  sample.kernel = kernel;
  AggregateOptions opt;
  opt.conditional_draws = 400;
  const auto times = default_grid(d, 50);
  const EstimateGrid g = aggregate_chain({sample}, d, p, times, opt);
  REQUIRE(g.bands);
  int inside = 0;
  for (std::size_t i = 0; i < times.size(); ++i)
    inside += g.bands->survival_lower[i] <= g.survival[i] && g.survival[i] <= g.bands->survival_upper[i];
  CHECK(inside >= 0.95 * times.size());
}

}  // TEST_SUITE
