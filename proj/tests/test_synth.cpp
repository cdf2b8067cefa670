#include <doctest.h>

#include <cmath>

#include "hcrm/errors.hpp"
#include "hcrm/synth.hpp"

using namespace hcrm;

TEST_SUITE("synth") {

TEST_CASE("Weibull law basics") {
  const WeibullLaw w{1.0, 1.0, 0.0};
  CHECK(w.survival(1.0) == doctest::Approx(std::exp(-1.0)));
  CHECK(w.density(0.5) == doctest::Approx(std::exp(-0.5)));
  Rng rng = make_rng(1);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) sum += w.sample(rng);
  CHECK(std::fabs(sum / n - 1.0) < 3.0 / std::sqrt(n) * 1.0 + 1e-12);
  const WeibullLaw shifted{3.0, 1.0, 1.0};
  CHECK(shifted.survival(0.9) == 1.0);
  CHECK(shifted.density(0.9) == 0.0);
  CHECK(shifted.survival(shifted.upper_quantile(1e-8)) == doctest::Approx(1e-8).epsilon(1e-6));
}

TEST_CASE("weibull3 survival matches the generator") {
  const LatentTimesModel m = scenario("weibull3");
  const std::size_t n = 100000;
  const Dataset d = generate(m, n, 17);
  REQUIRE(d.size() == n);
  CHECK(d.num_causes == 3);
  CHECK(d.num_uncensored() == n);
  for (double t : {0.25, 0.5, 1.0}) {
    double alive = 0.0;
    for (const auto& o : d.observations) alive += o.time > t;
    const double p = m.survival(t);
    const double se = std::sqrt(p * (1 - p) / n);
    CAPTURE(t);
    CHECK(std::fabs(alive / n - p) < 3 * se);
  }
}

TEST_CASE("cause probabilities sum to one and match frequencies") {
  for (const auto& name : scenario_names()) {
    const LatentTimesModel m = scenario(name);
    const TrueCurves tc = true_curves(m, {0.0, 0.5, 1.0});
    double total = 0.0;
    for (double p : tc.cause_probability) total += p;
    CAPTURE(name);
    CHECK(std::fabs(total - 1.0) < 1e-6);
  }
  const LatentTimesModel mix = scenario("mixture3");
  const TrueCurves tc = true_curves(mix, {0.0, 1.0});
  const std::size_t n = 1000000;
  const Dataset d = generate(mix, n, 3);
  std::vector<double> freq(3, 0.0);
  for (const auto& o : d.observations) freq[o.cause - 1] += 1.0 / n;
  for (int c = 0; c < 3; ++c) {
    const double p = tc.cause_probability[c];
    CHECK(std::fabs(freq[c] - p) < 3 * std::sqrt(p * (1 - p) / n));
  }
}

TEST_CASE("true curves are consistent") {
  for (const auto& name : scenario_names()) {
    const LatentTimesModel m = scenario(name);
    std::vector<double> times;
    for (int i = 0; i <= 400; ++i) times.push_back(3.0 * i / 400);
    const TrueCurves tc = true_curves(m, times);
    CHECK_NOTHROW(check_estimate_grid(tc.curves));
    for (std::size_t i = 0; i < times.size(); ++i) {
      double sub = 0.0;
      for (int c = 0; c < m.num_causes(); ++c) {
        CHECK(tc.curves.incidence[c][i] ==
              doctest::Approx(tc.hazard[c][i] * tc.curves.survival[i]).epsilon(1e-10));
        sub += tc.curves.subdistribution[c][i];
      }
      CHECK(sub + tc.curves.survival[i] == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("generation is deterministic and validated") {
  const LatentTimesModel m = scenario("weibull2");
  const Dataset a = generate(m, 50, 8), b = generate(m, 50, 8), c = generate(m, 50, 9);
  for (std::size_t i = 0; i < 50; ++i) {
    CHECK(a.observations[i].time == b.observations[i].time);
    CHECK(a.observations[i].cause == b.observations[i].cause);
  }
  CHECK(a.observations[0].time != c.observations[0].time);
  CHECK(a.t_max == a.max_time());

  LatentTimesModel censored = m;
  censored.censoring = {CensoringLaw::Kind::Exponential, 0.5};
  const Dataset dc = generate(censored, 2000, 1);
  CHECK(dc.num_uncensored() < dc.size());

  CHECK_THROWS_AS(scenario("nope"), ConfigError);
  LatentTimesModel bad = m;
  bad.causes[0].weights = {0.7};
  bad.causes[0].components = {{1.0, 1.0, 0.0}};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK_THROWS_AS(generate(m, 0, 1), ConfigError);
}

TEST_CASE("json round trips") {
  const LatentTimesModel m = scenario("mixture3");
  const LatentTimesModel back = latent_model_from_json(to_json(m));
  CHECK(to_json(back) == to_json(m));
  const TrueCurves tc = true_curves(m, {0.0, 0.5, 1.5});
  const TrueCurves tb = true_curves_from_json(to_json(tc));
  CHECK(tb.cause_probability == tc.cause_probability);
  CHECK(tb.curves.survival == tc.curves.survival);
  CHECK(tb.hazard == tc.hazard);
}

}  // TEST_SUITE
