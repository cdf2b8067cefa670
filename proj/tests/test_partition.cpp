#include <doctest.h>

#include <chrono>
#include <cmath>
#include <random>

#include "hcrm/errors.hpp"
#include "hcrm/levy.hpp"
#include "hcrm/partition.hpp"
#include "oracles.hpp"

using namespace hcrm;

namespace {

Dataset make_data(std::vector<std::pair<double, int>> rows, int causes, double t_max = 0.0) {
  Dataset d;
  d.num_causes = causes;
  for (auto [t, c] : rows) d.observations.push_back({t, c, {}});
  d.t_max = t_max > 0.0 ? t_max : d.max_time();
  return d;
}

double rel(double a, double b) { return std::fabs(a - b) / std::fabs(b); }

}  // namespace

TEST_SUITE("partition") {

TEST_CASE("insert and remove keep the bookkeeping consistent") {
  const std::vector<int> causes{1, 2, 0, 1, 2, 1, 0, 2};
  LatentState s(2, causes);
  CHECK(s.audit().empty());
  CHECK_THROWS_AS(s.insert_observation(2, Choice::new_cluster(0.1)), std::logic_error);
  s.insert_observation(0, Choice::new_cluster(0.1));
  s.insert_observation(1, Choice::new_table(0));
  s.insert_observation(3, Choice::existing_table(0, 0));
  s.insert_observation(4, Choice::new_cluster(0.2));
  s.insert_observation(5, Choice::new_table(1));
  s.insert_observation(7, Choice::existing_table(1, 0));
  CHECK_THROWS_AS(s.insert_observation(7, Choice::new_table(0)), std::logic_error);
  CHECK_THROWS_AS(s.insert_observation(7, Choice::existing_table(0, 0, 1)), std::logic_error);
  CHECK(s.audit().empty());
  CHECK(s.audit(nullptr, true).empty());
  CHECK(s.num_clusters() == 2);
  CHECK(s.cluster(0).size() == 3);
  CHECK(s.cluster(0).num_tables() == 2);
  CHECK(s.cluster(0).cause_size(1) == 2);
  CHECK(s.cluster(1).cause_tables(2) == 1);
  CHECK(!s.audit(nullptr, false, true).empty());

  // Random removals and reinsertions never break the invariants.
  std::mt19937_64 rng(8);
  for (int step = 0; step < 2000; ++step) {
    std::size_t i = rng() % causes.size();
    if (causes[i] == 0) continue;
    s.remove_observation(i);
    REQUIRE(s.audit().empty());
    const int k = s.num_clusters();
    const int pick = k > 0 ? static_cast<int>(rng() % (k + 1)) : k;
    if (pick == k) {
      s.insert_observation(i, Choice::new_cluster(0.05 * (rng() % 10)));
    } else {
      const int tables = s.cluster(pick).cause_tables(causes[i]);
      const int h = static_cast<int>(rng() % (tables + 1));
      if (h == tables) s.insert_observation(i, Choice::new_table(pick));
      else s.insert_observation(i, Choice::existing_table(pick, h));
    }
    REQUIRE(s.audit(nullptr, true).empty());
    REQUIRE(s.num_assigned() == 6);
  }
  CHECK(!s.assigned(2));
  CHECK(!s.assigned(6));
}

TEST_CASE("audit catches location and completeness violations") {
  const Dataset d = make_data({{1.0, 1}, {2.0, 1}, {3.0, 0}}, 1);
  const KernelAggregate agg(d, KernelSpec::dykstra_laud(1.0));
  LatentState s = LatentState::for_data(agg);
  s.insert_observation(0, Choice::new_cluster(0.5));
  CHECK(s.audit(&agg).empty());
  CHECK(!s.audit(&agg, true).empty());
  s.insert_observation(1, Choice::existing_table(0, 0));
  CHECK(s.audit(&agg, true).empty());
  s.set_location(0, 1.5);
  CHECK(!s.audit(&agg).empty());
}

TEST_CASE("json round trip") {
  LatentState s(3, {1, 2, 3, 1, 0});
  s.insert_observation(0, Choice::new_cluster(0.25));
  s.insert_observation(1, Choice::new_table(0));
  s.insert_observation(2, Choice::new_cluster(0.75));
  s.insert_observation(3, Choice::existing_table(0, 0));
  const LatentState b = LatentState::from_json(s.to_json());
  CHECK(b.to_json() == s.to_json());
  CHECK(b.cluster(1).location == 0.75);
  auto bad = s.to_json();
  bad["assignment"][4] = {0, 0};
  CHECK_THROWS_AS(LatentState::from_json(bad), DataError);
  CHECK_THROWS_AS(LatentState::from_json(nlohmann::json{{"causes", 1}}), DataError);
}

TEST_CASE("partition enumeration counts") {
  // Three events of one cause: 5 cluster partitions, tables refine each cluster.
  const Dataset one = make_data({{0.5, 1}, {1.0, 1}, {1.5, 1}}, 1);
  CHECK(oracle::enumerate_partitions(one, false).size() == 1 + 3 * 2 + 5);
  CHECK(oracle::enumerate_partitions(one, true).size() == 5);
  const Dataset two = make_data({{0.5, 1}, {1.0, 2}, {1.5, 0}}, 2);
  CHECK(oracle::enumerate_partitions(two, false).size() == 2);
  CHECK(oracle::enumerate_partitions(two, true).size() == 1);
  for (const auto& s : oracle::enumerate_partitions(one, false)) CHECK(s.audit(nullptr, true).empty());
}

TEST_CASE("log marginal of a single event in closed form") {
  const Dataset d = make_data({{1.0, 1}}, 2, 2.0);
  const KernelAggregate agg(d, KernelSpec::dykstra_laud(1.5));
  HCRMParams p;
  p.theta = 2.0;
  LatentState s = LatentState::for_data(agg);
  s.insert_observation(0, Choice::new_cluster(0.4));
  const double K = 1.5 * 0.6;
  const double expected = std::log(1.5) - p.theta * base_integral(agg, p) + log_tau(p.bottom(), 1, K) +
                          log_tau(p.root(), 1, 2 * psi(p.bottom(), K)) + std::log(p.theta);
  CHECK(log_marginal(s, agg, p) == doctest::Approx(expected).epsilon(1e-14));
  s.set_location(0, 1.2);
  CHECK(log_marginal(s, agg, p) == -std::numeric_limits<double>::infinity());
}

TEST_CASE("partition sum matches the direct marginal density") {
  struct Case {
    std::vector<std::pair<double, int>> rows;
    int causes;
    KernelSpec kernel;
    bool independent;
    double sigma;
  };
  const std::vector<Case> cases{
      {{{0.6, 1}, {1.3, 2}}, 2, KernelSpec::dykstra_laud(1.2), false, 0.25},
      {{{0.6, 1}, {1.3, 1}, {1.8, 0}}, 2, KernelSpec::ornstein_uhlenbeck(1.5), false, 0.0},
      {{{0.4, 1}, {0.9, 2}, {1.4, 1}}, 2, KernelSpec::dykstra_laud(0.8), false, 0.4},
      {{{0.5, 1}, {0.8, 1}, {1.1, 1}}, 1, KernelSpec::rectangular(1.0, 0.9), false, 0.25},
      {{{0.4, 1}, {0.9, 2}, {1.4, 1}}, 2, KernelSpec::dykstra_laud(0.8), true, 0.25},
  };
  for (const auto& c : cases) {
    const Dataset d = make_data(c.rows, c.causes);
    HCRMParams p;
    p.sigma = c.sigma;
    p.sigma0 = 0.3;
    p.theta = 1.7;
    p.independent_mode = c.independent;
    const auto start = std::chrono::steady_clock::now();
    const double sum = oracle::partition_sum_marginal(d, c.kernel, p);
    const double direct = oracle::direct_marginal_density(d, c.kernel, p);
    CAPTURE(sum);
    CAPTURE(direct);
    CHECK(rel(sum, direct) < 1e-6);
    CHECK(std::chrono::steady_clock::now() - start < std::chrono::minutes(1));
  }
}

}  // TEST_SUITE
