#include "hcrm/partition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "hcrm/errors.hpp"
#include "hcrm/levy.hpp"

namespace hcrm {

int Cluster::num_tables() const {
  int r = 0;
  for (const auto& t : tables) r += static_cast<int>(t.size());
  return r;
}

int Cluster::cause_size(int cause) const {
  const auto& t = tables[cause - 1];
  return std::accumulate(t.begin(), t.end(), 0);
}

LatentState::LatentState(int num_causes, std::vector<int> causes)
    : num_causes_(num_causes), causes_(std::move(causes)), assignment_(causes_.size()) {
  if (num_causes_ < 1) throw ConfigError("number of causes must be at least 1");
  for (int c : causes_)
    if (c < 0 || c > num_causes_) throw DataError("cause out of range for latent state");
}

LatentState LatentState::for_data(const KernelAggregate& agg) {
  std::vector<int> causes(agg.size());
  for (std::size_t i = 0; i < agg.size(); ++i) causes[i] = agg.cause(i);
  return LatentState(agg.num_causes(), std::move(causes));
}

int LatentState::num_assigned() const {
  int n = 0;
  for (const auto& a : assignment_) n += a.cluster >= 0 ? 1 : 0;
  return n;
}

void LatentState::remove_observation(std::size_t i) {
  if (i >= causes_.size()) throw std::out_of_range("observation index");
  if (causes_[i] == 0) throw std::logic_error("censored observations are never in the partition");
  const Assignment a = assignment_[i];
  if (a.cluster < 0) throw std::logic_error("observation is not assigned");
  const int c = causes_[i];
  Cluster& cl = clusters_[a.cluster];
  auto& sizes = cl.tables[c - 1];
  cl.members.erase(std::find(cl.members.begin(), cl.members.end(), static_cast<int>(i)));
  if (--sizes[a.table] == 0) {
    const int last = static_cast<int>(sizes.size()) - 1;
    if (a.table != last) {
      sizes[a.table] = sizes[last];
      for (int m : cl.members)
        if (causes_[m] == c && assignment_[m].table == last) assignment_[m].table = a.table;
    }
    sizes.pop_back();
  }
  if (cl.members.empty()) {
    const int last = static_cast<int>(clusters_.size()) - 1;
    if (a.cluster != last) {
      clusters_[a.cluster] = std::move(clusters_[last]);
      for (int m : clusters_[a.cluster].members) assignment_[m].cluster = a.cluster;
    }
    clusters_.pop_back();
  }
  assignment_[i] = Assignment{};
}

int LatentState::insert_observation(std::size_t i, const Choice& choice) {
  if (i >= causes_.size()) throw std::out_of_range("observation index");
  const int c = causes_[i];
  if (c == 0) throw std::logic_error("censored observations are never in the partition");
  if (assignment_[i].cluster >= 0) throw std::logic_error("observation is already assigned");
  if (choice.cause != 0 && choice.cause != c) throw std::logic_error("table belongs to a different cause");
  switch (choice.kind) {
    case Choice::Kind::ExistingTable: {
      if (choice.cluster < 0 || choice.cluster >= num_clusters()) throw std::out_of_range("cluster index");
      auto& sizes = clusters_[choice.cluster].tables[c - 1];
      if (choice.table < 0 || choice.table >= static_cast<int>(sizes.size()))
        throw std::logic_error("no such table for this cause");
      ++sizes[choice.table];
      clusters_[choice.cluster].members.push_back(static_cast<int>(i));
      assignment_[i] = {choice.cluster, choice.table};
      return choice.cluster;
    }
    case Choice::Kind::NewTable: {
      if (choice.cluster < 0 || choice.cluster >= num_clusters()) throw std::out_of_range("cluster index");
      auto& sizes = clusters_[choice.cluster].tables[c - 1];
      sizes.push_back(1);
      clusters_[choice.cluster].members.push_back(static_cast<int>(i));
      assignment_[i] = {choice.cluster, static_cast<int>(sizes.size()) - 1};
      return choice.cluster;
    }
    case Choice::Kind::NewCluster: {
      Cluster cl;
      cl.location = choice.location;
      cl.members.push_back(static_cast<int>(i));
      cl.tables.assign(num_causes_, {});
      cl.tables[c - 1].push_back(1);
      clusters_.push_back(std::move(cl));
      assignment_[i] = {num_clusters() - 1, 0};
      return num_clusters() - 1;
    }
  }
  return -1;
}

std::string LatentState::audit(const KernelAggregate* agg, bool require_complete, bool single_level) const {
  const int k = num_clusters();
  std::vector<std::vector<std::vector<int>>> counted(k);
  for (int j = 0; j < k; ++j) {
    if (static_cast<int>(clusters_[j].tables.size()) != num_causes_) return "cluster table list has wrong cause count";
    counted[j].resize(num_causes_);
    for (int c = 1; c <= num_causes_; ++c) counted[j][c - 1].assign(clusters_[j].tables[c - 1].size(), 0);
  }
  int assigned = 0;
  for (std::size_t i = 0; i < causes_.size(); ++i) {
    const auto& a = assignment_[i];
    if (causes_[i] == 0) {
      if (a.cluster >= 0) return "censored observation " + std::to_string(i) + " is in the partition";
      continue;
    }
    if (a.cluster < 0) {
      if (require_complete) return "uncensored observation " + std::to_string(i) + " is unassigned";
      continue;
    }
    if (a.cluster >= k) return "assignment points past the cluster list";
    const auto& sizes = counted[a.cluster][causes_[i] - 1];
    if (a.table < 0 || a.table >= static_cast<int>(sizes.size())) return "assignment points to a missing table";
    ++counted[a.cluster][causes_[i] - 1][a.table];
    ++assigned;
  }
  int member_total = 0;
  for (int j = 0; j < k; ++j) {
    const auto& cl = clusters_[j];
    if (cl.members.empty()) return "empty cluster retained";
    member_total += cl.size();
    int table_total = 0;
    int causes_used = 0;
    for (int c = 1; c <= num_causes_; ++c) {
      const auto& sizes = cl.tables[c - 1];
      if (sizes != counted[j][c - 1]) return "table sizes disagree with assignments";
      for (int q : sizes)
        if (q < 1) return "empty table retained";
      table_total += std::accumulate(sizes.begin(), sizes.end(), 0);
      causes_used += sizes.empty() ? 0 : 1;
      if (single_level && sizes.size() > 1) return "more than one table per cluster in single-level mode";
    }
    if (table_total != cl.size()) return "table sizes do not add to the cluster size";
    if (single_level && causes_used != 1) return "cluster mixes causes in single-level mode";
    for (int m : cl.members) {
      if (m < 0 || m >= static_cast<int>(causes_.size()) || assignment_[m].cluster != j)
        return "cluster member list disagrees with assignments";
    }
    if (agg) {
      if (!(cl.location >= 0.0 && cl.location <= agg->t_max())) return "location outside the latent window";
      double lo_t = std::numeric_limits<double>::infinity(), hi_t = 0.0;
      for (int m : cl.members) {
        lo_t = std::min(lo_t, agg->time(m));
        hi_t = std::max(hi_t, agg->time(m));
      }
      const auto [lo, hi] = location_support(agg->kernel(), lo_t, hi_t);
      if (cl.location < lo || cl.location > hi) return "location outside the kernel support of its members";
    }
  }
  if (member_total != assigned) return "member lists do not cover the assigned observations";
  return {};
}

nlohmann::json LatentState::to_json() const {
  nlohmann::json clusters = nlohmann::json::array();
  for (const auto& cl : clusters_)
    clusters.push_back({{"location", cl.location}, {"members", cl.members}, {"tables", cl.tables}});
  nlohmann::json assign = nlohmann::json::array();
  for (const auto& a : assignment_) assign.push_back({a.cluster, a.table});
  return {{"num_causes", num_causes_}, {"causes", causes_}, {"clusters", clusters}, {"assignment", assign}};
}

LatentState LatentState::from_json(const nlohmann::json& j) {
  try {
    LatentState s(j.at("num_causes").get<int>(), j.at("causes").get<std::vector<int>>());
    for (const auto& jc : j.at("clusters")) {
      Cluster cl;
      cl.location = jc.at("location").get<double>();
      jc.at("members").get_to(cl.members);
      jc.at("tables").get_to(cl.tables);
      s.clusters_.push_back(std::move(cl));
    }
    const auto& ja = j.at("assignment");
    if (ja.size() != s.assignment_.size()) throw DataError("assignment length differs from observation count");
    for (std::size_t i = 0; i < ja.size(); ++i) s.assignment_[i] = {ja[i].at(0).get<int>(), ja[i].at(1).get<int>()};
    if (auto msg = s.audit(); !msg.empty()) throw DataError("latent state fails audit: " + msg);
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed latent state: ") + e.what());
  }
}

double log_kernel_product(const KernelAggregate& agg, const LatentState& state) {
  double total = 0.0;
  for (std::size_t i = 0; i < state.num_observations(); ++i) {
    if (!state.assigned(i)) continue;
    const double v = agg.kernel_at(i, state.cluster(state.assignment(i).cluster).location);
    if (!(v > 0.0)) return -std::numeric_limits<double>::infinity();
    total += std::log(v);
  }
  return total;
}

double base_integral(const KernelAggregate& agg, const HCRMParams& params) {
  const GGMeasure bottom = params.bottom();
  const GGMeasure root = params.root();
  const double d = agg.num_causes();
  if (params.independent_mode)
    return agg.integrate([&](double, double K) { return d * psi(bottom, K); }, agg.t_max());
  return agg.integrate([&](double, double K) { return psi(root, d * psi(bottom, K)); }, agg.t_max());
}

double log_marginal(const LatentState& state, const KernelAggregate& agg, const HCRMParams& params) {
  return log_marginal(state, agg, params, base_integral(agg, params));
}

double log_marginal(const LatentState& state, const KernelAggregate& agg, const HCRMParams& params,
                    double base_integral_value) {
  const double lq = log_kernel_product(agg, state);
  if (!std::isfinite(lq)) return lq;
  const GGMeasure bottom = params.bottom();
  const GGMeasure root = params.root();
  const double d = agg.num_causes();
  const double log_theta = std::log(params.theta);
  double total = lq - params.theta * base_integral_value;
  for (const auto& cl : state.clusters()) {
    const double K = agg.exposure(cl.location);
    for (const auto& sizes : cl.tables)
      for (int q : sizes) total += log_tau(bottom, q, K);
    if (!params.independent_mode) total += log_tau(root, cl.num_tables(), d * psi(bottom, K));
    total += log_theta;
  }
  return total;
}

}  // namespace hcrm
