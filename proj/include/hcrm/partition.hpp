#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "hcrm/kernels.hpp"
#include "hcrm/model.hpp"

namespace hcrm {

/**
 * A latent location shared by its member observations. Members are split by
 * cause into tables; `tables[c - 1]` lists the table sizes for cause c.
 */
struct Cluster {
  double location = 0.0;
  std::vector<int> members;
  std::vector<std::vector<int>> tables;

  int size() const { return static_cast<int>(members.size()); }
  int num_tables() const;
  int cause_size(int cause) const;
  int cause_tables(int cause) const { return static_cast<int>(tables[cause - 1].size()); }
};

struct Assignment {
  int cluster = -1;
  int table = -1;
};

/** Where an observation is (re)inserted. */
struct Choice {
  enum class Kind { ExistingTable, NewTable, NewCluster };
  Kind kind = Kind::NewCluster;
  int cluster = -1;
  int table = -1;
  double location = 0.0;
  int cause = 0;  // cause of the target table; 0 means the observation's own cause

  static Choice existing_table(int cluster, int table, int cause = 0) {
    return {Kind::ExistingTable, cluster, table, 0.0, cause};
  }
  static Choice new_table(int cluster) { return {Kind::NewTable, cluster, -1, 0.0, 0}; }
  static Choice new_cluster(double location) { return {Kind::NewCluster, -1, -1, location, 0}; }
};

/**
 * Nested partition of the uncensored observations: clusters with a location,
 * and within each cluster per-cause tables. Censored observations are never
 * assigned. Deleted tables and clusters are compacted by moving the last entry
 * into the freed slot.
 */
class LatentState {
 public:
  LatentState() = default;
  LatentState(int num_causes, std::vector<int> causes);
  static LatentState for_data(const KernelAggregate& agg);

  int num_causes() const { return num_causes_; }
  std::size_t num_observations() const { return causes_.size(); }
  int cause(std::size_t i) const { return causes_[i]; }
  const std::vector<Cluster>& clusters() const { return clusters_; }
  const Cluster& cluster(int j) const { return clusters_[j]; }
  int num_clusters() const { return static_cast<int>(clusters_.size()); }
  const Assignment& assignment(std::size_t i) const { return assignment_[i]; }
  bool assigned(std::size_t i) const { return assignment_[i].cluster >= 0; }
  int num_assigned() const;

  void remove_observation(std::size_t i);
  // Returns the cluster index that now holds observation i.
  int insert_observation(std::size_t i, const Choice& choice);
  void set_location(int j, double x) { clusters_[j].location = x; }

  // Empty string when every structural invariant holds, else a description of the first failure.
  // With `agg`, also checks that each location lies in the support of its members' kernels.
  // `single_level` additionally requires one cause and one table per cluster (independent mode).
  std::string audit(const KernelAggregate* agg = nullptr, bool require_complete = false,
                    bool single_level = false) const;

  nlohmann::json to_json() const;
  static LatentState from_json(const nlohmann::json& j);

 private:
  int num_causes_ = 1;
  std::vector<int> causes_;
  std::vector<Assignment> assignment_;
  std::vector<Cluster> clusters_;
};

// Sum over assigned observations of log(w_i k(T_i; X_c(i))); -inf when any factor vanishes.
double log_kernel_product(const KernelAggregate& agg, const LatentState& state);

// Integral over the window of the exponent density: psi0(D psi(K_n(x))) in the hierarchical
// model, D psi(K_n(x)) in independent mode. Multiply by theta for the exponent.
double base_integral(const KernelAggregate& agg, const HCRMParams& params);

// Log density of the data and nested partition with marks integrated out. Unassigned
// observations are left out of the kernel product, so the value also serves partial states.
double log_marginal(const LatentState& state, const KernelAggregate& agg, const HCRMParams& params);
double log_marginal(const LatentState& state, const KernelAggregate& agg, const HCRMParams& params,
                    double base_integral_value);

}  // namespace hcrm
