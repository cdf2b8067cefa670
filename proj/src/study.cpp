#include "hcrm/study.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "hcrm/errors.hpp"

namespace hcrm {

ReplicateOutcome run_replicate(const StudySettings& settings, int replicate) {
  ReplicateOutcome out;
  out.seed = settings.seed + static_cast<std::uint64_t>(replicate);
  const Dataset data = generate(settings.model, settings.n, out.seed);
  ChainConfig cfg = settings.chain;
  cfg.seed = out.seed;
  const ChainResult chain = run_chain(data, settings.kernel, settings.params, settings.priors, cfg);

  const std::vector<double> grid = default_grid(data, cfg.grid_points);
  AggregateOptions opts;
  opts.conditional_draws = cfg.conditional_draws;
  opts.truncation = settings.truncation;
  opts.seed = out.seed;
  const EstimateGrid est = aggregate_chain(chain.samples, data, settings.params, grid, opts);
  const TrueCurves truth = true_curves(settings.model, grid);

  out.posterior = error_metrics(est, truth.curves, truth.cause_probability);
  out.baseline = error_metrics(baseline_grid(data, grid), truth.curves, truth.cause_probability);
  const LatentTimesModel& model = settings.model;
  out.km_survival_kolmogorov =
      step_kolmogorov_distance(kaplan_meier(data), [&](double t) { return model.survival(t); }, grid.back());

  if (est.bands) {
    int inside = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double s = truth.curves.survival[i];
      inside += (s >= est.bands->survival_lower[i] && s <= est.bands->survival_upper[i]) ? 1 : 0;
    }
    out.band_coverage = static_cast<double>(inside) / grid.size();
  } else {
    out.band_coverage = std::nan("");
  }
  double clusters = 0.0;
  for (const auto& s : chain.samples) clusters += s.state.num_clusters();
  out.mean_clusters = clusters / chain.samples.size();
  out.location_acceptance = chain.diagnostics.location.rate();
  out.kernel_acceptance = chain.diagnostics.kernel.rate();
  return out;
}

std::vector<ReplicateOutcome> run_study(const StudySettings& settings) {
  if (settings.replicates < 1) throw ConfigError("replicate count must be positive");
  std::vector<ReplicateOutcome> results(settings.replicates);
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (int r = next++; r < settings.replicates; r = next++) {
      try {
        results[r] = run_replicate(settings, r);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = settings.replicates;
      }
    }
  };
  const int threads = std::max(1, std::min(settings.threads, settings.replicates));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int k = 0; k < threads; ++k) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return results;
}

nlohmann::json to_json(const ReplicateOutcome& r) {
  auto metrics = [](const ErrorMetrics& m) {
    return nlohmann::json{{"e_tv", m.total_variation}, {"e_k", m.kolmogorov}, {"d_k", m.survival_kolmogorov}};
  };
  nlohmann::json j{{"seed", r.seed},
                   {"posterior", metrics(r.posterior)},
                   {"baseline", metrics(r.baseline)},
                   {"km_d_k", r.km_survival_kolmogorov},
                   {"mean_clusters", r.mean_clusters},
                   {"location_acceptance", r.location_acceptance},
                   {"kernel_acceptance", r.kernel_acceptance}};
  j["band_coverage"] = std::isnan(r.band_coverage) ? nlohmann::json(nullptr) : nlohmann::json(r.band_coverage);
  return j;
}

namespace {

nlohmann::json mean_se(const std::vector<double>& v) {
  const double n = v.size();
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const double se = n > 1 ? std::sqrt(ss / (n - 1) / n) : 0.0;
  return {{"mean", mean}, {"se", se}};
}

}  // namespace

nlohmann::json summarize(const std::vector<ReplicateOutcome>& outcomes) {
  if (outcomes.empty()) return nlohmann::json::object();
  const std::size_t nc = outcomes.front().posterior.total_variation.size();
  auto collect = [&](auto get) {
    std::vector<double> v;
    for (const auto& r : outcomes) v.push_back(get(r));
    return mean_se(v);
  };
  nlohmann::json j;
  for (const char* method : {"posterior", "baseline"}) {
    const bool post = std::string(method) == "posterior";
    nlohmann::json m;
    for (std::size_t c = 0; c < nc; ++c) {
      m["e_tv"].push_back(collect([&](const ReplicateOutcome& r) {
        return (post ? r.posterior : r.baseline).total_variation[c];
      }));
      m["e_k"].push_back(
          collect([&](const ReplicateOutcome& r) { return (post ? r.posterior : r.baseline).kolmogorov[c]; }));
    }
    m["d_k"] =
        collect([&](const ReplicateOutcome& r) { return (post ? r.posterior : r.baseline).survival_kolmogorov; });
    j[method] = m;
  }
  j["km_d_k"] = collect([](const ReplicateOutcome& r) { return r.km_survival_kolmogorov; });
  j["mean_clusters"] = collect([](const ReplicateOutcome& r) { return r.mean_clusters; });
  if (!std::isnan(outcomes.front().band_coverage))
    j["band_coverage"] = collect([](const ReplicateOutcome& r) { return r.band_coverage; });
  int wins = 0;
  for (const auto& r : outcomes) wins += r.posterior.survival_kolmogorov <= r.km_survival_kolmogorov ? 1 : 0;
  j["posterior_beats_km_fraction"] = static_cast<double>(wins) / outcomes.size();
  j["replicates"] = outcomes.size();
  return j;
}

}  // namespace hcrm
