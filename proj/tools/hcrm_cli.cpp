#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <boost/version.hpp>
#include <json.hpp>

#include "hcrm/errors.hpp"
#include "hcrm/estimators.hpp"
#include "hcrm/model.hpp"
#include "hcrm/posterior_measures.hpp"
#include "hcrm/sampler.hpp"
#include "hcrm/study.hpp"
#include "hcrm/synth.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "1.0.0";

// Everything a run can be configured with. Precedence: defaults < --config file < flags.
struct RunConfig {
  std::string kernel = "dl";
  double kernel_param = 1.0;
  double bandwidth = 1.0;
  double sigma = 0.25, sigma0 = 0.25, beta = 1.0, beta0 = 1.0, theta = 1.0;
  bool independent = false;
  bool cox = false;
  int iters = 25000, burnin = 5000, thin = 10;
  std::uint64_t seed = 1;
  double eps = 1e-4;
  std::size_t max_atoms = 1000000;
  int draws = 10;
  int grid = 200;
  double theta_shape = 1.0, theta_rate = 0.1;
  double kernel_rate = 0.1;
  double eta_variance = 100.0;
  bool fix_kernel = false;
  double kernel_step = 0.5, eta_step = 0.5, location_step = 0.25;
  bool adapt = true;
  int checkpoint_every = 0;
  int threads = 1;
  std::size_t n = 300;
  int replicates = 20;
  double cox_profile = 1.0;
};

#define HCRM_CONFIG_FIELDS(X)                                                                                    \
  X(kernel) X(kernel_param) X(bandwidth) X(sigma) X(sigma0) X(beta) X(beta0) X(theta) X(independent) X(cox)      \
  X(iters) X(burnin) X(thin) X(seed) X(eps) X(max_atoms) X(draws) X(grid) X(theta_shape) X(theta_rate)           \
  X(kernel_rate) X(eta_variance) X(fix_kernel) X(kernel_step) X(eta_step) X(location_step) X(adapt)              \
  X(checkpoint_every) X(threads) X(n) X(replicates) X(cox_profile)

json config_to_json(const RunConfig& c) {
  json j;
#define X(name) j[#name] = c.name;
  HCRM_CONFIG_FIELDS(X)
#undef X
  return j;
}

void apply_config_json(RunConfig& c, const json& j) {
  if (!j.is_object()) throw hcrm::ConfigError("config file must hold a flat JSON object");
  const json known = config_to_json(c);
  for (const auto& [key, value] : j.items())
    if (!known.contains(key)) throw hcrm::ConfigError("unknown config key '" + key + "'");
  try {
#define X(name) \
  if (j.contains(#name)) j.at(#name).get_to(c.name);
    HCRM_CONFIG_FIELDS(X)
#undef X
  } catch (const json::exception& e) {
    throw hcrm::ConfigError(std::string("bad config value: ") + e.what());
  }
}

// Settings the simulation studies in the literature use by default, echoed in every manifest.
json reference_defaults() {
  return {{"sigma", 0.25},         {"sigma0", 0.25},     {"beta", 1.0},        {"beta0", 1.0},
          {"theta_prior", "Gamma(1, 0.1)"}, {"kernel_prior", "Exp(0.1)"}, {"iters", 25000}, {"burnin", 5000},
          {"retained_samples", 2000}, {"draws_per_sample", 10}, {"grid", 200}, {"eps", 1e-4}};
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw hcrm::DataError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw hcrm::DataError("'" + path + "' is not valid JSON: " + e.what());
  }
}

void write_text_atomic(const std::string& path, const std::string& text) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw hcrm::DataError("cannot write '" + path + "'");
    out << text;
    if (!out) throw hcrm::DataError("write failed for '" + path + "'");
  }
  fs::rename(tmp, path);
}

void write_json_file(const std::string& path, const json& j) { write_text_atomic(path, j.dump(1) + "\n"); }

hcrm::KernelSpec kernel_from_config(const RunConfig& c) {
  switch (hcrm::parse_kernel_name(c.kernel)) {
    case hcrm::KernelKind::DykstraLaud:
      return hcrm::KernelSpec::dykstra_laud(c.kernel_param);
    case hcrm::KernelKind::Rectangular:
      return hcrm::KernelSpec::rectangular(c.kernel_param, c.bandwidth);
    case hcrm::KernelKind::OrnsteinUhlenbeck:
      return hcrm::KernelSpec::ornstein_uhlenbeck(c.kernel_param);
  }
  throw hcrm::ConfigError("unknown kernel");
}

hcrm::HCRMParams params_from_config(const RunConfig& c) {
  hcrm::HCRMParams p;
  p.sigma = c.sigma;
  p.sigma0 = c.sigma0;
  p.beta = c.beta;
  p.beta0 = c.beta0;
  p.theta = c.theta;
  p.independent_mode = c.independent;
  return p;
}

hcrm::HyperPriors priors_from_config(const RunConfig& c) {
  hcrm::HyperPriors h;
  h.theta = {c.theta_shape, c.theta_rate};
  h.kernel_rate = c.kernel_rate;
  h.eta_variance = c.eta_variance;
  h.fix_kernel = c.fix_kernel;
  h.fix_eta = !c.cox;
  return h;
}

hcrm::ChainConfig chain_from_config(const RunConfig& c) {
  hcrm::ChainConfig k;
  k.iterations = c.iters;
  k.burn_in = c.burnin;
  k.thin = c.thin;
  k.seed = c.seed;
  k.kernel_step = c.kernel_step;
  k.eta_step = c.eta_step;
  k.location_step = c.location_step;
  k.adapt_steps = c.adapt;
  k.conditional_draws = c.draws;
  k.grid_points = c.grid;
  k.checkpoint_every = c.checkpoint_every;
  k.validate();
  return k;
}

hcrm::TruncationPolicy truncation_from_config(const RunConfig& c) {
  if (!(c.eps > 0.0)) throw hcrm::ConfigError("truncation threshold must be positive");
  if (c.max_atoms < 1) throw hcrm::ConfigError("atom cap must be positive");
  return {c.eps, c.max_atoms};
}

json dataset_to_json(const hcrm::Dataset& d) {
  json rows = json::array();
  for (const auto& o : d.observations) {
    json row = {o.time, o.cause};
    for (double z : o.predictors) row.push_back(z);
    rows.push_back(row);
  }
  return {{"num_causes", d.num_causes}, {"t_max", d.t_max}, {"observations", rows}};
}

hcrm::Dataset dataset_from_json(const json& j) {
  hcrm::Dataset d;
  d.num_causes = j.at("num_causes").get<int>();
  d.t_max = j.at("t_max").get<double>();
  for (const auto& row : j.at("observations")) {
    hcrm::Observation o;
    o.time = row.at(0).get<double>();
    o.cause = row.at(1).get<int>();
    for (std::size_t k = 2; k < row.size(); ++k) o.predictors.push_back(row.at(k).get<double>());
    d.observations.push_back(std::move(o));
  }
  return d;
}

void strip_predictors(hcrm::Dataset& d) {
  for (auto& o : d.observations) o.predictors.clear();
}

// Shared flag set: each flag writes an optional that overrides the config file when given.
struct Overrides {
  std::string config_path;
  std::optional<std::string> kernel;
  std::optional<double> kernel_param, bandwidth, sigma, sigma0, beta, beta0, theta, eps, theta_shape, theta_rate,
      kernel_rate, eta_variance, location_step, cox_profile;
  std::optional<int> iters, burnin, thin, draws, grid, checkpoint_every, threads, replicates;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> n;
  bool independent = false, cox = false, fix_kernel = false, no_adapt = false;

  void apply(RunConfig& c) const {
    if (kernel) c.kernel = *kernel;
#define O(name) \
  if (name) c.name = *name;
    O(kernel_param) O(bandwidth) O(sigma) O(sigma0) O(beta) O(beta0) O(theta) O(eps) O(theta_shape) O(theta_rate)
    O(kernel_rate) O(eta_variance) O(location_step) O(cox_profile) O(iters) O(burnin) O(thin) O(draws) O(grid)
    O(checkpoint_every) O(threads) O(replicates) O(seed) O(n)
#undef O
    if (independent) c.independent = true;
    if (cox) c.cox = true;
    if (fix_kernel) c.fix_kernel = true;
    if (no_adapt) c.adapt = false;
  }
};

void add_model_flags(CLI::App* app, Overrides& o) {
  app->add_option("--kernel", o.kernel, "Mixing kernel")->check(CLI::IsMember({"dl", "rect", "ou"}));
  app->add_option("--kernel-param", o.kernel_param, "Initial kernel height (dl, rect) or decay rate (ou)");
  app->add_option("--bandwidth", o.bandwidth, "Rectangular kernel width");
  app->add_option("--sigma", o.sigma, "Bottom-level discount");
  app->add_option("--sigma0", o.sigma0, "Root-level discount");
  app->add_option("--beta", o.beta, "Bottom-level tilting");
  app->add_option("--beta0", o.beta0, "Root-level tilting");
  app->add_flag("--independent", o.independent, "Independent cause-specific measures instead of the hierarchy");
  app->add_flag("--cox", o.cox, "Use the predictor columns through a proportional-hazards factor");
}

void add_chain_flags(CLI::App* app, Overrides& o) {
  app->add_option("--iters", o.iters, "Total iterations");
  app->add_option("--burnin", o.burnin, "Burn-in iterations");
  app->add_option("--thin", o.thin, "Thinning interval");
  app->add_option("--theta", o.theta, "Initial base-measure mass");
  app->add_option("--theta-shape", o.theta_shape, "Gamma prior shape on the base mass");
  app->add_option("--theta-rate", o.theta_rate, "Gamma prior rate on the base mass");
  app->add_option("--kernel-rate", o.kernel_rate, "Exponential prior rate on the kernel parameter");
  app->add_option("--eta-variance", o.eta_variance, "Normal prior variance of each Cox coefficient");
  app->add_option("--location-step", o.location_step, "Location random-walk scale (fraction of support)");
  app->add_flag("--fix-kernel", o.fix_kernel, "Keep the kernel parameter at its initial value");
  app->add_flag("--no-adapt", o.no_adapt, "Disable step-size adaptation during burn-in");
}

void add_estimate_flags(CLI::App* app, Overrides& o) {
  app->add_option("--eps", o.eps, "Jump-size truncation threshold for posterior draws");
  app->add_option("--draws", o.draws, "Posterior-measure draws per retained sample (0 disables bands)");
  app->add_option("--grid", o.grid, "Number of grid points");
}

RunConfig resolve(const Overrides& o) {
  RunConfig c;
  if (!o.config_path.empty()) apply_config_json(c, read_json_file(o.config_path));
  o.apply(c);
  return c;
}

struct Manifest {
  std::string command;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  json extra = json::object();

  void write(const std::string& path, const RunConfig& cfg) const {
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    json j{{"command", command},
           {"config", config_to_json(cfg)},
           {"seed", cfg.seed},
           {"versions", {{"hcrm", kVersion}, {"boost", BOOST_LIB_VERSION}, {"compiler", __VERSION__}}},
           {"wall_clock_seconds", secs},
           {"reference_defaults", reference_defaults()}};
    for (const auto& [k, v] : extra.items()) j[k] = v;
    write_json_file(path, j);
  }
};

std::string manifest_path(const std::string& explicit_path, const std::string& output) {
  return explicit_path.empty() ? output + ".manifest.json" : explicit_path;
}

std::vector<double> post_burn(const std::vector<double>& trace, int burn_in) {
  if (static_cast<int>(trace.size()) <= burn_in) return trace;
  return {trace.begin() + burn_in, trace.end()};
}

json chain_diagnostics(const hcrm::ChainResult& r, int burn_in) {
  const auto& d = r.diagnostics;
  std::vector<double> clusters(d.cluster_trace.begin(), d.cluster_trace.end());
  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / v.size();
  };
  const auto c = post_burn(clusters, burn_in), th = post_burn(d.theta_trace, burn_in),
             kp = post_burn(d.kernel_trace, burn_in), lm = post_burn(d.log_marginal_trace, burn_in);
  std::vector<double> eta_mean;
  for (const auto& s : r.samples) {
    if (eta_mean.empty()) eta_mean.assign(s.eta.size(), 0.0);
    for (std::size_t k = 0; k < s.eta.size(); ++k) eta_mean[k] += s.eta[k] / r.samples.size();
  }
  return {{"acceptance",
           {{"location", d.location.rate()}, {"kernel", d.kernel.rate()}, {"eta", d.eta.rate()}}},
          {"adapted_steps", {{"kernel", d.kernel_step}, {"eta", d.eta_steps}}},
          {"ess",
           {{"clusters", hcrm::effective_sample_size(c)},
            {"theta", hcrm::effective_sample_size(th)},
            {"kernel_param", hcrm::effective_sample_size(kp)},
            {"log_marginal", hcrm::effective_sample_size(lm)}}},
          {"posterior_mean",
           {{"clusters", mean(c)}, {"theta", mean(th)}, {"kernel_param", mean(kp)}, {"eta", eta_mean}}},
          {"retained_samples", r.samples.size()},
          {"audits_passed", d.audits_passed}};
}

void write_grid_csv(const std::string& path, const hcrm::EstimateGrid& g) {
  std::ostringstream out;
  out << std::setprecision(17);
  const int nc = g.num_causes();
  out << "time,survival";
  for (const char* name : {"incidence", "subdistribution", "prediction"})
    for (int c = 1; c <= nc; ++c) out << ',' << name << '_' << c;
  if (g.bands) {
    out << ",survival_lower,survival_upper";
    for (const char* name : {"incidence", "subdistribution", "prediction"})
      for (int c = 1; c <= nc; ++c) out << ',' << name << '_' << c << "_lower," << name << '_' << c << "_upper";
  }
  out << '\n';
  for (std::size_t i = 0; i < g.times.size(); ++i) {
    out << g.times[i] << ',' << g.survival[i];
    for (const auto* curve : {&g.incidence, &g.subdistribution, &g.prediction})
      for (int c = 0; c < nc; ++c) out << ',' << (*curve)[c][i];
    if (g.bands) {
      const auto& b = *g.bands;
      out << ',' << b.survival_lower[i] << ',' << b.survival_upper[i];
      const std::pair<const std::vector<std::vector<double>>*, const std::vector<std::vector<double>>*> pairs[] = {
          {&b.incidence_lower, &b.incidence_upper},
          {&b.subdistribution_lower, &b.subdistribution_upper},
          {&b.prediction_lower, &b.prediction_upper}};
      for (const auto& [lo, hi] : pairs)
        for (int c = 0; c < nc; ++c) out << ',' << (*lo)[c][i] << ',' << (*hi)[c][i];
    }
    out << '\n';
  }
  write_text_atomic(path, out.str());
}

json metrics_json(const hcrm::ErrorMetrics& m) {
  return {{"e_tv", m.total_variation}, {"e_k", m.kolmogorov}, {"d_k", m.survival_kolmogorov}};
}

void print_metrics_row(const std::string& label, const hcrm::ErrorMetrics& m) {
  std::cout << std::left << std::setw(28) << label << std::fixed << std::setprecision(4);
  for (std::size_t c = 0; c < m.total_variation.size(); ++c)
    std::cout << "  tv" << c + 1 << '=' << m.total_variation[c] << " k" << c + 1 << '=' << m.kolmogorov[c];
  std::cout << "  dK=" << m.survival_kolmogorov << '\n';
}

// ---- subcommands -----------------------------------------------------------

struct SimulateArgs {
  std::string scenario, model_path, out, truth, manifest;
  double censor_rate = 0.0;
};

int cmd_simulate(const SimulateArgs& a, const RunConfig& cfg) {
  Manifest man{"simulate"};
  hcrm::LatentTimesModel model =
      a.model_path.empty() ? hcrm::scenario(a.scenario) : hcrm::latent_model_from_json(read_json_file(a.model_path));
  if (a.censor_rate > 0.0) model.censoring = {hcrm::CensoringLaw::Kind::Exponential, a.censor_rate};
  const hcrm::Dataset data = hcrm::generate(model, cfg.n, cfg.seed);
  hcrm::write_dataset(a.out, data);
  const std::string truth_path = a.truth.empty() ? a.out + ".truth.json" : a.truth;
  const auto grid = hcrm::default_grid(data, cfg.grid);
  json truth = hcrm::to_json(hcrm::true_curves(model, grid));
  truth["model"] = hcrm::to_json(model);
  write_json_file(truth_path, truth);
  man.extra = {{"scenario", a.model_path.empty() ? a.scenario : a.model_path},
               {"outputs", {a.out, truth_path}},
               {"events", data.num_uncensored()}};
  man.write(manifest_path(a.manifest, a.out), cfg);
  return 0;
}

struct FitArgs {
  std::string data, out, manifest, checkpoint, resume;
};

int cmd_fit(const FitArgs& a, const RunConfig& cfg) {
  Manifest man{"fit"};
  hcrm::Dataset data = hcrm::read_dataset(a.data);
  if (!cfg.cox) strip_predictors(data);
  const hcrm::KernelSpec kernel = kernel_from_config(cfg);
  const hcrm::HCRMParams params = params_from_config(cfg);
  const hcrm::HyperPriors priors = priors_from_config(cfg);
  const hcrm::ChainConfig chain = chain_from_config(cfg);
  hcrm::validate_config(data, kernel, params);

  std::function<void(const json&)> on_checkpoint;
  if (!a.checkpoint.empty()) on_checkpoint = [&](const json& j) { write_json_file(a.checkpoint, j); };
  std::optional<json> resume;
  if (!a.resume.empty()) resume = read_json_file(a.resume);
  const hcrm::ChainResult result =
      hcrm::run_chain(data, kernel, params, priors, chain, on_checkpoint, resume ? &*resume : nullptr);

  json samples = json::array();
  for (const auto& s : result.samples) samples.push_back(hcrm::to_json(s));
  const json diag = chain_diagnostics(result, chain.burn_in);
  write_json_file(a.out, {{"format", "hcrm-chain"},
                          {"data", dataset_to_json(data)},
                          {"params", hcrm::to_json(params)},
                          {"kernel", hcrm::to_json(kernel)},
                          {"config", config_to_json(cfg)},
                          {"diagnostics", diag},
                          {"samples", samples}});
  man.extra = {{"input", a.data}, {"outputs", {a.out}}, {"diagnostics", diag}};
  man.write(manifest_path(a.manifest, a.out), cfg);
  return 0;
}

struct EstimateArgs {
  std::string chain, out, csv, manifest;
};

int cmd_estimate(const EstimateArgs& a, const RunConfig& cfg) {
  Manifest man{"estimate"};
  if (!fs::exists(a.chain)) throw hcrm::DataError("chain file '" + a.chain + "' does not exist");
  const json cj = read_json_file(a.chain);
  hcrm::Dataset data;
  hcrm::HCRMParams params;
  std::vector<hcrm::ChainSample> samples;
  try {
    if (cj.value("format", "") != "hcrm-chain") throw hcrm::DataError("'" + a.chain + "' is not a chain file");
    data = dataset_from_json(cj.at("data"));
    params = hcrm::params_from_json(cj.at("params"));
    for (const auto& s : cj.at("samples")) samples.push_back(hcrm::chain_sample_from_json(s));
  } catch (const json::exception& e) {
    throw hcrm::DataError(std::string("malformed chain file: ") + e.what());
  }
  hcrm::AggregateOptions opts;
  opts.conditional_draws = cfg.draws;
  opts.truncation = truncation_from_config(cfg);
  opts.seed = cfg.seed;
  opts.cox_profile = cfg.cox_profile;
  if (cfg.draws < 0) throw hcrm::ConfigError("draws must be non-negative");
  const auto grid = hcrm::default_grid(data, cfg.grid);
  const hcrm::EstimateGrid est = hcrm::aggregate_chain(samples, data, params, grid, opts);
  hcrm::check_estimate_grid(est);
  write_json_file(a.out, hcrm::to_json(est));
  std::vector<std::string> outputs{a.out};
  if (!a.csv.empty()) {
    write_grid_csv(a.csv, est);
    outputs.push_back(a.csv);
  }
  man.extra = {{"input", a.chain}, {"outputs", outputs}, {"samples", samples.size()}};
  man.write(manifest_path(a.manifest, a.out), cfg);
  return 0;
}

struct BaselineArgs {
  std::string data, out, csv, manifest;
};

int cmd_baselines(const BaselineArgs& a, const RunConfig& cfg) {
  Manifest man{"baselines"};
  const hcrm::Dataset data = hcrm::read_dataset(a.data);
  const hcrm::EstimateGrid g = hcrm::baseline_grid(data, hcrm::default_grid(data, cfg.grid));
  json j = hcrm::to_json(g);
  const hcrm::StepFunction km = hcrm::kaplan_meier(data);
  j["kaplan_meier_steps"] = {{"times", km.times}, {"values", km.values}};
  for (int c = 1; c <= data.num_causes; ++c) {
    const hcrm::StepFunction aj = hcrm::aalen_johansen(data, c);
    j["aalen_johansen_steps"].push_back({{"times", aj.times}, {"values", aj.values}});
  }
  write_json_file(a.out, j);
  if (!a.csv.empty()) write_grid_csv(a.csv, g);
  man.extra = {{"input", a.data}, {"outputs", {a.out}}};
  man.write(manifest_path(a.manifest, a.out), cfg);
  return 0;
}

struct CompareArgs {
  std::vector<std::string> estimates;
  std::string truth, baseline, replicate, out = "compare.json", manifest;
};

int cmd_compare(const CompareArgs& a, const RunConfig& cfg) {
  Manifest man{"compare"};
  json result;
  if (!a.replicate.empty()) {
    hcrm::StudySettings st;
    st.model = hcrm::scenario(a.replicate);
    st.n = cfg.n;
    st.seed = cfg.seed;
    st.replicates = cfg.replicates;
    st.kernel = kernel_from_config(cfg);
    st.params = params_from_config(cfg);
    st.priors = priors_from_config(cfg);
    st.priors.fix_eta = true;
    st.chain = chain_from_config(cfg);
    st.truncation = truncation_from_config(cfg);
    st.threads = cfg.threads;
    const auto outcomes = hcrm::run_study(st);
    const json summary = hcrm::summarize(outcomes);
    json rows = json::array();
    for (const auto& r : outcomes) rows.push_back(hcrm::to_json(r));
    result = {{"scenario", a.replicate}, {"summary", summary}, {"replicates", rows}};
    std::cout << std::fixed << std::setprecision(4);
    for (const char* method : {"posterior", "baseline"}) {
      const json& m = summary.at(method);
      std::cout << std::left << std::setw(10) << method;
      for (std::size_t c = 0; c < m.at("e_tv").size(); ++c)
        std::cout << "  tv" << c + 1 << '=' << m["e_tv"][c]["mean"].get<double>() << "±"
                  << m["e_tv"][c]["se"].get<double>() << " k" << c + 1 << '=' << m["e_k"][c]["mean"].get<double>()
                  << "±" << m["e_k"][c]["se"].get<double>();
      std::cout << "  dK=" << m["d_k"]["mean"].get<double>() << "±" << m["d_k"]["se"].get<double>() << '\n';
    }
    std::cout << "km       dK=" << summary["km_d_k"]["mean"].get<double>() << "±"
              << summary["km_d_k"]["se"].get<double>() << "  clusters="
              << summary["mean_clusters"]["mean"].get<double>() << '\n';
  } else {
    if (a.estimates.empty()) throw hcrm::ConfigError("compare needs estimate files or --replicate");
    if (a.truth.empty() == a.baseline.empty()) throw hcrm::ConfigError("give exactly one of --truth or --baseline");
    auto load_grid = [](const std::string& path) {
      try {
        return hcrm::estimate_grid_from_json(read_json_file(path));
      } catch (const json::exception& e) {
        throw hcrm::DataError("'" + path + "' is not an estimate grid: " + e.what());
      }
    };
    const hcrm::EstimateGrid first = load_grid(a.estimates.front());
    hcrm::EstimateGrid reference;
    std::vector<double> pi;
    if (!a.truth.empty()) {
      const json tj = read_json_file(a.truth);
      try {
        hcrm::TrueCurves t = hcrm::true_curves_from_json(tj);
        // Truth files carry their generating model, so a different estimate grid is re-evaluated.
        if (t.curves.times != first.times && tj.contains("model"))
          t = hcrm::true_curves(hcrm::latent_model_from_json(tj.at("model")), first.times);
        reference = t.curves;
        pi = t.cause_probability;
      } catch (const json::exception& e) {
        throw hcrm::DataError("'" + a.truth + "' is not a truth file: " + e.what());
      }
    } else {
      const hcrm::Dataset data = hcrm::read_dataset(a.baseline);
      reference = hcrm::baseline_grid(data, first.times);
      for (int c = 1; c <= data.num_causes; ++c) pi.push_back(hcrm::aalen_johansen(data, c).values.back());
    }
    json rows = json::array();
    for (const auto& path : a.estimates) {
      const hcrm::ErrorMetrics m = hcrm::error_metrics(load_grid(path), reference, pi);
      print_metrics_row(path, m);
      json row = metrics_json(m);
      row["estimate"] = path;
      rows.push_back(row);
    }
    result = {{"reference", a.truth.empty() ? a.baseline : a.truth}, {"rows", rows}};
  }
  write_json_file(a.out, result);
  man.extra = {{"outputs", {a.out}}};
  man.write(manifest_path(a.manifest, a.out), cfg);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian nonparametric competing-risks survival analysis with hierarchical random measure mixtures"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  Overrides ov;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", ov.config_path, "Flat JSON config; explicit flags take precedence")
        ->check(CLI::ExistingFile);
    sub->add_option("--seed", ov.seed, "Random seed");
  };

  SimulateArgs sim;
  auto* s_sim = app.add_subcommand("simulate", "Generate a synthetic dataset and its true curves");
  common(s_sim);
  s_sim->add_option("scenario", sim.scenario, "weibull3 | weibull2 | mixture3");
  s_sim->add_option("--model", sim.model_path, "Latent-times model JSON instead of a named scenario");
  s_sim->add_option("--n", ov.n, "Sample size");
  s_sim->add_option("--grid", ov.grid, "Truth grid points");
  s_sim->add_option("--censor-rate", sim.censor_rate, "Exponential censoring rate (0 = none)");
  s_sim->add_option("--out,-o", sim.out, "Dataset CSV")->required();
  s_sim->add_option("--truth", sim.truth, "Truth JSON (default <out>.truth.json)");
  s_sim->add_option("--manifest", sim.manifest, "Manifest path");

  FitArgs fit;
  auto* s_fit = app.add_subcommand("fit", "Run the marginal Gibbs sampler");
  common(s_fit);
  s_fit->add_option("data", fit.data, "Dataset CSV")->required();
  s_fit->add_option("--out,-o", fit.out, "Chain JSON")->required();
  add_model_flags(s_fit, ov);
  add_chain_flags(s_fit, ov);
  s_fit->add_option("--checkpoint", fit.checkpoint, "Checkpoint file rewritten during the run");
  s_fit->add_option("--checkpoint-every", ov.checkpoint_every, "Iterations between checkpoints");
  s_fit->add_option("--resume", fit.resume, "Resume from a checkpoint file");
  s_fit->add_option("--manifest", fit.manifest, "Manifest path");

  EstimateArgs est;
  auto* s_est = app.add_subcommand("estimate", "Posterior curves and bands from a fitted chain");
  common(s_est);
  s_est->add_option("chain", est.chain, "Chain JSON from fit")->required();
  s_est->add_option("--out,-o", est.out, "Estimate JSON")->required();
  s_est->add_option("--csv", est.csv, "Also write a wide CSV");
  s_est->add_option("--cox-profile", ov.cox_profile, "Hazard multiplier of the predicted subject");
  add_estimate_flags(s_est, ov);
  s_est->add_option("--manifest", est.manifest, "Manifest path");

  BaselineArgs base;
  auto* s_base = app.add_subcommand("baselines", "Kaplan-Meier and Aalen-Johansen curves");
  common(s_base);
  s_base->add_option("data", base.data, "Dataset CSV")->required();
  s_base->add_option("--out,-o", base.out, "Baseline JSON")->required();
  s_base->add_option("--csv", base.csv, "Also write a wide CSV");
  s_base->add_option("--grid", ov.grid, "Number of grid points");
  s_base->add_option("--manifest", base.manifest, "Manifest path");

  CompareArgs cmp;
  auto* s_cmp = app.add_subcommand("compare", "Error metrics against the truth or a baseline, or a replicate study");
  common(s_cmp);
  s_cmp->add_option("estimates", cmp.estimates, "Estimate JSON files");
  s_cmp->add_option("--truth", cmp.truth, "Truth JSON from simulate");
  s_cmp->add_option("--baseline", cmp.baseline, "Dataset CSV whose KM/AJ curves serve as reference");
  s_cmp->add_option("--replicate", cmp.replicate, "Scenario for a simulate-fit-estimate loop over seeds");
  s_cmp->add_option("--replicates", ov.replicates, "Replicate count");
  s_cmp->add_option("--n", ov.n, "Sample size per replicate");
  s_cmp->add_option("--threads", ov.threads, "Worker threads");
  add_model_flags(s_cmp, ov);
  add_chain_flags(s_cmp, ov);
  add_estimate_flags(s_cmp, ov);
  s_cmp->add_option("--out,-o", cmp.out, "Metrics JSON");
  s_cmp->add_option("--manifest", cmp.manifest, "Manifest path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const RunConfig cfg = resolve(ov);
    if (s_sim->parsed()) {
      if (sim.scenario.empty() == sim.model_path.empty())
        throw hcrm::ConfigError("give exactly one of a scenario name or --model");
      return cmd_simulate(sim, cfg);
    }
    if (s_fit->parsed()) return cmd_fit(fit, cfg);
    if (s_est->parsed()) return cmd_estimate(est, cfg);
    if (s_base->parsed()) return cmd_baselines(base, cfg);
    if (s_cmp->parsed()) return cmd_compare(cmp, cfg);
  } catch (const hcrm::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const hcrm::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const hcrm::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return 4;
  }
  return 2;
}
