#include "hcrm/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "hcrm/errors.hpp"

namespace hcrm {

double Dataset::max_time() const {
  double m = 0.0;
  for (const auto& o : observations) m = std::max(m, o.time);
  return m;
}

std::size_t Dataset::num_predictors() const {
  return observations.empty() ? 0 : observations.front().predictors.size();
}

std::size_t Dataset::num_uncensored() const {
  return static_cast<std::size_t>(
      std::count_if(observations.begin(), observations.end(), [](const Observation& o) { return !o.censored(); }));
}

std::string kernel_name(KernelKind kind) {
  switch (kind) {
    case KernelKind::DykstraLaud: return "dl";
    case KernelKind::Rectangular: return "rect";
    case KernelKind::OrnsteinUhlenbeck: return "ou";
  }
  return "dl";
}

KernelKind parse_kernel_name(const std::string& name) {
  if (name == "dl") return KernelKind::DykstraLaud;
  if (name == "rect") return KernelKind::Rectangular;
  if (name == "ou") return KernelKind::OrnsteinUhlenbeck;
  throw ConfigError("unknown kernel '" + name + "' (expected dl, rect or ou)");
}

void validate_config(const Dataset& data, const KernelSpec& kernel, const HCRMParams& params) {
  if (data.num_causes < 1) throw ConfigError("number of causes must be at least 1");
  check_measure(params.bottom(), "cause-level measure");
  check_measure(params.root(), "root measure");
  if (!(params.theta > 0.0) || !std::isfinite(params.theta)) throw ConfigError("base-measure mass must be positive");
  if (!(kernel.param > 0.0) || !std::isfinite(kernel.param)) throw ConfigError("kernel parameter must be positive");
  if (kernel.kind == KernelKind::Rectangular && !(kernel.bandwidth > 0.0))
    throw ConfigError("rectangular kernel bandwidth must be positive");
  if (!(data.t_max > 0.0)) throw ConfigError("latent window upper end must be positive");
  if (data.t_max < data.max_time())
    throw ConfigError("latent window [0, t_max] must cover every observed time");
  for (const auto& o : data.observations) {
    if (o.cause < 0 || o.cause > data.num_causes) throw ConfigError("observation cause exceeds the number of causes");
  }
}

namespace {

bool parse_double(std::string_view s, double& out) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

Dataset parse_dataset(std::istream& in, std::optional<int> num_causes, std::optional<double> t_max) {
  Dataset data;
  std::string line;
  std::size_t line_no = 0;
  std::size_t arity = 0;
  bool first_row = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto fields = split_commas(line);
    double t = 0.0;
    if (first_row && data.observations.empty() && !parse_double(fields[0], t)) {
      first_row = false;  // header
      continue;
    }
    first_row = false;
    if (fields.size() < 2) throw DataError("line " + std::to_string(line_no) + ": expected time,cause");
    if (!parse_double(fields[0], t) || !std::isfinite(t))
      throw DataError("line " + std::to_string(line_no) + ": malformed time");
    if (!(t > 0.0)) throw DataError("line " + std::to_string(line_no) + ": time must be positive");
    double c = 0.0;
    if (!parse_double(fields[1], c) || c != std::floor(c) || c < 0.0)
      throw DataError("line " + std::to_string(line_no) + ": cause must be a non-negative integer");
    Observation o;
    o.time = t;
    o.cause = static_cast<int>(c);
    for (std::size_t k = 2; k < fields.size(); ++k) {
      double z = 0.0;
      if (!parse_double(fields[k], z) || !std::isfinite(z))
        throw DataError("line " + std::to_string(line_no) + ": malformed predictor");
      o.predictors.push_back(z);
    }
    if (data.observations.empty()) arity = o.predictors.size();
    else if (o.predictors.size() != arity)
      throw DataError("line " + std::to_string(line_no) + ": predictor count differs from earlier rows");
    data.observations.push_back(std::move(o));
  }
  if (data.observations.empty()) throw DataError("dataset has no observations");
  int max_cause = 0;
  for (const auto& o : data.observations) max_cause = std::max(max_cause, o.cause);
  if (num_causes) {
    if (*num_causes < 1) throw ConfigError("number of causes must be at least 1");
    if (max_cause > *num_causes) throw DataError("cause exceeds the declared number of causes");
    data.num_causes = *num_causes;
  } else {
    data.num_causes = std::max(1, max_cause);
  }
  data.t_max = t_max ? *t_max : data.max_time();
  return data;
}

Dataset read_dataset(const std::string& path, std::optional<int> num_causes, std::optional<double> t_max) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset '" + path + "'");
  return parse_dataset(in, num_causes, t_max);
}

void write_dataset(std::ostream& out, const Dataset& data) {
  out << "time,cause";
  for (std::size_t k = 0; k < data.num_predictors(); ++k) out << ",z" << (k + 1);
  out << '\n';
  for (const auto& o : data.observations) {
    out << format_double(o.time) << ',' << o.cause;
    for (double z : o.predictors) out << ',' << format_double(z);
    out << '\n';
  }
}

void write_dataset(const std::string& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write dataset '" + path + "'");
  write_dataset(out, data);
}

std::vector<double> cumulative_trapezoid(const std::vector<double>& times, const std::vector<double>& values) {
  std::vector<double> out(values.size(), 0.0);
  for (std::size_t i = 1; i < values.size(); ++i)
    out[i] = out[i - 1] + 0.5 * (times[i] - times[i - 1]) * (values[i] + values[i - 1]);
  return out;
}

namespace {

nlohmann::json band_pair(const std::vector<double>& lo, const std::vector<double>& hi) {
  return {{"lower", lo}, {"upper", hi}};
}

nlohmann::json band_pair(const std::vector<std::vector<double>>& lo, const std::vector<std::vector<double>>& hi) {
  return {{"lower", lo}, {"upper", hi}};
}

}  // namespace

nlohmann::json to_json(const EstimateGrid& g) {
  nlohmann::json j;
  j["times"] = g.times;
  j["survival"] = g.survival;
  j["incidence"] = g.incidence;
  j["subdistribution"] = g.subdistribution;
  j["prediction"] = g.prediction;
  if (g.bands) {
    const auto& b = *g.bands;
    j["bands"] = {{"survival", band_pair(b.survival_lower, b.survival_upper)},
                  {"incidence", band_pair(b.incidence_lower, b.incidence_upper)},
                  {"subdistribution", band_pair(b.subdistribution_lower, b.subdistribution_upper)},
                  {"prediction", band_pair(b.prediction_lower, b.prediction_upper)}};
  }
  return j;
}

EstimateGrid estimate_grid_from_json(const nlohmann::json& j) {
  try {
    EstimateGrid g;
    j.at("times").get_to(g.times);
    j.at("survival").get_to(g.survival);
    j.at("incidence").get_to(g.incidence);
    j.at("subdistribution").get_to(g.subdistribution);
    j.at("prediction").get_to(g.prediction);
    if (j.contains("bands")) {
      Bands b;
      const auto& jb = j.at("bands");
      jb.at("survival").at("lower").get_to(b.survival_lower);
      jb.at("survival").at("upper").get_to(b.survival_upper);
      jb.at("incidence").at("lower").get_to(b.incidence_lower);
      jb.at("incidence").at("upper").get_to(b.incidence_upper);
      jb.at("subdistribution").at("lower").get_to(b.subdistribution_lower);
      jb.at("subdistribution").at("upper").get_to(b.subdistribution_upper);
      jb.at("prediction").at("lower").get_to(b.prediction_lower);
      jb.at("prediction").at("upper").get_to(b.prediction_upper);
      g.bands = std::move(b);
    }
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed estimate grid: ") + e.what());
  }
}

void check_estimate_grid(const EstimateGrid& g) {
  const std::size_t n = g.times.size();
  auto fail = [](const std::string& what) { throw DataError("estimate grid invariant violated: " + what); };
  if (g.survival.size() != n) fail("survival length");
  for (std::size_t i = 1; i < n; ++i) {
    if (g.times[i] < g.times[i - 1]) fail("times not sorted");
    if (g.survival[i] > g.survival[i - 1] + 1e-12) fail("survival increases");
  }
  for (double s : g.survival)
    if (s < -1e-12 || s > 1.0 + 1e-12) fail("survival outside [0,1]");
  const std::size_t d = g.incidence.size();
  if (g.subdistribution.size() != d || g.prediction.size() != d) fail("cause count mismatch");
  for (std::size_t c = 0; c < d; ++c) {
    if (g.incidence[c].size() != n || g.subdistribution[c].size() != n || g.prediction[c].size() != n)
      fail("per-cause length");
    for (std::size_t i = 0; i < n; ++i) {
      if (g.incidence[c][i] < 0.0) fail("negative incidence");
      if (i > 0 && g.subdistribution[c][i] < g.subdistribution[c][i - 1] - 1e-12) fail("subdistribution decreases");
    }
  }
  for (std::size_t i = 0; i < n && d > 0; ++i) {
    double total = 0.0;
    for (std::size_t c = 0; c < d; ++c) total += g.prediction[c][i];
    if (std::fabs(total - 1.0) > 1e-12) fail("prediction curve does not sum to one");
  }
  if (g.bands) {
    const auto& b = *g.bands;
    for (std::size_t i = 0; i < b.survival_lower.size(); ++i)
      if (b.survival_lower[i] > b.survival_upper[i]) fail("survival band inverted");
  }
}

nlohmann::json to_json(const KernelSpec& k) {
  nlohmann::json j{{"kernel", kernel_name(k.kind)}, {"param", k.param}};
  if (k.kind == KernelKind::Rectangular) j["bandwidth"] = k.bandwidth;
  return j;
}

KernelSpec kernel_from_json(const nlohmann::json& j) {
  KernelSpec k;
  k.kind = parse_kernel_name(j.at("kernel").get<std::string>());
  k.param = j.at("param").get<double>();
  k.bandwidth = j.value("bandwidth", 0.0);
  return k;
}

nlohmann::json to_json(const HCRMParams& p) {
  return {{"sigma", p.sigma}, {"sigma0", p.sigma0}, {"beta", p.beta},
          {"beta0", p.beta0}, {"theta", p.theta},   {"independent", p.independent_mode}};
}

HCRMParams params_from_json(const nlohmann::json& j) {
  HCRMParams p;
  p.sigma = j.at("sigma").get<double>();
  p.sigma0 = j.at("sigma0").get<double>();
  p.beta = j.at("beta").get<double>();
  p.beta0 = j.at("beta0").get<double>();
  p.theta = j.at("theta").get<double>();
  p.independent_mode = j.value("independent", false);
  return p;
}

}  // namespace hcrm
