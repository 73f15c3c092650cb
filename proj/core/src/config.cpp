#include "margint/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "margint/errors.hpp"

namespace margint {

namespace {

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> violations)
    : std::runtime_error("invalid configuration: " + join(violations, "; ")),
      violations_(std::move(violations)) {}

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(value);
  while (std::getline(in, cur, ',')) out.push_back(trim(cur));
  return out;
}

/// Collects violations while reading typed values out of the entry map.
class Reader {
 public:
  explicit Reader(const std::map<std::string, std::string>& e) : entries_(e) {}

  std::vector<std::string> violations;

  const std::string& text(const std::string& key) {
    used_.insert(key);
    return entries_.at(key);
  }

  double number(const std::string& key) { return parse_number(key, text(key)); }

  std::vector<double> numbers(const std::string& key) {
    std::vector<double> out;
    for (const auto& item : split_list(text(key))) out.push_back(parse_number(key, item));
    return out;
  }

  std::size_t count(const std::string& key) {
    const double v = number(key);
    if (!(v >= 0.0) || v != std::floor(v) || v > 1e12) {
      violations.push_back("(config): " + key + " must be a nonnegative integer");
      return 0;
    }
    return static_cast<std::size_t>(v);
  }

  bool flag(const std::string& key) {
    const std::string& v = text(key);
    if (v == "on" || v == "true" || v == "1" || v == "yes") return true;
    if (v == "off" || v == "false" || v == "0" || v == "no") return false;
    violations.push_back("(config): " + key + " must be on or off");
    return false;
  }

  /// One value per coordinate; a single value is broadcast.
  std::vector<double> per_axis(const std::string& key, std::size_t d) {
    auto v = numbers(key);
    if (v.size() == 1) v.assign(d, v.front());
    if (v.size() != d) {
      violations.push_back("(config): " + key + " needs 1 or " + std::to_string(d) + " values");
      v.assign(d, 0.0);
    }
    return v;
  }

  void mark_used(const std::string& key) { used_.insert(key); }
  bool used(const std::string& key) const { return used_.count(key) > 0; }

 private:
  double parse_number(const std::string& key, const std::string& s) {
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE || !std::isfinite(v)) {
      violations.push_back("(config): " + key + " = '" + s + "' is not a finite number");
      return 0.0;
    }
    return v;
  }

  const std::map<std::string, std::string>& entries_;
  std::set<std::string> used_;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

}  // namespace

std::map<std::string, std::string> parse_config_entries(std::string_view text) {
  std::map<std::string, std::string> out;
  std::vector<std::string> errors;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      errors.push_back("(config): line " + std::to_string(number) + " has no '='");
      continue;
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty()) {
      errors.push_back("(config): line " + std::to_string(number) + " has an empty key");
      continue;
    }
    if (!out.emplace(key, value).second)
      errors.push_back("(config): duplicate key '" + key + "' on line " + std::to_string(number));
  }
  if (!errors.empty()) throw ConfigError(std::move(errors));
  return out;
}

StudyConfig RunConfig::study(StudyKind kind) const {
  StudyConfig c = study_defaults;
  const StudyPlan& plan = plans.at(kind);
  c.horizons = plan.horizons;
  c.replicas = plan.replicas;
  return c;
}

std::vector<double> RunConfig::all_horizons() const {
  std::vector<double> out{sim_horizon};
  for (const auto& [kind, plan] : plans) out.insert(out.end(), plan.horizons.begin(), plan.horizons.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<std::string> kernel_reach_violations(const Scenario& s, double T) {
  std::vector<std::string> bad;
  const BandwidthSchedule sched = s.schedule();
  const double support = make_base_kernel(s.base).support();
  const double hd = bandwidth_density(T, sched);
  if (support * hd > s.neighborhood)
    bad.push_back("(K.1): density kernel reach " + fmt(support * hd) + " at T=" + fmt(T) +
                  " exceeds delta = " + fmt(s.neighborhood) + "; lower c' or raise T");
  for (std::size_t l = 0; l < s.dim(); ++l) {
    const double hl = bandwidth_regression(T, sched, l);
    if (support * hl > s.neighborhood)
      bad.push_back("(K.1): regression kernel reach " + fmt(support * hl) + " at T=" + fmt(T) +
                    " for coordinate " + std::to_string(l + 1) + " exceeds delta = " +
                    fmt(s.neighborhood) + "; lower c1 or raise T");
  }
  return bad;
}

RunConfig resolve_config(const std::map<std::string, std::string>& overrides) {
  RunConfig cfg;
  cfg.entries = parse_config_entries(default_config_text());
  for (const auto& [k, v] : overrides) cfg.entries[k] = v;

  Reader r(cfg.entries);
  auto& bad = r.violations;
  Scenario& s = cfg.scenario;

  s.name = r.text("scenario");
  cfg.output_dir = r.text("output.dir");
  const double seed = r.number("seed");
  if (!(seed >= 0.0) || seed != std::floor(seed) || seed >= 18446744073709551616.0)
    bad.push_back("(config): seed must be an integer in [0, 2^64)");
  else
    cfg.seed = std::strtoull(r.text("seed").c_str(), nullptr, 10);
  cfg.workers = r.count("workers");
  if (cfg.workers == 0) bad.push_back("(config): workers must be at least 1");

  // Model.
  const std::size_t d = r.count("model.dim");
  if (d == 0 || d > 16) {
    bad.push_back("(config): model.dim must be in 1..16");
    throw ConfigError(bad);
  }
  const double mu = r.number("model.mu");
  const double noise = r.number("model.noise");
  if (!(noise >= 0.0)) bad.push_back("(C.1): model.noise half-width must be >= 0 so psi(Y) stays bounded");
  std::vector<ComponentFunction> raw;
  for (std::size_t l = 1; l <= d; ++l) {
    const std::string key = "model.m" + std::to_string(l);
    if (!cfg.entries.count(key)) cfg.entries[key] = "zero";
    try {
      raw.push_back(ComponentFunction::parse(r.text(key)));
    } catch (const std::exception& e) {
      bad.push_back("(C.2): " + key + ": " + e.what());
      raw.push_back(ComponentFunction::zero());
    }
  }
  // Default components beyond the dimension are dropped; explicit ones are errors.
  for (auto it = cfg.entries.begin(); it != cfg.entries.end();) {
    if (it->first.rfind("model.m", 0) == 0 && !r.used(it->first)) {
      if (overrides.count(it->first)) {
        bad.push_back("(config): " + it->first + " exceeds model.dim = " + std::to_string(d));
        ++it;
      } else {
        it = cfg.entries.erase(it);
      }
    } else {
      ++it;
    }
  }

  // Process.
  s.process.dim = d;
  s.process.theta = r.per_axis("process.theta", d);
  for (double t : s.process.theta)
    if (!(t > 0.0)) bad.push_back("(A.1): process.theta must be positive for geometric mixing");
  if (r.text("process.correlation") != "none") {
    const auto rho = r.numbers("process.correlation");
    if (rho.size() != d * d)
      bad.push_back("(A.1): process.correlation needs d*d = " + std::to_string(d * d) + " values");
    else
      s.process.cross_correlation = rho;
  }
  try {
    s.process.validate();
  } catch (const std::exception& e) {
    bad.push_back(std::string("(A.1): ") + e.what());
  }

  s.delta = r.number("sim.delta");
  cfg.sim_horizon = r.number("sim.horizon");
  if (!(s.delta > 0.0)) bad.push_back("(config): sim.delta must be positive");

  // Kernels.
  try {
    s.base = parse_base_kernel(r.text("kernel.base"));
  } catch (const std::exception& e) {
    bad.push_back(std::string("(K.1): ") + e.what());
  }
  const double k = r.number("kernel.order_k");
  const double kp = r.number("kernel.order_kprime");
  s.k = static_cast<int>(k);
  s.k_prime = static_cast<int>(kp);
  if (!(k >= 1.0) || k != std::floor(k)) bad.push_back("(C.2): kernel.order_k must be an integer >= 1");
  if (!(kp >= 2.0) || kp != std::floor(kp)) bad.push_back("(K.4): kernel.order_kprime must be an integer >= 2");
  if (s.k % 2 != 0)
    bad.push_back("(K.3): kernel.order_k must be even; symmetric kernels have odd moments zero");
  if (s.k_prime % 2 != 0)
    bad.push_back("(K.4): kernel.order_kprime must be even; symmetric kernels have odd moments zero");
  if (!(kp > k * static_cast<double>(d)))
    bad.push_back("(F.2): k' must exceed k*d (k'=" + fmt(kp) + ", k*d=" + fmt(k * static_cast<double>(d)) + ")");

  s.c_prime = r.number("bandwidth.c_prime");
  s.c1 = r.per_axis("bandwidth.c1", d);
  if (!(s.c_prime > 0.0)) bad.push_back("(H.1): bandwidth.c_prime must be positive");
  for (double c : s.c1)
    if (!(c > 0.0)) bad.push_back("(H.2): bandwidth.c1 must be positive");

  // Domain, neighbourhood and integration weights.
  const auto lo = r.per_axis("domain.lower", d);
  const auto hi = r.per_axis("domain.upper", d);
  s.neighborhood = r.number("domain.delta");
  if (!(s.neighborhood > 0.0)) bad.push_back("(F.1): domain.delta must be positive");
  s.domain.clear();
  for (std::size_t l = 0; l < d; ++l) {
    s.domain.push_back({lo[l], hi[l]});
    if (!(hi[l] > lo[l])) bad.push_back("(F.1): domain coordinate " + std::to_string(l + 1) + " is empty");
    if (!(lo[l] - s.neighborhood > 0.0 && hi[l] + s.neighborhood < 1.0))
      bad.push_back("(F.1): C^delta must lie inside (0,1)^d where f > 0; coordinate " +
                    std::to_string(l + 1) + " reaches [" + fmt(lo[l] - s.neighborhood) + ", " +
                    fmt(hi[l] + s.neighborhood) + "]");
  }
  const auto qlo = r.per_axis("q.lower", d);
  const auto qhi = r.per_axis("q.upper", d);
  s.q_support.clear();
  for (std::size_t l = 0; l < d; ++l) {
    s.q_support.push_back({qlo[l], qhi[l]});
    if (!(qhi[l] > qlo[l]))
      bad.push_back("(Q.1): q support of coordinate " + std::to_string(l + 1) + " is empty");
    else if (!s.domain[l].contains(s.q_support[l]))
      bad.push_back("(Q.1): q support [" + fmt(qlo[l]) + ", " + fmt(qhi[l]) + "] of coordinate " +
                    std::to_string(l + 1) + " must lie inside C_l = [" + fmt(lo[l]) + ", " +
                    fmt(hi[l]) + "]");
  }

  // Estimation settings.
  try {
    s.mode = parse_density_mode(r.text("estimate.mode"));
  } catch (const std::exception& e) {
    bad.push_back(std::string("(config): ") + e.what());
  }
  s.floor_factor = r.number("estimate.floor_factor");
  s.floor_minimum = r.number("estimate.floor_min");
  if (!(s.floor_factor >= 0.0)) bad.push_back("(config): estimate.floor_factor must be >= 0");
  if (!(s.floor_minimum > 0.0)) bad.push_back("(config): estimate.floor_min must be positive");
  cfg.estimate_grid_points = r.count("estimate.grid_points");
  s.component_grid_points = r.count("components.grid_points");
  s.density_grid_points = r.count("density.grid_points");
  s.quad_res = r.count("quadrature.nodes");
  if (cfg.estimate_grid_points < 2) bad.push_back("(config): estimate.grid_points must be >= 2");
  if (s.component_grid_points < 2) bad.push_back("(config): components.grid_points must be >= 2");
  if (s.density_grid_points < 2) bad.push_back("(config): density.grid_points must be >= 2");
  if (s.quad_res < 16) bad.push_back("(config): quadrature.nodes must be >= 16");

  // Studies.
  StudyConfig& sc = cfg.study_defaults;
  const std::size_t coord = r.count("study.coordinate");
  if (coord < 1 || coord > d) bad.push_back("(config): study.coordinate must be in 1..d");
  sc.coordinate = coord >= 1 ? coord - 1 : 0;
  sc.x = r.number("study.x");
  if (coord >= 1 && coord <= d && !(sc.x >= lo[sc.coordinate] && sc.x <= hi[sc.coordinate]))
    bad.push_back("(config): study.x must lie inside C_l of the studied coordinate");
  sc.bias_correction = r.flag("study.bias_correction");
  sc.alpha = r.number("study.alpha");
  sc.beta = r.number("study.beta");
  if (!(sc.alpha > 0.0 && sc.alpha < 0.5)) bad.push_back("(config): study.alpha must be in (0, 0.5)");
  if (!(sc.beta > 0.5 && sc.beta < 1.0)) bad.push_back("(config): study.beta must be in (0.5, 1)");
  sc.slope_tolerance = r.number("study.slope_tolerance");
  sc.density_slope_tolerance = r.number("study.density_slope_tolerance");
  sc.coverage_epsilon = r.number("study.coverage_epsilon");
  sc.ks_threshold = r.number("study.ks_threshold");
  sc.max_failed_fraction = r.number("study.max_failed_fraction");
  sc.master_seed = cfg.seed;
  sc.workers = std::max<std::size_t>(1, cfg.workers);

  const std::pair<StudyKind, std::string> plan_keys[] = {
      {StudyKind::rate, "study.rate"},
      {StudyKind::normality, "study.normality"},
      {StudyKind::coverage, "study.coverage"},
      {StudyKind::density_rate, "study.density_rate"},
      {StudyKind::density_mode, "study.density_mode"}};
  for (const auto& [kind, prefix] : plan_keys) {
    StudyPlan plan;
    plan.horizons = r.numbers(prefix + ".T");
    plan.replicas = r.count(prefix + ".replicas");
    for (std::size_t i = 0; i < plan.horizons.size(); ++i) {
      if (!(plan.horizons[i] > 1.0)) bad.push_back("(config): " + prefix + ".T values must exceed 1");
      if (i && !(plan.horizons[i] > plan.horizons[i - 1]))
        bad.push_back("(config): " + prefix + ".T must be strictly increasing");
    }
    if (plan.replicas < 2) bad.push_back("(config): " + prefix + ".replicas must be >= 2");
    cfg.plans[kind] = plan;
  }
  if (!(cfg.sim_horizon > 1.0)) bad.push_back("(config): sim.horizon must exceed 1");

  for (const auto& [key, value] : cfg.entries)
    if (!r.used(key)) bad.push_back("(config): unknown key '" + key + "'");

  if (!bad.empty()) throw ConfigError(std::move(bad));

  s.model = AdditiveModelSpec::make(mu, raw, noise);
  // Kernel reach against the neighbourhood, for every horizon in use.
  for (double T : cfg.all_horizons())
    for (auto& v : kernel_reach_violations(s, T)) bad.push_back(std::move(v));
  if (!bad.empty()) throw ConfigError(std::move(bad));

  try {
    // Kernel construction can still fail numerically for extreme orders.
    (void)EstimationKit(s);
  } catch (const std::exception& e) {
    throw ConfigError({std::string("(K.4): ") + e.what()});
  }
  return cfg;
}

RunConfig validate_config(std::string_view text) { return resolve_config(parse_config_entries(text)); }

RunConfig load_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError({"(config): cannot read config file '" + file.string() + "'"});
  std::ostringstream buf;
  buf << in.rdbuf();
  return validate_config(buf.str());
}

RunConfig apply_env_overrides(const RunConfig& config) {
  auto entries = config.entries;
  bool changed = false;
  if (const char* v = std::getenv("MARGINT_SEED")) {
    entries["seed"] = v;
    changed = true;
  }
  if (const char* v = std::getenv("MARGINT_WORKERS")) {
    entries["workers"] = v;
    changed = true;
  }
  return changed ? resolve_config(entries) : config;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string canonical_text(const RunConfig& config) {
  std::string out;
  for (const auto& [k, v] : config.entries) {
    if (k == "workers" || k == "output.dir") continue;
    out += k;
    out += '=';
    out += v;
    out += '\n';
  }
  return out;
}

std::string config_hash(const RunConfig& config) { return hex64(fnv1a64(canonical_text(config))); }

}  // namespace margint
