#include "margint/run.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "margint/errors.hpp"
#include "margint/path_io.hpp"

namespace margint {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string short_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

/// Quotes a CSV field when it holds a separator, quote or line break.
std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

class CsvWriter {
 public:
  explicit CsvWriter(const std::string& hash) { text_ << "# config_hash=" << hash << "\r\n"; }
  void row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) text_ << (i ? "," : "") << csv_field(fields[i]);
    text_ << "\r\n";
  }
  std::string str() const { return text_.str(); }

 private:
  std::ostringstream text_;
};

struct Outputs {
  fs::path dir;
  json files = json::array();

  void write(const std::string& name, const std::string& content) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    const fs::path p = dir / name;
    std::ofstream out(p, std::ios::binary);
    if (!out) throw DataError("cannot write '" + p.string() + "'");
    out << content;
    if (!out) throw DataError("write failed for '" + p.string() + "'");
    files.push_back({{"file", name}, {"fnv1a64", hex64(fnv1a64(content))}});
  }
};

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_manifest(Outputs& out, const std::string& command, const RunConfig& cfg, const json& timings,
                    const std::string& results) {
  json m;
  m["tool"] = "margint";
  m["version"] = kVersion;
  m["command"] = command;
  m["config_hash"] = config_hash(cfg);
  m["seed"] = cfg.seed;
  m["workers"] = cfg.workers;
  m["started_utc"] = utc_now();
  m["timings_seconds"] = timings;
  m["outputs"] = out.files;
  m["results_hash"] = results;
  m["config"] = cfg.entries;
  const std::string name = "manifest-" + command + ".json";
  std::string text = m.dump(2) + "\n";
  std::error_code ec;
  fs::create_directories(out.dir, ec);
  std::ofstream f(out.dir / name, std::ios::binary);
  if (!f) throw DataError("cannot write manifest in '" + out.dir.string() + "'");
  f << text;
}

double seconds_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

fs::path output_dir(const RunConfig& cfg, const RunOptions& o) {
  return o.output_dir ? *o.output_dir : fs::path(cfg.output_dir);
}

/// The path to work on, and whether the configured model generated it.
struct LoadedPath {
  std::shared_ptr<const SamplePath> path;
  bool model_known = false;
  std::string source;
};

std::string csv_hash_stamp(const fs::path& file) {
  std::ifstream in(file);
  std::string line;
  while (std::getline(in, line) && !line.empty() && line[0] == '#') {
    const auto pos = line.find("config_hash=");
    if (pos != std::string::npos) {
      std::string v = line.substr(pos + 12);
      while (!v.empty() && (v.back() == '\r' || v.back() == ' ')) v.pop_back();
      return v;
    }
  }
  return {};
}

LoadedPath obtain_path(const RunConfig& cfg, const RunOptions& o, std::ostream& log) {
  LoadedPath lp;
  if (o.path_file) {
    lp.path = std::make_shared<const SamplePath>(load_path(*o.path_file));
    lp.source = o.path_file->string();
    lp.model_known = o.path_file->extension() != ".bin" && csv_hash_stamp(*o.path_file) == config_hash(cfg);
    if (lp.path->dim != cfg.scenario.dim())
      throw DataError("path has dimension " + std::to_string(lp.path->dim) + " but the config has d = " +
                      std::to_string(cfg.scenario.dim()));
    if (!(lp.path->horizon > 1.0)) throw DataError("path horizon must exceed 1");
    for (const auto& v : kernel_reach_violations(cfg.scenario, lp.path->horizon)) log << "warning: " << v << "\n";
  } else {
    const double T = o.horizon ? *o.horizon : cfg.sim_horizon;
    lp.path = std::make_shared<const SamplePath>(
        simulate_path(cfg.scenario.process, cfg.scenario.model, cfg.scenario.delta, T, cfg.seed));
    lp.model_known = true;
    lp.source = "simulated";
  }
  return lp;
}

json check_json(const Check& c) {
  return {{"name", c.name}, {"value", c.value}, {"bound", c.bound}, {"passed", c.passed}};
}

void log_checks(std::ostream& log, const std::vector<Check>& checks) {
  for (const auto& c : checks)
    log << (c.passed ? "  [pass] " : "  [FAIL] ") << c.name
        << (std::isnan(c.value) ? std::string() : " = " + short_num(c.value))
        << (c.bound.empty() ? std::string() : "  (" + c.bound + ")") << "\n";
}

}  // namespace

RunConfig load_run_config(const RunOptions& o) {
  std::map<std::string, std::string> entries;
  if (o.config_file) {
    std::ifstream in(*o.config_file);
    if (!in) throw ConfigError({"(config): cannot read config file '" + o.config_file->string() + "'"});
    std::ostringstream buf;
    buf << in.rdbuf();
    entries = parse_config_entries(buf.str());
  }
  for (const auto& kv : o.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ConfigError({"(config): override '" + kv + "' is not key=value"});
    entries[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  RunConfig cfg = resolve_config(entries);
  return o.use_env ? apply_env_overrides(cfg) : cfg;
}

void print_bandwidths(std::ostream& out, const RunConfig& cfg, const std::vector<double>& horizons) {
  const BandwidthSchedule sched = cfg.scenario.schedule();
  out << "config " << config_hash(cfg) << "\n";
  out << "T,h_T";
  for (std::size_t l = 0; l < cfg.scenario.dim(); ++l) out << ",h_" << l + 1 << "_T";
  out << "\n";
  for (double T : horizons) {
    out << short_num(T) << "," << short_num(bandwidth_density(T, sched));
    for (std::size_t l = 0; l < cfg.scenario.dim(); ++l) out << "," << short_num(bandwidth_regression(T, sched, l));
    out << "\n";
  }
}

int run_simulate(const RunOptions& o, std::ostream& log) {
  const RunConfig cfg = load_run_config(o);
  const double T = o.horizon ? *o.horizon : cfg.sim_horizon;
  if (o.dry_run) {
    print_bandwidths(log, cfg, {T});
    return kExitOk;
  }
  const auto t0 = std::chrono::steady_clock::now();
  const SamplePath path = simulate_path(cfg.scenario.process, cfg.scenario.model, cfg.scenario.delta, T, cfg.seed);
  const double sim_s = seconds_since(t0);
  Outputs out{output_dir(cfg, o)};
  std::ostringstream buf;
  std::string name;
  if (o.binary) {
    name = "path.bin";
    write_path_binary(buf, path);
  } else {
    name = "path.csv";
    write_path_csv(buf, path, config_hash(cfg));
  }
  out.write(name, buf.str());
  write_manifest(out, "simulate", cfg, {{"simulate", sim_s}}, hex64(fnv1a64(buf.str())));
  log << "wrote " << (out.dir / name).string() << ": " << path.size() << " points, d=" << path.dim
      << ", delta=" << path.delta << ", T=" << path.horizon << ", seed=" << path.seed << "\n";
  return kExitOk;
}

int run_estimate(const RunOptions& o, std::ostream& log) {
  const RunConfig cfg = load_run_config(o);
  const Scenario& s = cfg.scenario;
  if (o.dry_run) {
    print_bandwidths(log, cfg, {o.horizon ? *o.horizon : cfg.sim_horizon});
    return kExitOk;
  }
  const auto t0 = std::chrono::steady_clock::now();
  const LoadedPath lp = obtain_path(cfg, o, log);
  const EstimationKit kit(s);
  const DensityEstimate de = fit_density(s, kit, lp.path);
  const RegressionEstimate re = fit_regression(s, kit, lp.path, s.mode, &de);
  const std::size_t d = s.dim();
  const auto grid = cube_grid(s.domain, cfg.estimate_grid_points);

  CsvWriter csv(config_hash(cfg));
  std::vector<std::string> header;
  for (std::size_t l = 0; l < d; ++l) header.push_back("x_" + std::to_string(l + 1));
  for (const char* c : {"f_hat", "f", "m_tilde", "m"}) header.emplace_back(c);
  csv.row(header);
  std::size_t undefined = 0;
  for (std::size_t i = 0; i < grid.size(); i += d) {
    const std::span<const double> x(&grid[i], d);
    std::vector<std::string> row;
    for (double v : x) row.push_back(num(v));
    row.push_back(num(de(x)));
    row.push_back(lp.model_known ? num(s.process.stationary_density(x)) : "");
    const auto m = re(x);
    if (!m) ++undefined;
    row.push_back(m ? num(*m) : "");
    row.push_back(lp.model_known ? num(s.model.regression(x)) : "");
    csv.row(row);
  }
  Outputs out{output_dir(cfg, o)};
  const std::string text = csv.str();
  out.write("estimate.csv", text);
  write_manifest(out, "estimate", cfg, {{"estimate", seconds_since(t0)}}, hex64(fnv1a64(text)));
  log << "wrote " << (out.dir / "estimate.csv").string() << ": " << grid.size() / d << " grid points, mode "
      << to_string(s.mode) << ", path " << lp.source << " (T=" << lp.path->horizon << ")";
  if (undefined) log << ", m~ undefined at " << undefined << " points";
  if (s.mode == DensityMode::estimated_f)
    log << ", floored f_hat at " << re.densities().floored << " data points";
  log << "\n";
  return kExitOk;
}

int run_components(const RunOptions& o, std::ostream& log) {
  const RunConfig cfg = load_run_config(o);
  const Scenario& s = cfg.scenario;
  if (o.dry_run) {
    print_bandwidths(log, cfg, {o.horizon ? *o.horizon : cfg.sim_horizon});
    return kExitOk;
  }
  const auto t0 = std::chrono::steady_clock::now();
  const LoadedPath lp = obtain_path(cfg, o, log);
  const EstimationKit kit(s);
  std::optional<DensityEstimate> de;
  if (s.mode == DensityMode::estimated_f) de.emplace(fit_density(s, kit, lp.path));
  const RegressionEstimate re = fit_regression(s, kit, lp.path, s.mode, de ? &*de : nullptr);
  double avg = 0.0;
  try {
    avg = global_average(re, kit.q, s.quad_res);
  } catch (const UndefinedEstimate& e) {
    throw DataError(std::string("component estimate undefined: ") + e.what() +
                    "; the path is too short for the configured bandwidths");
  }
  Outputs out{output_dir(cfg, o)};
  std::string all;
  for (std::size_t l = 0; l < s.dim(); ++l) {
    const auto grid = linear_grid(s.domain[l].lower, s.domain[l].upper, s.component_grid_points);
    ComponentEstimate est;
    try {
      est = estimate_component(re, kit.q, l, grid, s.quad_res, avg);
    } catch (const UndefinedEstimate& e) {
      throw DataError(std::string("component estimate undefined: ") + e.what());
    }
    std::optional<BiasTerm> bias;
    if (lp.model_known)
      bias = bias_term(s.model, kit.regression_kernel, kit.q.factor(l), l, grid, re.bandwidths()[l], s.k);
    CsvWriter csv(config_hash(cfg));
    const std::string xl = "x_" + std::to_string(l + 1);
    csv.row({xl, "eta_hat", "eta", "bias", "error"});
    for (std::size_t j = 0; j < grid.size(); ++j) {
      if (lp.model_known) {
        const double truth = true_component(s.model, kit.q.factor(l), l, grid[j]);
        csv.row({num(grid[j]), num(est.values[j]), num(truth), num(bias->values[j]), num(est.values[j] - truth)});
      } else {
        csv.row({num(grid[j]), num(est.values[j]), "", "", ""});
      }
    }
    const std::string name = "components_" + std::to_string(l + 1) + ".csv";
    const std::string text = csv.str();
    all += text;
    out.write(name, text);
  }
  write_manifest(out, "components", cfg, {{"components", seconds_since(t0)}}, hex64(fnv1a64(all)));
  log << "wrote " << s.dim() << " component files to " << out.dir.string() << " (path " << lp.source
      << ", T=" << lp.path->horizon << ", mode " << to_string(s.mode) << ")\n";
  return kExitOk;
}

std::string study_result_json(const StudyResult& r, bool include_runtime, int indent) {
  json j;
  j["kind"] = std::string(to_string(r.kind));
  j["passed"] = r.passed;
  j["aborted"] = r.aborted;
  j["abort_reason"] = r.abort_reason;
  j["failed_replicas"] = r.failed;
  j["target_slope"] = r.target_slope;
  j["slope_tolerance"] = r.slope_tolerance;
  if (r.fit)
    j["fit"] = {{"slope", r.fit->slope}, {"intercept", r.fit->intercept}, {"r_squared", r.fit->r_squared}};
  json hs = json::array();
  for (const auto& h : r.horizons)
    hs.push_back({{"T", h.horizon},
                  {"bandwidth", h.bandwidth},
                  {"ok", h.ok},
                  {"failed", h.failed},
                  {"mean_error", h.mean_error},
                  {"variance", h.variance},
                  {"mse", h.mse},
                  {"A_T", h.scaled_variance},
                  {"median_abs_error", h.median_abs_error},
                  {"median_density_error", h.median_density_error},
                  {"median_component_gap", h.median_component_gap}});
  j["horizons"] = hs;
  if (r.normality) {
    const auto& n = *r.normality;
    j["normality"] = {{"T", n.horizon}, {"bias_term", n.bias_term}, {"sd", n.sd},
                      {"mean", n.mean}, {"variance", n.variance}, {"skewness", n.skewness},
                      {"ks_statistic", n.ks.statistic}, {"ks_p_value", n.ks.p_value}};
  }
  if (r.coverage) {
    const auto& c = *r.coverage;
    json by = json::array();
    for (const auto& [T, a] : c.A_by_horizon) by.push_back({{"T", T}, {"A", a}});
    j["coverage"] = {{"A", c.A}, {"A_by_horizon", by}, {"A_stability", c.A_stability},
                     {"alpha", c.alpha}, {"beta", c.beta}, {"lower", c.lower}, {"upper", c.upper},
                     {"inside", c.inside}, {"total", c.total}, {"frequency", c.frequency}};
  }
  if (r.density_mode)
    j["density_mode"] = {{"constant", r.density_mode->constant}, {"ratios", r.density_mode->ratios}};
  json checks = json::array();
  for (const auto& c : r.checks) checks.push_back(check_json(c));
  j["checks"] = checks;
  json recs = json::array();
  for (const auto& rec : r.records)
    recs.push_back({{"T", rec.horizon},       {"replica", rec.replica},     {"seed", rec.seed},
                    {"ok", rec.ok},           {"failure", rec.failure},     {"estimate", rec.estimate},
                    {"truth", rec.truth},     {"error", rec.error},         {"bias_term", rec.bias_term},
                    {"density_error", rec.density_error}, {"component_gap", rec.component_gap}});
  j["records"] = recs;
  if (include_runtime) {
    j["runtime_seconds"] = r.runtime_seconds;
    j["workers"] = r.workers;
  }
  return j.dump(indent);
}

std::string results_hash(const StudyResult& r) { return hex64(fnv1a64(study_result_json(r, false, -1))); }

namespace {

std::string replicas_csv(const StudyResult& r, const std::string& hash) {
  CsvWriter csv(hash);
  csv.row({"T", "replica", "seed", "ok", "estimate", "truth", "error", "bias_term", "density_error",
           "component_gap", "failure"});
  for (const auto& rec : r.records)
    csv.row({num(rec.horizon), std::to_string(rec.replica), std::to_string(rec.seed), rec.ok ? "1" : "0",
             num(rec.estimate), num(rec.truth), num(rec.error), num(rec.bias_term), num(rec.density_error),
             num(rec.component_gap), rec.failure});
  return csv.str();
}

std::string series_csv(const StudyResult& r, const StudyConfig& c, const std::string& hash) {
  CsvWriter csv(hash);
  if (r.kind == StudyKind::normality && r.normality) {
    // Q-Q series of the studentized errors.
    std::vector<double> z;
    for (const auto& rec : r.records)
      if (rec.ok) z.push_back((rec.error - (c.bias_correction ? rec.bias_term : 0.0)) / r.normality->sd);
    std::sort(z.begin(), z.end());
    csv.row({"i", "normal_quantile", "studentized_error"});
    const double n = static_cast<double>(z.size());
    for (std::size_t i = 0; i < z.size(); ++i)
      csv.row({std::to_string(i + 1), num(normal_quantile((static_cast<double>(i) + 0.5) / n)), num(z[i])});
    return csv.str();
  }
  csv.row({"T", "abscissa", "bandwidth", "mse", "variance", "mean_error", "A_T", "median_abs_error",
           "median_density_error", "median_component_gap", "fitted"});
  for (const auto& h : r.horizons) {
    const double xval = r.kind == StudyKind::density_rate ? h.horizon / std::log(h.horizon) : h.horizon;
    const double fitted = r.fit ? std::exp(r.fit->intercept + r.fit->slope * std::log(xval)) : kNaN;
    csv.row({num(h.horizon), num(xval), num(h.bandwidth), num(h.mse), num(h.variance), num(h.mean_error),
             num(h.scaled_variance), num(h.median_abs_error), num(h.median_density_error),
             num(h.median_component_gap), num(fitted)});
  }
  return csv.str();
}

}  // namespace

int run_study_command(StudyKind kind, const RunOptions& o, std::ostream& log) {
  const RunConfig cfg = load_run_config(o);
  const StudyConfig sc = cfg.study(kind);
  if (o.dry_run) {
    print_bandwidths(log, cfg, sc.horizons);
    return kExitOk;
  }
  sc.validate(kind);
  const std::string hash = config_hash(cfg);
  log << "study " << to_string(kind) << ": " << sc.replicas << " replicas x " << sc.horizons.size()
      << " horizons, " << sc.workers << " worker(s), config " << hash << "\n";
  const StudyResult r = run_study(kind, sc);

  json doc = json::parse(study_result_json(r));
  doc["config_hash"] = hash;
  doc["seed"] = cfg.seed;
  doc["version"] = kVersion;
  const std::string stem = "study_" + std::string(to_string(kind));
  Outputs out{output_dir(cfg, o)};
  out.write(stem + ".json", doc.dump(2) + "\n");
  out.write(stem + "_replicas.csv", replicas_csv(r, hash));
  out.write(stem + "_series.csv", series_csv(r, sc, hash));
  const std::string rh = results_hash(r);
  write_manifest(out, stem, cfg, {{"study", r.runtime_seconds}}, rh);

  if (r.fit) log << "  slope " << short_num(r.fit->slope) << " (target " << short_num(r.target_slope) << ")\n";
  log_checks(log, r.checks);
  log << "  results hash " << rh << ", " << short_num(r.runtime_seconds) << " s\n";
  log << (r.passed ? "PASS" : "FAIL") << "\n";
  return r.passed ? kExitOk : kExitStudyFail;
}

int run_selftest(const RunOptions& o, std::ostream& log) {
  const RunConfig cfg = load_run_config(o);
  if (o.dry_run) return kExitOk;
  const auto t0 = std::chrono::steady_clock::now();
  const auto checks = run_selftests(cfg.seed);
  const double elapsed = seconds_since(t0);
  json arr = json::array();
  bool ok = true;
  for (const auto& c : checks) {
    arr.push_back(check_json(c));
    ok = ok && c.passed;
  }
  Outputs out{output_dir(cfg, o)};
  const std::string text = json{{"checks", arr}, {"passed", ok}}.dump(2) + "\n";
  out.write("selftest.json", text);
  write_manifest(out, "selftest", cfg, {{"selftest", elapsed}}, hex64(fnv1a64(text)));
  log_checks(log, checks);
  log << (ok ? "PASS" : "FAIL") << "\n";
  return ok ? kExitOk : kExitStudyFail;
}

int run(const std::vector<std::string>& cmd, const RunOptions& o, std::ostream& log) {
  try {
    if (cmd.empty()) throw std::invalid_argument("no subcommand");
    const std::string& c = cmd.front();
    if (c == "study") {
      if (cmd.size() != 2) throw std::invalid_argument("study needs one kind");
      StudyKind kind;
      try {
        kind = parse_study_kind(cmd[1]);
      } catch (const std::invalid_argument& e) {
        throw ConfigError({std::string("(config): ") + e.what()});
      }
      return run_study_command(kind, o, log);
    }
    if (cmd.size() != 1) throw std::invalid_argument("unexpected arguments after " + c);
    if (c == "simulate") return run_simulate(o, log);
    if (c == "estimate") return run_estimate(o, log);
    if (c == "components") return run_components(o, log);
    if (c == "selftest") return run_selftest(o, log);
    throw std::invalid_argument("unknown subcommand '" + c + "'");
  } catch (const ConfigError& e) {
    std::cerr << "configuration error:\n";
    for (const auto& v : e.violations()) std::cerr << "  " << v << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const UndefinedEstimate& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace margint
