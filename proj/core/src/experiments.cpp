#include "margint/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>

#include "margint/errors.hpp"

namespace margint {

Scenario Scenario::default_scenario() {
  Scenario s;
  s.process = MixingProcessSpec::independent(2, 1.0);
  s.model = AdditiveModelSpec::make(
      1.0, {ComponentFunction::sine(1.0), ComponentFunction::polynomial({-0.5, 1.0})}, 0.5);
  s.domain = {{0.1, 0.9}, {0.1, 0.9}};
  s.q_support = s.domain;
  return s;
}

BandwidthSchedule Scenario::schedule() const {
  BandwidthSchedule sched;
  sched.c_prime = c_prime;
  sched.c1 = c1;
  sched.k = k;
  sched.k_prime = k_prime;
  sched.d = dim();
  return sched;
}

std::vector<double> cube_grid(std::span<const Interval> box, std::size_t per_axis) {
  const std::size_t d = box.size();
  std::vector<std::vector<double>> axes;
  for (const auto& iv : box) axes.push_back(linear_grid(iv.lower, iv.upper, per_axis));
  std::size_t total = 1;
  for (std::size_t l = 0; l < d; ++l) total *= per_axis;
  std::vector<double> out;
  out.reserve(total * d);
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::size_t rest = flat;
    for (std::size_t l = 0; l < d; ++l) {
      out.push_back(axes[l][rest % per_axis]);
      rest /= per_axis;
    }
  }
  return out;
}

namespace {

IntegrationDensity build_q(const Scenario& s) {
  std::vector<IntegrationBump> bumps;
  for (std::size_t l = 0; l < s.q_support.size(); ++l)
    bumps.push_back(make_integration_density(s.q_support[l], s.k, s.domain.at(l)));
  return IntegrationDensity(std::move(bumps));
}

Kernel1D regression_kernel_for(const Scenario& s) {
  const Kernel1D base = make_base_kernel(s.base);
  return s.k == 2 ? base : raise_kernel_order(base, s.k);
}

}  // namespace

EstimationKit::EstimationKit(const Scenario& scenario)
    : regression_kernel(regression_kernel_for(scenario)),
      density_kernel(raise_kernel_order(make_base_kernel(scenario.base), scenario.k_prime),
                     scenario.dim()),
      q(build_q(scenario)),
      density_grid(cube_grid(scenario.domain, scenario.density_grid_points)) {}

DensityEstimate fit_density(const Scenario& scenario, const EstimationKit& kit,
                            std::shared_ptr<const SamplePath> path) {
  const double h = bandwidth_density(path->horizon, scenario.schedule());
  return DensityEstimate(std::move(path), kit.density_kernel, h);
}

RegressionEstimate fit_regression(const Scenario& scenario, const EstimationKit& kit,
                                  std::shared_ptr<const SamplePath> path, DensityMode mode,
                                  const DensityEstimate* density) {
  const auto h = regression_bandwidths(path->horizon, scenario.schedule());
  InternalDensities dens;
  if (mode == DensityMode::known_f) {
    dens = known_internal_densities(
        *path, [&](std::span<const double> x) { return scenario.process.stationary_density(x); });
  } else {
    if (!density) throw std::invalid_argument("fit_regression: estimated_f needs a density estimate");
    const double floor =
        density_floor(*density, kit.density_grid, scenario.floor_factor, scenario.floor_minimum);
    dens = precompute_internal_densities(*density, floor);
  }
  std::vector<Kernel1D> kernels(scenario.dim(), kit.regression_kernel);
  const AdditiveModelSpec& model = scenario.model;
  return RegressionEstimate(std::move(path), std::move(kernels), h, std::move(dens),
                            [&model](double y) { return model.psi(y); });
}

double sup_density_error(const Scenario& scenario, const EstimationKit& kit,
                         const DensityEstimate& de) {
  const std::size_t d = scenario.dim();
  const std::span<const double> grid = kit.density_grid;
  double worst = 0.0;
  for (std::size_t i = 0; i < grid.size(); i += d) {
    const auto x = grid.subspan(i, d);
    worst = std::max(worst, std::abs(de(x) - scenario.process.stationary_density(x)));
  }
  return worst;
}

StudyKind parse_study_kind(std::string_view text) {
  if (text == "rate") return StudyKind::rate;
  if (text == "normality") return StudyKind::normality;
  if (text == "coverage") return StudyKind::coverage;
  if (text == "density-rate") return StudyKind::density_rate;
  if (text == "density-mode") return StudyKind::density_mode;
  throw std::invalid_argument("unknown study '" + std::string(text) + "'");
}

std::string_view to_string(StudyKind kind) {
  switch (kind) {
    case StudyKind::rate: return "rate";
    case StudyKind::normality: return "normality";
    case StudyKind::coverage: return "coverage";
    case StudyKind::density_rate: return "density-rate";
    case StudyKind::density_mode: return "density-mode";
  }
  return "?";
}

void StudyConfig::validate(StudyKind kind) const {
  if (horizons.empty()) throw std::invalid_argument("study: empty T grid");
  for (std::size_t i = 0; i < horizons.size(); ++i) {
    if (!(horizons[i] > 1.0)) throw std::invalid_argument("study: every T must exceed 1");
    if (i > 0 && !(horizons[i] > horizons[i - 1]))
      throw std::invalid_argument("study: T grid must be strictly increasing");
  }
  if (replicas < 2) throw std::invalid_argument("study: need at least 2 replicas");
  if (coordinate >= scenario.dim()) throw std::invalid_argument("study: coordinate out of range");
  switch (kind) {
    case StudyKind::rate:
    case StudyKind::density_rate:
      if (horizons.size() < 3) throw std::invalid_argument("study: slope studies need >= 3 horizons");
      break;
    case StudyKind::normality:
      if (replicas < 100) throw std::invalid_argument("study: normality needs >= 100 replicas");
      break;
    case StudyKind::coverage:
      if (replicas < 100) throw std::invalid_argument("study: coverage needs >= 100 replicas");
      if (horizons.size() < 2) throw std::invalid_argument("study: coverage needs >= 2 horizons for A");
      if (!(alpha > 0.0 && alpha < 0.5 && beta > 0.5 && beta < 1.0))
        throw std::invalid_argument("study: need alpha in (0, 0.5) and beta in (0.5, 1)");
      break;
    case StudyKind::density_mode:
      if (horizons.size() < 2) throw std::invalid_argument("study: density-mode needs >= 2 horizons");
      break;
  }
  if (workers == 0) throw std::invalid_argument("study: need at least one worker");
}

void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& job) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          job(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

namespace {

double rate_exponent(int k) { return 2.0 * k / (2.0 * k + 1.0); }

double bias_at(const StudyConfig& c, const EstimationKit& kit, double horizon) {
  const double h = bandwidth_regression(horizon, c.scenario.schedule(), c.coordinate);
  const double grid[] = {c.x};
  return bias_term(c.scenario.model, kit.regression_kernel, kit.q.factor(c.coordinate), c.coordinate,
                   grid, h, c.scenario.k)
      .values.front();
}

std::shared_ptr<const SamplePath> simulate_for(const StudyConfig& c, double horizon,
                                               std::uint64_t seed) {
  return std::make_shared<const SamplePath>(
      simulate_path(c.scenario.process, c.scenario.model, c.scenario.delta, horizon, seed));
}

/// Runs `replicas` records for every horizon, stopping early when the failed
/// fraction at some T exceeds the limit.
template <typename Job>
void run_batches(const StudyConfig& c, std::span<const double> horizons, std::size_t first_index,
                 StudyResult& result, Job&& job) {
  for (double horizon : horizons) {
    std::vector<ReplicaRecord> batch(c.replicas);
    parallel_for(c.replicas, c.workers,
                 [&](std::size_t i) { batch[i] = job(horizon, first_index + i); });
    std::size_t failed = 0;
    for (const auto& r : batch) failed += r.ok ? 0 : 1;
    result.failed += failed;
    result.records.insert(result.records.end(), batch.begin(), batch.end());
    if (static_cast<double>(failed) > c.max_failed_fraction * static_cast<double>(c.replicas)) {
      result.aborted = true;
      result.abort_reason = std::to_string(failed) + " of " + std::to_string(c.replicas) +
                            " replicas failed at T=" + std::to_string(horizon) +
                            "; bandwidths are too small for the data";
      return;
    }
  }
}

std::vector<ReplicaRecord> records_at(const StudyResult& r, double horizon) {
  std::vector<ReplicaRecord> out;
  for (const auto& rec : r.records)
    if (rec.horizon == horizon) out.push_back(rec);
  return out;
}

void finish(StudyResult& r, std::chrono::steady_clock::time_point start) {
  if (r.aborted) r.checks.push_back({"failed replicas within limit", static_cast<double>(r.failed),
                                     r.abort_reason, false});
  r.passed = !r.aborted && !r.checks.empty() &&
             std::all_of(r.checks.begin(), r.checks.end(), [](const Check& c) { return c.passed; });
  r.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string band(double lo, double hi) {
  return "[" + std::to_string(lo) + ", " + std::to_string(hi) + "]";
}

}  // namespace

ReplicaRecord run_replication(const StudyConfig& c, const EstimationKit& kit, double horizon,
                              std::size_t index) {
  ReplicaRecord rec;
  rec.horizon = horizon;
  rec.replica = index;
  rec.seed = derive_seed(c.master_seed, index);
  try {
    auto path = simulate_for(c, horizon, rec.seed);
    std::optional<DensityEstimate> de;
    if (c.scenario.mode == DensityMode::estimated_f) de.emplace(fit_density(c.scenario, kit, path));
    const RegressionEstimate re =
        fit_regression(c.scenario, kit, path, c.scenario.mode, de ? &*de : nullptr);
    const double grid[] = {c.x};
    const ComponentEstimate est =
        estimate_component(re, kit.q, c.coordinate, grid, c.scenario.quad_res, std::nullopt, c.route);
    rec.estimate = est.values.front();
    rec.truth = true_component(c.scenario.model, kit.q.factor(c.coordinate), c.coordinate, c.x);
    rec.error = rec.estimate - rec.truth;
    rec.bias_term = bias_at(c, kit, horizon);
    rec.ok = true;
  } catch (const UndefinedEstimate& e) {
    rec.failure = e.what();
  } catch (const DataError& e) {
    rec.failure = e.what();
  }
  return rec;
}

ReplicaRecord run_replication(const StudyConfig& config, double horizon, std::size_t index) {
  const EstimationKit kit(config.scenario);
  return run_replication(config, kit, horizon, index);
}

HorizonSummary summarize_horizon(double horizon, std::span<const ReplicaRecord> records, int k) {
  HorizonSummary s;
  s.horizon = horizon;
  std::vector<double> err;
  std::vector<double> abs_err;
  std::vector<double> dens;
  std::vector<double> gap;
  for (const auto& r : records) {
    if (!r.ok) {
      ++s.failed;
      continue;
    }
    ++s.ok;
    if (!std::isnan(r.error)) {
      err.push_back(r.error);
      abs_err.push_back(std::abs(r.error));
    }
    if (!std::isnan(r.density_error)) dens.push_back(r.density_error);
    if (!std::isnan(r.component_gap)) gap.push_back(r.component_gap);
  }
  if (!err.empty()) {
    s.mean_error = mean(err);
    s.variance = variance(err);
    CompensatedSum sq;
    for (double e : err) sq.add(e * e);
    s.mse = sq.value() / static_cast<double>(err.size());
    s.scaled_variance = std::pow(horizon, rate_exponent(k)) * s.variance;
    s.median_abs_error = median(abs_err);
  }
  if (!dens.empty()) s.median_density_error = median(dens);
  if (!gap.empty()) s.median_component_gap = median(gap);
  return s;
}

bool nearly_monotone(std::span<const double> values) {
  std::size_t rises = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[i - 1]) ++rises;
  return rises <= 1;
}

void summarize_rate(StudyResult& result, int k, double tolerance) {
  std::vector<std::pair<double, double>> pts;
  std::vector<double> medians;
  for (const auto& h : result.horizons) {
    if (h.ok == 0 || !(h.mse > 0.0)) continue;
    pts.emplace_back(h.horizon, h.mse);
    medians.push_back(h.median_abs_error);
  }
  if (pts.size() < 3) throw std::invalid_argument("rate study: fewer than 3 valid horizons");
  result.fit = fit_loglog_slope(pts);
  result.target_slope = -rate_exponent(k);
  result.slope_tolerance = tolerance;
  const double lo = result.target_slope - tolerance;
  const double hi = result.target_slope + tolerance;
  result.checks.push_back({"MSE slope", result.fit->slope, band(lo, hi),
                           result.fit->slope >= lo && result.fit->slope <= hi});
  result.checks.push_back({"median |error| non-increasing (one rise allowed)", kNaN, "",
                           nearly_monotone(medians)});
}

NormalitySummary summarize_normality(std::span<const double> errors) {
  if (errors.size() < 8) throw std::invalid_argument("normality: need at least 8 errors");
  NormalitySummary s;
  s.sd = std::sqrt(sample_variance(errors));
  if (!(s.sd > 0.0)) throw std::invalid_argument("normality: degenerate zero-variance sample");
  std::vector<double> z;
  z.reserve(errors.size());
  for (double e : errors) z.push_back(e / s.sd);
  s.mean = mean(z);
  s.variance = variance(z);
  s.skewness = skewness(z);
  s.ks = ks_statistic(z);
  return s;
}

CoverageSummary estimate_A(std::span<const HorizonSummary> horizons) {
  std::vector<const HorizonSummary*> usable;
  for (const auto& h : horizons)
    if (h.ok >= 2 && !std::isnan(h.scaled_variance)) usable.push_back(&h);
  if (usable.size() < 2) throw std::invalid_argument("estimate_A: need two horizons with replicas");
  CoverageSummary cov;
  for (std::size_t i = usable.size() - 2; i < usable.size(); ++i)
    cov.A_by_horizon.emplace_back(usable[i]->horizon, std::sqrt(usable[i]->scaled_variance));
  const double a0 = cov.A_by_horizon[0].second;
  const double a1 = cov.A_by_horizon[1].second;
  cov.A = std::max(a0, a1);
  if (!(cov.A > 0.0)) throw std::invalid_argument("estimate_A: nonpositive A");
  cov.A_stability = cov.A / std::min(a0, a1);
  return cov;
}

void summarize_coverage(CoverageSummary& cov, std::span<const double> scaled_errors, double alpha,
                        double beta) {
  if (!(cov.A > 0.0)) throw std::invalid_argument("coverage: A must be positive");
  if (!(alpha > 0.0 && alpha < beta && beta < 1.0))
    throw std::invalid_argument("coverage: need 0 < alpha < beta < 1");
  if (scaled_errors.empty()) throw std::invalid_argument("coverage: no errors");
  cov.alpha = alpha;
  cov.beta = beta;
  cov.lower = cov.A * normal_quantile(alpha);
  cov.upper = cov.A * normal_quantile(beta);
  cov.inside = 0;
  for (double s : scaled_errors)
    if (s >= cov.lower && s <= cov.upper) ++cov.inside;
  cov.total = scaled_errors.size();
  cov.frequency = static_cast<double>(cov.inside) / static_cast<double>(cov.total);
}

namespace {

StudyResult error_study(const StudyConfig& c, std::span<const double> horizons,
                        std::size_t first_index, const EstimationKit& kit) {
  StudyResult r;
  r.workers = c.workers;
  run_batches(c, horizons, first_index, r,
              [&](double T, std::size_t i) { return run_replication(c, kit, T, i); });
  for (double T : horizons) {
    const auto recs = records_at(r, T);
    if (recs.empty()) break;
    auto s = summarize_horizon(T, recs, c.scenario.k);
    s.bandwidth = bandwidth_regression(T, c.scenario.schedule(), c.coordinate);
    r.horizons.push_back(s);
  }
  return r;
}

std::vector<double> corrected_errors(const StudyConfig& c, std::span<const ReplicaRecord> recs,
                                     double scale) {
  std::vector<double> out;
  for (const auto& r : recs)
    if (r.ok) out.push_back(scale * (r.error - (c.bias_correction ? r.bias_term : 0.0)));
  return out;
}

}  // namespace

StudyResult mse_rate_study(const StudyConfig& c) {
  const auto start = std::chrono::steady_clock::now();
  c.validate(StudyKind::rate);
  const EstimationKit kit(c.scenario);
  StudyResult r = error_study(c, c.horizons, 0, kit);
  r.kind = StudyKind::rate;
  if (!r.aborted) summarize_rate(r, c.scenario.k, c.slope_tolerance);
  finish(r, start);
  return r;
}

StudyResult normality_study(const StudyConfig& c) {
  const auto start = std::chrono::steady_clock::now();
  c.validate(StudyKind::normality);
  const EstimationKit kit(c.scenario);
  const double T = c.horizons.back();
  const double one[] = {T};
  StudyResult r = error_study(c, one, 0, kit);
  r.kind = StudyKind::normality;
  if (!r.aborted) {
    NormalitySummary n = summarize_normality(corrected_errors(c, r.records, 1.0));
    n.horizon = T;
    n.bias_term = c.bias_correction ? bias_at(c, kit, T) : 0.0;
    r.checks.push_back({"|mean| of studentized errors", std::abs(n.mean), "< 0.1", std::abs(n.mean) < 0.1});
    r.checks.push_back({"variance of studentized errors", n.variance, band(0.8, 1.2),
                        n.variance >= 0.8 && n.variance <= 1.2});
    r.checks.push_back({"KS p-value", n.ks.p_value, "> " + std::to_string(c.ks_threshold),
                        n.ks.p_value > c.ks_threshold});
    r.normality = n;
  }
  finish(r, start);
  return r;
}

double estimate_A(const StudyConfig& c) {
  c.validate(StudyKind::coverage);
  const EstimationKit kit(c.scenario);
  const std::span<const double> last_two(c.horizons.end() - 2, c.horizons.end());
  const StudyResult r = error_study(c, last_two, 0, kit);
  if (r.aborted) throw UndefinedEstimate("estimate_A: " + r.abort_reason);
  return estimate_A(r.horizons).A;
}

StudyResult coverage_study(const StudyConfig& c) {
  const auto start = std::chrono::steady_clock::now();
  c.validate(StudyKind::coverage);
  const EstimationKit kit(c.scenario);
  const std::span<const double> last_two(c.horizons.end() - 2, c.horizons.end());
  StudyResult r = error_study(c, last_two, 0, kit);
  r.kind = StudyKind::coverage;
  if (!r.aborted) {
    CoverageSummary cov = estimate_A(r.horizons);
    // Fresh replicas, disjoint from those that produced A.
    const double T = c.horizons.back();
    const double one[] = {T};
    StudyResult fresh = error_study(c, one, c.replicas, kit);
    r.failed += fresh.failed;
    r.records.insert(r.records.end(), fresh.records.begin(), fresh.records.end());
    if (fresh.aborted) {
      r.aborted = true;
      r.abort_reason = fresh.abort_reason;
    } else {
      const double scale = std::pow(T, rate_exponent(c.scenario.k) / 2.0);
      summarize_coverage(cov, corrected_errors(c, fresh.records, scale), c.alpha, c.beta);
      const double need = (c.beta - c.alpha) - c.coverage_epsilon;
      r.checks.push_back({"coverage frequency", cov.frequency, ">= " + std::to_string(need),
                          cov.frequency >= need});
      r.checks.push_back({"A stability across the two largest T", cov.A_stability, "<= 1.2",
                          cov.A_stability <= 1.2});
      r.coverage = cov;
    }
  }
  finish(r, start);
  return r;
}

StudyResult density_rate_study(const StudyConfig& c) {
  const auto start = std::chrono::steady_clock::now();
  c.validate(StudyKind::density_rate);
  const EstimationKit kit(c.scenario);
  StudyResult r;
  r.kind = StudyKind::density_rate;
  r.workers = c.workers;
  run_batches(c, c.horizons, 0, r, [&](double T, std::size_t i) {
    ReplicaRecord rec;
    rec.horizon = T;
    rec.replica = i;
    rec.seed = derive_seed(c.master_seed, i);
    const DensityEstimate de = fit_density(c.scenario, kit, simulate_for(c, T, rec.seed));
    rec.density_error = sup_density_error(c.scenario, kit, de);
    rec.ok = true;
    return rec;
  });
  std::vector<std::pair<double, double>> pts;
  for (double T : c.horizons) {
    const auto recs = records_at(r, T);
    if (recs.empty()) break;
    auto s = summarize_horizon(T, recs, c.scenario.k);
    s.bandwidth = bandwidth_density(T, c.scenario.schedule());
    r.horizons.push_back(s);
    pts.emplace_back(T / std::log(T), s.median_density_error);
  }
  if (!r.aborted) {
    r.fit = fit_loglog_slope(pts);
    const double kp = c.scenario.k_prime;
    r.target_slope = -kp / (2.0 * kp + static_cast<double>(c.scenario.dim()));
    r.slope_tolerance = c.density_slope_tolerance;
    const double lo = r.target_slope - r.slope_tolerance;
    const double hi = r.target_slope + r.slope_tolerance;
    r.checks.push_back({"sup-error slope against T/log T", r.fit->slope, band(lo, hi),
                        r.fit->slope >= lo && r.fit->slope <= hi});
  }
  finish(r, start);
  return r;
}

StudyResult density_mode_study(const StudyConfig& c) {
  const auto start = std::chrono::steady_clock::now();
  c.validate(StudyKind::density_mode);
  const EstimationKit kit(c.scenario);
  const std::size_t l = c.coordinate;
  const auto grid = linear_grid(c.scenario.domain[l].lower, c.scenario.domain[l].upper,
                                c.scenario.component_grid_points);
  StudyResult r;
  r.kind = StudyKind::density_mode;
  r.workers = c.workers;
  run_batches(c, c.horizons, 0, r, [&](double T, std::size_t i) {
    ReplicaRecord rec;
    rec.horizon = T;
    rec.replica = i;
    rec.seed = derive_seed(c.master_seed, i);
    try {
      auto path = simulate_for(c, T, rec.seed);
      const DensityEstimate de = fit_density(c.scenario, kit, path);
      rec.density_error = sup_density_error(c.scenario, kit, de);
      const auto known = fit_regression(c.scenario, kit, path, DensityMode::known_f);
      const auto estimated = fit_regression(c.scenario, kit, path, DensityMode::estimated_f, &de);
      const auto a = estimate_component(known, kit.q, l, grid, c.scenario.quad_res, std::nullopt, c.route);
      const auto b =
          estimate_component(estimated, kit.q, l, grid, c.scenario.quad_res, std::nullopt, c.route);
      double gap = 0.0;
      for (std::size_t j = 0; j < grid.size(); ++j) gap = std::max(gap, std::abs(a.values[j] - b.values[j]));
      rec.component_gap = gap;
      rec.ok = true;
    } catch (const UndefinedEstimate& e) {
      rec.failure = e.what();
    }
    return rec;
  });
  if (!r.aborted) {
    DensityModeSummary dm;
    std::vector<double> gaps;
    double log_sum = 0.0;
    for (double T : c.horizons) {
      const auto recs = records_at(r, T);
      auto s = summarize_horizon(T, recs, c.scenario.k);
      s.bandwidth = bandwidth_density(T, c.scenario.schedule());
      r.horizons.push_back(s);
      dm.ratios.push_back(s.median_component_gap / s.median_density_error);
      gaps.push_back(s.median_component_gap);
      log_sum += std::log(dm.ratios.back());
    }
    dm.constant = std::exp(log_sum / static_cast<double>(dm.ratios.size()));
    const double worst = *std::max_element(dm.ratios.begin(), dm.ratios.end());
    r.checks.push_back({"max ratio gap / sup|f_hat - f| over fitted constant", worst / dm.constant,
                        "<= 2", worst <= 2.0 * dm.constant});
    bool decreasing = true;
    for (std::size_t i = 1; i < gaps.size(); ++i) decreasing = decreasing && gaps[i] < gaps[i - 1];
    r.checks.push_back({"median gap strictly decreasing in T", kNaN, "", decreasing});
    r.density_mode = dm;
  }
  finish(r, start);
  return r;
}

StudyResult run_study(StudyKind kind, const StudyConfig& config) {
  switch (kind) {
    case StudyKind::rate: return mse_rate_study(config);
    case StudyKind::normality: return normality_study(config);
    case StudyKind::coverage: return coverage_study(config);
    case StudyKind::density_rate: return density_rate_study(config);
    case StudyKind::density_mode: return density_mode_study(config);
  }
  throw std::invalid_argument("unknown study kind");
}

std::vector<Check> run_selftests(std::uint64_t seed) {
  std::vector<Check> out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::vector<double> horizons{512, 1024, 2048, 4096, 8192};

  // Rate slope on errors proportional to T^{-0.4}: the same draws at every
  // T, so the MSE is exactly proportional to T^{-0.8}.
  {
    std::vector<double> z(200);
    for (double& v : z) v = normal(rng);
    StudyResult r;
    for (double T : horizons) {
      std::vector<ReplicaRecord> recs;
      for (std::size_t i = 0; i < z.size(); ++i) {
        ReplicaRecord rec;
        rec.horizon = T;
        rec.ok = true;
        rec.error = std::pow(T, -0.4) * z[i];
        recs.push_back(rec);
      }
      r.horizons.push_back(summarize_horizon(T, recs, 2));
    }
    summarize_rate(r, 2, 0.15);
    out.push_back({"rate slope recovery", r.fit->slope, "-0.8 +- 0.01", std::abs(r.fit->slope + 0.8) <= 0.01});

    double worst = 0.0;
    for (const auto& h : r.horizons)
      worst = std::max(worst, std::abs(h.mse - h.mean_error * h.mean_error - h.variance) / h.mse);
    out.push_back({"MSE = bias^2 + variance", worst, "< 1e-12 relative", worst < 1e-12});
  }

  // Density slope against T / log T.
  {
    std::vector<std::pair<double, double>> pts;
    const double target = -6.0 / 14.0;
    std::uniform_real_distribution<double> jitter(0.9, 1.1);
    const double common = jitter(rng);
    for (double T : horizons) pts.emplace_back(T / std::log(T), common * std::pow(std::log(T) / T, -target));
    const double slope = fit_loglog_slope(pts).slope;
    out.push_back({"density slope recovery", slope, "-0.4286 +- 0.02", std::abs(slope - target) <= 0.02});
  }

  // KS calibration: p-values of normal samples.
  {
    const std::size_t runs = 200;
    std::size_t above = 0;
    std::vector<double> ps;
    for (std::size_t run = 0; run < runs; ++run) {
      std::vector<double> s(500);
      for (double& v : s) v = normal(rng);
      const double p = ks_statistic(s).p_value;
      ps.push_back(p);
      above += p > 0.01 ? 1 : 0;
    }
    const double frac = static_cast<double>(above) / static_cast<double>(runs);
    out.push_back({"KS p > 0.01 on normal samples (fraction)", frac, ">= 0.97", frac >= 0.97});
    // Uniform p-values: their own KS distance to U(0,1) stays small.
    std::sort(ps.begin(), ps.end());
    double d = 0.0;
    for (std::size_t i = 0; i < ps.size(); ++i) {
      const double n = static_cast<double>(ps.size());
      d = std::max({d, (static_cast<double>(i) + 1.0) / n - ps[i], ps[i] - static_cast<double>(i) / n});
    }
    const double p_uniform = kolmogorov_survival(std::sqrt(static_cast<double>(ps.size())) * d);
    out.push_back({"KS p-values uniform (p of KS vs U(0,1))", p_uniform, "> 0.001", p_uniform > 0.001});
  }

  // Normality summary on a normal sample with arbitrary scale.
  {
    std::vector<double> e(500);
    for (double& v : e) v = 3.0 * normal(rng);
    const NormalitySummary n = summarize_normality(e);
    out.push_back({"normality summary on normal data",
                   n.ks.p_value, "|mean| < 0.1, var in [0.8, 1.2], p > 0.01",
                   std::abs(n.mean) < 0.1 && n.variance >= 0.8 && n.variance <= 1.2 && n.ks.p_value > 0.01});
  }

  // estimate_A and coverage on manufactured errors with Var = v T^{-0.8}.
  {
    const double v = 2.25;
    std::vector<HorizonSummary> hs;
    for (double T : {4096.0, 8192.0}) {
      std::vector<ReplicaRecord> recs;
      for (int i = 0; i < 4000; ++i) {
        ReplicaRecord rec;
        rec.ok = true;
        rec.error = std::sqrt(v * std::pow(T, -0.8)) * normal(rng);
        recs.push_back(rec);
      }
      hs.push_back(summarize_horizon(T, recs, 2));
    }
    CoverageSummary cov = estimate_A(hs);
    const double rel = std::abs(cov.A - std::sqrt(v)) / std::sqrt(v);
    out.push_back({"A recovery (relative error)", rel, "< 0.05", rel < 0.05});

    cov.A = std::sqrt(v);
    std::vector<double> scaled(4000);
    for (double& s : scaled) s = cov.A * normal(rng);
    summarize_coverage(cov, scaled, 0.05, 0.95);
    const double se = std::sqrt(0.9 * 0.1 / 4000.0);
    out.push_back({"coverage of N(0, A^2) draws", cov.frequency, "0.90 +- 4 se",
                   std::abs(cov.frequency - 0.9) <= 4.0 * se});
  }

  // Direct checks of the helpers.
  {
    std::vector<double> q;
    for (int i = 1; i <= 1000; ++i) q.push_back(normal_quantile(i / 1001.0));
    const double d = ks_statistic(q).statistic;
    out.push_back({"KS distance of normal quantiles", d, "< 0.01", d < 0.01});
    const std::vector<double> zeros(100, 0.0);
    const double dz = ks_statistic(zeros).statistic;
    out.push_back({"KS distance of a point mass at 0", dz, "0.5", std::abs(dz - 0.5) < 1e-12});
    std::vector<std::pair<double, double>> pts;
    for (double T : horizons) pts.emplace_back(T, 1.0 / T);
    const SlopeFit f = fit_loglog_slope(pts);
    out.push_back({"slope of 1/T", f.slope, "-1, R^2 = 1",
                   std::abs(f.slope + 1.0) < 1e-12 && std::abs(f.r_squared - 1.0) < 1e-12});
  }
  return out;
}

}  // namespace margint
