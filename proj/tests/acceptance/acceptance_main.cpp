// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "margint/additive.hpp"
#include "margint/config.hpp"
#include "margint/experiments.hpp"
#include "margint/kernels.hpp"
#include "margint/run.hpp"

using namespace margint;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

double elapsed(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

std::size_t worker_count() { return std::max(1u, std::thread::hardware_concurrency()); }

StudyConfig default_study(StudyKind kind) {
  StudyConfig c = resolve_config({}).study(kind);
  c.workers = worker_count();
  return c;
}

std::string failed_checks(const StudyResult& r) {
  std::string s;
  for (const auto& c : r.checks)
    if (!c.passed) s += "; failed: " + c.name;
  if (r.aborted) s += "; aborted: " + r.abort_reason;
  return s;
}

IntegrationDensity default_q(std::size_t d) {
  std::vector<IntegrationBump> f;
  for (std::size_t l = 0; l < d; ++l) f.push_back(make_integration_density({0.1, 0.9}, 2, {0.1, 0.9}));
  return IntegrationDensity(f);
}

Outcome identity_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  using CF = ComponentFunction;
  const std::vector<AdditiveModelSpec> models{
      AdditiveModelSpec::make(1.0, {CF::sine(1.0), CF::polynomial({-0.5, 1.0})}, 0.5),
      AdditiveModelSpec::make(-0.3, {CF::polynomial({0.0, 0.0, 2.0, -1.0}), CF::sine(2.0, 0.5, 0.4)}, 0.2),
      AdditiveModelSpec::make(2.0, {CF::sine(0.5, 1.5), CF::zero()}, 0.0),
      AdditiveModelSpec::make(0.0, {CF::sine(1.0), CF::polynomial({0.0, 1.0, 1.0}), CF::sine(3.0, 0.2)}, 0.5),
      AdditiveModelSpec::make(1.2, {CF::polynomial({1.0, -2.0, 0.0, 0.0, 1.0}), CF::sine(1.5, 0.8, 1.0),
                                    CF::polynomial({0.0, 0.5})},
                              0.1)};
  double worst = 0.0;
  for (const auto& m : models) worst = std::max(worst, marginal_integration_identity_check(m, default_q(m.dim()), 7).max_residual);
  const double t = elapsed(t0);
  return {worst < 1e-8 && t < 1.0, fmt("max residual %.2e (< 1e-8) over 5 models, %.3f s", worst, t)};
}

// Composite Simpson, independent of the Gauss-Legendre moments used in construction.
double simpson(const Kernel1D& k, int j) {
  const int n = 6000;
  const double s = k.support();
  const double h = 2.0 * s / n;
  double acc = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double u = -s + i * h;
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    acc += w * std::pow(u, j) * k(u);
  }
  return acc * h / 3.0;
}

Outcome kernel_orders() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  bool orders_ok = true;
  for (auto base : {BaseKernel::epanechnikov, BaseKernel::quartic, BaseKernel::triweight}) {
    for (int p : {2, 4, 6}) {
      const Kernel1D k = raise_kernel_order(make_base_kernel(base), p);
      orders_ok = orders_ok && k.order() == p;
      worst = std::max(worst, std::abs(simpson(k, 0) - 1.0));
      for (int j = 1; j < p; ++j) worst = std::max(worst, std::abs(simpson(k, j)));
    }
  }
  const double t = elapsed(t0);
  return {orders_ok && worst < 1e-10 && t < 1.0, fmt("max moment deviation %.2e (< 1e-10), %.3f s", worst, t)};
}

Outcome rate(StudyResult& out) {
  out = mse_rate_study(default_study(StudyKind::rate));
  const double s = out.fit ? out.fit->slope : kNaN;
  const bool in_band = std::abs(s - (-0.8)) <= 0.15;
  return {out.passed && in_band,
          fmt("MSE slope %.4f, target -0.8 +/- 0.15, %.0f s", s, out.runtime_seconds) + failed_checks(out)};
}

Outcome normality() {
  const StudyResult r = normality_study(default_study(StudyKind::normality));
  if (!r.normality) return {false, "no summary" + failed_checks(r)};
  const auto& n = *r.normality;
  const bool ok = std::abs(n.mean) < 0.1 && n.variance >= 0.8 && n.variance <= 1.2 && n.ks.p_value > 0.01;
  return {ok && r.passed, fmt("mean %.4f, variance %.4f, KS p %.4f", n.mean, n.variance, n.ks.p_value) +
                              fmt(", %.0f s", r.runtime_seconds) + failed_checks(r)};
}

Outcome coverage() {
  const StudyResult r = coverage_study(default_study(StudyKind::coverage));
  if (!r.coverage) return {false, "no summary" + failed_checks(r)};
  const auto& c = *r.coverage;
  return {c.frequency >= 0.85 && !r.aborted,
          fmt("coverage %.4f (>= 0.85), A = %.4f, %.0f s", c.frequency, c.A, r.runtime_seconds) + failed_checks(r)};
}

Outcome density_rate() {
  const StudyResult r = density_rate_study(default_study(StudyKind::density_rate));
  const double s = r.fit ? r.fit->slope : kNaN;
  const double target = -6.0 / 14.0;
  return {r.passed && std::abs(s - target) <= 0.2,
          fmt("sup-error slope %.4f, target %.4f +/- 0.2, %.0f s", s, target, r.runtime_seconds) + failed_checks(r)};
}

Outcome density_mode() {
  const StudyResult r = density_mode_study(default_study(StudyKind::density_mode));
  if (!r.density_mode) return {false, "no summary" + failed_checks(r)};
  std::string gaps;
  for (const auto& h : r.horizons) gaps += fmt(" %.3e", h.median_component_gap);
  double worst = 0.0;
  for (double v : r.density_mode->ratios) worst = std::max(worst, v / r.density_mode->constant);
  return {r.passed, fmt("fitted constant %.4f, max ratio / constant %.3f, %.0f s", r.density_mode->constant, worst,
                        r.runtime_seconds) +
                        ", median gaps" + gaps + failed_checks(r)};
}

Outcome selftests() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto checks = run_selftests();
  const double t = elapsed(t0);
  std::string bad;
  bool ok = true;
  for (const auto& c : checks) {
    if (!c.passed) bad += "; failed: " + c.name;
    ok = ok && c.passed;
  }
  return {ok && t < 10.0, fmt("%.0f checks, %.2f s (< 10 s)", static_cast<double>(checks.size()), t) + bad};
}

Outcome determinism(const StudyResult& first) {
  StudyConfig c = default_study(StudyKind::rate);
  c.workers = c.workers == 1 ? 2 : 1;
  const StudyResult again = mse_rate_study(c);
  const std::string a = results_hash(first);
  const std::string b = results_hash(again);
  const bool same_json = study_result_json(first, false) == study_result_json(again, false);
  return {a == b && same_json, "rate study rerun with " + std::to_string(c.workers) + " worker(s): hash " + a +
                                   (a == b ? " == " : " != ") + b};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int id, const std::string& name, const std::function<Outcome()>& fn) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.passed ? 0 : 1;
    std::printf("criterion %d [%s] %s: %s\n", id, o.passed ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
  };

  StudyResult rate_result;
  report(1, "marginal integration identity", identity_oracle);
  report(2, "kernel order moments", kernel_orders);
  report(3, "component MSE rate", [&] { return rate(rate_result); });
  report(4, "studentized normality", normality);
  report(5, "interval coverage", coverage);
  report(6, "density sup-error rate", density_rate);
  report(7, "known vs estimated density", density_mode);
  report(8, "manufactured-data self-tests", selftests);
  report(9, "bitwise determinism", [&] { return determinism(rate_result); });

  std::printf("%d of 9 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
