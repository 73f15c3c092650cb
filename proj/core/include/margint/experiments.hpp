#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "margint/additive.hpp"
#include "margint/estimators.hpp"
#include "margint/kernels.hpp"
#include "margint/process_sim.hpp"
#include "margint/stats.hpp"

namespace margint {

/// Everything needed to simulate and estimate one model.
struct Scenario {
  std::string name = "default";
  MixingProcessSpec process = MixingProcessSpec::independent(2);
  AdditiveModelSpec model;
  double delta = 0.05;
  BaseKernel base = BaseKernel::epanechnikov;
  int k = 2;
  int k_prime = 6;
  double c_prime = 0.068;
  std::vector<double> c1{0.17};
  std::vector<Interval> domain;  ///< the cube C, one interval per coordinate
  double neighborhood = 0.05;    ///< delta of the neighbourhood C^delta
  std::vector<Interval> q_support;
  std::size_t quad_res = 32;
  DensityMode mode = DensityMode::known_f;
  double floor_factor = 0.1;
  double floor_minimum = 1e-3;
  std::size_t density_grid_points = 21;    ///< per axis, over C
  std::size_t component_grid_points = 33;  ///< over C_l

  /// d=2, m_1 = sin(2 pi x), m_2 = x - 1/2, mu = 1, w = 0.5, C = [0.1,0.9]^2.
  static Scenario default_scenario();

  std::size_t dim() const { return model.dim(); }
  BandwidthSchedule schedule() const;
};

/// per_axis^d points covering the box, row-major, first coordinate fastest.
std::vector<double> cube_grid(std::span<const Interval> box, std::size_t per_axis);

/// Kernels, weights and grids built once per scenario.
struct EstimationKit {
  Kernel1D regression_kernel;
  ProductKernel density_kernel;
  IntegrationDensity q;
  std::vector<double> density_grid;  ///< row-major points covering C

  explicit EstimationKit(const Scenario& scenario);
};

DensityEstimate fit_density(const Scenario& scenario, const EstimationKit& kit,
                            std::shared_ptr<const SamplePath> path);

/// Builds m~ for the path in the requested mode. `density` is required for
/// estimated_f and ignored otherwise.
RegressionEstimate fit_regression(const Scenario& scenario, const EstimationKit& kit,
                                  std::shared_ptr<const SamplePath> path, DensityMode mode,
                                  const DensityEstimate* density = nullptr);

/// sup over the density grid of |f_hat - f|.
double sup_density_error(const Scenario& scenario, const EstimationKit& kit,
                         const DensityEstimate& de);

enum class StudyKind { rate, normality, coverage, density_rate, density_mode };

StudyKind parse_study_kind(std::string_view text);
std::string_view to_string(StudyKind kind);

struct StudyConfig {
  Scenario scenario = Scenario::default_scenario();
  std::vector<double> horizons{512, 1024, 2048, 4096, 8192};
  std::size_t replicas = 200;
  std::size_t coordinate = 0;  ///< zero-based
  double x = 0.5;
  std::uint64_t master_seed = 20240917;
  bool bias_correction = true;
  std::size_t workers = 1;
  double alpha = 0.05;
  double beta = 0.95;
  double slope_tolerance = 0.15;
  double density_slope_tolerance = 0.2;
  double coverage_epsilon = 0.05;
  double ks_threshold = 0.01;
  double max_failed_fraction = 0.05;
  QuadratureRoute route = QuadratureRoute::factored;

  /// Throws std::invalid_argument when the study's preconditions fail.
  void validate(StudyKind kind) const;
};

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct ReplicaRecord {
  double horizon = 0.0;
  std::size_t replica = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string failure;
  double estimate = kNaN;
  double truth = kNaN;
  double error = kNaN;      ///< estimate - truth
  double bias_term = kNaN;  ///< h^k b_l(x)
  double density_error = kNaN;  ///< sup-grid |f_hat - f|
  double component_gap = kNaN;  ///< sup-grid |eta_hat(known f) - eta_hat(estimated f)|
};

struct HorizonSummary {
  double horizon = 0.0;
  double bandwidth = 0.0;
  std::size_t ok = 0;
  std::size_t failed = 0;
  double mean_error = kNaN;
  double variance = kNaN;  ///< population variance over replicas
  double mse = kNaN;
  double scaled_variance = kNaN;  ///< T^{2k/(2k+1)} Var
  double median_abs_error = kNaN;
  double median_density_error = kNaN;
  double median_component_gap = kNaN;
};

struct Check {
  std::string name;
  double value = kNaN;
  std::string bound;
  bool passed = false;
};

struct NormalitySummary {
  double horizon = 0.0;
  double bias_term = 0.0;
  double sd = 0.0;
  double mean = 0.0;
  double variance = 0.0;
  double skewness = 0.0;
  KsResult ks;
};

struct CoverageSummary {
  double A = 0.0;
  std::vector<std::pair<double, double>> A_by_horizon;  ///< (T, sqrt(T^{2k/(2k+1)} Var))
  double A_stability = 0.0;  ///< max/min of the two values
  double alpha = 0.0;
  double beta = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  std::size_t inside = 0;
  std::size_t total = 0;
  double frequency = 0.0;
};

struct DensityModeSummary {
  double constant = 0.0;  ///< geometric mean of the per-T ratios
  std::vector<double> ratios;
};

struct StudyResult {
  StudyKind kind = StudyKind::rate;
  std::vector<HorizonSummary> horizons;
  std::vector<ReplicaRecord> records;
  std::optional<SlopeFit> fit;
  double target_slope = kNaN;
  double slope_tolerance = kNaN;
  std::optional<NormalitySummary> normality;
  std::optional<CoverageSummary> coverage;
  std::optional<DensityModeSummary> density_mode;
  std::vector<Check> checks;
  std::size_t failed = 0;
  bool aborted = false;
  std::string abort_reason;
  bool passed = false;
  double runtime_seconds = 0.0;
  std::size_t workers = 1;
};

/// Runs job(i) for i in [0, n) on a pool of `workers` threads. Exceptions
/// escaping a job are rethrown after every thread has joined.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& job);

/// One replica: simulate with derive_seed(master, index), estimate eta_l(x)
/// and record the error. The seed does not depend on T, so shorter horizons
/// see a prefix of the same path. Estimation failures are recorded, not thrown.
ReplicaRecord run_replication(const StudyConfig& config, const EstimationKit& kit, double horizon,
                              std::size_t index);
ReplicaRecord run_replication(const StudyConfig& config, double horizon, std::size_t index);

/// Per-T statistics from the successful records of one horizon.
HorizonSummary summarize_horizon(double horizon, std::span<const ReplicaRecord> records, int k);

/// Fits log MSE against log T and checks the slope against -2k/(2k+1).
/// Works on any summaries, including manufactured ones.
void summarize_rate(StudyResult& result, int k, double tolerance);

/// Statistics of the studentized sample e_i / sd(e).
NormalitySummary summarize_normality(std::span<const double> errors);

/// sqrt(max over the two largest horizons of T^{2k/(2k+1)} Var).
CoverageSummary estimate_A(std::span<const HorizonSummary> horizons);

/// Fraction of scaled errors inside [A q_alpha, A q_beta].
void summarize_coverage(CoverageSummary& cov, std::span<const double> scaled_errors, double alpha,
                        double beta);

/// True when `values` is non-increasing apart from at most one adjacent rise.
bool nearly_monotone(std::span<const double> values);

StudyResult mse_rate_study(const StudyConfig& config);
StudyResult normality_study(const StudyConfig& config);
StudyResult coverage_study(const StudyConfig& config);
double estimate_A(const StudyConfig& config);
StudyResult density_rate_study(const StudyConfig& config);
StudyResult density_mode_study(const StudyConfig& config);
StudyResult run_study(StudyKind kind, const StudyConfig& config);

/// Manufactured-data checks of every study computation.
std::vector<Check> run_selftests(std::uint64_t seed = 7);

}  // namespace margint
