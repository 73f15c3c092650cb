#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "margint/experiments.hpp"
#include "margint/run.hpp"

using namespace margint;

namespace {

StudyConfig small_rate_config() {
  StudyConfig c;
  c.horizons = {256, 512, 1024};
  c.replicas = 8;
  c.master_seed = 5;
  return c;
}

}  // namespace

TEST(Experiments, SelfTestsPass) {
  const auto checks = run_selftests();
  ASSERT_GE(checks.size(), 8u);
  for (const auto& c : checks) EXPECT_TRUE(c.passed) << c.name << " value=" << c.value << " bound=" << c.bound;
}

TEST(Experiments, ParallelForCoversEveryIndexOnce) {
  for (std::size_t workers : {1u, 2u, 5u}) {
    std::vector<std::atomic<int>> hits(37);
    parallel_for(hits.size(), workers, [&](std::size_t i) { hits[i]++; });
    for (const auto& h : hits) EXPECT_EQ(h.load(), 1);
  }
  EXPECT_THROW(parallel_for(10, 3, [](std::size_t i) {
                 if (i == 7) throw std::runtime_error("boom");
               }),
               std::runtime_error);
}

TEST(Experiments, ReplicationIsDeterministicAndUsesSeedRule) {
  const StudyConfig c = small_rate_config();
  const ReplicaRecord a = run_replication(c, 512, 3);
  const ReplicaRecord b = run_replication(c, 512, 3);
  ASSERT_TRUE(a.ok) << a.failure;
  EXPECT_EQ(a.seed, derive_seed(5, 3));
  EXPECT_EQ(a.estimate, b.estimate);
  EXPECT_EQ(a.error, a.estimate - a.truth);
  EXPECT_TRUE(std::isfinite(a.bias_term));
  EXPECT_NE(run_replication(c, 512, 4).estimate, a.estimate);
}

TEST(Experiments, HorizonSummaryDecomposesMse) {
  std::vector<ReplicaRecord> recs(4);
  const double errs[] = {0.1, -0.2, 0.3, 0.0};
  for (int i = 0; i < 4; ++i) {
    recs[i].ok = true;
    recs[i].error = errs[i];
  }
  recs.push_back(ReplicaRecord{});  // failed
  const HorizonSummary s = summarize_horizon(1024, recs, 2);
  EXPECT_EQ(s.ok, 4u);
  EXPECT_EQ(s.failed, 1u);
  EXPECT_NEAR(s.mean_error, 0.05, 1e-15);
  EXPECT_NEAR(s.mse, s.variance + s.mean_error * s.mean_error, 1e-15);
  EXPECT_NEAR(s.scaled_variance, std::pow(1024.0, 0.8) * s.variance, 1e-12);
  EXPECT_NEAR(s.median_abs_error, 0.15, 1e-15);
}

TEST(Experiments, RateSummaryOnManufacturedData) {
  StudyResult r;
  for (double T : {512.0, 1024.0, 2048.0, 4096.0}) {
    HorizonSummary h;
    h.horizon = T;
    h.ok = 100;
    h.mse = 2.0 * std::pow(T, -0.8);
    h.median_abs_error = std::pow(T, -0.4);
    r.horizons.push_back(h);
  }
  summarize_rate(r, 2, 0.15);
  ASSERT_TRUE(r.fit);
  EXPECT_NEAR(r.fit->slope, -0.8, 1e-12);
  EXPECT_NEAR(r.target_slope, -0.8, 1e-15);
  for (const auto& c : r.checks) EXPECT_TRUE(c.passed) << c.name;

  for (auto& h : r.horizons) h.mse = 1.0 / h.horizon;
  r.checks.clear();
  summarize_rate(r, 2, 0.15);
  EXPECT_NEAR(r.fit->slope, -1.0, 1e-12);
  EXPECT_FALSE(r.checks.front().passed);
}

TEST(Experiments, NearlyMonotone) {
  EXPECT_TRUE(nearly_monotone(std::vector<double>{5, 4, 3, 2}));
  EXPECT_TRUE(nearly_monotone(std::vector<double>{5, 4, 4.5, 2}));
  EXPECT_FALSE(nearly_monotone(std::vector<double>{5, 6, 4, 4.5}));
}

TEST(Experiments, CoverageOfKnownNormal) {
  std::vector<HorizonSummary> hs(2);
  hs[0].horizon = 2048;
  hs[0].ok = 100;
  hs[0].scaled_variance = 0.81;
  hs[1].horizon = 4096;
  hs[1].ok = 100;
  hs[1].scaled_variance = 1.0;
  CoverageSummary cov = estimate_A(hs);
  EXPECT_NEAR(cov.A, 1.0, 1e-15);
  EXPECT_NEAR(cov.A_stability, 1.0 / 0.9, 1e-12);
  std::vector<double> scaled;
  for (int i = 1; i < 1000; ++i) scaled.push_back(normal_quantile(i / 1000.0));
  summarize_coverage(cov, scaled, 0.05, 0.95);
  EXPECT_NEAR(cov.lower, -1.6448536269514722, 1e-9);
  EXPECT_NEAR(cov.frequency, 0.9, 0.002);
  EXPECT_EQ(cov.total, scaled.size());
  std::vector<HorizonSummary> one(1, hs[0]);
  EXPECT_THROW(estimate_A(one), std::invalid_argument);
}

TEST(Experiments, SmallRateStudyIsIndependentOfWorkerCount) {
  StudyConfig c = small_rate_config();
  const StudyResult one = mse_rate_study(c);
  c.workers = 3;
  const StudyResult three = mse_rate_study(c);
  EXPECT_FALSE(one.aborted);
  EXPECT_EQ(one.records.size(), 24u);
  EXPECT_EQ(results_hash(one), results_hash(three));
  EXPECT_EQ(study_result_json(one, false), study_result_json(three, false));
  // common random numbers: replica i sees the same seed at every T
  EXPECT_EQ(one.records[0].seed, one.records[8].seed);
}

TEST(Experiments, SmallDensityStudies) {
  StudyConfig c = small_rate_config();
  c.replicas = 4;
  const StudyResult dr = density_rate_study(c);
  ASSERT_TRUE(dr.fit);
  EXPECT_LT(dr.fit->slope, 0.0);
  for (const auto& h : dr.horizons) EXPECT_GT(h.median_density_error, 0.0);
  c.horizons = {256, 1024};
  const StudyResult dm = density_mode_study(c);
  ASSERT_TRUE(dm.density_mode);
  EXPECT_EQ(dm.density_mode->ratios.size(), 2u);
  EXPECT_GT(dm.density_mode->constant, 0.0);
}

TEST(Experiments, TinyBandwidthAbortsStudy) {
  StudyConfig c = small_rate_config();
  c.scenario.c1 = {0.001};
  const StudyResult r = mse_rate_study(c);
  EXPECT_TRUE(r.aborted);
  EXPECT_FALSE(r.passed);
  EXPECT_FALSE(r.abort_reason.empty());
  EXPECT_EQ(r.records.size(), 8u);  // stops after the first horizon
}

TEST(Experiments, StudyPreconditions) {
  StudyConfig c = small_rate_config();
  c.horizons = {512, 256, 1024};
  EXPECT_THROW(c.validate(StudyKind::rate), std::invalid_argument);
  c = small_rate_config();
  EXPECT_THROW(c.validate(StudyKind::normality), std::invalid_argument);
  c.replicas = 200;
  c.alpha = 0.6;
  EXPECT_THROW(c.validate(StudyKind::coverage), std::invalid_argument);
  c = small_rate_config();
  c.coordinate = 2;
  EXPECT_THROW(c.validate(StudyKind::rate), std::invalid_argument);
  EXPECT_EQ(parse_study_kind("density-rate"), StudyKind::density_rate);
  EXPECT_THROW(parse_study_kind("speed"), std::invalid_argument);
}

TEST(Experiments, NoiselessConstantModelWithEstimatedDensity) {
  Scenario s = Scenario::default_scenario();
  s.model = AdditiveModelSpec::make(2.0, {ComponentFunction::zero(), ComponentFunction::zero()}, 0.0);
  const EstimationKit kit(s);
  const auto path = std::make_shared<const SamplePath>(simulate_path(s.process, s.model, s.delta, 4096.0, 100));
  const DensityEstimate de = fit_density(s, kit, path);
  const RegressionEstimate re = fit_regression(s, kit, path, DensityMode::estimated_f, &de);
  const auto grid = linear_grid(0.1, 0.9, 9);
  for (std::size_t l = 0; l < 2; ++l)
    for (double v : estimate_component(re, kit.q, l, grid, 32).values) EXPECT_LT(std::abs(v), 0.02);
  EXPECT_EQ(re.mode(), DensityMode::estimated_f);
  EXPECT_LT(sup_density_error(s, kit, de), 1.0);
}
