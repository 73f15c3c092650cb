#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <stdexcept>
#include <vector>

#include "margint/additive.hpp"
#include "margint/errors.hpp"
#include "margint/quadrature.hpp"

using namespace margint;

namespace {

IntegrationDensity default_q(std::size_t d, int k = 2) {
  std::vector<IntegrationBump> f;
  for (std::size_t l = 0; l < d; ++l) f.push_back(make_integration_density({0.1, 0.9}, k, {0.1, 0.9}));
  return IntegrationDensity(f);
}

AdditiveModelSpec default_model() {
  return AdditiveModelSpec::make(1.0, {ComponentFunction::sine(1.0), ComponentFunction::polynomial({-0.5, 1.0})},
                                 0.5);
}

}  // namespace

TEST(Additive, BumpIsSmoothProbabilityDensity) {
  for (int k : {0, 2, 4}) {
    const IntegrationBump b({0.2, 0.7}, k);
    const GaussLegendre rule(64, 0.2, 0.7);
    EXPECT_NEAR(rule.integrate([&](double u) { return b(u); }), 1.0, 1e-13);
    for (int r = 0; r <= k; ++r) {
      EXPECT_NEAR(b.derivative(0.2, r), 0.0, 1e-9) << "k=" << k << " r=" << r;
      EXPECT_NEAR(b.derivative(0.7, r), 0.0, 1e-9);
    }
    EXPECT_EQ(b(0.1), 0.0);
    EXPECT_EQ(b.derivative(0.75, 1), 0.0);
    const double h = 1e-5;
    for (double u : {0.3, 0.45, 0.61})
      EXPECT_NEAR(b.derivative(u, 1), (b(u + h) - b(u - h)) / (2 * h), 1e-4 * std::max(1.0, std::abs(b.derivative(u, 1))));
  }
}

TEST(Additive, IntegrationDensityProductAndLeaveOneOut) {
  const auto q = default_q(3);
  const std::vector<double> x{0.3, 0.5, 0.7};
  const double a = q.factor(0)(0.3), b = q.factor(1)(0.5), c = q.factor(2)(0.7);
  EXPECT_NEAR(q(x), a * b * c, 1e-14);
  EXPECT_NEAR(q.leave_one_out(x, 1), a * c, 1e-14);
  EXPECT_THROW(make_integration_density({0.0, 1.0}, 2, {0.1, 0.9}), std::invalid_argument);
}

TEST(Additive, TrueComponentIntegratesToZero) {
  const auto model = default_model();
  const auto q = default_q(2);
  const GaussLegendre rule(64, 0.1, 0.9);
  for (std::size_t l = 0; l < 2; ++l) {
    const double integral = rule.integrate([&](double u) { return true_component(model, q.factor(l), l, u) * q.factor(l)(u); });
    EXPECT_NEAR(integral, 0.0, 1e-13);
  }
  // m_2 = x - 1/2 is odd around the centre of a symmetric q, so eta_2 = m_2
  EXPECT_NEAR(true_component(model, q.factor(1), 1, 0.8), 0.3, 1e-13);
}

TEST(Additive, IdentityHoldsForAdditiveModels) {
  const auto model = default_model();
  const auto check = marginal_integration_identity_check(model, default_q(2));
  EXPECT_LT(check.max_residual, 1e-10);
  EXPECT_NEAR(check.integral_mq, 1.0, 1e-12);  // both components integrate to zero against q
  EXPECT_EQ(check.points, 25u);
}

TEST(Additive, IdentityDetectsInteraction) {
  const auto q = default_q(2);
  const auto check = marginal_integration_identity_check(
      [](std::span<const double> x) { return x[0] * x[1]; }, q, 7);
  // residual is (x - 1/2)(y - 1/2), largest at the corners of the support
  EXPECT_NEAR(check.max_residual, 0.16, 1e-10);
}

namespace {

struct Fixture {
  std::shared_ptr<const SamplePath> path;
  std::unique_ptr<RegressionEstimate> re;
  IntegrationDensity q = default_q(2);

  explicit Fixture(const AdditiveModelSpec& model, double horizon = 256.0, double h = 0.15) {
    path = std::make_shared<const SamplePath>(
        simulate_path(MixingProcessSpec::independent(2), model, 0.05, horizon, 21));
    const Kernel1D k = make_base_kernel(BaseKernel::epanechnikov);
    re = std::make_unique<RegressionEstimate>(
        path, std::vector<Kernel1D>{k, k}, std::vector<double>{h, h},
        known_internal_densities(*path, [](std::span<const double>) { return 1.0; }));
  }
};

}  // namespace

TEST(Additive, FactoredRouteEqualsTensorRoute) {
  const Fixture fx(default_model());
  const double g_t = global_average(*fx.re, fx.q, 16, QuadratureRoute::tensor);
  const double g_f = global_average(*fx.re, fx.q, 16, QuadratureRoute::factored);
  EXPECT_NEAR(g_t, g_f, 1e-12 * std::max(1.0, std::abs(g_t)));
  const auto grid = linear_grid(0.1, 0.9, 5);
  const auto ct = estimate_component(*fx.re, fx.q, 0, grid, 16, std::nullopt, QuadratureRoute::tensor);
  const auto cf = estimate_component(*fx.re, fx.q, 0, grid, 16, std::nullopt, QuadratureRoute::factored);
  for (std::size_t i = 0; i < grid.size(); ++i) EXPECT_NEAR(ct.values[i], cf.values[i], 1e-12);
  EXPECT_NEAR(cf.global_average, g_f, 1e-15);
}

TEST(Additive, ConstantModelIsLinearInTheConstant) {
  // With f known, m~ is c times a kernel density estimate, so eta_hat scales
  // exactly with c and shrinks as T grows.
  const auto grid = linear_grid(0.1, 0.9, 9);
  auto components = [&](double c, double horizon) {
    const auto model = AdditiveModelSpec::make(c, {ComponentFunction::zero(), ComponentFunction::zero()}, 0.0);
    const Fixture fx(model, horizon, 0.17 * std::pow(horizon, -0.2));
    std::vector<double> out;
    for (std::size_t l = 0; l < 2; ++l) {
      const auto comp = estimate_component(*fx.re, fx.q, l, grid, 32);
      out.insert(out.end(), comp.values.begin(), comp.values.end());
    }
    return out;
  };
  const auto one = components(1.0, 1024.0);
  const auto two = components(2.0, 1024.0);
  double m_small = 0.0;
  for (std::size_t i = 0; i < one.size(); ++i) {
    EXPECT_NEAR(two[i], 2.0 * one[i], 1e-12);
    m_small = std::max(m_small, std::abs(one[i]));
  }
  double m_large = 0.0;
  for (double v : components(1.0, 16384.0)) m_large = std::max(m_large, std::abs(v));
  EXPECT_LT(m_large, 0.5 * m_small);
}

TEST(Additive, ComponentEstimateTracksTruth) {
  const auto model = default_model();
  const Fixture fx(model, 2048.0, 0.08);
  const auto grid = linear_grid(0.2, 0.8, 7);
  const auto c = estimate_component(*fx.re, fx.q, 0, grid, 32);
  for (std::size_t i = 0; i < grid.size(); ++i)
    EXPECT_NEAR(c.values[i], true_component(model, fx.q.factor(0), 0, grid[i]), 0.1);
  EXPECT_NEAR(c.value_at(0.2), c.values[0], 0.0);
  EXPECT_NEAR(c.value_at(0.25), 0.5 * (c.values[0] + c.values[1]), 1e-14);
  EXPECT_THROW(c.value_at(0.1), std::out_of_range);
  EXPECT_THROW(estimate_component(*fx.re, fx.q, 0, grid, 8), std::invalid_argument);
  EXPECT_THROW(estimate_component(*fx.re, fx.q, 2, grid, 32), std::invalid_argument);

  const auto c2 = estimate_component(*fx.re, fx.q, 1, grid, 32, c.global_average);
  const std::vector<ComponentEstimate> comps{c, c2};
  const std::vector<double> x{0.3, 0.6};
  EXPECT_NEAR(reconstruct_regression(comps, c.global_average, x),
              c.value_at(0.3) + c2.value_at(0.6) + c.global_average, 1e-14);
  const std::vector<double> outside{0.95, 0.6};
  EXPECT_THROW(reconstruct_regression(comps, c.global_average, outside), std::out_of_range);
}

TEST(Additive, UndefinedWhenKernelMassIsMissing) {
  const Fixture fx(default_model(), 8.0, 0.002);
  EXPECT_THROW(global_average(*fx.re, fx.q, 32), UndefinedEstimate);
}

TEST(Additive, BiasTermForSineComponent) {
  const auto model = default_model();
  const auto q = default_q(2);
  const Kernel1D k = make_base_kernel(BaseKernel::epanechnikov);
  const auto grid = linear_grid(0.1, 0.9, 5);
  const double h = 0.05;
  const BiasTerm b = bias_term(model, k, q.factor(0), 0, grid, h, 2);
  EXPECT_NEAR(b.moment_factor, 0.1, 1e-13);  // int u^2 K / 2! with int u^2 K = 1/5
  const GaussLegendre rule(64, 0.1, 0.9);
  const double integral = rule.integrate([&](double u) { return model.components[0](u) * q.factor(0).derivative(u, 2); });
  EXPECT_NEAR(b.integral_part, integral, 1e-12);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double m2 = -4.0 * M_PI * M_PI * std::sin(2 * M_PI * grid[i]);
    EXPECT_NEAR(b.derivative_part[i], m2, 1e-10);
    EXPECT_NEAR(b.values[i], h * h * 0.1 * (m2 + integral), 1e-12);
  }
  EXPECT_THROW(bias_term(model, k, q.factor(0), 0, grid, h, 4), std::invalid_argument);
}
