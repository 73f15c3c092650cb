#include "margint/additive.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "margint/errors.hpp"
#include "margint/quadrature.hpp"

namespace margint {

namespace {

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

std::vector<GaussLegendre> rules_for(const IntegrationDensity& q, std::size_t nodes) {
  std::vector<GaussLegendre> rules;
  for (std::size_t l = 0; l < q.dim(); ++l)
    rules.emplace_back(nodes, q.factor(l).support().lower, q.factor(l).support().upper);
  return rules;
}

}  // namespace

IntegrationBump::IntegrationBump(Interval support, int smoothness)
    : support_(support), smoothness_(smoothness) {
  if (!(support.upper > support.lower)) throw std::invalid_argument("IntegrationBump: empty support");
  if (smoothness < 0) throw std::invalid_argument("IntegrationBump: smoothness must be >= 0");
  const int n = smoothness + 1;
  // int_{-1}^{1} (1 - v^2)^n dv = 2^{2n+1} (n!)^2 / (2n+1)!
  double mass_v = 2.0;
  for (int j = 1; j <= n; ++j) mass_v *= (2.0 * j) / (2.0 * j + 1.0);
  const double c = 1.0 / (mass_v * 0.5 * support.width());
  coeffs_.assign(static_cast<std::size_t>(2 * n + 1), 0.0);
  for (int j = 0; j <= n; ++j)
    coeffs_[static_cast<std::size_t>(2 * j)] = c * binomial(n, j) * ((j % 2) ? -1.0 : 1.0);
}

double IntegrationBump::derivative(double u, int order) const {
  if (order < 0) throw std::invalid_argument("IntegrationBump: negative derivative order");
  if (u <= support_.lower || u >= support_.upper) return 0.0;
  const double half = 0.5 * support_.width();
  const double v = (u - 0.5 * (support_.lower + support_.upper)) / half;
  double value = 0.0;
  for (std::size_t j = coeffs_.size(); j-- > static_cast<std::size_t>(order);) {
    double falling = 1.0;
    for (int r = 0; r < order; ++r) falling *= static_cast<double>(j - static_cast<std::size_t>(r));
    value = value * v + falling * coeffs_[j];
  }
  return value * std::pow(1.0 / half, order);
}

IntegrationDensity::IntegrationDensity(std::vector<IntegrationBump> factors)
    : factors_(std::move(factors)) {
  if (factors_.empty()) throw std::invalid_argument("IntegrationDensity: no factors");
}

double IntegrationDensity::operator()(std::span<const double> x) const {
  if (x.size() != factors_.size()) throw std::invalid_argument("IntegrationDensity: dimension mismatch");
  double v = 1.0;
  for (std::size_t l = 0; l < factors_.size(); ++l) v *= factors_[l](x[l]);
  return v;
}

double IntegrationDensity::leave_one_out(std::span<const double> x, std::size_t l) const {
  if (x.size() != factors_.size()) throw std::invalid_argument("IntegrationDensity: dimension mismatch");
  double v = 1.0;
  for (std::size_t j = 0; j < factors_.size(); ++j)
    if (j != l) v *= factors_[j](x[j]);
  return v;
}

IntegrationBump make_integration_density(Interval support, int k, Interval domain) {
  if (!domain.contains(support))
    throw std::invalid_argument("integration density support [" + std::to_string(support.lower) + ", " +
                                std::to_string(support.upper) + "] is not inside the domain [" +
                                std::to_string(domain.lower) + ", " + std::to_string(domain.upper) + "]");
  return IntegrationBump(support, k);
}

double true_component(const AdditiveModelSpec& model, const IntegrationBump& q_l, std::size_t l,
                      double x_l) {
  const auto& m = model.components.at(l);
  const GaussLegendre rule(100, q_l.support().lower, q_l.support().upper);
  return m(x_l) - rule.integrate([&](double z) { return m(z) * q_l(z); });
}

IdentityCheck marginal_integration_identity_check(
    const std::function<double(std::span<const double>)>& m, const IntegrationDensity& q,
    std::size_t grid_points, std::size_t nodes) {
  const std::size_t d = q.dim();
  const auto rules = rules_for(q, nodes);

  double integral_mq = 0.0;
  for_each_tensor_node(rules, [&](std::span<const double> z, double w) { integral_mq += w * q(z) * m(z); });

  std::vector<std::vector<double>> grids;
  for (std::size_t l = 0; l < d; ++l) {
    const auto& s = q.factor(l).support();
    grids.push_back(linear_grid(s.lower, s.upper, grid_points));
  }

  // eta_l at each grid value, from the integral definition.
  std::vector<std::vector<double>> eta(d, std::vector<double>(grid_points));
  std::vector<double> point(d);
  for (std::size_t l = 0; l < d; ++l) {
    std::vector<GaussLegendre> others;
    for (std::size_t j = 0; j < d; ++j)
      if (j != l) others.push_back(rules[j]);
    for (std::size_t g = 0; g < grid_points; ++g) {
      double acc = 0.0;
      for_each_tensor_node(others, [&](std::span<const double> z, double w) {
        for (std::size_t j = 0, r = 0; j < d; ++j) point[j] = j == l ? grids[l][g] : z[r++];
        acc += w * q.leave_one_out(point, l) * m(point);
      });
      eta[l][g] = acc - integral_mq;
    }
  }

  IdentityCheck out;
  out.integral_mq = integral_mq;
  std::vector<std::size_t> idx(d, 0);
  while (true) {
    double rhs = integral_mq;
    for (std::size_t l = 0; l < d; ++l) {
      point[l] = grids[l][idx[l]];
      rhs += eta[l][idx[l]];
    }
    out.max_residual = std::max(out.max_residual, std::abs(m(point) - rhs));
    ++out.points;
    std::size_t l = 0;
    while (l < d && ++idx[l] == grid_points) idx[l++] = 0;
    if (l == d) break;
  }
  return out;
}

IdentityCheck marginal_integration_identity_check(const AdditiveModelSpec& model,
                                                  const IntegrationDensity& q,
                                                  std::size_t grid_points, std::size_t nodes) {
  return marginal_integration_identity_check(
      [&](std::span<const double> x) { return model.regression(x); }, q, grid_points, nodes);
}

double ComponentEstimate::value_at(double x_l) const {
  if (grid.empty() || x_l < grid.front() || x_l > grid.back())
    throw std::out_of_range("component " + std::to_string(coordinate + 1) + ": " +
                            std::to_string(x_l) + " outside the estimation grid");
  const auto it = std::upper_bound(grid.begin(), grid.end(), x_l);
  if (it == grid.end()) return values.back();
  const auto hi = static_cast<std::size_t>(it - grid.begin());
  if (hi == 0) return values.front();
  const std::size_t lo = hi - 1;
  const double t = (x_l - grid[lo]) / (grid[hi] - grid[lo]);
  return (1.0 - t) * values[lo] + t * values[hi];
}

namespace {

// G_l(X_{i,l}) for every datum, in original order.
std::vector<double> smoothed_weight(const RegressionEstimate& re, const GaussLegendre& rule,
                                    const IntegrationBump& q_l, std::size_t l) {
  const SamplePath& path = re.path();
  const Kernel1D& kern = re.kernel(l);
  const double h = re.bandwidths()[l];
  const double inv_h = 1.0 / h;
  const double reach = kern.support() * h;
  const auto nodes = rule.nodes();
  std::vector<double> wq(rule.size());
  for (std::size_t j = 0; j < rule.size(); ++j) wq[j] = rule.weights()[j] * q_l(nodes[j]) * inv_h;

  std::vector<double> out(path.size());
  for (std::size_t i = 0; i < path.size(); ++i) {
    const double u = path.x[i * path.dim + l];
    auto j = static_cast<std::size_t>(std::lower_bound(nodes.begin(), nodes.end(), u - reach) - nodes.begin());
    double acc = 0.0;
    for (; j < nodes.size() && nodes[j] < u + reach; ++j) acc += wq[j] * kern((nodes[j] - u) * inv_h);
    out[i] = acc;
  }
  return out;
}

void require_support(const RegressionEstimate& re, std::span<const double> point) {
  if (!re.has_support(point))
    throw UndefinedEstimate("regression estimate undefined at a quadrature node");
}

}  // namespace

double global_average(const RegressionEstimate& re, const IntegrationDensity& q,
                      std::size_t quad_res, QuadratureRoute route) {
  if (re.dim() != q.dim()) throw std::invalid_argument("global_average: dimension mismatch");
  if (quad_res < 16) throw std::invalid_argument("global_average: quad_res must be >= 16");
  const auto rules = rules_for(q, quad_res);
  double acc = 0.0;
  if (route == QuadratureRoute::tensor) {
    for_each_tensor_node(rules, [&](std::span<const double> z, double w) {
      const auto v = re(z);
      if (!v) throw UndefinedEstimate("regression estimate undefined at a quadrature node");
      acc += w * q(z) * *v;
    });
    return acc;
  }

  for_each_tensor_node(rules, [&](std::span<const double> z, double) { require_support(re, z); });
  const std::size_t d = re.dim();
  std::vector<std::vector<double>> g;
  for (std::size_t l = 0; l < d; ++l) g.push_back(smoothed_weight(re, rules[l], q.factor(l), l));
  for (std::size_t i = 0; i < re.path().size(); ++i) {
    double prod = re.datum_weight(i);
    for (std::size_t l = 0; l < d && prod != 0.0; ++l) prod *= g[l][i];
    acc += prod;
  }
  return acc;
}

ComponentEstimate estimate_component(const RegressionEstimate& re, const IntegrationDensity& q,
                                     std::size_t l, std::span<const double> grid,
                                     std::size_t quad_res,
                                     std::optional<double> shared_global_average,
                                     QuadratureRoute route) {
  const std::size_t d = re.dim();
  if (q.dim() != d) throw std::invalid_argument("estimate_component: dimension mismatch");
  if (l >= d) throw std::invalid_argument("estimate_component: coordinate out of range");
  if (quad_res < 16) throw std::invalid_argument("estimate_component: quad_res must be >= 16");
  if (grid.empty()) throw std::invalid_argument("estimate_component: empty grid");

  ComponentEstimate out;
  out.coordinate = l;
  out.grid.assign(grid.begin(), grid.end());
  out.quad_res = quad_res;
  out.global_average =
      shared_global_average ? *shared_global_average : global_average(re, q, quad_res, route);

  const auto rules = rules_for(q, quad_res);
  std::vector<GaussLegendre> others;
  for (std::size_t j = 0; j < d; ++j)
    if (j != l) others.push_back(rules[j]);

  std::vector<double> point(d);
  auto node_point = [&](double x_l, std::span<const double> z) {
    for (std::size_t j = 0, r = 0; j < d; ++j) point[j] = j == l ? x_l : z[r++];
  };
  out.values.reserve(grid.size());

  if (route == QuadratureRoute::tensor) {
    for (double x_l : grid) {
      double acc = 0.0;
      for_each_tensor_node(others, [&](std::span<const double> z, double w) {
        node_point(x_l, z);
        const auto v = re(point);
        if (!v)
          throw UndefinedEstimate("regression estimate undefined at a quadrature node for x_" +
                                  std::to_string(l + 1) + " = " + std::to_string(x_l));
        acc += w * q.leave_one_out(point, l) * *v;
      });
      out.values.push_back(acc - out.global_average);
    }
    return out;
  }

  for (double x_l : grid)
    for_each_tensor_node(others, [&](std::span<const double> z, double) {
      node_point(x_l, z);
      require_support(re, point);
    });

  const SamplePath& path = re.path();
  std::vector<double> partial(path.size());
  for (std::size_t i = 0; i < path.size(); ++i) partial[i] = re.datum_weight(i);
  for (std::size_t j = 0; j < d; ++j) {
    if (j == l) continue;
    const auto g = smoothed_weight(re, rules[j], q.factor(j), j);
    for (std::size_t i = 0; i < path.size(); ++i) partial[i] *= g[i];
  }
  const Kernel1D& kern = re.kernel(l);
  const double inv_h = 1.0 / re.bandwidths()[l];
  for (double x_l : grid) {
    double acc = 0.0;
    for (std::size_t i = 0; i < path.size(); ++i) {
      if (partial[i] == 0.0) continue;
      acc += partial[i] * kern((x_l - path.x[i * d + l]) * inv_h);
    }
    out.values.push_back(acc * inv_h - out.global_average);
  }
  return out;
}

BiasTerm bias_term(const AdditiveModelSpec& model, const Kernel1D& kern, const IntegrationBump& q_l,
                   std::size_t l, std::span<const double> grid, double bandwidth, int k) {
  if (kern.order() != k)
    throw std::invalid_argument("bias_term: kernel order " + std::to_string(kern.order()) +
                                " differs from k = " + std::to_string(k));
  const auto& m = model.components.at(l);
  BiasTerm out;
  out.coordinate = l;
  out.k = k;
  out.bandwidth = bandwidth;
  double factorial = 1.0;
  for (int i = 2; i <= k; ++i) factorial *= i;
  out.moment_factor = kern.moment(static_cast<std::size_t>(k)) / factorial;
  const GaussLegendre rule(100, q_l.support().lower, q_l.support().upper);
  out.integral_part = rule.integrate([&](double z) { return m(z) * q_l.derivative(z, k); });
  const double sign = (k % 2) ? -1.0 : 1.0;
  const double hk = std::pow(bandwidth, k);
  out.grid.assign(grid.begin(), grid.end());
  for (double x : grid) {
    const double deriv = sign * m.derivative(x, k);
    out.derivative_part.push_back(deriv);
    out.values.push_back(hk * out.moment_factor * (deriv + out.integral_part));
  }
  return out;
}

double reconstruct_regression(std::span<const ComponentEstimate> components, double global_average,
                              std::span<const double> x) {
  if (components.size() != x.size())
    throw std::invalid_argument("reconstruct_regression: need one component per coordinate");
  double v = global_average;
  for (std::size_t l = 0; l < x.size(); ++l) v += components[l].value_at(x[l]);
  return v;
}

std::vector<double> linear_grid(double lower, double upper, std::size_t n) {
  if (n == 0) return {};
  if (n == 1) return {0.5 * (lower + upper)};
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i)
    g[i] = lower + (upper - lower) * static_cast<double>(i) / static_cast<double>(n - 1);
  g.back() = upper;
  return g;
}

}  // namespace margint
