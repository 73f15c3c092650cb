#include "margint/quadrature.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace margint {

GaussLegendre::GaussLegendre(std::size_t n, double lower, double upper)
    : lower_(lower), upper_(upper), nodes_(n), weights_(n) {
  if (n == 0) throw std::invalid_argument("GaussLegendre: need at least one node");
  if (!(upper > lower)) throw std::invalid_argument("GaussLegendre: empty interval");

  const double half = 0.5 * (upper - lower);
  const double mid = 0.5 * (upper + lower);
  const std::size_t m = (n + 1) / 2;
  for (std::size_t i = 0; i < m; ++i) {
    // Tricomi's initial guess for the i-th largest root.
    double z = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) /
                        (static_cast<double>(n) + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = 0.0;
      for (std::size_t j = 1; j <= n; ++j) {
        const double p2 = p1;
        p1 = p0;
        const auto jd = static_cast<double>(j);
        p0 = ((2.0 * jd - 1.0) * z * p1 - (jd - 1.0) * p2) / jd;
      }
      dp = static_cast<double>(n) * (z * p0 - p1) / (z * z - 1.0);
      const double step = p0 / dp;
      z -= step;
      if (std::abs(step) < 1e-16) break;
    }
    // Recompute the derivative at the converged root for the weight.
    {
      double p0 = 1.0;
      double p1 = 0.0;
      for (std::size_t j = 1; j <= n; ++j) {
        const double p2 = p1;
        p1 = p0;
        const auto jd = static_cast<double>(j);
        p0 = ((2.0 * jd - 1.0) * z * p1 - (jd - 1.0) * p2) / jd;
      }
      dp = static_cast<double>(n) * (z * p0 - p1) / (z * z - 1.0);
    }
    const double w = 2.0 / ((1.0 - z * z) * dp * dp);
    nodes_[i] = mid - half * z;
    nodes_[n - 1 - i] = mid + half * z;
    weights_[i] = half * w;
    weights_[n - 1 - i] = half * w;
  }
  if (n % 2 == 1) nodes_[n / 2] = mid;
}

double GaussLegendre::integrate(const std::function<double(double)>& f) const {
  double sum = 0.0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) sum += weights_[i] * f(nodes_[i]);
  return sum;
}

void for_each_tensor_node(
    std::span<const GaussLegendre> rules,
    const std::function<void(std::span<const double>, double)>& visit) {
  const std::size_t d = rules.size();
  if (d == 0) {
    visit({}, 1.0);
    return;
  }
  std::vector<std::size_t> idx(d, 0);
  std::vector<double> point(d);
  while (true) {
    double w = 1.0;
    for (std::size_t l = 0; l < d; ++l) {
      point[l] = rules[l].nodes()[idx[l]];
      w *= rules[l].weights()[idx[l]];
    }
    visit(point, w);
    std::size_t l = 0;
    while (l < d && ++idx[l] == rules[l].size()) {
      idx[l] = 0;
      ++l;
    }
    if (l == d) break;
  }
}

}  // namespace margint
