#include "margint/stats.hpp"

#include <boost/math/special_functions/erf.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace margint {

double mean(std::span<const double> v) {
  if (v.empty()) throw std::invalid_argument("mean of an empty sample");
  CompensatedSum s;
  for (double x : v) s.add(x);
  return s.value() / static_cast<double>(v.size());
}

double variance(std::span<const double> v) {
  const double m = mean(v);
  CompensatedSum s;
  for (double x : v) s.add((x - m) * (x - m));
  return s.value() / static_cast<double>(v.size());
}

double sample_variance(std::span<const double> v) {
  if (v.size() < 2) throw std::invalid_argument("sample variance needs two values");
  return variance(v) * static_cast<double>(v.size()) / static_cast<double>(v.size() - 1);
}

double skewness(std::span<const double> v) {
  const double m = mean(v);
  CompensatedSum m2;
  CompensatedSum m3;
  for (double x : v) {
    const double d = x - m;
    m2.add(d * d);
    m3.add(d * d * d);
  }
  const auto n = static_cast<double>(v.size());
  const double var = m2.value() / n;
  if (var <= 0.0) return 0.0;
  return (m3.value() / n) / std::pow(var, 1.5);
}

double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of an empty sample");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("normal_quantile: p must be in (0, 1)");
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

double kolmogorov_survival(double lambda, int terms) {
  if (lambda <= 0.0) return 1.0;
  double sum = 0.0;
  for (int j = 1; j <= terms; ++j) {
    const double term = std::exp(-2.0 * j * j * lambda * lambda);
    sum += (j % 2 ? 1.0 : -1.0) * term;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult ks_statistic(std::span<const double> sample) {
  if (sample.size() < 8) throw std::invalid_argument("ks_statistic: need at least 8 values");
  std::vector<double> sorted(sample.begin(), sample.end());
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double cdf = normal_cdf(sorted[i]);
    const auto di = static_cast<double>(i);
    d = std::max({d, (di + 1.0) / n - cdf, cdf - di / n});
  }
  // The alternating series is unusable near 0, where Q(lambda) is 1 anyway.
  const double lambda = std::sqrt(n) * d;
  return {d, lambda < 0.2 ? 1.0 : kolmogorov_survival(lambda)};
}

SlopeFit fit_loglog_slope(std::span<const std::pair<double, double>> points) {
  if (points.size() < 3) throw std::invalid_argument("fit_loglog_slope: need at least 3 points");
  std::vector<double> lx;
  std::vector<double> ly;
  for (const auto& [t, v] : points) {
    if (!(t > 0.0) || !(v > 0.0))
      throw std::invalid_argument("fit_loglog_slope: coordinates must be positive");
    lx.push_back(std::log(t));
    ly.push_back(std::log(v));
  }
  const double mx = mean(lx);
  const double my = mean(ly);
  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  if (sxx <= 0.0) throw std::invalid_argument("fit_loglog_slope: abscissae must not all coincide");
  SlopeFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return fit;
}

}  // namespace margint
