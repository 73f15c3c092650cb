#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace margint {

/// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if ((sum_ >= 0 ? sum_ : -sum_) >= (v >= 0 ? v : -v))
      comp_ += (sum_ - t) + v;
    else
      comp_ += (v - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

double mean(std::span<const double> v);
/// Population variance (divides by n).
double variance(std::span<const double> v);
/// Sample variance (divides by n - 1).
double sample_variance(std::span<const double> v);
double skewness(std::span<const double> v);
double median(std::vector<double> v);

double normal_cdf(double x);
double normal_quantile(double p);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// One-sample Kolmogorov-Smirnov distance to N(0,1); p-value from the
/// asymptotic Kolmogorov series at sqrt(n) D, truncated at 100 terms.
/// Throws std::invalid_argument for fewer than 8 values.
KsResult ks_statistic(std::span<const double> sample);

/// Kolmogorov survival function Q(lambda) = 2 sum_{j>=1} (-1)^{j-1} exp(-2 j^2 lambda^2).
double kolmogorov_survival(double lambda, int terms = 100);

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

/// Ordinary least squares of log(value) on log(T). Throws
/// std::invalid_argument for fewer than 3 points or a nonpositive coordinate.
SlopeFit fit_loglog_slope(std::span<const std::pair<double, double>> points);

}  // namespace margint
