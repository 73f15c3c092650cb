#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "margint/kernels.hpp"
#include "margint/process_sim.hpp"

namespace margint {

/// Bandwidth constants for the density estimate (c') and the regression
/// weights (c_1, one per coordinate or a single shared value).
struct BandwidthSchedule {
  double c_prime = 1.0;
  std::vector<double> c1{1.0};
  int k = 2;        ///< order of the regression kernels
  int k_prime = 6;  ///< order of the density kernel, must exceed k * d
  std::size_t d = 1;

  /// Throws std::invalid_argument when k' <= k d or a constant is not positive.
  void validate() const;
  double c1_for(std::size_t l) const { return c1.size() == 1 ? c1.front() : c1.at(l); }
};

/// h_T = c' (log T / T)^{1/(2k'+d)}; throws for T <= 1.
double bandwidth_density(double horizon, const BandwidthSchedule& sched);
/// h_{l,T} = c_1 T^{-1/(2k+1)}; throws for T <= 0.
double bandwidth_regression(double horizon, const BandwidthSchedule& sched, std::size_t l = 0);
std::vector<double> regression_bandwidths(double horizon, const BandwidthSchedule& sched);

/// Uniform cell list over [0,1]^d with cells at least `reach` / 4 wide; a
/// query box of half-width `reach` touches at most nine cells per axis. Points are
/// stored sorted by cell so that a cell is one contiguous range. Points
/// outside the unit cube fall into the boundary cells. At most 16 axes.
class PointIndex {
 public:
  PointIndex(std::span<const double> points, std::size_t dim, double reach);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return order_.size(); }
  /// Row-major coordinates in cell order.
  std::span<const double> sorted_points() const { return sorted_; }
  /// Position in the input of the j-th sorted point.
  std::size_t original_index(std::size_t j) const { return order_[j]; }

  /// Calls f(begin, end) for every sorted range whose cell meets the box
  /// [center - reach, center + reach].
  template <typename F>
  void for_each_range(std::span<const double> center, F&& f) const;

 private:
  std::size_t dim_;
  double reach_;
  std::size_t cells_per_axis_;
  std::vector<std::size_t> cell_start_;
  std::vector<double> sorted_;
  std::vector<std::size_t> order_;
};

template <typename F>
void PointIndex::for_each_range(std::span<const double> center, F&& f) const {
  const double n = static_cast<double>(cells_per_axis_);
  const auto top = static_cast<long>(cells_per_axis_) - 1;
  long lo[16];
  long hi[16];
  long cur[16];
  for (std::size_t l = 0; l < dim_; ++l) {
    lo[l] = std::clamp(static_cast<long>(std::floor((center[l] - reach_) * n)), 0L, top);
    hi[l] = std::clamp(static_cast<long>(std::floor((center[l] + reach_) * n)), 0L, top);
    cur[l] = lo[l];
  }
  while (true) {
    // Innermost axis is contiguous in cell numbering, so merge its range.
    std::size_t base = 0;
    for (std::size_t l = dim_; l-- > 1;) base = base * cells_per_axis_ + static_cast<std::size_t>(cur[l]);
    base *= cells_per_axis_;
    const std::size_t begin = cell_start_[base + static_cast<std::size_t>(lo[0])];
    const std::size_t end = cell_start_[base + static_cast<std::size_t>(hi[0]) + 1];
    if (begin != end) f(begin, end);
    std::size_t l = 1;
    while (l < dim_ && ++cur[l] > hi[l]) {
      cur[l] = lo[l];
      ++l;
    }
    if (l >= dim_) break;
  }
}

/// f_hat_T(x) = (delta / (T h^d)) sum_i K((x - X_i) / h) with K an order-k'
/// product kernel. Higher-order kernels take negative values, so the
/// estimate is not guaranteed nonnegative.
class DensityEstimate {
 public:
  DensityEstimate(std::shared_ptr<const SamplePath> path, ProductKernel kernel, double bandwidth);

  double operator()(std::span<const double> x) const;
  /// f_hat_T(X_i) for every datum of the path, in path order.
  std::vector<double> at_data_points() const;
  double bandwidth() const { return bandwidth_; }
  const ProductKernel& kernel() const { return kernel_; }
  const SamplePath& path() const { return *path_; }

 private:
  std::shared_ptr<const SamplePath> path_;
  ProductKernel kernel_;
  double bandwidth_;
  double scale_;
  PointIndex index_;
};

double estimate_density(const DensityEstimate& de, std::span<const double> x);

enum class DensityMode { known_f, estimated_f };
DensityMode parse_density_mode(std::string_view text);
std::string_view to_string(DensityMode mode);

/// Denominator values f~(X_i) of the internal estimator, one per datum.
struct InternalDensities {
  DensityMode mode = DensityMode::known_f;
  std::vector<double> values;
  double floor = 0.0;
  std::size_t floored = 0;

  double floored_fraction() const {
    return values.empty() ? 0.0 : static_cast<double>(floored) / static_cast<double>(values.size());
  }
};

/// f_hat_T(X_i) for every datum of the estimate's own path (leave-self-in),
/// replaced by `floor` wherever it falls below it.
InternalDensities precompute_internal_densities(const DensityEstimate& de, double floor);
/// Known density evaluated at every datum.
InternalDensities known_internal_densities(const SamplePath& path,
                                           const std::function<double(std::span<const double>)>& f);

/// Floor rule for estimated_f mode: factor * min over `grid` of f_hat,
/// raised to `minimum` when that is smaller (f_hat may be negative).
double density_floor(const DensityEstimate& de, std::span<const double> grid_points,
                     double factor = 0.1, double minimum = 1e-3);

/// Internal-weight regression estimate
///   m~(x) = (delta / T) sum_i psi(Y_i) prod_l h_l^{-1} K_l((x_l - X_{i,l}) / h_l) / f~(X_i).
class RegressionEstimate {
 public:
  RegressionEstimate(std::shared_ptr<const SamplePath> path, std::vector<Kernel1D> kernels,
                     std::vector<double> bandwidths, InternalDensities densities,
                     const std::function<double(double)>& psi = {});

  /// std::nullopt when no datum lies strictly inside the kernel support
  /// around x.
  std::optional<double> operator()(std::span<const double> x) const;
  /// True when some datum lies strictly inside the kernel support around x,
  /// i.e. exactly when operator() returns a value.
  bool has_support(std::span<const double> x) const;

  std::size_t dim() const { return kernels_.size(); }
  DensityMode mode() const { return densities_.mode; }
  std::span<const double> bandwidths() const { return bandwidths_; }
  const Kernel1D& kernel(std::size_t l) const { return kernels_[l]; }
  const InternalDensities& densities() const { return densities_; }
  const SamplePath& path() const { return *path_; }
  /// psi(Y_i) / f~(X_i) * delta / T, indexed by original datum position.
  double datum_weight(std::size_t i) const { return weights_[inverse_order_[i]]; }

 private:
  std::shared_ptr<const SamplePath> path_;
  std::vector<Kernel1D> kernels_;
  std::vector<double> bandwidths_;
  std::vector<double> inv_bandwidths_;
  InternalDensities densities_;
  PointIndex index_;
  std::vector<double> weights_;  ///< in index order
  std::vector<std::size_t> inverse_order_;
  double support_ = 1.0;
};

std::optional<double> estimate_regression(const RegressionEstimate& re, std::span<const double> x);

}  // namespace margint
