#include "margint/estimators.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "margint/errors.hpp"

namespace margint {

void BandwidthSchedule::validate() const {
  if (!(c_prime > 0.0)) throw std::invalid_argument("bandwidth constant c' must be positive");
  if (c1.empty()) throw std::invalid_argument("bandwidth constant c_1 missing");
  if (c1.size() != 1 && c1.size() != d)
    throw std::invalid_argument("bandwidth constant c_1 needs 1 or d entries");
  for (double c : c1)
    if (!(c > 0.0)) throw std::invalid_argument("bandwidth constant c_1 must be positive");
  if (k < 1) throw std::invalid_argument("regression kernel order k must be >= 1");
  if (k_prime <= k * static_cast<int>(d))
    throw std::invalid_argument("density kernel order k' must exceed k * d");
}

double bandwidth_density(double horizon, const BandwidthSchedule& sched) {
  if (!(horizon > 1.0)) throw std::invalid_argument("bandwidth_density: T must exceed 1");
  const double exponent = 1.0 / (2.0 * sched.k_prime + static_cast<double>(sched.d));
  return sched.c_prime * std::pow(std::log(horizon) / horizon, exponent);
}

double bandwidth_regression(double horizon, const BandwidthSchedule& sched, std::size_t l) {
  if (!(horizon > 0.0)) throw std::invalid_argument("bandwidth_regression: T must be positive");
  return sched.c1_for(l) * std::pow(horizon, -1.0 / (2.0 * sched.k + 1.0));
}

std::vector<double> regression_bandwidths(double horizon, const BandwidthSchedule& sched) {
  std::vector<double> h(sched.d);
  for (std::size_t l = 0; l < sched.d; ++l) h[l] = bandwidth_regression(horizon, sched, l);
  return h;
}

PointIndex::PointIndex(std::span<const double> points, std::size_t dim, double reach)
    : dim_(dim), reach_(reach) {
  if (dim == 0 || dim > 16) throw std::invalid_argument("PointIndex: dimension must be in 1..16");
  if (!(reach > 0.0)) throw std::invalid_argument("PointIndex: reach must be positive");
  if (points.size() % dim != 0) throw std::invalid_argument("PointIndex: ragged point array");
  const std::size_t n = points.size() / dim;

  std::size_t per_axis = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(4.0 / reach)));
  // Keep the cell table bounded in higher dimensions.
  while (per_axis > 1 && std::pow(static_cast<double>(per_axis), static_cast<double>(dim)) > 4.0e6)
    --per_axis;
  cells_per_axis_ = per_axis;
  std::size_t total = 1;
  for (std::size_t l = 0; l < dim; ++l) total *= per_axis;

  const double scale = static_cast<double>(per_axis);
  const auto top = static_cast<long>(per_axis) - 1;
  std::vector<std::size_t> cell(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t c = 0;
    for (std::size_t l = dim; l-- > 0;) {
      const auto a = std::clamp(static_cast<long>(std::floor(points[i * dim + l] * scale)), 0L, top);
      c = c * per_axis + static_cast<std::size_t>(a);
    }
    cell[i] = c;
  }

  // Counting sort keeps equal-cell points in input order.
  cell_start_.assign(total + 1, 0);
  for (std::size_t c : cell) ++cell_start_[c + 1];
  std::partial_sum(cell_start_.begin(), cell_start_.end(), cell_start_.begin());
  std::vector<std::size_t> fill(cell_start_.begin(), cell_start_.end() - 1);
  order_.resize(n);
  for (std::size_t i = 0; i < n; ++i) order_[fill[cell[i]]++] = i;
  sorted_.resize(points.size());
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t l = 0; l < dim; ++l) sorted_[j * dim + l] = points[order_[j] * dim + l];
}

DensityEstimate::DensityEstimate(std::shared_ptr<const SamplePath> path, ProductKernel kernel,
                                 double bandwidth)
    : path_(std::move(path)),
      kernel_(std::move(kernel)),
      bandwidth_(bandwidth),
      scale_(0.0),
      index_((path_ && !path_->x.empty()) ? std::span<const double>(path_->x)
                                           : throw DataError("density estimate: empty path"),
             path_->dim, kernel_.support() * bandwidth) {
  if (!(bandwidth > 0.0)) throw std::invalid_argument("density estimate: bandwidth must be positive");
  if (kernel_.dim() != path_->dim) throw std::invalid_argument("density estimate: kernel dimension mismatch");
  path_->check_consistency();
  scale_ = path_->delta / (path_->horizon * std::pow(bandwidth_, static_cast<double>(path_->dim)));
}

double DensityEstimate::operator()(std::span<const double> x) const {
  const std::size_t d = path_->dim;
  if (x.size() != d) throw std::invalid_argument("estimate_density: dimension mismatch");
  const double inv_h = 1.0 / bandwidth_;
  const auto pts = index_.sorted_points();
  double sum = 0.0;
  index_.for_each_range(x, [&](std::size_t begin, std::size_t end) {
    for (std::size_t j = begin; j < end; ++j) {
      const double* p = &pts[j * d];
      double prod = 1.0;
      for (std::size_t l = 0; l < d && prod != 0.0; ++l) prod *= kernel_.factor(l)((x[l] - p[l]) * inv_h);
      sum += prod;
    }
  });
  return scale_ * sum;
}

namespace {

/// Sum over unordered pairs j < m of the product kernel, added to both ends.
/// D > 0 fixes the dimension at compile time; D == 0 reads it from `d`.
template <std::size_t D>
void symmetric_pair_sums(const PointIndex& index, std::size_t d, double inv_h,
                         const std::vector<double>& support_sq,
                         const std::vector<std::vector<double>>& coeffs, std::vector<double>& sums) {
  const std::size_t dim = D > 0 ? D : d;
  const auto pts = index.sorted_points();
  const std::size_t n = index.size();
  for (std::size_t j = 0; j < n; ++j) {
    const double* x = &pts[j * dim];
    double own = 0.0;
    index.for_each_range({x, dim}, [&](std::size_t begin, std::size_t end) {
      for (std::size_t m = std::max(begin, j + 1); m < end; ++m) {
        const double* p = &pts[m * dim];
        double prod = 1.0;
        for (std::size_t l = 0; l < dim; ++l) {
          const double u = (x[l] - p[l]) * inv_h;
          const double v = u * u;
          double acc = 0.0;
          for (double c : coeffs[l]) acc = acc * v + c;
          prod *= v < support_sq[l] ? acc : 0.0;
        }
        own += prod;
        sums[m] += prod;
      }
    });
    sums[j] += own;
  }
}

}  // namespace

std::vector<double> DensityEstimate::at_data_points() const {
  const std::size_t d = path_->dim;
  const std::size_t n = path_->size();
  const double inv_h = 1.0 / bandwidth_;
  std::vector<double> support_sq(d);
  std::vector<std::vector<double>> coeffs(d);
  double self = 1.0;
  for (std::size_t l = 0; l < d; ++l) {
    const Kernel1D& k = kernel_.factor(l);
    support_sq[l] = k.support() * k.support();
    coeffs[l].assign(k.coefficients().rbegin(), k.coefficients().rend());
    self *= k(0.0);
  }
  // Sorted order throughout; the kernel is even, so each pair is evaluated once.
  std::vector<double> sums(n, self);
  switch (d) {
    case 1: symmetric_pair_sums<1>(index_, d, inv_h, support_sq, coeffs, sums); break;
    case 2: symmetric_pair_sums<2>(index_, d, inv_h, support_sq, coeffs, sums); break;
    case 3: symmetric_pair_sums<3>(index_, d, inv_h, support_sq, coeffs, sums); break;
    default: symmetric_pair_sums<0>(index_, d, inv_h, support_sq, coeffs, sums); break;
  }
  std::vector<double> out(n);
  for (std::size_t j = 0; j < n; ++j) out[index_.original_index(j)] = scale_ * sums[j];
  return out;
}

double estimate_density(const DensityEstimate& de, std::span<const double> x) { return de(x); }

DensityMode parse_density_mode(std::string_view text) {
  if (text == "known_f" || text == "known") return DensityMode::known_f;
  if (text == "estimated_f" || text == "estimated") return DensityMode::estimated_f;
  throw std::invalid_argument("unknown density mode '" + std::string(text) + "'");
}

std::string_view to_string(DensityMode mode) {
  return mode == DensityMode::known_f ? "known_f" : "estimated_f";
}

InternalDensities precompute_internal_densities(const DensityEstimate& de, double floor) {
  const SamplePath& path = de.path();
  InternalDensities out;
  out.mode = DensityMode::estimated_f;
  out.floor = floor;
  out.values = de.at_data_points();
  for (std::size_t i = 0; i < path.size(); ++i) {
    const double v = out.values[i];
    if (v < floor) {
      out.values[i] = floor;
      ++out.floored;
    }
  }
  return out;
}

InternalDensities known_internal_densities(const SamplePath& path,
                                           const std::function<double(std::span<const double>)>& f) {
  InternalDensities out;
  out.mode = DensityMode::known_f;
  out.values.resize(path.size());
  for (std::size_t i = 0; i < path.size(); ++i) {
    out.values[i] = f(path.row(i));
    if (!(out.values[i] > 0.0))
      throw DataError("known density is not positive at datum " + std::to_string(i));
  }
  return out;
}

double density_floor(const DensityEstimate& de, std::span<const double> grid_points, double factor,
                     double minimum) {
  const std::size_t d = de.path().dim;
  if (grid_points.empty() || grid_points.size() % d != 0)
    throw std::invalid_argument("density_floor: grid must hold whole points");
  double lowest = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid_points.size(); i += d)
    lowest = std::min(lowest, de(grid_points.subspan(i, d)));
  return std::max(factor * lowest, minimum);
}

namespace {

double max_support(const std::vector<Kernel1D>& kernels, const std::vector<double>& h) {
  double reach = 0.0;
  for (std::size_t l = 0; l < kernels.size(); ++l) reach = std::max(reach, kernels[l].support() * h[l]);
  return reach;
}

}  // namespace

RegressionEstimate::RegressionEstimate(std::shared_ptr<const SamplePath> path,
                                       std::vector<Kernel1D> kernels,
                                       std::vector<double> bandwidths, InternalDensities densities,
                                       const std::function<double(double)>& psi)
    : path_(std::move(path)),
      kernels_(std::move(kernels)),
      bandwidths_(std::move(bandwidths)),
      densities_(std::move(densities)),
      index_((path_ && !path_->x.empty()) ? std::span<const double>(path_->x)
                                           : throw DataError("regression estimate: empty path"),
             path_->dim,
             kernels_.size() == bandwidths_.size() && !kernels_.empty()
                 ? max_support(kernels_, bandwidths_)
                 : throw std::invalid_argument("regression estimate: need one bandwidth per kernel")) {
  path_->check_consistency();
  const std::size_t d = path_->dim;
  if (kernels_.size() != d) throw std::invalid_argument("regression estimate: need d kernels");
  if (densities_.values.size() != path_->size())
    throw std::invalid_argument("regression estimate: need one density value per datum");
  for (double h : bandwidths_) {
    if (!(h > 0.0)) throw std::invalid_argument("regression estimate: bandwidths must be positive");
    inv_bandwidths_.push_back(1.0 / h);
  }
  const double norm = path_->delta / path_->horizon;
  const std::size_t n = path_->size();
  weights_.resize(n);
  inverse_order_.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t i = index_.original_index(j);
    const double y = psi ? psi(path_->y[i]) : path_->y[i];
    weights_[j] = norm * y / densities_.values[i];
    inverse_order_[i] = j;
  }
}

std::optional<double> RegressionEstimate::operator()(std::span<const double> x) const {
  const std::size_t d = kernels_.size();
  if (x.size() != d) throw std::invalid_argument("estimate_regression: dimension mismatch");
  double inv_volume = 1.0;
  for (double ih : inv_bandwidths_) inv_volume *= ih;
  const auto pts = index_.sorted_points();
  double sum = 0.0;
  std::size_t inside = 0;
  index_.for_each_range(x, [&](std::size_t begin, std::size_t end) {
    for (std::size_t j = begin; j < end; ++j) {
      const double* p = &pts[j * d];
      double prod = 1.0;
      bool in = true;
      for (std::size_t l = 0; l < d; ++l) {
        const double u = (x[l] - p[l]) * inv_bandwidths_[l];
        if (std::abs(u) >= kernels_[l].support()) {
          in = false;
          break;
        }
        prod *= kernels_[l](u);
      }
      if (!in) continue;
      ++inside;
      sum += weights_[j] * prod;
    }
  });
  if (inside == 0) return std::nullopt;
  return sum * inv_volume;
}

bool RegressionEstimate::has_support(std::span<const double> x) const {
  const std::size_t d = kernels_.size();
  if (x.size() != d) throw std::invalid_argument("has_support: dimension mismatch");
  const auto pts = index_.sorted_points();
  bool found = false;
  index_.for_each_range(x, [&](std::size_t begin, std::size_t end) {
    for (std::size_t j = begin; j < end && !found; ++j) {
      bool in = true;
      for (std::size_t l = 0; l < d && in; ++l)
        in = std::abs((x[l] - pts[j * d + l]) * inv_bandwidths_[l]) < kernels_[l].support();
      found = in;
    }
  });
  return found;
}

std::optional<double> estimate_regression(const RegressionEstimate& re, std::span<const double> x) {
  return re(x);
}

}  // namespace margint
