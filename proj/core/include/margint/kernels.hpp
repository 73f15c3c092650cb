#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace margint {

enum class BaseKernel { epanechnikov, quartic, triweight };

BaseKernel parse_base_kernel(std::string_view name);
std::string_view to_string(BaseKernel base);

/// Symmetric, compactly supported kernel K(u) = P(u^2) on [-s, s], zero
/// outside. Every kernel built here is an even polynomial on its support that
/// vanishes at the support endpoints, so it is continuous on the real line.
///
/// Moments of order 0..order are computed once at construction with a
/// 200-node Gauss-Legendre rule and cached.
class Kernel1D {
 public:
  /// `coefficients[j]` multiplies u^(2j) on the support.
  Kernel1D(std::string name, double support, std::vector<double> coefficients);

  double operator()(double u) const {
    const double a = u < 0.0 ? -u : u;
    if (a >= support_) return 0.0;
    const double v = u * u;
    double acc = 0.0;
    for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) acc = acc * v + *it;
    return acc;
  }

  const std::string& name() const { return name_; }
  double support() const { return support_; }
  /// Even order p: moments 1..p-1 vanish and the p-th does not.
  int order() const { return order_; }
  std::span<const double> coefficients() const { return coeffs_; }
  /// Cached moment for j <= order(), computed on demand otherwise.
  double moment(std::size_t j) const;

 private:
  std::string name_;
  double support_;
  std::vector<double> coeffs_;
  std::vector<double> moments_;
  int order_ = 0;
};

Kernel1D make_base_kernel(BaseKernel base);

/// Multiplies `base` by the even polynomial Q of degree p-2 for which
/// Q*base has unit mass and vanishing moments 1..p-1. Throws
/// std::invalid_argument for odd or non-positive p and std::domain_error when
/// the base kernel's moment matrix is singular.
Kernel1D raise_kernel_order(const Kernel1D& base, int target_order);

/// Gauss-Legendre quadrature of u^j K(u) over the support.
double kernel_moment(const Kernel1D& kern, std::size_t j, std::size_t nodes = 200);

/// d-variate kernel built as the product of 1-D factors of a common order.
class ProductKernel {
 public:
  explicit ProductKernel(std::vector<Kernel1D> factors);
  /// d identical copies of `factor`.
  ProductKernel(const Kernel1D& factor, std::size_t dim);

  std::size_t dim() const { return factors_.size(); }
  int order() const { return factors_.front().order(); }
  double support() const;
  const Kernel1D& factor(std::size_t l) const { return factors_[l]; }

  /// Throws std::invalid_argument on dimension mismatch.
  double operator()(std::span<const double> u) const;

 private:
  std::vector<Kernel1D> factors_;
};

double eval_product(const ProductKernel& kern, std::span<const double> u);

}  // namespace margint
