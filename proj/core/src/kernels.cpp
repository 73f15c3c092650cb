#include "margint/kernels.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

#include "margint/quadrature.hpp"

namespace margint {

namespace {

constexpr std::size_t kMomentNodes = 200;
constexpr std::size_t kMaxOrderScan = 40;

const GaussLegendre& unit_rule() {
  static const GaussLegendre rule(kMomentNodes, -1.0, 1.0);
  return rule;
}

}  // namespace

BaseKernel parse_base_kernel(std::string_view name) {
  if (name == "epanechnikov") return BaseKernel::epanechnikov;
  if (name == "quartic" || name == "biweight") return BaseKernel::quartic;
  if (name == "triweight") return BaseKernel::triweight;
  throw std::invalid_argument("unknown base kernel '" + std::string(name) + "'");
}

std::string_view to_string(BaseKernel base) {
  switch (base) {
    case BaseKernel::epanechnikov: return "epanechnikov";
    case BaseKernel::quartic: return "quartic";
    case BaseKernel::triweight: return "triweight";
  }
  return "unknown";
}

Kernel1D::Kernel1D(std::string name, double support, std::vector<double> coefficients)
    : name_(std::move(name)), support_(support), coeffs_(std::move(coefficients)) {
  if (!(support_ > 0.0)) throw std::invalid_argument("Kernel1D: support must be positive");
  if (coeffs_.empty()) throw std::invalid_argument("Kernel1D: empty polynomial");

  moments_.push_back(kernel_moment(*this, 0, kMomentNodes));
  const double scale = std::abs(moments_[0]) > 0.0 ? std::abs(moments_[0]) : 1.0;
  for (std::size_t j = 1; j <= kMaxOrderScan; ++j) {
    const double mj = kernel_moment(*this, j, kMomentNodes);
    moments_.push_back(mj);
    if (std::abs(mj) > 1e-9 * scale * std::pow(support_, static_cast<double>(j))) {
      order_ = static_cast<int>(j);
      break;
    }
  }
  if (order_ == 0) throw std::domain_error("Kernel1D: no nonvanishing moment found");
}

double Kernel1D::moment(std::size_t j) const {
  if (j < moments_.size()) return moments_[j];
  return kernel_moment(*this, j, kMomentNodes);
}

double kernel_moment(const Kernel1D& kern, std::size_t j, std::size_t nodes) {
  const double s = kern.support();
  const GaussLegendre custom = nodes == kMomentNodes ? GaussLegendre(1) : GaussLegendre(nodes);
  const GaussLegendre& rule = nodes == kMomentNodes ? unit_rule() : custom;
  double sum = 0.0;
  for (std::size_t i = 0; i < rule.size(); ++i) {
    const double u = s * rule.nodes()[i];
    sum += rule.weights()[i] * std::pow(u, static_cast<double>(j)) * kern(u);
  }
  return s * sum;
}

Kernel1D make_base_kernel(BaseKernel base) {
  switch (base) {
    case BaseKernel::epanechnikov:
      return Kernel1D("epanechnikov", 1.0, {0.75, -0.75});
    case BaseKernel::quartic:
      return Kernel1D("quartic", 1.0, {15.0 / 16.0, -30.0 / 16.0, 15.0 / 16.0});
    case BaseKernel::triweight:
      return Kernel1D("triweight", 1.0,
                      {35.0 / 32.0, -105.0 / 32.0, 105.0 / 32.0, -35.0 / 32.0});
  }
  throw std::invalid_argument("make_base_kernel: unknown base");
}

Kernel1D raise_kernel_order(const Kernel1D& base, int target_order) {
  if (target_order < 2 || target_order % 2 != 0)
    throw std::invalid_argument("raise_kernel_order: order must be an even integer >= 2, got " +
                                std::to_string(target_order));
  const auto r = static_cast<Eigen::Index>(target_order / 2);

  // Q(u) = sum_j c_j u^{2j}; the conditions int u^{2i} Q K = [i == 0] for
  // i < r fix c through the Hankel matrix of even base moments.
  Eigen::MatrixXd a(r, r);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < r; ++j)
      a(i, j) = base.moment(static_cast<std::size_t>(2 * (i + j)));
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(r);
  rhs(0) = 1.0;

  Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  lu.setThreshold(1e-12);
  if (!lu.isInvertible())
    throw std::domain_error("raise_kernel_order: singular moment system for base '" +
                            base.name() + "'");
  const Eigen::VectorXd c = lu.solve(rhs);

  const auto base_coeffs = base.coefficients();
  std::vector<double> product(base_coeffs.size() + static_cast<std::size_t>(r) - 1, 0.0);
  for (Eigen::Index i = 0; i < r; ++i)
    for (std::size_t j = 0; j < base_coeffs.size(); ++j)
      product[static_cast<std::size_t>(i) + j] += c(i) * base_coeffs[j];

  std::string name = base.name();
  if (const auto pos = name.find('@'); pos != std::string::npos) name.resize(pos);
  Kernel1D raised(name + "@" + std::to_string(target_order), base.support(), std::move(product));
  if (raised.order() != target_order)
    throw std::domain_error("raise_kernel_order: construction reached order " +
                            std::to_string(raised.order()) + " instead of " +
                            std::to_string(target_order));
  return raised;
}

ProductKernel::ProductKernel(std::vector<Kernel1D> factors) : factors_(std::move(factors)) {
  if (factors_.empty()) throw std::invalid_argument("ProductKernel: no factors");
  for (const auto& f : factors_)
    if (f.order() != factors_.front().order())
      throw std::invalid_argument("ProductKernel: factors must share one order");
}

ProductKernel::ProductKernel(const Kernel1D& factor, std::size_t dim)
    : ProductKernel(std::vector<Kernel1D>(dim, factor)) {}

double ProductKernel::support() const {
  double s = 0.0;
  for (const auto& f : factors_) s = std::max(s, f.support());
  return s;
}

double ProductKernel::operator()(std::span<const double> u) const {
  if (u.size() != factors_.size())
    throw std::invalid_argument("ProductKernel: dimension mismatch (" + std::to_string(u.size()) +
                                " vs " + std::to_string(factors_.size()) + ")");
  double prod = 1.0;
  for (std::size_t l = 0; l < factors_.size(); ++l) {
    prod *= factors_[l](u[l]);
    if (prod == 0.0) return 0.0;
  }
  return prod;
}

double eval_product(const ProductKernel& kern, std::span<const double> u) { return kern(u); }

}  // namespace margint
