#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "margint/estimators.hpp"
#include "margint/kernels.hpp"
#include "margint/process_sim.hpp"

namespace margint {

struct Interval {
  double lower = 0.0;
  double upper = 1.0;

  double width() const { return upper - lower; }
  bool contains(const Interval& other) const {
    return other.lower >= lower && other.upper <= upper;
  }
};

/// One integration weight q_l(u) = c (1 - v^2)^{k+1}, v the affine image of
/// u in [-1, 1]. It has k continuous derivatives, all vanishing at the
/// support endpoints, and integrates to one.
class IntegrationBump {
 public:
  IntegrationBump(Interval support, int smoothness);

  double operator()(double u) const { return derivative(u, 0); }
  /// Closed-form derivative of any order (zero outside the support).
  double derivative(double u, int order) const;
  const Interval& support() const { return support_; }
  int smoothness() const { return smoothness_; }

 private:
  Interval support_;
  int smoothness_;
  std::vector<double> coeffs_;  ///< in powers of v, normalization folded in
};

/// Product weight q(x) = prod_l q_l(x_l); q_{-l} drops coordinate l.
class IntegrationDensity {
 public:
  explicit IntegrationDensity(std::vector<IntegrationBump> factors);

  std::size_t dim() const { return factors_.size(); }
  const IntegrationBump& factor(std::size_t l) const { return factors_[l]; }
  double operator()(std::span<const double> x) const;
  /// q_{-l} evaluated at a full d-vector, ignoring coordinate l.
  double leave_one_out(std::span<const double> x, std::size_t l) const;

 private:
  std::vector<IntegrationBump> factors_;
};

/// Bump of smoothness k on `support`; throws std::invalid_argument unless
/// the support lies inside `domain`.
IntegrationBump make_integration_density(Interval support, int k, Interval domain);

/// eta_l(x_l) = m_l(x_l) - int m_l q_l.
double true_component(const AdditiveModelSpec& model, const IntegrationBump& q_l, std::size_t l,
                      double x_l);

struct IdentityCheck {
  double max_residual = 0.0;
  double integral_mq = 0.0;  ///< int m q
  std::size_t points = 0;
};

/// Max over a grid (grid_points per axis over the support of q) of
/// |m(x) - sum_l eta_l(x_l) - int m q|, every eta_l computed from its
/// integral form int m q_{-l} dx_{-l} - int m q. Zero up to quadrature error
/// for additive m; for non-additive m it measures the non-additive part.
IdentityCheck marginal_integration_identity_check(
    const std::function<double(std::span<const double>)>& m, const IntegrationDensity& q,
    std::size_t grid_points = 5, std::size_t nodes = 32);
IdentityCheck marginal_integration_identity_check(const AdditiveModelSpec& model,
                                                  const IntegrationDensity& q,
                                                  std::size_t grid_points = 5,
                                                  std::size_t nodes = 32);

/// Estimated component eta_hat_l on a grid. `global_average` is the
/// int m~ q term that every coordinate shares.
struct ComponentEstimate {
  std::size_t coordinate = 0;
  std::vector<double> grid;
  std::vector<double> values;
  std::size_t quad_res = 0;
  double global_average = 0.0;

  /// Linear interpolation; throws std::out_of_range outside the grid.
  double value_at(double x_l) const;
};

/// How the tensor quadrature sum over m~ is evaluated. `tensor` evaluates m~
/// at every node. `factored` exchanges the node sum with the data sum:
///   sum_nodes w q(z) m~(z) = (delta/T) sum_i psi(Y_i)/f~(X_i) prod_l G_l(X_{i,l}),
///   G_l(u) = sum_j w_j q_l(z_j) h_l^{-1} K_l((z_j - u) / h_l),
/// which is the same finite sum in a different order and costs O(n d)
/// instead of O(n * nodes^d). Both check every node for kernel mass.
enum class QuadratureRoute { tensor, factored };

/// Tensor Gauss-Legendre quadrature of m~ against q over the support of q.
/// Throws UndefinedEstimate if m~ is undefined at any node.
double global_average(const RegressionEstimate& re, const IntegrationDensity& q,
                      std::size_t quad_res, QuadratureRoute route = QuadratureRoute::factored);

/// For every grid point: (d-1)-dimensional quadrature of m~ against q_{-l}
/// minus the global average. Requires quad_res >= 16.
ComponentEstimate estimate_component(const RegressionEstimate& re, const IntegrationDensity& q,
                                     std::size_t l, std::span<const double> grid,
                                     std::size_t quad_res,
                                     std::optional<double> shared_global_average = std::nullopt,
                                     QuadratureRoute route = QuadratureRoute::factored);

/// h^k b_l on a grid, with
///   b_l(x) = (int u^k K_l / k!) ((-1)^k m_l^{(k)}(x) + int m_l q_l^{(k)}).
struct BiasTerm {
  std::size_t coordinate = 0;
  int k = 0;
  double bandwidth = 0.0;
  double moment_factor = 0.0;  ///< int u^k K_l / k!
  std::vector<double> grid;
  std::vector<double> derivative_part;  ///< (-1)^k m_l^{(k)}(x) per grid point
  double integral_part = 0.0;           ///< int m_l q_l^{(k)}
  std::vector<double> values;           ///< h^k b_l(x)
};

/// Throws std::invalid_argument when the kernel's order differs from k.
BiasTerm bias_term(const AdditiveModelSpec& model, const Kernel1D& kern, const IntegrationBump& q_l,
                   std::size_t l, std::span<const double> grid, double bandwidth, int k);

/// sum_l eta_hat_l(x_l) + global average; throws std::out_of_range when a
/// coordinate is outside its component's grid.
double reconstruct_regression(std::span<const ComponentEstimate> components,
                              double global_average, std::span<const double> x);

/// n equispaced points on [lower, upper].
std::vector<double> linear_grid(double lower, double upper, std::size_t n);

}  // namespace margint
