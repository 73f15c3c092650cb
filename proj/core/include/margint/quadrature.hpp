#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace margint {

/// Gauss-Legendre rule mapped to a finite interval [lower, upper].
///
/// Nodes are computed by Newton iteration on the Legendre recurrence and are
/// stored in increasing order. An n-node rule integrates polynomials of
/// degree 2n-1 exactly.
class GaussLegendre {
 public:
  GaussLegendre(std::size_t n, double lower = -1.0, double upper = 1.0);

  std::size_t size() const { return nodes_.size(); }
  double lower() const { return lower_; }
  double upper() const { return upper_; }
  std::span<const double> nodes() const { return nodes_; }
  std::span<const double> weights() const { return weights_; }

  double integrate(const std::function<double(double)>& f) const;

 private:
  double lower_;
  double upper_;
  std::vector<double> nodes_;
  std::vector<double> weights_;
};

/// Visits every node of a tensor product of 1-D rules. The callback receives
/// the node coordinates and the product weight.
void for_each_tensor_node(
    std::span<const GaussLegendre> rules,
    const std::function<void(std::span<const double>, double)>& visit);

}  // namespace margint
