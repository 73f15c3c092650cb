#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace margint {

/// Documented replica seed splitting rule: seed_i = master ^ (i * golden).
constexpr std::uint64_t kSeedGolden = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return master ^ (index * kSeedGolden);
}

/// Stationary Ornstein-Uhlenbeck driver with unit stationary variance per
/// coordinate, mapped to (0,1)^d through the standard Gaussian CDF.
///
/// The OU process is geometrically alpha-mixing, so polynomial mixing of any
/// order holds. With independent coordinates every X_l is Uniform(0,1) and
/// the joint stationary density is 1 on the open cube; with correlated
/// driving noise the joint density is the Gaussian copula density of the
/// stationary correlation.
struct MixingProcessSpec {
  std::size_t dim = 1;
  std::vector<double> theta;  ///< mean-reversion rate per coordinate
  /// Row-major d x d correlation of the driving Brownian motions.
  std::optional<std::vector<double>> cross_correlation;

  static MixingProcessSpec independent(std::size_t dim, double theta = 1.0);

  /// Throws std::invalid_argument on nonpositive rates or a correlation that
  /// is not symmetric positive definite with unit diagonal.
  void validate() const;

  /// Stationary correlation of the latent vector (identity when independent).
  std::vector<double> stationary_correlation() const;

  /// Joint stationary density of X at a point of (0,1)^d; 0 outside.
  double stationary_density(std::span<const double> x) const;
};

struct LatentPath {
  std::size_t dim = 0;
  double delta = 0.0;
  double horizon = 0.0;
  std::uint64_t seed = 0;
  std::vector<double> z;  ///< row-major, (steps + 1) x dim

  std::size_t size() const { return dim == 0 ? 0 : z.size() / dim; }
  std::span<const double> row(std::size_t i) const { return {z.data() + i * dim, dim}; }
};

struct CovariatePath {
  std::size_t dim = 0;
  double delta = 0.0;
  double horizon = 0.0;
  std::uint64_t seed = 0;
  std::vector<double> x;  ///< row-major, values in (0,1)

  std::size_t size() const { return dim == 0 ? 0 : x.size() / dim; }
};

/// Discretized record (t_i, X_i, Y_i), t_i = i * delta, i = 0..floor(T/delta).
struct SamplePath {
  std::size_t dim = 0;
  double delta = 0.0;
  double horizon = 0.0;
  std::uint64_t seed = 0;
  std::vector<double> times;
  std::vector<double> x;  ///< row-major, size() x dim
  std::vector<double> y;

  std::size_t size() const { return y.size(); }
  std::span<const double> row(std::size_t i) const { return {x.data() + i * dim, dim}; }
  /// Throws DataError when the column lengths disagree.
  void check_consistency() const;
};

/// Number of grid steps floor(T/delta), tolerant of representation error.
std::size_t step_count(double delta, double horizon);

/// Exact discretization Z_{i+1} = e^{-theta delta} Z_i + sqrt(1 - e^{-2 theta delta}) xi_i
/// with Z_0 drawn from the stationary law. Same arguments give the same path.
LatentPath simulate_latent(const MixingProcessSpec& spec, double delta, double horizon,
                           std::uint64_t seed);

constexpr double kLinkEpsilon = 1e-12;

/// Coordinate-wise standard Gaussian CDF, clamped to [eps, 1 - eps].
double gauss_link(double z);
CovariatePath apply_link(const LatentPath& latent, const MixingProcessSpec& spec);

/// Smooth univariate function with analytic derivatives of every order:
/// sine a*sin(2 pi c x + phi), a polynomial, or zero; minus a constant offset.
class ComponentFunction {
 public:
  enum class Kind { zero, sine, polynomial };

  static ComponentFunction zero();
  static ComponentFunction sine(double cycles, double amplitude = 1.0, double phase = 0.0);
  static ComponentFunction polynomial(std::vector<double> coefficients);
  /// Parses "zero", "sine:c[,a[,phi]]" or "poly:c0,c1,...".
  static ComponentFunction parse(std::string_view text);

  double operator()(double x) const { return derivative(x, 0); }
  double derivative(double x, int order) const;
  double offset() const { return offset_; }
  ComponentFunction shifted(double constant) const;
  Kind kind() const { return kind_; }
  std::string describe() const;

 private:
  Kind kind_ = Kind::zero;
  double cycles_ = 0.0;
  double amplitude_ = 0.0;
  double phase_ = 0.0;
  std::vector<double> coeffs_;
  double offset_ = 0.0;
};

/// Density of one covariate coordinate on [lower, upper].
struct MarginalDensity {
  double lower = 0.0;
  double upper = 1.0;
  std::function<double(double)> pdf = [](double) { return 1.0; };

  static MarginalDensity uniform() { return {}; }
};

struct CenteredComponent {
  ComponentFunction function;
  double offset = 0.0;  ///< the subtracted constant, int m f
};

/// Returns m - int m f, computed by 200-node Gauss-Legendre quadrature.
CenteredComponent center_component(const ComponentFunction& raw, const MarginalDensity& marginal);

/// mu + sum_l m_l(x_l) + bounded uniform noise; psi is the identity clipped
/// to [-M, M] with M = |mu| + sum sup|m_l| + w, so clipping never triggers.
struct AdditiveModelSpec {
  double mu = 0.0;
  std::vector<ComponentFunction> components;  ///< centered
  double noise_half_width = 0.0;
  double psi_bound = 0.0;

  /// Centers every raw component under `marginal` and fixes the psi bound.
  static AdditiveModelSpec make(double mu, const std::vector<ComponentFunction>& raw,
                                double noise_half_width,
                                const MarginalDensity& marginal = MarginalDensity::uniform());

  std::size_t dim() const { return components.size(); }
  double regression(std::span<const double> x) const;
  double psi(double y) const;
  /// True when every |E m_l(X_l)| < tol under `marginal`.
  bool is_centered(const MarginalDensity& marginal = MarginalDensity::uniform(),
                   double tol = 1e-8) const;
};

/// Y_i = mu + sum_l m_l(X_{i,l}) + eps_i, eps_i ~ U[-w, w] i.i.d.
/// Throws std::invalid_argument for an uncentered model.
SamplePath gen_response(const CovariatePath& x, const AdditiveModelSpec& model,
                        std::uint64_t seed);

/// simulate_latent, apply_link and gen_response under one seed.
SamplePath simulate_path(const MixingProcessSpec& spec, const AdditiveModelSpec& model,
                         double delta, double horizon, std::uint64_t seed);

}  // namespace margint
