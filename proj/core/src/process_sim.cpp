#include "margint/process_sim.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <boost/math/special_functions/erf.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include "margint/errors.hpp"
#include "margint/quadrature.hpp"

namespace margint {

namespace {

constexpr std::uint64_t kNoiseStream = 0xD1B54A32D192ED03ULL;

std::mt19937_64 make_engine(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  return std::mt19937_64(seq);
}

Eigen::MatrixXd to_matrix(const std::vector<double>& row_major, std::size_t d) {
  Eigen::MatrixXd m(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) m(i, j) = row_major[i * d + j];
  return m;
}

double normal_quantile(double p) { return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p); }

}  // namespace

MixingProcessSpec MixingProcessSpec::independent(std::size_t dim, double theta) {
  MixingProcessSpec spec;
  spec.dim = dim;
  spec.theta.assign(dim, theta);
  return spec;
}

void MixingProcessSpec::validate() const {
  if (dim == 0) throw std::invalid_argument("MixingProcessSpec: dimension must be >= 1");
  if (theta.size() != dim)
    throw std::invalid_argument("MixingProcessSpec: need one mean-reversion rate per coordinate");
  for (double t : theta)
    if (!(t > 0.0) || !std::isfinite(t))
      throw std::invalid_argument("MixingProcessSpec: mean-reversion rates must be positive");
  if (!cross_correlation) return;
  const auto& r = *cross_correlation;
  if (r.size() != dim * dim)
    throw std::invalid_argument("MixingProcessSpec: correlation must be d x d");
  for (std::size_t i = 0; i < dim; ++i) {
    if (std::abs(r[i * dim + i] - 1.0) > 1e-12)
      throw std::invalid_argument("MixingProcessSpec: correlation diagonal must be 1");
    for (std::size_t j = 0; j < i; ++j)
      if (std::abs(r[i * dim + j] - r[j * dim + i]) > 1e-12)
        throw std::invalid_argument("MixingProcessSpec: correlation must be symmetric");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(to_matrix(r, dim));
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("MixingProcessSpec: correlation must be positive definite");
}

std::vector<double> MixingProcessSpec::stationary_correlation() const {
  std::vector<double> s(dim * dim, 0.0);
  for (std::size_t i = 0; i < dim; ++i) {
    for (std::size_t j = 0; j < dim; ++j) {
      const double rij = cross_correlation ? (*cross_correlation)[i * dim + j] : (i == j ? 1.0 : 0.0);
      s[i * dim + j] = 2.0 * std::sqrt(theta[i] * theta[j]) * rij / (theta[i] + theta[j]);
    }
  }
  return s;
}

double MixingProcessSpec::stationary_density(std::span<const double> x) const {
  if (x.size() != dim) throw std::invalid_argument("stationary_density: dimension mismatch");
  for (double v : x)
    if (!(v > 0.0 && v < 1.0)) return 0.0;
  if (!cross_correlation) return 1.0;

  // Gaussian copula density |S|^{-1/2} exp(-z'(S^{-1} - I)z / 2).
  const Eigen::MatrixXd s = to_matrix(stationary_correlation(), dim);
  Eigen::VectorXd z(dim);
  for (std::size_t l = 0; l < dim; ++l) z(l) = normal_quantile(x[l]);
  const Eigen::LLT<Eigen::MatrixXd> llt(s);
  const Eigen::VectorXd sol = llt.solve(z);
  double log_det = 0.0;
  for (std::size_t l = 0; l < dim; ++l) log_det += 2.0 * std::log(llt.matrixL()(l, l));
  return std::exp(-0.5 * log_det - 0.5 * (z.dot(sol) - z.dot(z)));
}

void SamplePath::check_consistency() const {
  if (dim == 0) throw DataError("sample path has dimension 0");
  if (times.size() != y.size() || x.size() != y.size() * dim)
    throw DataError("sample path columns have inconsistent lengths");
}

std::size_t step_count(double delta, double horizon) {
  return static_cast<std::size_t>(std::floor(horizon / delta + 1e-9));
}

LatentPath simulate_latent(const MixingProcessSpec& spec, double delta, double horizon,
                           std::uint64_t seed) {
  spec.validate();
  if (!(delta > 0.0)) throw std::invalid_argument("simulate_latent: delta must be positive");
  if (!(horizon > 0.0)) throw std::invalid_argument("simulate_latent: horizon must be positive");
  if (horizon < 10.0 * delta)
    throw std::invalid_argument("simulate_latent: horizon must cover at least 10 steps");

  const std::size_t d = spec.dim;
  const std::size_t n = step_count(delta, horizon) + 1;
  LatentPath path{d, delta, horizon, seed, std::vector<double>(n * d)};

  auto engine = make_engine(seed);
  std::normal_distribution<double> normal;

  std::vector<double> decay(d);
  for (std::size_t l = 0; l < d; ++l) decay[l] = std::exp(-spec.theta[l] * delta);

  if (!spec.cross_correlation) {
    std::vector<double> scale(d);
    for (std::size_t l = 0; l < d; ++l) scale[l] = std::sqrt(-std::expm1(-2.0 * spec.theta[l] * delta));
    for (std::size_t l = 0; l < d; ++l) path.z[l] = normal(engine);
    for (std::size_t i = 1; i < n; ++i) {
      const double* prev = &path.z[(i - 1) * d];
      double* cur = &path.z[i * d];
      for (std::size_t l = 0; l < d; ++l) cur[l] = decay[l] * prev[l] + scale[l] * normal(engine);
    }
    return path;
  }

  // Correlated drivers: the innovation covariance is S_lm (1 - a_l a_m) with
  // S the stationary covariance, so the recursion stays exactly stationary.
  const Eigen::MatrixXd s = to_matrix(spec.stationary_correlation(), d);
  Eigen::MatrixXd q(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) q(i, j) = s(i, j) * (1.0 - decay[i] * decay[j]);
  const Eigen::MatrixXd ls = Eigen::LLT<Eigen::MatrixXd>(s).matrixL();
  const Eigen::MatrixXd lq = Eigen::LLT<Eigen::MatrixXd>(q).matrixL();

  Eigen::VectorXd xi(d);
  for (std::size_t l = 0; l < d; ++l) xi(l) = normal(engine);
  const Eigen::VectorXd z0 = ls * xi;
  for (std::size_t l = 0; l < d; ++l) path.z[l] = z0(l);
  for (std::size_t i = 1; i < n; ++i) {
    for (std::size_t l = 0; l < d; ++l) xi(l) = normal(engine);
    const Eigen::VectorXd innov = lq * xi;
    for (std::size_t l = 0; l < d; ++l)
      path.z[i * d + l] = decay[l] * path.z[(i - 1) * d + l] + innov(l);
  }
  return path;
}

double gauss_link(double z) {
  const double p = 0.5 * std::erfc(-z / std::numbers::sqrt2);
  return std::clamp(p, kLinkEpsilon, 1.0 - kLinkEpsilon);
}

CovariatePath apply_link(const LatentPath& latent, const MixingProcessSpec& spec) {
  if (latent.dim != spec.dim) throw std::invalid_argument("apply_link: dimension mismatch");
  CovariatePath out{latent.dim, latent.delta, latent.horizon, latent.seed,
                    std::vector<double>(latent.z.size())};
  std::transform(latent.z.begin(), latent.z.end(), out.x.begin(), gauss_link);
  return out;
}

ComponentFunction ComponentFunction::zero() { return {}; }

ComponentFunction ComponentFunction::sine(double cycles, double amplitude, double phase) {
  ComponentFunction f;
  f.kind_ = Kind::sine;
  f.cycles_ = cycles;
  f.amplitude_ = amplitude;
  f.phase_ = phase;
  return f;
}

ComponentFunction ComponentFunction::polynomial(std::vector<double> coefficients) {
  ComponentFunction f;
  f.kind_ = Kind::polynomial;
  f.coeffs_ = std::move(coefficients);
  if (f.coeffs_.empty()) f.coeffs_.push_back(0.0);
  return f;
}

ComponentFunction ComponentFunction::parse(std::string_view text) {
  auto trim = [](std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
  };
  text = trim(text);
  if (text == "zero" || text == "0") return zero();
  const auto colon = text.find(':');
  if (colon == std::string_view::npos)
    throw std::invalid_argument("component '" + std::string(text) + "': expected kind:args");
  const auto kind = trim(text.substr(0, colon));
  std::vector<double> args;
  std::string rest(text.substr(colon + 1));
  std::stringstream ss(rest);
  for (std::string item; std::getline(ss, item, ',');) {
    std::size_t used = 0;
    const std::string t(trim(item));
    double v = 0.0;
    try {
      v = std::stod(t, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != t.size())
      throw std::invalid_argument("component '" + std::string(text) + "': bad number '" + t + "'");
    args.push_back(v);
  }
  if (kind == "sine" || kind == "sin") {
    if (args.empty() || args.size() > 3)
      throw std::invalid_argument("sine component takes cycles[,amplitude[,phase]]");
    return sine(args[0], args.size() > 1 ? args[1] : 1.0, args.size() > 2 ? args[2] : 0.0);
  }
  if (kind == "poly" || kind == "polynomial") {
    if (args.empty()) throw std::invalid_argument("poly component needs coefficients");
    return polynomial(std::move(args));
  }
  throw std::invalid_argument("unknown component kind '" + std::string(kind) + "'");
}

double ComponentFunction::derivative(double x, int order) const {
  if (order < 0) throw std::invalid_argument("derivative order must be >= 0");
  double value = 0.0;
  switch (kind_) {
    case Kind::zero:
      break;
    case Kind::sine: {
      const double w = 2.0 * std::numbers::pi * cycles_;
      value = amplitude_ * std::pow(w, order) *
              std::sin(w * x + phase_ + 0.5 * std::numbers::pi * order);
      break;
    }
    case Kind::polynomial: {
      // Horner on the order-th derivative's coefficients.
      for (std::size_t j = coeffs_.size(); j-- > static_cast<std::size_t>(order);) {
        double falling = 1.0;
        for (int r = 0; r < order; ++r) falling *= static_cast<double>(j - static_cast<std::size_t>(r));
        value = value * x + falling * coeffs_[j];
      }
      break;
    }
  }
  return order == 0 ? value - offset_ : value;
}

ComponentFunction ComponentFunction::shifted(double constant) const {
  ComponentFunction f = *this;
  f.offset_ += constant;
  return f;
}

std::string ComponentFunction::describe() const {
  std::ostringstream os;
  os.precision(17);
  switch (kind_) {
    case Kind::zero: os << "zero"; break;
    case Kind::sine: os << "sine:" << cycles_ << ',' << amplitude_ << ',' << phase_; break;
    case Kind::polynomial:
      os << "poly:";
      for (std::size_t j = 0; j < coeffs_.size(); ++j) os << (j ? "," : "") << coeffs_[j];
      break;
  }
  if (offset_ != 0.0) os << " - " << offset_;
  return os.str();
}

CenteredComponent center_component(const ComponentFunction& raw, const MarginalDensity& marginal) {
  const GaussLegendre rule(200, marginal.lower, marginal.upper);
  const double mean = rule.integrate([&](double x) { return raw(x) * marginal.pdf(x); });
  return {raw.shifted(mean), mean};
}

AdditiveModelSpec AdditiveModelSpec::make(double mu, const std::vector<ComponentFunction>& raw,
                                          double noise_half_width,
                                          const MarginalDensity& marginal) {
  if (noise_half_width < 0.0)
    throw std::invalid_argument("noise half-width must be nonnegative");
  AdditiveModelSpec model;
  model.mu = mu;
  model.noise_half_width = noise_half_width;
  double bound = std::abs(mu) + noise_half_width;
  for (const auto& c : raw) {
    model.components.push_back(center_component(c, marginal).function);
    double sup = 0.0;
    const auto& m = model.components.back();
    for (int i = 0; i <= 4096; ++i) {
      const double x = marginal.lower + (marginal.upper - marginal.lower) * i / 4096.0;
      sup = std::max(sup, std::abs(m(x)));
    }
    bound += sup;
  }
  // Slack covers extrema falling between the sampling points.
  model.psi_bound = bound * (1.0 + 1e-3) + 1e-12;
  return model;
}

double AdditiveModelSpec::regression(std::span<const double> x) const {
  if (x.size() != components.size()) throw std::invalid_argument("regression: dimension mismatch");
  double v = mu;
  for (std::size_t l = 0; l < components.size(); ++l) v += components[l](x[l]);
  return v;
}

double AdditiveModelSpec::psi(double y) const { return std::clamp(y, -psi_bound, psi_bound); }

bool AdditiveModelSpec::is_centered(const MarginalDensity& marginal, double tol) const {
  const GaussLegendre rule(200, marginal.lower, marginal.upper);
  for (const auto& c : components) {
    const double mean = rule.integrate([&](double x) { return c(x) * marginal.pdf(x); });
    if (std::abs(mean) > tol) return false;
  }
  return true;
}

SamplePath gen_response(const CovariatePath& x, const AdditiveModelSpec& model,
                        std::uint64_t seed) {
  if (x.dim != model.dim()) throw std::invalid_argument("gen_response: dimension mismatch");
  if (!model.is_centered())
    throw std::invalid_argument("gen_response: model components are not centered");
  const std::size_t n = x.size();
  SamplePath path;
  path.dim = x.dim;
  path.delta = x.delta;
  path.horizon = x.horizon;
  path.seed = seed;
  path.x = x.x;
  path.times.resize(n);
  path.y.resize(n);

  auto engine = make_engine(seed ^ kNoiseStream);
  const double w = model.noise_half_width;
  std::uniform_real_distribution<double> noise(-w, w);
  for (std::size_t i = 0; i < n; ++i) {
    path.times[i] = static_cast<double>(i) * x.delta;
    const double eps = w > 0.0 ? noise(engine) : 0.0;
    path.y[i] = model.regression(path.row(i)) + eps;
  }
  return path;
}

SamplePath simulate_path(const MixingProcessSpec& spec, const AdditiveModelSpec& model,
                         double delta, double horizon, std::uint64_t seed) {
  return gen_response(apply_link(simulate_latent(spec, delta, horizon, seed), spec), model, seed);
}

}  // namespace margint
