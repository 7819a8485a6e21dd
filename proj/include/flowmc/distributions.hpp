#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "flowmc/rng.hpp"

namespace flowmc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// A target density known up to a constant, with optional analytic gradient
/// and optional exact sampler. All densities here include their normalization
/// constant when it is available in closed form (Gaussians and mixtures of
/// Gaussians); phi4 is genuinely unnormalized.
class TargetDistribution {
 public:
  using LogPdfFn = std::function<double(const Vector&)>;
  using GradFn = std::function<Vector(const Vector&)>;
  using SamplerFn = std::function<Vector(RngStream&)>;

  TargetDistribution() = default;
  TargetDistribution(int dim, LogPdfFn logpdf, GradFn grad = nullptr, SamplerFn sampler = nullptr,
                     std::vector<Vector> modes = {})
      : dim_(dim),
        logpdf_(std::move(logpdf)),
        grad_(std::move(grad)),
        sampler_(std::move(sampler)),
        modes_(std::move(modes)) {}

  int dim() const { return dim_; }
  bool has_grad() const { return static_cast<bool>(grad_); }
  bool has_sampler() const { return static_cast<bool>(sampler_); }
  const std::vector<Vector>& modes() const { return modes_; }

  double logpdf(const Vector& x) const {
    check_dim(x);
    return logpdf_(x);
  }

  Vector grad_logpdf(const Vector& x) const {
    check_dim(x);
    if (!grad_) throw std::runtime_error("gradient unavailable for this target");
    return grad_(x);
  }

  Vector sample(RngStream& rng) const {
    if (!sampler_) {
      throw std::runtime_error(
          "exact sampler unavailable; use an MCMC ground-truth generator instead");
    }
    return sampler_(rng);
  }

  /// n i.i.d. samples, one per row.
  Matrix sample(RngStream& rng, int n) const {
    Matrix out(n, dim_);
    for (int i = 0; i < n; ++i) out.row(i) = sample(rng).transpose();
    return out;
  }

 private:
  void check_dim(const Vector& x) const {
    if (x.size() != dim_) throw std::invalid_argument("dimension mismatch in target evaluation");
  }

  int dim_ = 0;
  LogPdfFn logpdf_;
  GradFn grad_;
  SamplerFn sampler_;
  std::vector<Vector> modes_;
};

// ---- concrete target specs ----

struct IllConditionedGaussianSpec {
  int dim = 16;  // even
  double sigma_min = 1e-1;
  double sigma_max = 1e1;
};

struct FunnelSpec {
  double a = 3.0;  // variance of the first coordinate
  double b = 1.0;
  int dim = 2;
};

struct BananaSpec {
  double a = 10.0;
  double b = 0.02;
  int dim = 2;  // even
};

struct Mixture4Spec {
  int dim = 2;
  double a = 0.5919;
};

struct TwoMode1DSpec {
  double a = 1.0;
  double sigma = 1.0;
};

struct Phi4Spec {
  int dim = 16;
  double a_coupling = 0.1;
  double beta = 20.0;
};

TargetDistribution standard_gaussian(int dim);
TargetDistribution isotropic_gaussian(int dim, double sigma);
TargetDistribution diagonal_gaussian(const Vector& mean, const Vector& variances);
/// Full-covariance Gaussian; Cholesky computed once, non-PD covariance throws.
TargetDistribution gaussian(const Vector& mean, const Matrix& cov);

TargetDistribution make_target(const IllConditionedGaussianSpec& spec);
TargetDistribution make_target(const FunnelSpec& spec);
TargetDistribution make_target(const BananaSpec& spec);
TargetDistribution make_target(const Mixture4Spec& spec);
TargetDistribution make_target(const TwoMode1DSpec& spec);
TargetDistribution make_target(const Phi4Spec& spec);

/// Covariance matrix of the ill-conditioned Gaussian (rotated log-spaced diag).
Matrix ill_conditioned_covariance(const IllConditionedGaussianSpec& spec);
/// Log-spaced marginal standard deviations sigma_1..sigma_d.
Vector ill_conditioned_sigmas(const IllConditionedGaussianSpec& spec);

std::vector<Vector> mixture4_means(const Mixture4Spec& spec);
/// Per-coordinate variance of the mixture, used as the coupling-flow base scale.
double mixture4_marginal_variance(const Mixture4Spec& spec);

/// phi4 field energy -log pi (without normalization).
double phi4_energy(const Phi4Spec& spec, const Vector& phi);
Vector phi4_energy_grad(const Phi4Spec& spec, const Vector& phi);
/// The two energy minima, found by gradient descent from the +/-1 constant
/// fields; results are cached per (dim, a, beta).
std::vector<Vector> phi4_modes(const Phi4Spec& spec);
/// Colored Gaussian keeping only the quadratic part of the phi4 energy.
TargetDistribution phi4_base(const Phi4Spec& spec);
/// Precision matrix of the colored base (tridiagonal).
Matrix phi4_base_precision(const Phi4Spec& spec);

/// Index of the closest mode in Euclidean distance, ties to the lowest index.
int closest_mode(const std::vector<Vector>& modes, const Vector& x);
int closest_mode(const TargetDistribution& target, const Vector& x);

}  // namespace flowmc
