#pragma once

#include <memory>

#include "flowmc/distributions.hpp"

namespace flowmc {

/// Inverse error function, accurate to ~1e-15 (rational seed refined by
/// Newton steps on erf).
double erf_inv(double p);
/// Standard normal CDF.
double normal_cdf(double z);

/// Invertible map with exact log-Jacobian-determinants. forward maps base
/// space (z) to data space (x).
class TransportMap {
 public:
  virtual ~TransportMap() = default;
  virtual int dim() const = 0;
  virtual Vector forward(const Vector& z) const = 0;
  virtual Vector inverse(const Vector& x) const = 0;
  virtual double log_det_forward(const Vector& z) const = 0;
  virtual double log_det_inverse(const Vector& x) const = 0;
};

using MapPtr = std::shared_ptr<const TransportMap>;

MapPtr identity_map(int dim);

/// x = A z for invertible A; log-dets are constants.
MapPtr linear_map(const Matrix& a);

/// Piecewise-linear interpolation between an isotropic map and the Cholesky
/// factor of the ill-conditioned covariance; exact transport at t = 0.5.
MapPtr interpolated_gaussian_flow(const IllConditionedGaussianSpec& spec, double t);

/// Analytic funnel flow T_{a,b,alpha}. At alpha = 1 it maps N(0, I_d) to
/// Funnel(a, b); the push-backward of the funnel is N(0, alpha I_d).
MapPtr funnel_flow(double a, double b, double alpha, int dim);
/// Quality-parameterized family T_beta = T_{beta a*, b*, beta} with a* = 3,
/// b* = 1; exact at beta = 1.
MapPtr funnel_flow_beta(double beta, int dim);

MapPtr banana_flow(double a, double b, int dim);

enum class BogachevDirection {
  kMixtureToGaussian,  // T = F_nu^{-1} o F_mu, the paper's T_{mu,nu}
  kGaussianToMixture,  // inverse orientation; push-forward of N(0,st^2) is the mixture
};

class Bogachev1DMap : public TransportMap {
 public:
  Bogachev1DMap(double a, double sigma, double sigma_tilde,
                BogachevDirection direction = BogachevDirection::kMixtureToGaussian);

  int dim() const override { return 1; }
  Vector forward(const Vector& z) const override;
  Vector inverse(const Vector& x) const override;
  double log_det_forward(const Vector& z) const override;
  double log_det_inverse(const Vector& x) const override;

  /// T_{mu,nu}(z) as a scalar, regardless of the direction flag.
  double map_mixture_to_gaussian(double z) const;
  double map_gaussian_to_mixture(double x) const;

  double a() const { return a_; }
  double sigma() const { return sigma_; }
  double sigma_tilde() const { return sigma_tilde_; }

 private:
  double mixture_cdf(double z) const;
  double mixture_quantile(double p) const;
  double log_deriv_mixture_to_gaussian(double z) const;

  double a_, sigma_, sigma_tilde_;
  BogachevDirection direction_;
};

/// Triangular 2D map between the two-component mixture N(+-a 1_2, sigma^2 I)
/// and N(0, sigma_tilde^2 I_2); the second coordinate map depends on x1 only
/// through the conditional mixture weight.
class Bogachev2DMap : public TransportMap {
 public:
  Bogachev2DMap(double a, double sigma, double sigma_tilde,
                BogachevDirection direction = BogachevDirection::kMixtureToGaussian);

  int dim() const override { return 2; }
  Vector forward(const Vector& z) const override;
  Vector inverse(const Vector& x) const override;
  double log_det_forward(const Vector& z) const override;
  double log_det_inverse(const Vector& x) const override;

  /// Conditional weight of the N(-a, sigma^2) component given the first
  /// coordinate value.
  double conditional_weight(double x1) const;

 private:
  double cond_cdf(double w, double z) const;
  double cond_quantile(double w, double p) const;  // bisection, no closed form

  double a_, sigma_, sigma_tilde_;
  BogachevDirection direction_;
  Bogachev1DMap first_;
};

/// Cubic-spline smoothing of the 1D Bogachev map on 33 uniform knots over
/// [-(a + 4 sigma), a + 4 sigma]; reproduces the multi-bump push-forward
/// artifact of under-resolved sharp shoulders.
class SmoothedBogachev1DMap : public TransportMap {
 public:
  SmoothedBogachev1DMap(double a, double sigma, double sigma_tilde,
                        BogachevDirection direction = BogachevDirection::kGaussianToMixture,
                        int n_knots = 33);

  int dim() const override { return 1; }
  Vector forward(const Vector& z) const override;
  Vector inverse(const Vector& x) const override;
  double log_det_forward(const Vector& z) const override;
  double log_det_inverse(const Vector& x) const override;

  double knot_min() const { return knots_.front(); }
  double knot_max() const { return knots_.back(); }
  double eval(double z) const;
  double eval_deriv(double z) const;

 private:
  double invert(double x) const;

  std::vector<double> knots_;
  std::vector<double> values_;
  std::vector<double> second_derivs_;  // natural cubic spline
};

/// Eq.-(1)-style change of variables: density of forward(Z), Z ~ base, at x.
double push_forward_logpdf(const TargetDistribution& base, const TransportMap& map,
                           const Vector& x);
/// Density targeted by neutra samplers: target through the forward map plus
/// the forward log-det, evaluated in base space.
double push_backward_logpdf(const TargetDistribution& target, const TransportMap& map,
                            const Vector& z);

/// The push-forward of `base` through `map` as a distribution object (logpdf
/// plus sampler); the standard flow proposal.
TargetDistribution push_forward_distribution(const TargetDistribution& base, MapPtr map);
/// Push-backward of `target` as an unnormalized density with gradient taken by
/// central differences only when `target` has none (analytic chain rule is not
/// tracked through generic maps).
TargetDistribution push_backward_density(const TargetDistribution& target, MapPtr map);

/// 1 / T'(0) for the exact 1D Bogachev map, by central difference; lower
/// bounds the bi-Lipschitz constant of the mixture-to-Gaussian transport.
double bilip_lower_bound_empirical(const Bogachev1DMap& map);

/// Condition number (eigenvalue ratio) of the sample covariance of
/// inverse(X), X ~ target, at n_samples draws.
double pushbackward_condition_number(const TargetDistribution& target, const TransportMap& map,
                                     int n_samples, RngStream& rng);

}  // namespace flowmc
