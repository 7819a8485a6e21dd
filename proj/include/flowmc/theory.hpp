#pragma once

#include <functional>

#include "flowmc/distributions.hpp"

namespace flowmc {

/// Inputs shared by the mixing-time calculators. `m` is the strong
/// log-concavity constant of the target, `beta` the warmness of the start,
/// `epsilon` the TV accuracy, `c_r` the local weight-oscillation constant of
/// the importance weights on the radius-R ball, and `alpha` the s-conductance
/// split point. All logarithms are natural.
struct BoundInputs {
  double m = 1.0;
  double beta = 2.0;
  double epsilon = 0.1;
  double c_r = 0.0;
  double alpha = 0.75;
};

/// Throws std::invalid_argument when a field is out of range
/// (m > 0, beta >= 1, 0 < epsilon < 1, c_r >= 0, 1/2 < alpha < 1).
void validate(const BoundInputs& in);

/// Gaussian isoperimetric constant of an m-strongly-log-concave target:
/// psi = ln(2) sqrt(m).
double psi_isoperimetry(double m);

/// s-conductance lower bound
/// phi_s >= min((1 - alpha)/2, (1 - alpha)(2 alpha - 1) psi / (128 c_r));
/// c_r = 0 gives the unconditional branch (1 - alpha)/2.
double conductance_lower_bound(const BoundInputs& in);

/// Lovasz-Simonovits mixing time from a conductance bound:
/// tau <= (2 / phi_s^2) log(2 beta / epsilon).
double lovasz_mixing_time(const BoundInputs& in);

/// Direct mixing-time statement:
/// tau <= 128 log(2 beta / epsilon) max(1, 128^2 c_r^2 / (ln(2)^2 m)).
double imh_mixing_bound(const BoundInputs& in);

/// Applicability condition c_r <= ln(2) sqrt(m) / 32.
bool check_theorem_41_condition(double c_r, double m);

/// Concentration radius factor
/// r(eps, beta, d) = 2 (1 + max((L/d)^(1/4), sqrt(L/d))), L = -log(eps/(2 beta));
/// L is floored at zero (with a warning) when eps >= 2 beta.
double radius_factor(double epsilon, double beta, int dim);

/// Ball radius from the concentration corollary:
/// R = max(sigma sqrt(d) r(eps/272, beta, d), sqrt(d/m) r(eps/17, beta, d)).
double radius_R(double sigma, double m, double epsilon, double beta, int dim);

/// c_R for an isotropic Gaussian target N(0, I) against the scaled proposal
/// N(0, (1 + lambda)^2 I): c_R = R sqrt(d) |1 - 1/(1 + lambda)^2|.
double c_r_gaussian(double radius, int dim, double lambda);

/// Largest proposal mismatch admitted by the theorem condition at unit m:
/// lambda(d) = sqrt(K / (2 d) + 1) - 1 with K = ln(2)/32, so
/// lambda(d) * d -> ln(2)/128 as d grows.
double lambda_scaling(int dim);

/// Anisotropic diagonal proposal N(0, diag(c_i^2)) against N(0, sigma^2 I)
/// factors: c_R = sqrt(d) R max_i |1/c_i^2 - 1/sigma^2|.
double c_r_anisotropic_gaussian(double radius, const Vector& c, double sigma);

/// KL-optimal isotropic approximations of N(0, diag(c_i^2)):
/// forward (moment matching) sigma_f^2 = sum c_i^2 / d,
/// backward (mode seeking)  sigma_b^2 = d / sum c_i^{-2}.
struct KlOptimalSigmas {
  double forward = 0.0;
  double backward = 0.0;
};
KlOptimalSigmas kl_optimal_sigmas(const Vector& c);

// ---------------------------------------------------------------------------
// Deterministic 1D law evolution on a grid. The continuous kernel is
// discretized into an exact finite-state Metropolis chain whose stationary
// law is the grid-restricted target, so TV decay can be measured without
// Monte Carlo noise.

using Density1D = std::function<double(double)>;

struct GridChainConfig {
  int n_points = 512;
  double lo = -8.0;
  double hi = 8.0;
  int n_steps = 200;
  /// Initial law: the target restricted to its lowest-density set of mass
  /// 1/beta_warm (an adversarial beta-warm start). 1 means start at the
  /// target itself.
  double beta_warm = 2.0;
  /// When set, the initial law is instead the target restricted to x < 0
  /// (the left mode of a symmetric bimodal target).
  bool left_half_start = false;
};

/// TV(law_t, target) for t = 0..n_steps of the grid IMH chain with an
/// independent proposal.
std::vector<double> imh_tv_curve(const Density1D& target_logpdf, const Density1D& proposal_logpdf,
                                 const GridChainConfig& config);

/// Same for the grid MALA chain with drift h * (d/dx log pi) and noise 2h.
std::vector<double> mala_tv_curve(const Density1D& target_logpdf,
                                  const Density1D& target_grad_logpdf, double step_size,
                                  const GridChainConfig& config);

/// Steps until the curve first drops below `tv_threshold`; -1 if it never
/// does.
int steps_to_tv(const std::vector<double>& curve, double tv_threshold);

}  // namespace flowmc
