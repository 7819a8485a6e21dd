#include "flowmc/theory.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace flowmc {

namespace {
const double kLn2 = std::log(2.0);
}

void validate(const BoundInputs& in) {
  if (!(in.m > 0.0)) throw std::invalid_argument("m must be positive");
  if (!(in.beta >= 1.0)) throw std::invalid_argument("beta must be >= 1");
  if (!(in.epsilon > 0.0 && in.epsilon < 1.0))
    throw std::invalid_argument("epsilon must be in (0, 1)");
  if (!(in.c_r >= 0.0)) throw std::invalid_argument("c_r must be nonnegative");
  if (!(in.alpha > 0.5 && in.alpha < 1.0))
    throw std::invalid_argument("alpha must be in (1/2, 1)");
}

double psi_isoperimetry(double m) {
  if (!(m > 0.0)) throw std::invalid_argument("m must be positive");
  return kLn2 * std::sqrt(m);
}

double conductance_lower_bound(const BoundInputs& in) {
  validate(in);
  const double flat = (1.0 - in.alpha) / 2.0;
  if (in.c_r == 0.0) return flat;
  const double psi = psi_isoperimetry(in.m);
  const double local = (1.0 - in.alpha) * (2.0 * in.alpha - 1.0) * psi / (128.0 * in.c_r);
  return std::min(flat, local);
}

double lovasz_mixing_time(const BoundInputs& in) {
  const double phi = conductance_lower_bound(in);
  return 2.0 / (phi * phi) * std::log(2.0 * in.beta / in.epsilon);
}

double imh_mixing_bound(const BoundInputs& in) {
  validate(in);
  const double log_term = std::log(2.0 * in.beta / in.epsilon);
  const double ratio = 128.0 * 128.0 * in.c_r * in.c_r / (kLn2 * kLn2 * in.m);
  return 128.0 * log_term * std::max(1.0, ratio);
}

bool check_theorem_41_condition(double c_r, double m) {
  if (!(m > 0.0)) throw std::invalid_argument("m must be positive");
  return c_r <= kLn2 * std::sqrt(m) / 32.0;
}

double radius_factor(double epsilon, double beta, int dim) {
  if (dim <= 0) throw std::invalid_argument("dim must be positive");
  double l = -std::log(epsilon / (2.0 * beta));
  if (l < 0.0) {
    std::cerr << "radius_factor: epsilon >= 2 beta, flooring log term at zero\n";
    l = 0.0;
  }
  const double ratio = l / dim;
  return 2.0 * (1.0 + std::max(std::pow(ratio, 0.25), std::sqrt(ratio)));
}

double radius_R(double sigma, double m, double epsilon, double beta, int dim) {
  if (!(sigma > 0.0) || !(m > 0.0)) throw std::invalid_argument("sigma, m must be positive");
  const double sd = std::sqrt(static_cast<double>(dim));
  const double r1 = sigma * sd * radius_factor(epsilon / 272.0, beta, dim);
  const double r2 = std::sqrt(dim / m) * radius_factor(epsilon / 17.0, beta, dim);
  return std::max(r1, r2);
}

double c_r_gaussian(double radius, int dim, double lambda) {
  const double s = 1.0 + lambda;
  if (!(s > 0.0)) throw std::invalid_argument("1 + lambda must be positive");
  return radius * std::sqrt(static_cast<double>(dim)) * std::abs(1.0 - 1.0 / (s * s));
}

double lambda_scaling(int dim) {
  if (dim <= 0) throw std::invalid_argument("dim must be positive");
  const double k = kLn2 / 32.0;
  return std::sqrt(k / (2.0 * dim) + 1.0) - 1.0;
}

double c_r_anisotropic_gaussian(double radius, const Vector& c, double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
  double worst = 0.0;
  for (int i = 0; i < c.size(); ++i) {
    if (!(c[i] > 0.0)) throw std::invalid_argument("proposal scales must be positive");
    worst = std::max(worst, std::abs(1.0 / (c[i] * c[i]) - 1.0 / (sigma * sigma)));
  }
  return std::sqrt(static_cast<double>(c.size())) * radius * worst;
}

KlOptimalSigmas kl_optimal_sigmas(const Vector& c) {
  const int d = static_cast<int>(c.size());
  if (d == 0) throw std::invalid_argument("empty scale vector");
  KlOptimalSigmas out;
  out.forward = std::sqrt(c.squaredNorm() / d);
  out.backward = std::sqrt(d / c.cwiseInverse().squaredNorm());
  return out;
}

namespace {

struct Grid {
  Vector points;
  Vector pi;  // stationary point masses, sums to 1
};

Grid make_grid(const Density1D& target_logpdf, const GridChainConfig& config) {
  Grid g;
  g.points.resize(config.n_points);
  g.pi.resize(config.n_points);
  const double dx = (config.hi - config.lo) / (config.n_points - 1);
  for (int i = 0; i < config.n_points; ++i) {
    g.points[i] = config.lo + i * dx;
    g.pi[i] = target_logpdf(g.points[i]);
  }
  g.pi = (g.pi.array() - g.pi.maxCoeff()).exp();
  g.pi /= g.pi.sum();
  return g;
}

Vector warm_start(const Grid& g, const GridChainConfig& config) {
  if (config.left_half_start) {
    Vector p0 = Vector::Zero(g.pi.size());
    double mass = 0.0;
    for (int i = 0; i < g.pi.size(); ++i) {
      if (g.points[i] >= 0.0) break;
      p0[i] = g.pi[i];
      mass += g.pi[i];
    }
    if (mass <= 0.0) throw std::runtime_error("warm_start: no target mass on x < 0");
    return p0 / mass;
  }
  const double beta = config.beta_warm;
  if (beta <= 1.0) return g.pi;
  // adversarial beta-warm start: target restricted to the lowest-density
  // points carrying total mass 1/beta
  std::vector<int> order(g.pi.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return g.pi[a] < g.pi[b]; });
  Vector p0 = Vector::Zero(g.pi.size());
  double mass = 0.0;
  for (int idx : order) {
    p0[idx] = g.pi[idx];
    mass += g.pi[idx];
    if (mass >= 1.0 / beta) break;
  }
  return p0 / mass;
}

std::vector<double> evolve(const Matrix& kernel, const Grid& g, const GridChainConfig& config) {
  Vector p = warm_start(g, config);
  std::vector<double> curve;
  curve.push_back(0.5 * (p - g.pi).cwiseAbs().sum());
  for (int t = 0; t < config.n_steps; ++t) {
    p = kernel * p;
    curve.push_back(0.5 * (p - g.pi).cwiseAbs().sum());
  }
  return curve;
}

/// Exact finite-state Metropolis kernel: K(y, x) = Q(y, x) min(1, ratio) off
/// the diagonal, rejection mass on it. Columns sum to 1.
Matrix metropolis_kernel(const Grid& g, const Matrix& proposal_cols) {
  const int n = static_cast<int>(g.pi.size());
  Matrix k = Matrix::Zero(n, n);
  for (int x = 0; x < n; ++x) {
    double reject = 0.0;
    for (int y = 0; y < n; ++y) {
      if (y == x) continue;
      const double q_fwd = proposal_cols(y, x);
      const double q_bwd = proposal_cols(x, y);
      if (q_fwd == 0.0) continue;
      double acc = 0.0;
      if (g.pi[x] * q_fwd > 0.0)
        acc = std::min(1.0, g.pi[y] * q_bwd / (g.pi[x] * q_fwd));
      else
        acc = 1.0;
      k(y, x) = q_fwd * acc;
      reject += q_fwd * (1.0 - acc);
    }
    k(x, x) = proposal_cols(x, x) + reject;
  }
  return k;
}

}  // namespace

std::vector<double> imh_tv_curve(const Density1D& target_logpdf, const Density1D& proposal_logpdf,
                                 const GridChainConfig& config) {
  const Grid g = make_grid(target_logpdf, config);
  Vector rho(config.n_points);
  for (int i = 0; i < config.n_points; ++i) rho[i] = proposal_logpdf(g.points[i]);
  rho = (rho.array() - rho.maxCoeff()).exp();
  rho /= rho.sum();
  Matrix q(config.n_points, config.n_points);
  for (int x = 0; x < config.n_points; ++x) q.col(x) = rho;
  return evolve(metropolis_kernel(g, q), g, config);
}

std::vector<double> mala_tv_curve(const Density1D& target_logpdf,
                                  const Density1D& target_grad_logpdf, double step_size,
                                  const GridChainConfig& config) {
  const Grid g = make_grid(target_logpdf, config);
  const int n = config.n_points;
  Matrix q(n, n);
  for (int x = 0; x < n; ++x) {
    const double mean = g.points[x] + step_size * target_grad_logpdf(g.points[x]);
    const double var = 2.0 * step_size;
    Vector col(n);
    for (int y = 0; y < n; ++y)
      col[y] = std::exp(-0.5 * (g.points[y] - mean) * (g.points[y] - mean) / var);
    q.col(x) = col / col.sum();
  }
  return evolve(metropolis_kernel(g, q), g, config);
}

int steps_to_tv(const std::vector<double>& curve, double tv_threshold) {
  for (size_t t = 0; t < curve.size(); ++t)
    if (curve[t] <= tv_threshold) return static_cast<int>(t);
  return -1;
}

}  // namespace flowmc
