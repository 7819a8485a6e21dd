#include "flowmc/distributions.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <tuple>

namespace flowmc {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double log_sum_exp(const std::vector<double>& v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

}  // namespace

TargetDistribution standard_gaussian(int dim) {
  return {dim,
          [dim](const Vector& x) { return -0.5 * x.squaredNorm() - 0.5 * dim * kLog2Pi; },
          [](const Vector& x) { return Vector(-x); },
          [dim](RngStream& rng) { return rng.normal_vector(dim); }};
}

TargetDistribution isotropic_gaussian(int dim, double sigma) {
  const double inv_var = 1.0 / (sigma * sigma);
  const double log_norm = -0.5 * dim * kLog2Pi - dim * std::log(sigma);
  return {dim,
          [=](const Vector& x) { return -0.5 * inv_var * x.squaredNorm() + log_norm; },
          [=](const Vector& x) { return Vector(-inv_var * x); },
          [=](RngStream& rng) { return Vector(sigma * rng.normal_vector(dim)); }};
}

TargetDistribution diagonal_gaussian(const Vector& mean, const Vector& variances) {
  const int dim = static_cast<int>(mean.size());
  if (variances.size() != dim || variances.minCoeff() <= 0.0)
    throw std::invalid_argument("diagonal_gaussian: bad variances");
  const Vector inv_var = variances.cwiseInverse();
  const double log_norm = -0.5 * dim * kLog2Pi - 0.5 * variances.array().log().sum();
  const Vector stds = variances.cwiseSqrt();
  return {dim,
          [=](const Vector& x) {
            const Vector r = x - mean;
            return -0.5 * r.cwiseProduct(inv_var).dot(r) + log_norm;
          },
          [=](const Vector& x) { return Vector(-(x - mean).cwiseProduct(inv_var)); },
          [=](RngStream& rng) {
            return Vector(mean + stds.cwiseProduct(rng.normal_vector(dim)));
          }};
}

TargetDistribution gaussian(const Vector& mean, const Matrix& cov) {
  const int dim = static_cast<int>(mean.size());
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("gaussian: covariance is not positive definite");
  auto chol = std::make_shared<Eigen::LLT<Matrix>>(std::move(llt));
  const double log_det = 2.0 * chol->matrixL().toDenseMatrix().diagonal().array().log().sum();
  const double log_norm = -0.5 * dim * kLog2Pi - 0.5 * log_det;
  return {dim,
          [=](const Vector& x) {
            const Vector r = x - mean;
            return -0.5 * r.dot(chol->solve(r)) + log_norm;
          },
          [=](const Vector& x) { return Vector(-chol->solve(x - mean)); },
          [=](RngStream& rng) {
            return Vector(mean + chol->matrixL() * rng.normal_vector(dim));
          }};
}

Vector ill_conditioned_sigmas(const IllConditionedGaussianSpec& spec) {
  Vector sigmas(spec.dim);
  const double l0 = std::log10(spec.sigma_min);
  const double l1 = std::log10(spec.sigma_max);
  for (int i = 0; i < spec.dim; ++i)
    sigmas[i] = std::pow(10.0, l0 + (l1 - l0) * i / (spec.dim - 1.0));
  return sigmas;
}

Matrix ill_conditioned_covariance(const IllConditionedGaussianSpec& spec) {
  const int d = spec.dim;
  const Vector sigmas = ill_conditioned_sigmas(spec);
  Matrix rot = Matrix::Identity(d, d);
  const double c = std::cos(M_PI / 4.0), s = std::sin(M_PI / 4.0);
  rot(0, 0) = c;
  rot(0, d - 1) = -s;
  rot(d - 1, 0) = s;
  rot(d - 1, d - 1) = c;
  const Matrix diag = sigmas.array().square().matrix().asDiagonal();
  return rot * diag * rot.transpose();
}

TargetDistribution make_target(const IllConditionedGaussianSpec& spec) {
  return gaussian(Vector::Zero(spec.dim), ill_conditioned_covariance(spec));
}

TargetDistribution make_target(const FunnelSpec& spec) {
  const double a = spec.a, b = spec.b;
  const int d = spec.dim;
  if (d < 2) throw std::invalid_argument("funnel needs dim >= 2");
  const double log_norm = -0.5 * d * kLog2Pi - 0.5 * std::log(a);
  return {d,
          [=](const Vector& x) {
            const double x1 = x[0];
            const double tail_sq = x.tail(d - 1).squaredNorm();
            return -0.5 * x1 * x1 / a - 0.5 * (d - 1) * b * x1 -
                   0.5 * std::exp(-b * x1) * tail_sq + log_norm;
          },
          [=](const Vector& x) {
            const double x1 = x[0];
            const double e = std::exp(-b * x1);
            Vector g(d);
            g[0] = -x1 / a - 0.5 * (d - 1) * b + 0.5 * b * e * x.tail(d - 1).squaredNorm();
            g.tail(d - 1) = -e * x.tail(d - 1);
            return g;
          },
          [=](RngStream& rng) {
            Vector x(d);
            x[0] = std::sqrt(a) * rng.normal();
            const double scale = std::exp(0.5 * b * x[0]);
            for (int i = 1; i < d; ++i) x[i] = scale * rng.normal();
            return x;
          }};
}

TargetDistribution make_target(const BananaSpec& spec) {
  const double a = spec.a, b = spec.b;
  const int d = spec.dim;
  if (d % 2 != 0) throw std::invalid_argument("banana needs even dim");
  const double log_norm = -0.5 * d * kLog2Pi - 0.5 * d * std::log(a);
  return {d,
          [=](const Vector& x) {
            double sq = 0.0;
            for (int i = 0; i + 1 < d; i += 2) {
              const double z0 = x[i] / a;
              const double z1 = x[i + 1] - b * x[i] * x[i] + a * a * b;
              sq += z0 * z0 + z1 * z1;
            }
            return -0.5 * sq + log_norm;
          },
          [=](const Vector& x) {
            Vector g(d);
            for (int i = 0; i + 1 < d; i += 2) {
              const double z1 = x[i + 1] - b * x[i] * x[i] + a * a * b;
              g[i] = -x[i] / (a * a) + 2.0 * b * x[i] * z1;
              g[i + 1] = -z1;
            }
            return g;
          },
          [=](RngStream& rng) {
            Vector x(d);
            for (int i = 0; i + 1 < d; i += 2) {
              const double z0 = rng.normal();
              const double z1 = rng.normal();
              x[i] = a * z0;
              x[i + 1] = z1 + b * a * a * z0 * z0 - a * a * b;
            }
            return x;
          }};
}

std::vector<Vector> mixture4_means(const Mixture4Spec& spec) {
  const int d = spec.dim;
  Vector mu1 = Vector::Constant(d, spec.a);
  Vector mu2(d);
  for (int i = 0; i < d; ++i) mu2[i] = (i < d / 2) ? -spec.a : spec.a;
  return {mu1, mu2, -mu2, -mu1};
}

double mixture4_marginal_variance(const Mixture4Spec& spec) {
  // each mean coordinate is +-a, so the between-component variance is a^2
  return 1.0 + spec.a * spec.a;
}

TargetDistribution make_target(const Mixture4Spec& spec) {
  const int d = spec.dim;
  if (d < 2) throw std::invalid_argument("mixture4 needs dim >= 2");
  auto means = std::make_shared<std::vector<Vector>>(mixture4_means(spec));
  const double log_norm = -0.5 * d * kLog2Pi - std::log(4.0);
  auto comp_logs = [means, log_norm](const Vector& x) {
    std::vector<double> logs(4);
    for (int i = 0; i < 4; ++i)
      logs[i] = -0.5 * (x - (*means)[i]).squaredNorm() + log_norm;
    return logs;
  };
  return {d,
          [comp_logs](const Vector& x) { return log_sum_exp(comp_logs(x)); },
          [means, comp_logs](const Vector& x) {
            const auto logs = comp_logs(x);
            const double total = log_sum_exp(logs);
            Vector g = Vector::Zero(x.size());
            for (int i = 0; i < 4; ++i)
              g += std::exp(logs[i] - total) * ((*means)[i] - x);
            return g;
          },
          [means, d](RngStream& rng) {
            const int k = std::min(3, static_cast<int>(rng.uniform() * 4.0));
            return Vector((*means)[k] + rng.normal_vector(d));
          },
          mixture4_means(spec)};
}

TargetDistribution make_target(const TwoMode1DSpec& spec) {
  const double a = spec.a, sigma = spec.sigma;
  const double log_norm = -0.5 * kLog2Pi - std::log(sigma) - std::log(2.0);
  return {1,
          [=](const Vector& x) {
            const double zm = (x[0] + a) / sigma;
            const double zp = (x[0] - a) / sigma;
            return log_sum_exp({-0.5 * zm * zm, -0.5 * zp * zp}) + log_norm;
          },
          [=](const Vector& x) {
            const double zm = (x[0] + a) / sigma;
            const double zp = (x[0] - a) / sigma;
            const double lm = -0.5 * zm * zm, lp = -0.5 * zp * zp;
            const double total = log_sum_exp({lm, lp});
            Vector g(1);
            g[0] = std::exp(lm - total) * (-zm / sigma) + std::exp(lp - total) * (-zp / sigma);
            return g;
          },
          [=](RngStream& rng) {
            Vector x(1);
            const double mu = rng.uniform() < 0.5 ? -a : a;
            x[0] = mu + sigma * rng.normal();
            return x;
          },
          {Vector::Constant(1, -a), Vector::Constant(1, a)}};
}

double phi4_energy(const Phi4Spec& spec, const Vector& phi) {
  const int d = spec.dim;
  const double ad = spec.a_coupling * d;
  double grad_term = phi[0] * phi[0] + phi[d - 1] * phi[d - 1];
  for (int i = 1; i < d; ++i) {
    const double diff = phi[i] - phi[i - 1];
    grad_term += diff * diff;
  }
  double well = 0.0;
  for (int i = 0; i < d; ++i) {
    const double w = 1.0 - phi[i] * phi[i];
    well += w * w;
  }
  return spec.beta * (0.5 * ad * grad_term + well / (4.0 * ad));
}

Vector phi4_energy_grad(const Phi4Spec& spec, const Vector& phi) {
  const int d = spec.dim;
  const double ad = spec.a_coupling * d;
  Vector g(d);
  for (int i = 0; i < d; ++i) {
    const double left = i > 0 ? phi[i - 1] : 0.0;
    const double right = i < d - 1 ? phi[i + 1] : 0.0;
    g[i] = spec.beta * (ad * (2.0 * phi[i] - left - right) -
                        phi[i] * (1.0 - phi[i] * phi[i]) / ad);
  }
  return g;
}

std::vector<Vector> phi4_modes(const Phi4Spec& spec) {
  static std::mutex mutex;
  static std::map<std::tuple<int, double, double>, std::vector<Vector>> cache;
  const auto key = std::make_tuple(spec.dim, spec.a_coupling, spec.beta);
  {
    std::scoped_lock lock(mutex);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
  }
  std::vector<Vector> modes;
  for (double sign : {+1.0, -1.0}) {
    Vector phi = Vector::Constant(spec.dim, sign);
    for (int iter = 0; iter < 2000000; ++iter) {
      const Vector g = phi4_energy_grad(spec, phi);
      if (g.norm() < 1e-8) break;
      phi -= 1e-3 * g;
    }
    modes.push_back(phi);
  }
  std::scoped_lock lock(mutex);
  cache[key] = modes;
  return modes;
}

Matrix phi4_base_precision(const Phi4Spec& spec) {
  const int d = spec.dim;
  const double ad = spec.a_coupling * d;
  Matrix lap = Matrix::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    lap(i, i) = 2.0;
    if (i > 0) lap(i, i - 1) = -1.0;
    if (i < d - 1) lap(i, i + 1) = -1.0;
  }
  return spec.beta * (ad * lap + Matrix::Identity(d, d) / ad);
}

TargetDistribution phi4_base(const Phi4Spec& spec) {
  const int d = spec.dim;
  const Matrix prec = phi4_base_precision(spec);
  Eigen::LLT<Matrix> llt(prec);
  if (llt.info() != Eigen::Success) throw std::runtime_error("phi4 base precision not PD");
  auto chol = std::make_shared<Eigen::LLT<Matrix>>(std::move(llt));
  const double log_det_prec = 2.0 * chol->matrixL().toDenseMatrix().diagonal().array().log().sum();
  const double log_norm = -0.5 * d * kLog2Pi + 0.5 * log_det_prec;
  auto prec_ptr = std::make_shared<Matrix>(prec);
  return {d,
          [=](const Vector& x) { return -0.5 * x.dot(*prec_ptr * x) + log_norm; },
          [=](const Vector& x) { return Vector(-(*prec_ptr * x)); },
          [=](RngStream& rng) {
            // phi = L^{-T} xi has covariance P^{-1}
            return Vector(chol->matrixU().solve(rng.normal_vector(d)));
          }};
}

TargetDistribution make_target(const Phi4Spec& spec) {
  return {spec.dim,
          [spec](const Vector& phi) { return -phi4_energy(spec, phi); },
          [spec](const Vector& phi) { return Vector(-phi4_energy_grad(spec, phi)); },
          nullptr,
          phi4_modes(spec)};
}

int closest_mode(const std::vector<Vector>& modes, const Vector& x) {
  if (modes.empty()) throw std::runtime_error("no mode locations available");
  int best = 0;
  double best_dist = (x - modes[0]).squaredNorm();
  for (int i = 1; i < static_cast<int>(modes.size()); ++i) {
    const double dist = (x - modes[i]).squaredNorm();
    if (dist < best_dist) {
      best = i;
      best_dist = dist;
    }
  }
  return best;
}

int closest_mode(const TargetDistribution& target, const Vector& x) {
  return closest_mode(target.modes(), x);
}

}  // namespace flowmc
