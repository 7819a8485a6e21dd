#include "flowmc/transport.hpp"

#include <cmath>
#include <iostream>

namespace flowmc {

namespace {

constexpr double kSqrt2 = 1.4142135623730950488016887242097;
constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double normal_logpdf_1d(double x, double mu, double sigma) {
  const double z = (x - mu) / sigma;
  return -0.5 * z * z - 0.5 * kLog2Pi - std::log(sigma);
}

constexpr double kLogHalf = -0.69314718055994530942;

// log Phi(t); erfc keeps full relative accuracy in the left tail
double log_phi_lower(double t) { return std::log(0.5 * std::erfc(-t / kSqrt2)); }

// log of F_w(z) = w Phi((z+a)/s) + (1-w) Phi((z-a)/s)
double log_mixture_cdf(double z, double w, double a, double sigma) {
  const double inf = std::numeric_limits<double>::infinity();
  const double l1 = w > 0.0 ? std::log(w) + log_phi_lower((z + a) / sigma) : -inf;
  const double l2 = w < 1.0 ? std::log1p(-w) + log_phi_lower((z - a) / sigma) : -inf;
  const double hi = std::max(l1, l2);
  if (!std::isfinite(hi)) return hi;
  return hi + std::log(std::exp(l1 - hi) + std::exp(l2 - hi));
}

double log_mixture_pdf(double z, double w, double a, double sigma) {
  const double inf = std::numeric_limits<double>::infinity();
  const double l1 = w > 0.0 ? std::log(w) + normal_logpdf_1d(z, -a, sigma) : -inf;
  const double l2 = w < 1.0 ? std::log1p(-w) + normal_logpdf_1d(z, a, sigma) : -inf;
  const double hi = std::max(l1, l2);
  if (!std::isfinite(hi)) return hi;
  return hi + std::log(std::exp(l1 - hi) + std::exp(l2 - hi));
}

// solve log Phi(x) = log_p for log_p <= log(1/2); Newton in log space avoids
// the 2F-1 cancellation that wrecks tail round trips
double normal_quantile_log_lower(double log_p) {
  if (log_p >= kLogHalf) return 0.0;
  double x = -std::sqrt(-2.0 * log_p);
  for (int i = 0; i < 80; ++i) {
    const double lf = log_phi_lower(x);
    const double lg = -0.5 * x * x - 0.5 * kLog2Pi;
    double step = (lf - log_p) * std::exp(lf - lg);
    if (!std::isfinite(step)) break;
    step = std::clamp(step, -2.0, 2.0);
    x -= step;
    if (std::abs(step) < 1e-16 * (1.0 + std::abs(x))) break;
  }
  return x;
}

// x = Phi^{-1}(F_w(z)), computed through whichever tail stays accurate;
// S_w(z) = F_{1-w}(-z) mirrors the upper half into the lower one
double gauss_from_mixture(double z, double w, double a, double sigma) {
  const double lf = log_mixture_cdf(z, w, a, sigma);
  if (lf <= kLogHalf) {
    if (std::isinf(lf)) {
      std::cerr << "bogachev map: CDF underflow at z=" << z << ", clamping\n";
      return -40.0;
    }
    return normal_quantile_log_lower(lf);
  }
  const double ls = log_mixture_cdf(-z, 1.0 - w, a, sigma);
  if (std::isinf(ls)) {
    std::cerr << "bogachev map: CDF underflow at z=" << z << ", clamping\n";
    return 40.0;
  }
  return -normal_quantile_log_lower(ls);
}

// z with F_w(z) = Phi(x): log-space bisection bracket plus Newton polish
double mixture_from_gauss(double x, double w, double a, double sigma) {
  if (x > 0.0) return -mixture_from_gauss(-x, 1.0 - w, a, sigma);
  const double target = log_phi_lower(x);
  double lo = -a - 10.0 * sigma, hi = a + 10.0 * sigma;
  while (log_mixture_cdf(lo, w, a, sigma) > target && std::isfinite(lo)) lo = 2.0 * lo - 1.0;
  while (log_mixture_cdf(hi, w, a, sigma) < target && std::isfinite(hi)) hi = 2.0 * hi + 1.0;
  for (int i = 0; i < 100; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (log_mixture_cdf(mid, w, a, sigma) < target)
      lo = mid;
    else
      hi = mid;
    if (hi - lo < 1e-12 * (1.0 + std::abs(mid))) break;
  }
  double zv = 0.5 * (lo + hi);
  for (int i = 0; i < 6; ++i) {
    const double lf = log_mixture_cdf(zv, w, a, sigma);
    const double lg = log_mixture_pdf(zv, w, a, sigma);
    const double step = (lf - target) * std::exp(lf - lg);
    if (!std::isfinite(step)) break;
    zv -= std::clamp(step, -2.0, 2.0);
  }
  return zv;
}

}  // namespace

double normal_cdf(double z) { return 0.5 * std::erfc(-z / kSqrt2); }

double erf_inv(double p) {
  if (p <= -1.0) return -std::numeric_limits<double>::infinity();
  if (p >= 1.0) return std::numeric_limits<double>::infinity();
  if (p == 0.0) return 0.0;
  // rational seed (Giles 2010), then Newton on erf
  double w = -std::log((1.0 - p) * (1.0 + p));
  double y;
  if (w < 6.25) {
    w -= 3.125;
    y = -3.6444120640178196996e-21;
    y = y * w + -1.685059138182016589e-19;
    y = y * w + 1.2858480715256400167e-18;
    y = y * w + 1.115787767802518096e-17;
    y = y * w + -1.333171662854620906e-16;
    y = y * w + 2.0972767875968561637e-17;
    y = y * w + 6.6376381343583238325e-15;
    y = y * w + -4.0545662729752068639e-14;
    y = y * w + -8.1519341976054721522e-14;
    y = y * w + 2.6335093153082322977e-12;
    y = y * w + -1.2975133253453532498e-11;
    y = y * w + -5.4154120542946279317e-11;
    y = y * w + 1.051212273321532285e-09;
    y = y * w + -4.1126339803469836976e-09;
    y = y * w + -2.9070369957882005086e-08;
    y = y * w + 4.2347877827932403518e-07;
    y = y * w + -1.3654692000834678645e-06;
    y = y * w + -1.3882523362786468719e-05;
    y = y * w + 0.0001867342080340571352;
    y = y * w + -0.00074070253416626697512;
    y = y * w + -0.0060336708714301490533;
    y = y * w + 0.24015818242558961693;
    y = y * w + 1.6536545626831027356;
  } else if (w < 16.0) {
    w = std::sqrt(w) - 3.25;
    y = 2.2137376921775787049e-09;
    y = y * w + 9.0756561938885390979e-08;
    y = y * w + -2.7517406297064545428e-07;
    y = y * w + 1.8239629214389227755e-08;
    y = y * w + 1.5027403968909827627e-06;
    y = y * w + -4.013867526981545969e-06;
    y = y * w + 2.9234449089955446044e-06;
    y = y * w + 1.2475304481671778723e-05;
    y = y * w + -4.7318229009055733981e-05;
    y = y * w + 6.8284851459573175448e-05;
    y = y * w + 2.4031110387097893999e-05;
    y = y * w + -0.0003550375203628474796;
    y = y * w + 0.00095328937973738049703;
    y = y * w + -0.0016882755560235047313;
    y = y * w + 0.0024914420961078508066;
    y = y * w + -0.0037512085075692412107;
    y = y * w + 0.005370914553590063617;
    y = y * w + 1.0052589676941592334;
    y = y * w + 3.0838856104922207635;
  } else {
    w = std::sqrt(w) - 5.0;
    y = -2.7109920616438573243e-11;
    y = y * w + -2.5556418169965252055e-10;
    y = y * w + 1.5076572693500548083e-09;
    y = y * w + -3.7894654401267369937e-09;
    y = y * w + 7.6157012080783393804e-09;
    y = y * w + -1.4960026627149240478e-08;
    y = y * w + 2.9147953450901080826e-08;
    y = y * w + -6.7711997758452339498e-08;
    y = y * w + 2.2900482228026654717e-07;
    y = y * w + -9.9298272942317002539e-07;
    y = y * w + 4.5260625972231537039e-06;
    y = y * w + -1.9681778105531670567e-05;
    y = y * w + 7.5995277030017761139e-05;
    y = y * w + -0.00021503011930044477347;
    y = y * w + -0.00013871931833623122026;
    y = y * w + 1.0103004648645343977;
    y = y * w + 4.8499064014085844221;
  }
  double x = y * p;
  // two Newton refinements: erf(x) - p, erf'(x) = 2/sqrt(pi) exp(-x^2)
  constexpr double kTwoOverSqrtPi = 1.1283791670955125738961589031215;
  for (int i = 0; i < 2; ++i) {
    const double err = std::erf(x) - p;
    x -= err / (kTwoOverSqrtPi * std::exp(-x * x));
  }
  return x;
}

namespace {

class IdentityMap final : public TransportMap {
 public:
  explicit IdentityMap(int dim) : dim_(dim) {}
  int dim() const override { return dim_; }
  Vector forward(const Vector& z) const override { return z; }
  Vector inverse(const Vector& x) const override { return x; }
  double log_det_forward(const Vector&) const override { return 0.0; }
  double log_det_inverse(const Vector&) const override { return 0.0; }

 private:
  int dim_;
};

class LinearMap final : public TransportMap {
 public:
  explicit LinearMap(const Matrix& a) : a_(a), lu_(a) {
    const auto& lu_matrix = lu_.matrixLU();
    double log_det = 0.0;
    for (int i = 0; i < a.rows(); ++i) log_det += std::log(std::abs(lu_matrix(i, i)));
    log_det_ = log_det;
  }
  int dim() const override { return static_cast<int>(a_.rows()); }
  Vector forward(const Vector& z) const override { return a_ * z; }
  Vector inverse(const Vector& x) const override { return lu_.solve(x); }
  double log_det_forward(const Vector&) const override { return log_det_; }
  double log_det_inverse(const Vector&) const override { return -log_det_; }

 private:
  Matrix a_;
  Eigen::PartialPivLU<Matrix> lu_;
  double log_det_;
};

class FunnelFlow final : public TransportMap {
 public:
  FunnelFlow(double a, double b, double alpha, int dim)
      : a_(a), b_(b), alpha_(alpha), dim_(dim) {}
  int dim() const override { return dim_; }

  Vector forward(const Vector& z) const override {
    Vector x(dim_);
    const double s = std::sqrt(a_ / alpha_);
    x[0] = s * z[0];
    const double scale = std::exp(0.5 * b_ * s * z[0]) / std::sqrt(alpha_);
    for (int i = 1; i < dim_; ++i) x[i] = scale * z[i];
    return x;
  }

  Vector inverse(const Vector& x) const override {
    Vector z(dim_);
    z[0] = std::sqrt(alpha_ / a_) * x[0];
    const double scale = std::sqrt(alpha_) * std::exp(-0.5 * b_ * x[0]);
    for (int i = 1; i < dim_; ++i) z[i] = scale * x[i];
    return z;
  }

  double log_det_forward(const Vector& z) const override {
    return 0.5 * std::log(a_) - 0.5 * dim_ * std::log(alpha_) +
           0.5 * (dim_ - 1) * b_ * std::sqrt(a_ / alpha_) * z[0];
  }

  double log_det_inverse(const Vector& x) const override {
    return -0.5 * std::log(a_) + 0.5 * dim_ * std::log(alpha_) - 0.5 * (dim_ - 1) * b_ * x[0];
  }

 private:
  double a_, b_, alpha_;
  int dim_;
};

class BananaFlow final : public TransportMap {
 public:
  BananaFlow(double a, double b, int dim) : a_(a), b_(b), dim_(dim) {}
  int dim() const override { return dim_; }

  Vector forward(const Vector& z) const override {
    Vector x(dim_);
    for (int i = 0; i + 1 < dim_; i += 2) {
      x[i] = a_ * z[i];
      x[i + 1] = z[i + 1] + b_ * a_ * a_ * z[i] * z[i] - a_ * a_ * b_;
    }
    return x;
  }

  Vector inverse(const Vector& x) const override {
    Vector z(dim_);
    for (int i = 0; i + 1 < dim_; i += 2) {
      z[i] = x[i] / a_;
      z[i + 1] = x[i + 1] - b_ * x[i] * x[i] + a_ * a_ * b_;
    }
    return z;
  }

  double log_det_forward(const Vector&) const override { return 0.5 * dim_ * std::log(a_); }
  double log_det_inverse(const Vector&) const override { return -0.5 * dim_ * std::log(a_); }

 private:
  double a_, b_;
  int dim_;
};

}  // namespace

MapPtr identity_map(int dim) { return std::make_shared<IdentityMap>(dim); }

MapPtr linear_map(const Matrix& a) { return std::make_shared<LinearMap>(a); }

MapPtr interpolated_gaussian_flow(const IllConditionedGaussianSpec& spec, double t) {
  const int d = spec.dim;
  const Matrix cov = ill_conditioned_covariance(spec);
  const Matrix chol = Eigen::LLT<Matrix>(cov).matrixL();
  const Vector sigmas = ill_conditioned_sigmas(spec);
  Matrix a;
  if (t < 0.5) {
    a = (1.0 - 2.0 * t) * sigmas[0] * Matrix::Identity(d, d) + 2.0 * t * chol;
  } else if (t == 0.5) {
    a = chol;
  } else {
    a = (2.0 * t - 1.0) * sigmas[d - 1] * Matrix::Identity(d, d) + 2.0 * (1.0 - t) * chol;
  }
  return std::make_shared<LinearMap>(a);
}

MapPtr funnel_flow(double a, double b, double alpha, int dim) {
  return std::make_shared<FunnelFlow>(a, b, alpha, dim);
}

MapPtr funnel_flow_beta(double beta, int dim) {
  return funnel_flow(beta * 3.0, 1.0, beta, dim);
}

MapPtr banana_flow(double a, double b, int dim) {
  if (dim % 2 != 0) throw std::invalid_argument("banana flow needs even dim");
  return std::make_shared<BananaFlow>(a, b, dim);
}

// ---- Bogachev maps ----

Bogachev1DMap::Bogachev1DMap(double a, double sigma, double sigma_tilde,
                             BogachevDirection direction)
    : a_(a), sigma_(sigma), sigma_tilde_(sigma_tilde), direction_(direction) {}

double Bogachev1DMap::mixture_cdf(double z) const {
  return 0.25 * (2.0 + std::erf((z + a_) / (sigma_ * kSqrt2)) +
                 std::erf((z - a_) / (sigma_ * kSqrt2)));
}

double Bogachev1DMap::mixture_quantile(double p) const {
  // monotone bisection; the CDF has no closed-form inverse
  double lo = -a_ - 10.0 * sigma_, hi = a_ + 10.0 * sigma_;
  while (mixture_cdf(lo) > p && std::isfinite(lo)) lo = 2.0 * lo - 1.0;
  while (mixture_cdf(hi) < p && std::isfinite(hi)) hi = 2.0 * hi + 1.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mixture_cdf(mid) < p)
      lo = mid;
    else
      hi = mid;
    if (hi - lo < 1e-15 * (1.0 + std::abs(mid))) break;
  }
  double z = 0.5 * (lo + hi);
  // Newton polish: bisection residual is amplified through flat tails
  for (int i = 0; i < 4; ++i) {
    const double pdf = 0.5 *
                       (std::exp(normal_logpdf_1d(z, -a_, sigma_)) +
                        std::exp(normal_logpdf_1d(z, a_, sigma_)));
    if (pdf < 1e-300) break;
    const double step = (mixture_cdf(z) - p) / pdf;
    if (!std::isfinite(step)) break;
    z = std::clamp(z - step, lo - 1.0, hi + 1.0);
  }
  return z;
}

double Bogachev1DMap::map_mixture_to_gaussian(double z) const {
  return sigma_tilde_ * gauss_from_mixture(z, 0.5, a_, sigma_);
}

double Bogachev1DMap::map_gaussian_to_mixture(double x) const {
  return mixture_from_gauss(x / sigma_tilde_, 0.5, a_, sigma_);
}

double Bogachev1DMap::log_deriv_mixture_to_gaussian(double z) const {
  // dT/dz = f_mu(z) / f_nu(T(z))
  const double lm = normal_logpdf_1d(z, -a_, sigma_);
  const double lp = normal_logpdf_1d(z, a_, sigma_);
  const double hi = std::max(lm, lp);
  const double log_f_mu = hi + std::log(0.5 * (std::exp(lm - hi) + std::exp(lp - hi)));
  const double t = map_mixture_to_gaussian(z);
  return log_f_mu - normal_logpdf_1d(t, 0.0, sigma_tilde_);
}

Vector Bogachev1DMap::forward(const Vector& z) const {
  Vector out(1);
  out[0] = direction_ == BogachevDirection::kMixtureToGaussian ? map_mixture_to_gaussian(z[0])
                                                               : map_gaussian_to_mixture(z[0]);
  return out;
}

Vector Bogachev1DMap::inverse(const Vector& x) const {
  Vector out(1);
  out[0] = direction_ == BogachevDirection::kMixtureToGaussian ? map_gaussian_to_mixture(x[0])
                                                               : map_mixture_to_gaussian(x[0]);
  return out;
}

double Bogachev1DMap::log_det_forward(const Vector& z) const {
  if (direction_ == BogachevDirection::kMixtureToGaussian)
    return log_deriv_mixture_to_gaussian(z[0]);
  return -log_deriv_mixture_to_gaussian(map_gaussian_to_mixture(z[0]));
}

double Bogachev1DMap::log_det_inverse(const Vector& x) const {
  if (direction_ == BogachevDirection::kMixtureToGaussian)
    return -log_deriv_mixture_to_gaussian(map_gaussian_to_mixture(x[0]));
  return log_deriv_mixture_to_gaussian(x[0]);
}

Bogachev2DMap::Bogachev2DMap(double a, double sigma, double sigma_tilde,
                             BogachevDirection direction)
    : a_(a),
      sigma_(sigma),
      sigma_tilde_(sigma_tilde),
      direction_(direction),
      first_(a, sigma, sigma_tilde, BogachevDirection::kMixtureToGaussian) {}

double Bogachev2DMap::conditional_weight(double x1) const {
  // log N(x1;-a,s) - log N(x1;a,s) = -2 a x1 / s^2
  const double delta = -2.0 * a_ * x1 / (sigma_ * sigma_);
  return 1.0 / (1.0 + std::exp(-delta));
}

double Bogachev2DMap::cond_cdf(double w, double z) const {
  return w * normal_cdf((z + a_) / sigma_) + (1.0 - w) * normal_cdf((z - a_) / sigma_);
}

double Bogachev2DMap::cond_quantile(double w, double p) const {
  double lo = -a_ - 10.0 * sigma_, hi = a_ + 10.0 * sigma_;
  while (cond_cdf(w, lo) > p && std::isfinite(lo)) lo = 2.0 * lo - 1.0;
  while (cond_cdf(w, hi) < p && std::isfinite(hi)) hi = 2.0 * hi + 1.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (cond_cdf(w, mid) < p)
      lo = mid;
    else
      hi = mid;
    if (hi - lo < 1e-15 * (1.0 + std::abs(mid))) break;
  }
  double z = 0.5 * (lo + hi);
  for (int i = 0; i < 4; ++i) {
    const double pdf = w * std::exp(normal_logpdf_1d(z, -a_, sigma_)) +
                       (1.0 - w) * std::exp(normal_logpdf_1d(z, a_, sigma_));
    if (pdf < 1e-300) break;
    const double step = (cond_cdf(w, z) - p) / pdf;
    if (!std::isfinite(step)) break;
    z = std::clamp(z - step, lo - 1.0, hi + 1.0);
  }
  return z;
}

Vector Bogachev2DMap::forward(const Vector& z) const {
  Vector out(2);
  if (direction_ == BogachevDirection::kMixtureToGaussian) {
    out[0] = first_.map_mixture_to_gaussian(z[0]);
    const double w = conditional_weight(z[0]);
    out[1] = sigma_tilde_ * gauss_from_mixture(z[1], w, a_, sigma_);
  } else {
    out[0] = first_.map_gaussian_to_mixture(z[0]);
    const double w = conditional_weight(out[0]);
    out[1] = mixture_from_gauss(z[1] / sigma_tilde_, w, a_, sigma_);
  }
  return out;
}

Vector Bogachev2DMap::inverse(const Vector& x) const {
  Vector out(2);
  if (direction_ == BogachevDirection::kMixtureToGaussian) {
    out[0] = first_.map_gaussian_to_mixture(x[0]);
    const double w = conditional_weight(out[0]);
    out[1] = mixture_from_gauss(x[1] / sigma_tilde_, w, a_, sigma_);
  } else {
    out[0] = first_.map_mixture_to_gaussian(x[0]);
    const double w = conditional_weight(x[0]);
    out[1] = sigma_tilde_ * gauss_from_mixture(x[1], w, a_, sigma_);
  }
  return out;
}

double Bogachev2DMap::log_det_forward(const Vector& z) const {
  // triangular with zero cross-derivative in z2: product of the two diagonal terms
  Vector x = forward(z);
  if (direction_ == BogachevDirection::kMixtureToGaussian) {
    const double w = conditional_weight(z[0]);
    const double lm = normal_logpdf_1d(z[1], -a_, sigma_);
    const double lp = normal_logpdf_1d(z[1], a_, sigma_);
    const double hi = std::max(lm, lp);
    const double log_f_cond =
        hi + std::log(w * std::exp(lm - hi) + (1.0 - w) * std::exp(lp - hi));
    return first_.log_det_forward(z.head(1)) + log_f_cond -
           normal_logpdf_1d(x[1], 0.0, sigma_tilde_);
  }
  const double w = conditional_weight(x[0]);
  const double lm = normal_logpdf_1d(x[1], -a_, sigma_);
  const double lp = normal_logpdf_1d(x[1], a_, sigma_);
  const double hi = std::max(lm, lp);
  const double log_f_cond = hi + std::log(w * std::exp(lm - hi) + (1.0 - w) * std::exp(lp - hi));
  return first_.log_det_forward(z.head(1)) + normal_logpdf_1d(z[1], 0.0, sigma_tilde_) -
         log_f_cond;
}

double Bogachev2DMap::log_det_inverse(const Vector& x) const {
  return -log_det_forward(inverse(x));
}

SmoothedBogachev1DMap::SmoothedBogachev1DMap(double a, double sigma, double sigma_tilde,
                                             BogachevDirection direction, int n_knots) {
  const Bogachev1DMap exact(a, sigma, sigma_tilde, direction);
  const double r = a + 4.0 * sigma;
  knots_.resize(n_knots);
  values_.resize(n_knots);
  for (int i = 0; i < n_knots; ++i) {
    knots_[i] = -r + 2.0 * r * i / (n_knots - 1);
    values_[i] = exact.forward(Vector::Constant(1, knots_[i]))[0];
  }
  // natural cubic spline second derivatives (tridiagonal solve)
  const int n = n_knots;
  std::vector<double> u(n, 0.0);
  second_derivs_.assign(n, 0.0);
  for (int i = 1; i < n - 1; ++i) {
    const double sig = (knots_[i] - knots_[i - 1]) / (knots_[i + 1] - knots_[i - 1]);
    const double p = sig * second_derivs_[i - 1] + 2.0;
    second_derivs_[i] = (sig - 1.0) / p;
    const double dd = (values_[i + 1] - values_[i]) / (knots_[i + 1] - knots_[i]) -
                      (values_[i] - values_[i - 1]) / (knots_[i] - knots_[i - 1]);
    u[i] = (6.0 * dd / (knots_[i + 1] - knots_[i - 1]) - sig * u[i - 1]) / p;
  }
  for (int i = n - 2; i >= 0; --i)
    second_derivs_[i] = second_derivs_[i] * second_derivs_[i + 1] + u[i];
}

double SmoothedBogachev1DMap::eval(double z) const {
  const int n = static_cast<int>(knots_.size());
  if (z <= knots_.front()) return values_.front() + eval_deriv(knots_.front()) * (z - knots_.front());
  if (z >= knots_.back()) return values_.back() + eval_deriv(knots_.back()) * (z - knots_.back());
  int lo = 0, hi = n - 1;
  while (hi - lo > 1) {
    const int mid = (lo + hi) / 2;
    if (knots_[mid] > z)
      hi = mid;
    else
      lo = mid;
  }
  const double h = knots_[hi] - knots_[lo];
  const double a = (knots_[hi] - z) / h;
  const double b = (z - knots_[lo]) / h;
  return a * values_[lo] + b * values_[hi] +
         ((a * a * a - a) * second_derivs_[lo] + (b * b * b - b) * second_derivs_[hi]) * h * h /
             6.0;
}

double SmoothedBogachev1DMap::eval_deriv(double z) const {
  const int n = static_cast<int>(knots_.size());
  double zz = std::clamp(z, knots_.front(), knots_.back());
  int lo = 0, hi = n - 1;
  while (hi - lo > 1) {
    const int mid = (lo + hi) / 2;
    if (knots_[mid] > zz)
      hi = mid;
    else
      lo = mid;
  }
  const double h = knots_[hi] - knots_[lo];
  const double a = (knots_[hi] - zz) / h;
  const double b = (zz - knots_[lo]) / h;
  return (values_[hi] - values_[lo]) / h -
         (3.0 * a * a - 1.0) / 6.0 * h * second_derivs_[lo] +
         (3.0 * b * b - 1.0) / 6.0 * h * second_derivs_[hi];
}

double SmoothedBogachev1DMap::invert(double x) const {
  double lo = knots_.front(), hi = knots_.back();
  while (eval(lo) > x) lo = 2.0 * lo - 1.0;
  while (eval(hi) < x) hi = 2.0 * hi + 1.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (eval(mid) < x)
      lo = mid;
    else
      hi = mid;
    if (hi - lo < 1e-14 * (1.0 + std::abs(mid))) break;
  }
  return 0.5 * (lo + hi);
}

Vector SmoothedBogachev1DMap::forward(const Vector& z) const {
  return Vector::Constant(1, eval(z[0]));
}

Vector SmoothedBogachev1DMap::inverse(const Vector& x) const {
  return Vector::Constant(1, invert(x[0]));
}

double SmoothedBogachev1DMap::log_det_forward(const Vector& z) const {
  return std::log(eval_deriv(z[0]));
}

double SmoothedBogachev1DMap::log_det_inverse(const Vector& x) const {
  return -std::log(eval_deriv(invert(x[0])));
}

// ---- operations ----

double push_forward_logpdf(const TargetDistribution& base, const TransportMap& map,
                           const Vector& x) {
  if (base.dim() != map.dim()) throw std::invalid_argument("base/map dimension mismatch");
  return base.logpdf(map.inverse(x)) + map.log_det_inverse(x);
}

double push_backward_logpdf(const TargetDistribution& target, const TransportMap& map,
                            const Vector& z) {
  if (target.dim() != map.dim()) throw std::invalid_argument("target/map dimension mismatch");
  return target.logpdf(map.forward(z)) + map.log_det_forward(z);
}

TargetDistribution push_forward_distribution(const TargetDistribution& base, MapPtr map) {
  auto base_ptr = std::make_shared<TargetDistribution>(base);
  return {map->dim(),
          [base_ptr, map](const Vector& x) { return push_forward_logpdf(*base_ptr, *map, x); },
          nullptr,
          [base_ptr, map](RngStream& rng) { return map->forward(base_ptr->sample(rng)); }};
}

TargetDistribution push_backward_density(const TargetDistribution& target, MapPtr map) {
  auto target_ptr = std::make_shared<TargetDistribution>(target);
  auto logpdf = [target_ptr, map](const Vector& z) {
    return push_backward_logpdf(*target_ptr, *map, z);
  };
  TargetDistribution::GradFn grad = nullptr;
  if (target.has_grad()) {
    grad = [logpdf](const Vector& z) {
      // central differences through the generic map
      Vector g(z.size());
      Vector zp = z;
      for (int i = 0; i < z.size(); ++i) {
        const double h = 1e-6 * (1.0 + std::abs(z[i]));
        zp[i] = z[i] + h;
        const double fp = logpdf(zp);
        zp[i] = z[i] - h;
        const double fm = logpdf(zp);
        zp[i] = z[i];
        g[i] = (fp - fm) / (2.0 * h);
      }
      return g;
    };
  }
  return {map->dim(), logpdf, grad};
}

double bilip_lower_bound_empirical(const Bogachev1DMap& map) {
  const double h = 1e-5;
  const double deriv =
      (map.map_mixture_to_gaussian(h) - map.map_mixture_to_gaussian(-h)) / (2.0 * h);
  return 1.0 / deriv;
}

double pushbackward_condition_number(const TargetDistribution& target, const TransportMap& map,
                                     int n_samples, RngStream& rng) {
  const int d = map.dim();
  Matrix z(n_samples, d);
  for (int i = 0; i < n_samples; ++i) z.row(i) = map.inverse(target.sample(rng)).transpose();
  const Vector mean = z.colwise().mean();
  const Matrix centered = z.rowwise() - mean.transpose();
  const Matrix cov = centered.transpose() * centered / (n_samples - 1.0);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (lo <= 0.0) throw std::runtime_error("singular push-backward covariance");
  return hi / lo;
}

}  // namespace flowmc
