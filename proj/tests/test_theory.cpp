#include <doctest.h>

#include <cmath>

#include "flowmc/theory.hpp"

using namespace flowmc;

namespace {
constexpr double kLn2 = 0.6931471805599453;
}

TEST_CASE("input validation rejects out-of-range fields") {
  BoundInputs ok;
  CHECK_NOTHROW(validate(ok));
  auto bad = ok;
  bad.m = 0.0;
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
  bad = ok;
  bad.beta = 0.5;
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
  bad = ok;
  bad.epsilon = 0.0;
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
  bad = ok;
  bad.epsilon = 1.0;
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
  bad = ok;
  bad.c_r = -1.0;
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
  bad = ok;
  bad.alpha = 0.5;
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
}

TEST_CASE("isoperimetric constant is ln(2) sqrt(m)") {
  CHECK(psi_isoperimetry(1.0) == doctest::Approx(kLn2).epsilon(1e-15));
  CHECK(psi_isoperimetry(4.0) == doctest::Approx(2.0 * kLn2).epsilon(1e-15));
}

TEST_CASE("conductance bound: branch structure") {
  BoundInputs in;
  in.alpha = 0.75;
  in.c_r = 0.0;
  CHECK(conductance_lower_bound(in) == doctest::Approx(0.125).epsilon(1e-15));
  // tiny c_r stays on the unconditional branch
  in.c_r = 1e-6;
  CHECK(conductance_lower_bound(in) == doctest::Approx(0.125).epsilon(1e-15));
  // large c_r switches to the weight-oscillation branch
  in.c_r = 1.0;
  const double want = 0.25 * 0.5 * psi_isoperimetry(in.m) / (128.0 * in.c_r);
  CHECK(conductance_lower_bound(in) == doctest::Approx(want).epsilon(1e-15));
}

TEST_CASE("reference value: vanishing weight oscillation at eps = 1/2, beta = 2") {
  BoundInputs in;
  in.m = 1.0;
  in.beta = 2.0;
  in.epsilon = 0.5;
  in.c_r = 0.0;
  CHECK(std::abs(imh_mixing_bound(in) - 128.0 * std::log(8.0)) < 1e-9);
}

TEST_CASE("direct bound composes the conductance and Lovasz steps on the active branch") {
  BoundInputs in;
  in.m = 2.0;
  in.beta = 3.0;
  in.epsilon = 0.1;
  in.alpha = 0.75;
  // both formulations flip to the c_r-controlled branch above psi/128
  for (double c_r : {0.1, 0.5, 2.0}) {
    in.c_r = c_r;
    REQUIRE(c_r >= psi_isoperimetry(in.m) / 128.0);
    const double composed = lovasz_mixing_time(in);
    const double direct = imh_mixing_bound(in);
    CHECK(direct == doctest::Approx(composed).epsilon(1e-12));
    // and both equal the explicit algebraic form
    const double want = 2097152.0 * c_r * c_r / (kLn2 * kLn2 * in.m) *
                        std::log(2.0 * in.beta / in.epsilon);
    CHECK(direct == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("theorem condition: threshold at ln(2) sqrt(m) / 32") {
  CHECK(check_theorem_41_condition(0.0, 1.0));
  CHECK(check_theorem_41_condition(kLn2 / 32.0, 1.0));
  CHECK(!check_theorem_41_condition(kLn2 / 32.0 + 1e-12, 1.0));
  CHECK(check_theorem_41_condition(kLn2 / 16.0, 4.0));
}

TEST_CASE("radius factor: closed form and floored tail parameter") {
  const double eps = 0.01, beta = 2.0;
  const int d = 4;
  const double l = -std::log(eps / (2.0 * beta));
  const double want = 2.0 * (1.0 + std::max(std::pow(l / d, 0.25), std::sqrt(l / d)));
  CHECK(radius_factor(eps, beta, d) == doctest::Approx(want).epsilon(1e-14));
  // eps >= 2 beta floors L at zero (warning on stderr): factor collapses to 2
  CHECK(radius_factor(0.9, 0.45, 4) == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("radius R takes the larger of the two concentration radii") {
  const double sigma = 1.3, m = 0.7, eps = 0.05, beta = 2.0;
  const int d = 8;
  const double r1 = sigma * std::sqrt(static_cast<double>(d)) * radius_factor(eps / 272.0, beta, d);
  const double r2 = std::sqrt(d / m) * radius_factor(eps / 17.0, beta, d);
  CHECK(radius_R(sigma, m, eps, beta, d) == doctest::Approx(std::max(r1, r2)).epsilon(1e-14));
}

TEST_CASE("c_R for scaled Gaussian proposals: numeric sup oracle in 1D") {
  const double radius = 3.0;
  for (double lambda : {-0.05, 0.01, 0.2}) {
    // log w(x) = log pi - log rho = x^2/2 (1/(1+l)^2 - 1) + const in 1D;
    // sup over |x| <= R of |d/dx log w| = R |1 - 1/(1+l)^2|
    double sup = 0.0;
    const double s = 1.0 + lambda;
    for (double x = -radius; x <= radius; x += 1e-3) {
      const double g = std::abs(x / (s * s) - x);
      sup = std::max(sup, g);
    }
    CHECK(c_r_gaussian(radius, 1, lambda) == doctest::Approx(sup).epsilon(1e-3));
  }
  // the d-dependence is the sqrt(d) ball inflation
  CHECK(c_r_gaussian(2.0, 9, 0.1) == doctest::Approx(3.0 * c_r_gaussian(2.0, 1, 0.1)).epsilon(1e-12));
}

TEST_CASE("admissible mismatch scale: lambda(d) d converges to ln(2)/128") {
  const double limit = kLn2 / 128.0;
  CHECK(std::abs(lambda_scaling(1000000) * 1e6 - limit) / limit < 0.01);
  // monotone decreasing in d
  CHECK(lambda_scaling(10) > lambda_scaling(100));
  CHECK(lambda_scaling(100) > lambda_scaling(1000));
}

TEST_CASE("anisotropic c_R picks the worst precision mismatch") {
  Vector c(3);
  c << 0.5, 1.0, 2.0;
  const double radius = 2.0, sigma = 1.0;
  double worst = 0.0;
  for (int i = 0; i < 3; ++i)
    worst = std::max(worst, std::abs(1.0 / (c[i] * c[i]) - 1.0 / (sigma * sigma)));
  CHECK(c_r_anisotropic_gaussian(radius, c, sigma) ==
        doctest::Approx(std::sqrt(3.0) * radius * worst).epsilon(1e-14));
}

TEST_CASE("KL-optimal sigmas agree with a numeric scan over gaussian_kl") {
  Vector c(4);
  c << 0.3, 0.8, 1.5, 2.5;
  auto sig = kl_optimal_sigmas(c);
  CHECK(sig.forward * sig.forward == doctest::Approx(c.squaredNorm() / 4.0).epsilon(1e-12));
  CHECK(sig.backward * sig.backward ==
        doctest::Approx(4.0 / c.array().square().inverse().sum()).epsilon(1e-12));

  // numeric verification: each sigma minimizes its own KL direction
  auto kl_fwd = [&](double s) {
    // KL(N(0,diag c^2) || N(0,s^2 I))
    double acc = 0.0;
    for (int i = 0; i < 4; ++i)
      acc += 0.5 * (c[i] * c[i] / (s * s) - 1.0 + 2.0 * std::log(s / c[i]));
    return acc;
  };
  auto kl_bwd = [&](double s) {
    double acc = 0.0;
    for (int i = 0; i < 4; ++i)
      acc += 0.5 * (s * s / (c[i] * c[i]) - 1.0 + 2.0 * std::log(c[i] / s));
    return acc;
  };
  for (double ds : {-1e-4, 1e-4}) {
    CHECK(kl_fwd(sig.forward + ds) > kl_fwd(sig.forward));
    CHECK(kl_bwd(sig.backward + ds) > kl_bwd(sig.backward));
  }
}

TEST_CASE("grid IMH evolution: perfect proposal mixes in one step") {
  auto logpdf = [](double x) { return -0.5 * x * x; };
  GridChainConfig cfg;
  cfg.n_steps = 5;
  auto curve = imh_tv_curve(logpdf, logpdf, cfg);
  REQUIRE(curve.size() == 6);
  CHECK(curve[0] > 0.1);  // adversarial warm start is far from the target
  CHECK(curve[1] < 1e-12);
}

TEST_CASE("grid IMH evolution: mismatched proposal decays monotonically") {
  auto target = [](double x) { return -0.5 * x * x; };
  auto proposal = [](double x) { return -0.5 * x * x / (1.3 * 1.3); };
  GridChainConfig cfg;
  cfg.n_steps = 100;
  auto curve = imh_tv_curve(target, proposal, cfg);
  for (size_t t = 1; t < curve.size(); ++t) CHECK(curve[t] <= curve[t - 1] + 1e-12);
  CHECK(curve.back() < 1e-6);
  CHECK(steps_to_tv(curve, 0.08) > 0);
  CHECK(steps_to_tv(curve, -1.0) == -1);  // unreachable threshold
}

TEST_CASE("grid MALA evolution: unimodal target mixes, bimodal left start does not") {
  auto gauss = [](double x) { return -0.5 * x * x; };
  auto gauss_grad = [](double x) { return -x; };
  GridChainConfig cfg;
  cfg.n_steps = 400;
  auto curve = mala_tv_curve(gauss, gauss_grad, 0.5, cfg);
  CHECK(curve.back() < 0.01);

  // far-apart two-mode target, started in the left mode: stuck near TV 1/2
  const double a = 6.0;
  auto bimodal = [=](double x) {
    const double l0 = -0.5 * (x - a) * (x - a);
    const double l1 = -0.5 * (x + a) * (x + a);
    const double hi = std::max(l0, l1);
    return hi + std::log(0.5 * std::exp(l0 - hi) + 0.5 * std::exp(l1 - hi));
  };
  auto bimodal_grad = [=](double x) {
    const double l0 = -0.5 * (x - a) * (x - a);
    const double l1 = -0.5 * (x + a) * (x + a);
    const double hi = std::max(l0, l1);
    const double w0 = std::exp(l0 - hi), w1 = std::exp(l1 - hi);
    return (-(x - a) * w0 - (x + a) * w1) / (w0 + w1);
  };
  GridChainConfig bcfg;
  bcfg.n_steps = 400;
  bcfg.lo = -12.0;
  bcfg.hi = 12.0;
  bcfg.left_half_start = true;
  auto stuck = mala_tv_curve(bimodal, bimodal_grad, 0.5, bcfg);
  CHECK(stuck.back() > 0.4);
}
