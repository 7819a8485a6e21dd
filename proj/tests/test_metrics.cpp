#include <doctest.h>

#include <cmath>

#include "flowmc/metrics.hpp"

using namespace flowmc;

namespace {

Matrix gaussian_rows(RngStream& rng, int n, int dim, double mean = 0.0, double sd = 1.0) {
  Matrix out(n, dim);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < dim; ++j) out(i, j) = mean + sd * rng.normal();
  return out;
}

}  // namespace

TEST_CASE("KDE integrates to one and peaks at the sample mass") {
  RngStream rng(1);
  Vector s(2000);
  for (int i = 0; i < s.size(); ++i) s[i] = rng.normal();
  const double bw = kde_bandwidth(s);
  CHECK(bw > 0.05);
  CHECK(bw < 0.5);
  const double lo = -6.0, dx = 12.0 / 2047;
  Vector density = kde_on_grid(s, bw, lo, dx, 2048);
  double mass = 0.0;
  for (int i = 0; i + 1 < 2048; ++i) mass += 0.5 * (density[i] + density[i + 1]) * dx;
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-6));
  // mode near zero
  int argmax = 0;
  density.maxCoeff(&argmax);
  CHECK(std::abs(lo + argmax * dx) < 0.3);
}

TEST_CASE("1D TV: identical samples give zero, disjoint samples give one") {
  RngStream rng(2);
  Vector s(500);
  for (int i = 0; i < s.size(); ++i) s[i] = rng.normal();
  CHECK(tv_distance_1d(s, s) < 1e-12);
  Vector far = s.array() + 100.0;
  CHECK(tv_distance_1d(s, far) > 0.99);
}

TEST_CASE("1D TV between N(0,1) and N(1,1) matches erf(1/(2 sqrt 2))") {
  RngStream rng(3);
  Vector a(5000), b(50000);
  for (int i = 0; i < a.size(); ++i) a[i] = rng.normal();
  for (int i = 0; i < b.size(); ++i) b[i] = 1.0 + rng.normal();
  const double exact = std::erf(1.0 / (2.0 * std::sqrt(2.0)));  // 0.38292
  CHECK(std::abs(tv_distance_1d(a, b) - exact) < 0.04);
}

TEST_CASE("KS statistic: exact hand cases") {
  Vector a(3), b(3);
  a << 1.0, 2.0, 3.0;
  b << 4.0, 5.0, 6.0;
  CHECK(ks_statistic_1d(a, b) == 1.0);
  Vector c(2), d(1);
  c << 1.0, 2.0;
  d << 1.5;
  CHECK(ks_statistic_1d(c, d) == 0.5);
  CHECK(ks_statistic_1d(a, a) == 0.0);
  // {1,2,3,4} vs {2.5}: F_a jumps 0.25 each; sup gap at x in [2,2.5): |0.5 - 0| = 0.5
  Vector e(4), f(1);
  e << 1.0, 2.0, 3.0, 4.0;
  f << 2.5;
  CHECK(ks_statistic_1d(e, f) == 0.5);
}

TEST_CASE("sliced metrics: shared projections make them symmetric and deterministic") {
  RngStream rng(4);
  Matrix a = gaussian_rows(rng, 800, 3);
  Matrix b = gaussian_rows(rng, 800, 3, 0.5);
  SlicedConfig cfg;
  cfg.n_projections = 32;
  cfg.seed = 7;
  const double ab = sliced_tv(a, b, cfg);
  CHECK(ab == sliced_tv(a, b, cfg));  // deterministic
  CHECK(ab == sliced_tv(b, a, cfg));  // symmetric
  cfg.parallel = false;
  CHECK(ab == sliced_tv(a, b, cfg));  // serial path bit-identical

  const double ks = sliced_ks(a, b, cfg);
  CHECK(ks > 0.0);
  CHECK(ks < 1.0);
  CHECK(sliced_ks(a, a, cfg) == 0.0);
}

TEST_CASE("sliced TV calibration on the unit-shift pair in d = 1") {
  RngStream rng(5);
  Matrix a = gaussian_rows(rng, 5000, 1);
  Matrix b = gaussian_rows(rng, 50000, 1, 1.0);
  // every projection of a 1D sample is a rescaling, so sliced TV equals 1D TV
  const double exact = std::erf(1.0 / (2.0 * std::sqrt(2.0)));
  CHECK(std::abs(sliced_tv(a, b) - exact) < 0.04);
}

TEST_CASE("sliced KS in 1D equals the exact two-sample statistic") {
  RngStream rng(6);
  Matrix a = gaussian_rows(rng, 400, 1);
  Matrix b = gaussian_rows(rng, 300, 1, 0.7);
  const double exact = ks_statistic_1d(a.col(0), b.col(0));
  // projections rescale (and possibly flip) a 1D sample; KS is invariant
  CHECK(sliced_ks(a, b) == doctest::Approx(exact).epsilon(1e-12));
}

TEST_CASE("split R-hat: duplicated chains give exactly sqrt((T-1)/T)") {
  RngStream rng(7);
  const int T = 500;
  // make the two halves identical too, so every split sequence is the same
  Matrix chain(T, 2);
  chain.topRows(T / 2) = gaussian_rows(rng, T / 2, 2);
  chain.bottomRows(T / 2) = chain.topRows(T / 2);
  std::vector<Matrix> chains = {chain, chain, chain, chain};
  const double n = T / 2.0;  // length of each split sequence
  CHECK(split_r_hat(chains) == doctest::Approx(std::sqrt((n - 1.0) / n)).epsilon(1e-12));
}

TEST_CASE("split R-hat: iid chains near one, separated chains far above") {
  RngStream rng(8);
  std::vector<Matrix> good, stuck;
  for (int c = 0; c < 8; ++c) {
    good.push_back(gaussian_rows(rng, 1000, 2));
    stuck.push_back(gaussian_rows(rng, 1000, 2, c * 5.0, 0.1));
  }
  CHECK(split_r_hat(good) == doctest::Approx(1.0).epsilon(0.01));
  CHECK(split_r_hat(stuck) > 10.0);
}

TEST_CASE("mode histogram counts nearest-mode assignments") {
  std::vector<Vector> modes = {Vector::Constant(1, -2.0), Vector::Constant(1, 2.0)};
  Matrix samples(4, 1);
  samples << -2.1, -1.5, 1.0, 3.0;
  Vector hist = mode_histogram(samples, modes);
  CHECK(hist[0] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(hist[1] == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("mode histogram MSE: stuck and balanced hand cases") {
  std::vector<Vector> modes;
  for (double sx : {-1.0, 1.0})
    for (double sy : {-1.0, 1.0}) {
      Vector m(2);
      m << 4.0 * sx, 4.0 * sy;
      modes.push_back(m);
    }
  // a chain parked on one mode: (1 - 1/4)^2 + 3 (1/4)^2 = 0.75
  Matrix stuck(100, 2);
  for (int i = 0; i < 100; ++i) stuck.row(i) = modes[0].transpose();
  // a chain visiting all four modes equally: 0
  Matrix fair(100, 2);
  for (int i = 0; i < 100; ++i) fair.row(i) = modes[i % 4].transpose();

  CHECK(mode_histogram_mse({stuck, stuck}, modes) == doctest::Approx(0.75).epsilon(1e-14));
  CHECK(mode_histogram_mse({fair, fair}, modes) == doctest::Approx(0.0).epsilon(1e-14));
  // median of {0, 0.75} with an even count: mean of the central pair
  CHECK(mode_histogram_mse({stuck, fair}, modes) == doctest::Approx(0.375).epsilon(1e-14));
  // median with three chains picks the middle value
  CHECK(mode_histogram_mse({stuck, fair, fair}, modes) == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("gaussian KL closed forms") {
  const int d = 3;
  Vector mu = Vector::Zero(d);
  Matrix eye = Matrix::Identity(d, d);
  CHECK(gaussian_kl(mu, eye, mu, eye) == doctest::Approx(0.0).epsilon(1e-12));
  // KL(N(0,I) || N(0,2I)) = (d/2)(1/2 - 1 + log 2)
  const double want = 0.5 * d * (0.5 - 1.0 + std::log(2.0));
  CHECK(gaussian_kl(mu, eye, mu, 2.0 * eye) == doctest::Approx(want).epsilon(1e-12));
  // mean shift only: |dm|^2 / 2
  Vector mu2 = Vector::Constant(d, 1.0);
  CHECK(gaussian_kl(mu, eye, mu2, eye) == doctest::Approx(0.5 * d).epsilon(1e-12));
}

TEST_CASE("per-mode forward KL is small for exact component samples") {
  std::vector<Vector> modes;
  for (double s : {-4.0, 4.0}) modes.push_back(Vector::Constant(2, s));
  RngStream rng(9);
  Matrix samples(20000, 2);
  for (int i = 0; i < samples.rows(); ++i)
    samples.row(i) = (modes[i % 2] + rng.normal_vector(2)).transpose();
  const double kl = per_mode_forward_kl(samples, modes, Matrix::Identity(2, 2));
  CHECK(kl >= 0.0);
  CHECK(kl < 0.01);
  // a biased fit is detected
  Matrix shifted = samples;
  shifted.col(0).array() += 0.8;
  CHECK(per_mode_forward_kl(shifted, modes, Matrix::Identity(2, 2)) > 0.1);
}

TEST_CASE("per-mode forward KL fails loudly when every mode is starved") {
  std::vector<Vector> modes = {Vector::Zero(2)};
  Matrix samples(2, 2);  // below dim + 2
  samples.setZero();
  CHECK_THROWS(per_mode_forward_kl(samples, modes, Matrix::Identity(2, 2)));
}
