#include "flowmc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <stdexcept>

namespace flowmc {

double kde_bandwidth(const Vector& samples) {
  const int n = static_cast<int>(samples.size());
  if (n < 2) throw std::invalid_argument("kde_bandwidth: need at least 2 samples");
  const double mean = samples.mean();
  const double sd = std::sqrt((samples.array() - mean).square().sum() / (n - 1));
  const double range = samples.maxCoeff() - samples.minCoeff();
  double scale = sd;
  if (sd < 1e-8 * range) {
    std::vector<double> sorted(samples.data(), samples.data() + n);
    std::sort(sorted.begin(), sorted.end());
    const double q1 = sorted[static_cast<int>(0.25 * (n - 1))];
    const double q3 = sorted[static_cast<int>(0.75 * (n - 1))];
    scale = (q3 - q1) / 1.34;
  }
  if (scale <= 0.0) scale = std::max(range, 1.0) * 1e-3;
  return 1.06 * scale * std::pow(static_cast<double>(n), -0.2);
}

Vector kde_on_grid(const Vector& samples, double bandwidth, double grid_min, double dx,
                   int grid_size) {
  Vector binned = Vector::Zero(grid_size);
  for (int i = 0; i < samples.size(); ++i) {
    const double pos = (samples[i] - grid_min) / dx;
    const int lo = static_cast<int>(std::floor(pos));
    const double frac = pos - lo;
    if (lo >= 0 && lo < grid_size) binned[lo] += 1.0 - frac;
    if (lo + 1 >= 0 && lo + 1 < grid_size) binned[lo + 1] += frac;
  }
  const int half_width = std::min(grid_size, static_cast<int>(std::ceil(6.0 * bandwidth / dx)));
  Vector kernel(2 * half_width + 1);
  for (int k = -half_width; k <= half_width; ++k)
    kernel[k + half_width] = std::exp(-0.5 * std::pow(k * dx / bandwidth, 2));
  Vector density = Vector::Zero(grid_size);
  for (int g = 0; g < grid_size; ++g) {
    if (binned[g] == 0.0) continue;
    const int k_lo = std::max(-half_width, -g);
    const int k_hi = std::min(half_width, grid_size - 1 - g);
    for (int k = k_lo; k <= k_hi; ++k) density[g + k] += binned[g] * kernel[k + half_width];
  }
  // trapezoid renormalization on the grid
  double mass = density.sum() - 0.5 * (density[0] + density[grid_size - 1]);
  mass *= dx;
  if (mass > 0.0) density /= mass;
  return density;
}

double tv_distance_1d(const Vector& a, const Vector& b, int grid_size) {
  const double ha = kde_bandwidth(a);
  const double hb = kde_bandwidth(b);
  const double pad = 3.0 * std::max(ha, hb);
  const double lo = std::min(a.minCoeff(), b.minCoeff()) - pad;
  const double hi = std::max(a.maxCoeff(), b.maxCoeff()) + pad;
  const double dx = (hi - lo) / (grid_size - 1);
  const Vector pa = kde_on_grid(a, ha, lo, dx, grid_size);
  const Vector pb = kde_on_grid(b, hb, lo, dx, grid_size);
  const Vector diff = (pa - pb).cwiseAbs();
  double integral = diff.sum() - 0.5 * (diff[0] + diff[grid_size - 1]);
  return 0.5 * integral * dx;
}

double ks_statistic_1d(Vector a, Vector b) {
  std::sort(a.data(), a.data() + a.size());
  std::sort(b.data(), b.data() + b.size());
  const int na = static_cast<int>(a.size()), nb = static_cast<int>(b.size());
  int i = 0, j = 0;
  double sup = 0.0;
  while (i < na && j < nb) {
    const double x = std::min(a[i], b[j]);
    while (i < na && a[i] <= x) ++i;
    while (j < nb && b[j] <= x) ++j;
    sup = std::max(sup, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return sup;
}

namespace {

Vector random_direction(int dim, std::uint64_t seed, int index) {
  // raw standard-normal projection vectors, deliberately not normalized
  RngStream rng(seed, static_cast<std::uint64_t>(index) + 1);
  return rng.normal_vector(dim);
}

bool degenerate(const Vector& v) {
  const double mean = v.mean();
  return (v.array() - mean).abs().maxCoeff() == 0.0;
}

double sliced_metric(const Matrix& a, const Matrix& b, const SlicedConfig& config,
                     double (*metric)(const Vector&, const Vector&, int)) {
  if (a.cols() != b.cols()) throw std::invalid_argument("dimension mismatch");
  const int dim = static_cast<int>(a.cols());
  std::vector<double> values(config.n_projections);
  // Each projection depends only on (seed, index): the parallel and serial
  // paths produce identical per-projection values, summed in index order.
  std::vector<char> skipped(config.n_projections, 0);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (config.parallel)
#endif
  for (int p = 0; p < config.n_projections; ++p) {
    const Vector dir = random_direction(dim, config.seed, p);
    const Vector pa = a * dir;
    const Vector pb = b * dir;
    if (degenerate(pa) || degenerate(pb)) {
      skipped[p] = 1;
      values[p] = 0.0;
      continue;
    }
    values[p] = metric(pa, pb, config.grid_size);
  }
  double sum = 0.0;
  int used = 0;
  for (int p = 0; p < config.n_projections; ++p) {
    if (skipped[p]) continue;
    sum += values[p];
    ++used;
  }
  if (used < config.n_projections)
    std::cerr << "sliced metric: skipped " << config.n_projections - used
              << " degenerate projections\n";
  if (used == 0) return 0.0;
  return sum / used;
}

double ks_adapter(const Vector& a, const Vector& b, int) { return ks_statistic_1d(a, b); }

}  // namespace

double sliced_tv(const Matrix& a, const Matrix& b, const SlicedConfig& config) {
  return sliced_metric(a, b, config, &tv_distance_1d);
}

double sliced_ks(const Matrix& a, const Matrix& b, const SlicedConfig& config) {
  return sliced_metric(a, b, config, &ks_adapter);
}

double split_r_hat(const std::vector<Matrix>& chains) {
  if (chains.empty()) throw std::invalid_argument("split_r_hat: no chains");
  const int t_half = static_cast<int>(chains[0].rows()) / 2;
  if (t_half < 2) throw std::invalid_argument("split_r_hat: chains too short");
  const int dim = static_cast<int>(chains[0].cols());
  std::vector<Matrix> seqs;
  for (const auto& c : chains) {
    if (c.cols() != dim) throw std::invalid_argument("split_r_hat: dim mismatch");
    seqs.push_back(c.topRows(t_half));
    seqs.push_back(c.middleRows(t_half, t_half));
  }
  const int m = static_cast<int>(seqs.size());
  double worst = 0.0;
  for (int d = 0; d < dim; ++d) {
    Vector means(m), vars(m);
    for (int s = 0; s < m; ++s) {
      const auto col = seqs[s].col(d);
      means[s] = col.mean();
      vars[s] = (col.array() - means[s]).square().sum() / (t_half - 1);
    }
    const double grand = means.mean();
    const double b = t_half * (means.array() - grand).square().sum() / (m - 1);
    const double w = vars.mean();
    if (w <= 0.0) {
      std::cerr << "split_r_hat: zero within-chain variance in dimension " << d << "\n";
      return std::numeric_limits<double>::infinity();
    }
    const double var_plus = (t_half - 1.0) / t_half * w + b / t_half;
    worst = std::max(worst, std::sqrt(var_plus / w));
  }
  return worst;
}

Vector mode_histogram(const Matrix& samples, const std::vector<Vector>& modes) {
  Vector hist = Vector::Zero(modes.size());
  for (int i = 0; i < samples.rows(); ++i)
    hist[closest_mode(modes, samples.row(i).transpose())] += 1.0;
  return hist / std::max<int>(1, static_cast<int>(samples.rows()));
}

double mode_histogram_mse(const std::vector<Matrix>& chains, const std::vector<Vector>& modes) {
  if (chains.empty()) throw std::invalid_argument("mode_histogram_mse: no chains");
  const int m = static_cast<int>(chains.size());
  const double target = 1.0 / modes.size();
  // per-chain squared error against the uniform histogram; median over chains
  // (even count: mean of the two central order statistics)
  std::vector<double> errs(m);
  for (int c = 0; c < m; ++c) {
    const Vector hist = mode_histogram(chains[c], modes);
    errs[c] = (hist.array() - target).square().sum();
  }
  std::sort(errs.begin(), errs.end());
  return m % 2 == 1 ? errs[m / 2] : 0.5 * (errs[m / 2 - 1] + errs[m / 2]);
}

double gaussian_kl(const Vector& mu0, const Matrix& cov0, const Vector& mu1, const Matrix& cov1) {
  const int d = static_cast<int>(mu0.size());
  Eigen::LLT<Matrix> llt1(cov1);
  if (llt1.info() != Eigen::Success) throw std::runtime_error("gaussian_kl: cov1 not PD");
  const Matrix inv1 = llt1.solve(Matrix::Identity(d, d));
  const double trace = (inv1 * cov0).trace();
  const Vector diff = mu1 - mu0;
  const double quad = diff.dot(llt1.solve(diff));
  Eigen::LLT<Matrix> llt0(cov0);
  if (llt0.info() != Eigen::Success) throw std::runtime_error("gaussian_kl: cov0 not PD");
  double log_det0 = 0.0, log_det1 = 0.0;
  for (int i = 0; i < d; ++i) {
    log_det0 += 2.0 * std::log(llt0.matrixL()(i, i));
    log_det1 += 2.0 * std::log(llt1.matrixL()(i, i));
  }
  return 0.5 * (trace + quad - d + log_det1 - log_det0);
}

double per_mode_forward_kl(const Matrix& samples, const std::vector<Vector>& modes,
                           const Matrix& component_cov) {
  const int d = static_cast<int>(samples.cols());
  const int k = static_cast<int>(modes.size());
  std::vector<std::vector<int>> assigned(k);
  for (int i = 0; i < samples.rows(); ++i)
    assigned[closest_mode(modes, samples.row(i).transpose())].push_back(i);
  double sum = 0.0;
  int used = 0;
  for (int j = 0; j < k; ++j) {
    const int n = static_cast<int>(assigned[j].size());
    if (n < d + 2) {
      std::cerr << "per_mode_forward_kl: skipping mode " << j << " with " << n << " samples\n";
      continue;
    }
    Matrix sub(n, d);
    for (int i = 0; i < n; ++i) sub.row(i) = samples.row(assigned[j][i]);
    const Vector mu = sub.colwise().mean().transpose();
    Matrix centered = sub.rowwise() - mu.transpose();
    Matrix cov = centered.transpose() * centered / (n - 1);
    cov += 1e-6 * Matrix::Identity(d, d);
    sum += gaussian_kl(modes[j], component_cov, mu, cov);
    ++used;
  }
  if (used == 0) throw std::runtime_error("per_mode_forward_kl: every mode segment too small");
  return sum / used;
}

}  // namespace flowmc
