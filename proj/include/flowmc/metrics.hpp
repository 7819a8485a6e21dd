#pragma once

#include "flowmc/distributions.hpp"

namespace flowmc {

struct SlicedConfig {
  int n_projections = 128;
  int grid_size = 2048;
  std::uint64_t seed = 0;
  bool parallel = true;  // false forces the serial reference path
};

/// Scott-style KDE bandwidth with an IQR fallback when the sample standard
/// deviation collapses (below 1e-8 of the sample range).
double kde_bandwidth(const Vector& samples);

/// Gaussian KDE evaluated on a uniform grid via linear binning + truncated
/// kernel convolution; the result is renormalized to integrate to one.
Vector kde_on_grid(const Vector& samples, double bandwidth, double grid_min, double dx,
                   int grid_size);

/// Total variation between the KDEs of two 1D samples on a shared
/// `grid_size`-point grid (trapezoid rule).
double tv_distance_1d(const Vector& a, const Vector& b, int grid_size = 2048);

/// Exact two-sample Kolmogorov-Smirnov statistic.
double ks_statistic_1d(Vector a, Vector b);

/// Mean 1D TV distance over random unit projections; projection directions
/// depend only on (seed, projection index), so the OpenMP and serial paths
/// agree bit for bit.
double sliced_tv(const Matrix& a, const Matrix& b, const SlicedConfig& config = {});

/// Mean 1D KS statistic over the same random projections.
double sliced_ks(const Matrix& a, const Matrix& b, const SlicedConfig& config = {});

/// Split-chain potential scale reduction factor, maximum over dimensions.
/// Each chain is split in half, so m chains of length T become 2m sequences.
double split_r_hat(const std::vector<Matrix>& chains);

/// Fraction of rows closest to each mode.
Vector mode_histogram(const Matrix& samples, const std::vector<Vector>& modes);

/// Per chain: squared error sum_j (p_j - 1/K)^2 of the visited-mode histogram
/// against the uniform one; returns the median over chains (even count: mean
/// of the two central order statistics). A chain stuck in one of K modes
/// contributes (1 - 1/K)^2 + (K - 1)/K^2.
double mode_histogram_mse(const std::vector<Matrix>& chains, const std::vector<Vector>& modes);

/// KL(N(mu0, cov0) || N(mu1, cov1)).
double gaussian_kl(const Vector& mu0, const Matrix& cov0, const Vector& mu1, const Matrix& cov1);

/// For each mode: restrict samples to those closest to it, fit a Gaussian
/// (covariance regularized by 1e-6 I), and average KL(component || fit) over
/// modes. Modes with fewer than dim + 2 assigned samples are skipped with a
/// warning; all modes empty is an error.
double per_mode_forward_kl(const Matrix& samples, const std::vector<Vector>& modes,
                           const Matrix& component_cov);

}  // namespace flowmc
