#pragma once

#include <functional>

#include "flowmc/transport.hpp"

namespace flowmc {

// ---------------------------------------------------------------------------
// Importance sampling

struct WeightedBatch {
  Matrix samples;      // one draw per row
  Vector log_weights;  // unnormalized log target / proposal ratios
};

/// Draw n proposal samples and attach log importance weights.
WeightedBatch importance_sample(const TargetDistribution& target,
                                const TargetDistribution& proposal, int n, RngStream& rng);

/// Self-normalized weights (softmax of the log weights).
Vector normalized_weights(const Vector& log_weights);

/// (sum w)^2 / (n sum w^2) in (0, 1]; 1 iff all weights equal.
double participation_ratio(const Vector& log_weights);

/// Self-normalized estimate of E_pi[f] with vector-valued f.
Vector snis_estimate(const WeightedBatch& batch,
                     const std::function<Vector(const Vector&)>& f);

/// Resample n rows with replacement according to the normalized weights.
Matrix resample(const WeightedBatch& batch, int n, RngStream& rng);

// ---------------------------------------------------------------------------
// Markov kernels

struct ChainState {
  Vector x;
  double log_target = 0.0;
};

ChainState make_state(const TargetDistribution& target, const Vector& x);

struct StepResult {
  ChainState state;
  bool accepted = false;
};

/// Independent Metropolis-Hastings with a proposal carrying both a sampler
/// and a logpdf: accept with min(1, w(y)/w(x)), w = pi / rho.
StepResult imh_step(const ChainState& state, const TargetDistribution& target,
                    const TargetDistribution& proposal, RngStream& rng);

/// Iterated sampling-importance-resampling: the current state plus
/// n_proposals - 1 fresh proposal draws, one kept by Gumbel-max over log
/// weights. `accepted` reports whether the chain moved off the current state.
StepResult isir_step(const ChainState& state, const TargetDistribution& target,
                     const TargetDistribution& proposal, int n_proposals, RngStream& rng);

/// MALA with drift h * grad and noise sqrt(2h).
StepResult mala_step(const ChainState& state, const TargetDistribution& target, double step_size,
                     RngStream& rng);

/// HMC with a leapfrog integrator; non-finite energies reject the proposal.
StepResult hmc_step(const ChainState& state, const TargetDistribution& target, double step_size,
                    int n_leapfrog, RngStream& rng);

/// Elliptical slice sampling for targets of the form N(0, sigma^2 I) x
/// exp(loglik). Always moves (accepted = true) unless the bracket collapses.
StepResult ess_step(const ChainState& state, double prior_sigma,
                    const std::function<double(const Vector&)>& loglik,
                    const TargetDistribution& target, RngStream& rng);

/// Robbins-Monro step-size adaptation toward a target acceptance rate:
/// log h += t^{-0.6} (acc - target); h clamped to [1e-12, 1e3].
double adapt_step_size(double step_size, bool accepted, long t, double target_rate);

// ---------------------------------------------------------------------------
// Ensembles

using KernelFn = std::function<StepResult(const ChainState&, RngStream&)>;
using InitFn = std::function<Vector(int chain, RngStream&)>;

struct EnsembleConfig {
  int n_chains = 4;
  int n_steps = 1000;
  std::uint64_t seed = 0;
  bool parallel = true;  // false forces the serial reference path
};

struct EnsembleResult {
  /// One (n_steps x dim) trajectory per chain.
  std::vector<Matrix> chains;
  Vector acceptance_rates;
};

/// Runs independent chains, one rng stream per chain derived from the seed.
/// The parallel (OpenMP) and serial paths are bit-identical because every
/// chain's randomness depends only on (seed, chain index).
EnsembleResult run_ensemble(const TargetDistribution& target, const KernelFn& kernel,
                            const InitFn& init, const EnsembleConfig& config);

// ---------------------------------------------------------------------------
// Flow-enhanced sampler constructions

/// Kernel sampling in latent space against the push-backward density and
/// reporting states through the forward map. `latent_kernel` acts on the
/// push-backward density (already includes the log-det term).
struct NeutraKernel {
  KernelFn latent_kernel;           // steps latent ChainState
  TargetDistribution pushbackward;  // latent-space density
  MapPtr map;

  /// Full data-space kernel: pulls x back, steps, pushes forward.
  KernelFn as_data_kernel() const;
};

NeutraKernel neutra_mala(const TargetDistribution& target, MapPtr map, double step_size);
NeutraKernel neutra_hmc(const TargetDistribution& target, MapPtr map, double step_size,
                        int n_leapfrog);
NeutraKernel neutra_ess(const TargetDistribution& target, MapPtr map, double prior_sigma);

/// flow-MCMC kernels: proposal is the push-forward of the base through map.
KernelFn flow_imh(const TargetDistribution& target, const TargetDistribution& base, MapPtr map);
KernelFn flow_isir(const TargetDistribution& target, const TargetDistribution& base, MapPtr map,
                   int n_proposals);

/// neutra-flow-MCMC: one latent i-SIR step (global) followed by n_local MALA
/// steps (local), all against the push-backward density; results mapped
/// forward. `accepted` reports the i-SIR move.
KernelFn neutraflow_kernel(const TargetDistribution& target, const TargetDistribution& base,
                           MapPtr map, int n_proposals, int n_local, double step_size);

}  // namespace flowmc
