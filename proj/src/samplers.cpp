#include "flowmc/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace flowmc {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

WeightedBatch importance_sample(const TargetDistribution& target,
                                const TargetDistribution& proposal, int n, RngStream& rng) {
  if (n <= 0) throw std::invalid_argument("importance_sample: n must be positive");
  WeightedBatch batch;
  batch.samples = proposal.sample(rng, n);
  batch.log_weights.resize(n);
  for (int i = 0; i < n; ++i) {
    const Vector x = batch.samples.row(i).transpose();
    batch.log_weights[i] = target.logpdf(x) - proposal.logpdf(x);
  }
  return batch;
}

Vector normalized_weights(const Vector& log_weights) {
  const double m = log_weights.maxCoeff();
  if (!std::isfinite(m)) throw std::runtime_error("all importance weights are zero");
  Vector w = (log_weights.array() - m).exp();
  return w / w.sum();
}

double participation_ratio(const Vector& log_weights) {
  const double hi = log_weights.maxCoeff();
  if (!std::isfinite(hi)) return 0.0;
  // shifted raw weights keep equal inputs exactly equal, so the ratio is
  // exactly one in the perfect-proposal case
  const Eigen::ArrayXd w = (log_weights.array() - hi).exp();
  const double s = w.sum();
  return s * s / (static_cast<double>(w.size()) * w.square().sum());
}

Vector snis_estimate(const WeightedBatch& batch,
                     const std::function<Vector(const Vector&)>& f) {
  const Vector w = normalized_weights(batch.log_weights);
  Vector acc;
  for (int i = 0; i < batch.samples.rows(); ++i) {
    const Vector fx = f(batch.samples.row(i).transpose());
    if (acc.size() == 0) acc = Vector::Zero(fx.size());
    acc += w[i] * fx;
  }
  return acc;
}

Matrix resample(const WeightedBatch& batch, int n, RngStream& rng) {
  const Vector w = normalized_weights(batch.log_weights);
  Vector cdf(w.size());
  double run = 0.0;
  for (int i = 0; i < w.size(); ++i) cdf[i] = (run += w[i]);
  Matrix out(n, batch.samples.cols());
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform() * run;
    int lo = 0, hi = static_cast<int>(w.size()) - 1;
    while (lo < hi) {
      const int mid = (lo + hi) / 2;
      if (cdf[mid] < u)
        lo = mid + 1;
      else
        hi = mid;
    }
    out.row(i) = batch.samples.row(lo);
  }
  return out;
}

ChainState make_state(const TargetDistribution& target, const Vector& x) {
  return ChainState{x, target.logpdf(x)};
}

StepResult imh_step(const ChainState& state, const TargetDistribution& target,
                    const TargetDistribution& proposal, RngStream& rng) {
  const Vector y = proposal.sample(rng);
  const double log_w_y = target.logpdf(y) - proposal.logpdf(y);
  const double log_w_x = state.log_target - proposal.logpdf(state.x);
  bool accept;
  if (log_w_y == kNegInf) {
    accept = false;  // covers the -inf vs -inf case: never accept an undefined ratio
  } else if (log_w_x == kNegInf) {
    accept = true;
  } else {
    const double log_acc = log_w_y - log_w_x;
    // a log-ratio of zero up to rounding is a sure accept
    accept = log_acc >= -1e-9 || std::log(rng.uniform()) < log_acc;
  }
  if (accept) return {ChainState{y, target.logpdf(y)}, true};
  return {state, false};
}

StepResult isir_step(const ChainState& state, const TargetDistribution& target,
                     const TargetDistribution& proposal, int n_proposals, RngStream& rng) {
  if (n_proposals < 2) throw std::invalid_argument("isir_step: need at least 2 slots");
  std::vector<Vector> candidates(n_proposals);
  Vector log_w(n_proposals);
  candidates[0] = state.x;
  log_w[0] = state.log_target - proposal.logpdf(state.x);
  std::vector<double> log_targets(n_proposals);
  log_targets[0] = state.log_target;
  for (int i = 1; i < n_proposals; ++i) {
    candidates[i] = proposal.sample(rng);
    log_targets[i] = target.logpdf(candidates[i]);
    log_w[i] = log_targets[i] - proposal.logpdf(candidates[i]);
  }
  // Gumbel-max draw from the normalized weights; -inf entries never win.
  int best = 0;
  double best_score = kNegInf;
  for (int i = 0; i < n_proposals; ++i) {
    if (log_w[i] == kNegInf) continue;
    const double g = -std::log(-std::log(rng.uniform()));
    const double score = log_w[i] + g;
    if (score > best_score) {
      best_score = score;
      best = i;
    }
  }
  if (best_score == kNegInf) return {state, false};  // every weight vanished
  return {ChainState{candidates[best], log_targets[best]}, best != 0};
}

StepResult mala_step(const ChainState& state, const TargetDistribution& target, double step_size,
                     RngStream& rng) {
  const double h = step_size;
  const Vector gx = target.grad_logpdf(state.x);
  const Vector mean_fwd = state.x + h * gx;
  const Vector y = mean_fwd + std::sqrt(2.0 * h) * rng.normal_vector(state.x.size());
  const double log_pi_y = target.logpdf(y);
  if (!std::isfinite(log_pi_y)) return {state, false};
  const Vector gy = target.grad_logpdf(y);
  const Vector mean_bwd = y + h * gy;
  const double log_q_fwd = -(y - mean_fwd).squaredNorm() / (4.0 * h);
  const double log_q_bwd = -(state.x - mean_bwd).squaredNorm() / (4.0 * h);
  const double log_acc = log_pi_y + log_q_bwd - state.log_target - log_q_fwd;
  if (std::isfinite(log_acc) && std::log(rng.uniform()) < log_acc)
    return {ChainState{y, log_pi_y}, true};
  return {state, false};
}

StepResult hmc_step(const ChainState& state, const TargetDistribution& target, double step_size,
                    int n_leapfrog, RngStream& rng) {
  const Vector p0 = rng.normal_vector(state.x.size());
  Vector x = state.x;
  Vector p = p0;
  Vector g = target.grad_logpdf(x);
  const double h0 = -state.log_target + 0.5 * p0.squaredNorm();
  bool diverged = false;
  p += 0.5 * step_size * g;
  for (int l = 0; l < n_leapfrog; ++l) {
    x += step_size * p;
    if (!x.allFinite()) {
      diverged = true;
      break;
    }
    g = target.grad_logpdf(x);
    if (!g.allFinite()) {
      diverged = true;
      break;
    }
    p += (l + 1 == n_leapfrog ? 0.5 : 1.0) * step_size * g;
  }
  if (!diverged) {
    const double log_pi = target.logpdf(x);
    const double h1 = -log_pi + 0.5 * p.squaredNorm();
    const double delta = h0 - h1;
    if (std::isfinite(delta) && std::abs(delta) < 1e3) {
      if (std::log(rng.uniform()) < delta) return {ChainState{x, log_pi}, true};
      return {state, false};
    }
  }
  return {state, false};
}

StepResult ess_step(const ChainState& state, double prior_sigma,
                    const std::function<double(const Vector&)>& loglik,
                    const TargetDistribution& target, RngStream& rng) {
  const Vector nu = prior_sigma * rng.normal_vector(state.x.size());
  const double log_y = loglik(state.x) + std::log(rng.uniform());
  double theta = 2.0 * M_PI * rng.uniform();
  double lo = theta - 2.0 * M_PI;
  double hi = theta;
  for (int iter = 0; iter < 1000; ++iter) {
    const Vector cand = state.x * std::cos(theta) + nu * std::sin(theta);
    if (loglik(cand) > log_y) return {ChainState{cand, target.logpdf(cand)}, true};
    if (theta < 0.0)
      lo = theta;
    else
      hi = theta;
    theta = lo + (hi - lo) * rng.uniform();
  }
  throw std::runtime_error("ess_step: shrinkage bracket failed to accept in 1000 iterations");
}

double adapt_step_size(double step_size, bool accepted, long t, double target_rate) {
  const double eta = std::pow(static_cast<double>(std::max<long>(t, 1)), -0.6);
  double log_h = std::log(step_size) + eta * ((accepted ? 1.0 : 0.0) - target_rate);
  return std::clamp(std::exp(log_h), 1e-12, 1e3);
}

EnsembleResult run_ensemble(const TargetDistribution& target, const KernelFn& kernel,
                            const InitFn& init, const EnsembleConfig& config) {
  EnsembleResult result;
  result.chains.resize(config.n_chains);
  result.acceptance_rates = Vector::Zero(config.n_chains);
  // Every chain is a pure function of (seed, chain index), so scheduling
  // cannot change the output and the parallel path matches the serial one.
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (config.parallel)
#endif
  for (int c = 0; c < config.n_chains; ++c) {
    RngStream rng(config.seed, static_cast<std::uint64_t>(c));
    ChainState state = make_state(target, init(c, rng));
    Matrix traj(config.n_steps, state.x.size());
    long n_accepted = 0;
    for (int t = 0; t < config.n_steps; ++t) {
      StepResult res = kernel(state, rng);
      state = std::move(res.state);
      n_accepted += res.accepted ? 1 : 0;
      traj.row(t) = state.x.transpose();
    }
    result.chains[c] = std::move(traj);
    result.acceptance_rates[c] = static_cast<double>(n_accepted) / config.n_steps;
  }
  return result;
}

KernelFn NeutraKernel::as_data_kernel() const {
  NeutraKernel self = *this;
  return [self](const ChainState& state, RngStream& rng) {
    const Vector z = self.map->inverse(state.x);
    StepResult res = self.latent_kernel(make_state(self.pushbackward, z), rng);
    // log_target carries the latent push-backward value; callers that need
    // data-space densities must recompute them.
    res.state.x = self.map->forward(res.state.x);
    return res;
  };
}

NeutraKernel neutra_mala(const TargetDistribution& target, MapPtr map, double step_size) {
  NeutraKernel k;
  k.map = map;
  k.pushbackward = push_backward_density(target, map);
  TargetDistribution pb = k.pushbackward;
  k.latent_kernel = [pb, step_size](const ChainState& s, RngStream& rng) {
    return mala_step(s, pb, step_size, rng);
  };
  return k;
}

NeutraKernel neutra_hmc(const TargetDistribution& target, MapPtr map, double step_size,
                        int n_leapfrog) {
  NeutraKernel k;
  k.map = map;
  k.pushbackward = push_backward_density(target, map);
  TargetDistribution pb = k.pushbackward;
  k.latent_kernel = [pb, step_size, n_leapfrog](const ChainState& s, RngStream& rng) {
    return hmc_step(s, pb, step_size, n_leapfrog, rng);
  };
  return k;
}

NeutraKernel neutra_ess(const TargetDistribution& target, MapPtr map, double prior_sigma) {
  NeutraKernel k;
  k.map = map;
  k.pushbackward = push_backward_density(target, map);
  TargetDistribution pb = k.pushbackward;
  const int d = pb.dim();
  const double log_prior_const = -0.5 * d * std::log(2.0 * M_PI * prior_sigma * prior_sigma);
  auto loglik = [pb, prior_sigma, log_prior_const](const Vector& z) {
    const double log_prior = log_prior_const - 0.5 * z.squaredNorm() / (prior_sigma * prior_sigma);
    return pb.logpdf(z) - log_prior;
  };
  k.latent_kernel = [pb, prior_sigma, loglik](const ChainState& s, RngStream& rng) {
    return ess_step(s, prior_sigma, loglik, pb, rng);
  };
  return k;
}

KernelFn flow_imh(const TargetDistribution& target, const TargetDistribution& base, MapPtr map) {
  TargetDistribution proposal = push_forward_distribution(base, map);
  return [target, proposal](const ChainState& s, RngStream& rng) {
    return imh_step(s, target, proposal, rng);
  };
}

KernelFn flow_isir(const TargetDistribution& target, const TargetDistribution& base, MapPtr map,
                   int n_proposals) {
  TargetDistribution proposal = push_forward_distribution(base, map);
  return [target, proposal, n_proposals](const ChainState& s, RngStream& rng) {
    return isir_step(s, target, proposal, n_proposals, rng);
  };
}

KernelFn neutraflow_kernel(const TargetDistribution& target, const TargetDistribution& base,
                           MapPtr map, int n_proposals, int n_local, double step_size) {
  TargetDistribution pushbackward = push_backward_density(target, map);
  TargetDistribution proposal = push_forward_distribution(base, map);
  return [target, pushbackward, proposal, map, n_proposals, n_local,
          step_size](const ChainState& s, RngStream& rng) {
    // global move in data space; n_local = 0 reduces to plain flow i-SIR
    StepResult global = isir_step(s, target, proposal, n_proposals, rng);
    if (n_local == 0) return global;
    ChainState cur = make_state(pushbackward, map->inverse(global.state.x));
    for (int i = 0; i < n_local; ++i) cur = mala_step(cur, pushbackward, step_size, rng).state;
    const Vector x = map->forward(cur.x);
    return StepResult{ChainState{x, target.logpdf(x)}, global.accepted};
  };
}

}  // namespace flowmc
