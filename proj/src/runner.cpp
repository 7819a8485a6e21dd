#include "flowmc/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "flowmc/metrics.hpp"
#include "flowmc/neuralflow.hpp"
#include "flowmc/samplers.hpp"
#include "flowmc/theory.hpp"
#include "flowmc/transport.hpp"

namespace flowmc {

namespace {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

std::string fmt_value(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_param(const std::string& name, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s=%g", name.c_str(), v);
  return buf;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t cell_seed(const ExperimentConfig& config, const std::string& tag) {
  return config.seed ^ fnv1a(tag);
}

struct Cell {
  std::vector<Matrix> kept;  // post-warmup trajectories, one per chain
  Matrix pooled;
  double mean_acceptance = 0.0;
};

Cell run_cell(const TargetDistribution& target, const KernelFn& kernel, const InitFn& init,
              const ExperimentConfig& config, std::uint64_t seed) {
  EnsembleConfig ec;
  ec.n_chains = config.n_chains;
  ec.n_steps = config.n_steps;
  ec.seed = seed;
  ec.parallel = config.parallel;
  EnsembleResult res = run_ensemble(target, kernel, init, ec);
  const int discard = (config.n_steps + 1) / 2;
  const int keep = config.n_steps - discard;
  Cell cell;
  cell.pooled.resize(static_cast<long>(keep) * config.n_chains, target.dim());
  long row = 0;
  for (auto& c : res.chains) {
    Matrix k = c.bottomRows(keep);
    cell.pooled.middleRows(row, keep) = k;
    row += keep;
    cell.kept.push_back(std::move(k));
  }
  cell.mean_acceptance = res.acceptance_rates.mean();
  return cell;
}

Matrix map_rows(const TransportMap& map, const Matrix& z,
                bool forward_direction = true) {
  Matrix out(z.rows(), z.cols());
  for (int i = 0; i < z.rows(); ++i)
    out.row(i) = (forward_direction ? map.forward(z.row(i).transpose())
                                    : map.inverse(z.row(i).transpose()))
                     .transpose();
  return out;
}

/// Short adaptive MALA run targeting 75% acceptance; returns the frozen step.
double tune_mala_step(const TargetDistribution& target, const Vector& x0, double step0,
                      int n_steps, RngStream& rng) {
  if (n_steps <= 0) return step0;
  double h = step0;
  ChainState state = make_state(target, x0);
  for (long t = 1; t <= n_steps; ++t) {
    StepResult res = mala_step(state, target, h, rng);
    state = res.state;
    h = adapt_step_size(h, res.accepted, t, 0.75);
  }
  return h;
}

void add_row(std::vector<ResultRow>& rows, const ExperimentConfig& config,
             const std::string& sampler, const std::string& param, const std::string& metric,
             double value, double wall_ms) {
  // wall_ms is zeroed by default so rerunning a config reproduces the CSV
  // byte for byte; set record_wall_ms to keep the measured timings.
  rows.push_back({config.experiment, sampler, param, metric, value, config.seed,
                  config.record_wall_ms ? wall_ms : 0.0});
}

SlicedConfig sliced_config(const ExperimentConfig& config) {
  SlicedConfig sc;
  sc.seed = config.seed;
  sc.parallel = config.parallel;
  return sc;
}

std::vector<std::string> samplers_or(const ExperimentConfig& config,
                                     std::vector<std::string> defaults) {
  return config.samplers.empty() ? defaults : config.samplers;
}

bool wants(const std::vector<std::string>& list, const std::string& name) {
  return std::find(list.begin(), list.end(), name) != list.end();
}

int kept_per_chain(const ExperimentConfig& config) {
  return config.n_steps - (config.n_steps + 1) / 2;
}

/// One flow-enhanced sampler cell: runs `sampler` against `target` with the
/// given map and records `score_metric` (on pooled data-space samples) plus
/// diagnostics.
void run_sampler_cell(std::vector<ResultRow>& rows, const ExperimentConfig& config,
                      const std::string& sampler, const std::string& param,
                      const TargetDistribution& target, const TargetDistribution& base,
                      MapPtr map, const Matrix& reference, const std::string& score_metric) {
  const auto t0 = Clock::now();
  const SlicedConfig sc = sliced_config(config);
  const std::uint64_t seed = cell_seed(config, sampler + "/" + param);
  TargetDistribution proposal = push_forward_distribution(base, map);
  InitFn init_from_flow = [proposal](int, RngStream& rng) { return proposal.sample(rng); };
  auto score = [&](const Matrix& pooled) {
    return score_metric == "sliced_ks" ? sliced_ks(pooled, reference, sc)
                                       : sliced_tv(pooled, reference, sc);
  };

  if (sampler == "neural-is") {
    RngStream rng(seed, 0);
    const int n = config.n_chains * kept_per_chain(config);
    WeightedBatch batch = importance_sample(target, proposal, n, rng);
    const double pr = participation_ratio(batch.log_weights);
    const Matrix resampled = resample(batch, n, rng);
    add_row(rows, config, sampler, param, score_metric, score(resampled), ms_since(t0));
    add_row(rows, config, sampler, param, "participation_ratio", pr, ms_since(t0));
    return;
  }

  Cell cell;
  if (sampler == "flow-imh") {
    cell = run_cell(target, flow_imh(target, base, map), init_from_flow, config, seed);
  } else if (sampler == "flow-isir") {
    cell = run_cell(target, flow_isir(target, base, map, config.n_proposals), init_from_flow,
                    config, seed);
  } else if (sampler == "neutra-mala" || sampler == "neutra-ess" || sampler == "neutra-hmc" ||
             sampler == "neutraflow") {
    TargetDistribution pushbackward = push_backward_density(target, map);
    double step = config.step_size;
    if (sampler != "neutra-ess") {
      RngStream tune_rng(seed, 1u << 20);
      step = tune_mala_step(pushbackward, base.sample(tune_rng), config.step_size,
                            config.tune_steps, tune_rng);
    }
    if (sampler == "neutraflow") {
      cell = run_cell(target,
                      neutraflow_kernel(target, base, map, config.n_proposals, config.n_local,
                                        step),
                      init_from_flow, config, seed);
    } else {
      NeutraKernel nk;
      if (sampler == "neutra-mala")
        nk = neutra_mala(target, map, step);
      else if (sampler == "neutra-hmc")
        nk = neutra_hmc(target, map, step, config.n_leapfrog);
      else
        nk = neutra_ess(target, map, 1.0);
      InitFn latent_init = [&base](int, RngStream& rng) { return base.sample(rng); };
      cell = run_cell(nk.pushbackward, nk.latent_kernel, latent_init, config, seed);
      for (auto& c : cell.kept) c = map_rows(*map, c);
      cell.pooled = map_rows(*map, cell.pooled);
    }
  } else {
    throw std::invalid_argument("unknown sampler: " + sampler);
  }
  add_row(rows, config, sampler, param, score_metric, score(cell.pooled), ms_since(t0));
  add_row(rows, config, sampler, param, "acceptance", cell.mean_acceptance, ms_since(t0));
}

}  // namespace

std::vector<ResultRow> run_three_flows(const ExperimentConfig& config) {
  IllConditionedGaussianSpec spec;
  spec.dim = config.dim;
  TargetDistribution target = make_target(spec);
  TargetDistribution base = isotropic_gaussian(config.dim, 1.0);
  std::vector<double> grid = config.t_grid;
  if (grid.empty())
    for (int i = 0; i <= 8; ++i) grid.push_back(i / 8.0);
  const auto samplers = samplers_or(
      config, {"neural-is", "flow-imh", "flow-isir", "neutra-mala", "neutra-ess", "neutraflow"});

  RngStream ref_rng(config.seed, fnv1a("reference"));
  const int n_eval = config.n_chains * kept_per_chain(config);
  const Matrix reference = target.sample(ref_rng, config.reference_factor * n_eval);

  std::vector<ResultRow> rows;
  for (double t : grid) {
    MapPtr map = interpolated_gaussian_flow(spec, t);
    for (const auto& s : samplers)
      run_sampler_cell(rows, config, s, fmt_param("t", t), target, base, map, reference,
                       "sliced_tv");
  }
  sort_rows(rows);
  return rows;
}

std::vector<ResultRow> run_funnel_sweep(const ExperimentConfig& config) {
  FunnelSpec fs;
  fs.dim = config.dim;
  TargetDistribution target = make_target(fs);
  TargetDistribution base = isotropic_gaussian(config.dim, 1.0);
  std::vector<double> grid = config.beta_grid;
  if (grid.empty()) grid = {0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0};
  const auto samplers = samplers_or(
      config, {"neural-is", "flow-imh", "flow-isir", "neutra-mala", "neutra-ess", "neutraflow"});

  RngStream ref_rng(config.seed, fnv1a("reference"));
  const int n_eval = config.n_chains * kept_per_chain(config);
  const Matrix reference = target.sample(ref_rng, config.reference_factor * n_eval);

  std::vector<ResultRow> rows;
  for (double beta : grid) {
    MapPtr map = funnel_flow_beta(beta, config.dim);
    for (const auto& s : samplers)
      run_sampler_cell(rows, config, s, fmt_param("beta", beta), target, base, map, reference,
                       "sliced_ks");
  }
  sort_rows(rows);
  return rows;
}

namespace {

/// Forward-KL-train a coupling flow on exact target samples; empty optional
/// on divergence.
bool train_mixture_flow(const ExperimentConfig& config, const TargetDistribution& target,
                        std::uint64_t seed, std::shared_ptr<CouplingFlow>* out) {
  CouplingFlowConfig fc;
  fc.dim = target.dim();
  fc.n_blocks = config.n_blocks;
  fc.hidden = config.hidden;
  RngStream rng(seed, fnv1a("train"));
  auto flow = std::make_shared<CouplingFlow>(fc, rng);
  const Matrix pool = target.sample(rng, 4096);
  TrainingConfig tc;
  tc.batch_size = config.train_batch;
  tc.iterations = config.train_iterations;
  tc.learning_rate = config.learning_rate;
  TrainingResult res = train_forward_kl(*flow, pool, tc, rng);
  if (res.diverged) return false;
  *out = flow;
  return true;
}

}  // namespace

std::vector<ResultRow> run_mixture_modes(const ExperimentConfig& config) {
  std::vector<int> dims = config.dim_grid;
  if (dims.empty()) dims = {2, 4, 8, 16};
  const auto samplers =
      samplers_or(config, {"flow-isir", "neutra-ess", "neutra-mala", "neutraflow"});
  std::vector<ResultRow> rows;
  for (int d : dims) {
    const std::string param = fmt_param("d", d);
    Mixture4Spec ms;
    ms.dim = d;
    ms.a = config.mixture_a;
    TargetDistribution target = make_target(ms);
    TargetDistribution base = isotropic_gaussian(d, 1.0);

    MapPtr map;
    if (!config.flow_file.empty()) {
      map = std::make_shared<CouplingFlow>(CouplingFlow::load(config.flow_file));
    } else {
      const auto t0 = Clock::now();
      std::shared_ptr<CouplingFlow> flow;
      if (!train_mixture_flow(config, target, cell_seed(config, param), &flow)) {
        add_row(rows, config, "training", param, "training_diverged", 1.0, ms_since(t0));
        continue;
      }
      map = flow;
    }

    TargetDistribution proposal = push_forward_distribution(base, map);
    TargetDistribution pushbackward = push_backward_density(target, map);
    InitFn init_from_flow = [proposal](int, RngStream& rng) { return proposal.sample(rng); };
    InitFn latent_init = [&base](int, RngStream& rng) { return base.sample(rng); };

    for (const auto& s : samplers) {
      const auto t0 = Clock::now();
      const std::uint64_t seed = cell_seed(config, s + "/" + param);
      Cell cell;
      if (s == "flow-isir") {
        cell = run_cell(target, flow_isir(target, base, map, config.n_proposals), init_from_flow,
                        config, seed);
      } else if (s == "neutraflow") {
        RngStream tune_rng(seed, 1u << 20);
        const double step = tune_mala_step(pushbackward, base.sample(tune_rng), config.step_size,
                                           config.tune_steps, tune_rng);
        cell = run_cell(target,
                        neutraflow_kernel(target, base, map, config.n_proposals, config.n_local,
                                          step),
                        init_from_flow, config, seed);
      } else {
        NeutraKernel nk;
        if (s == "neutra-mala") {
          RngStream tune_rng(seed, 1u << 20);
          const double step = tune_mala_step(pushbackward, base.sample(tune_rng),
                                             config.step_size, config.tune_steps, tune_rng);
          nk = neutra_mala(target, map, step);
        } else if (s == "neutra-ess") {
          nk = neutra_ess(target, map, 1.0);
        } else {
          throw std::invalid_argument("unknown sampler: " + s);
        }
        cell = run_cell(nk.pushbackward, nk.latent_kernel, latent_init, config, seed);
        for (auto& c : cell.kept) c = map_rows(*map, c);
      }
      add_row(rows, config, s, param, "mode_histogram_mse",
              mode_histogram_mse(cell.kept, target.modes()), ms_since(t0));
      add_row(rows, config, s, param, "acceptance", cell.mean_acceptance, ms_since(t0));
    }
  }
  sort_rows(rows);
  return rows;
}

std::vector<ResultRow> run_banana_scaling(const ExperimentConfig& config) {
  std::vector<int> dims = config.dim_grid;
  if (dims.empty()) dims = {2, 4, 8, 16, 32};
  std::vector<double> corruption = config.corruption_grid;
  if (corruption.empty()) corruption = {1.0, 1.2, 1.5};
  const auto samplers = samplers_or(config, {"neural-is", "flow-imh", "neutra-mala"});

  std::vector<ResultRow> rows;
  for (int d : dims) {
    BananaSpec bs;
    bs.dim = d;
    TargetDistribution target = make_target(bs);
    TargetDistribution base = isotropic_gaussian(d, 1.0);
    RngStream ref_rng(config.seed, fnv1a("reference") ^ static_cast<std::uint64_t>(d));
    const int n_eval = config.n_chains * kept_per_chain(config);
    const Matrix reference = target.sample(ref_rng, config.reference_factor * n_eval);
    for (double c : corruption) {
      // corrupted flow: curvature scale perturbed by the factor c
      MapPtr map = banana_flow(bs.a * c, bs.b, d);
      char tag[64];
      std::snprintf(tag, sizeof(tag), "d=%d,c=%g", d, c);
      for (const auto& s : samplers)
        run_sampler_cell(rows, config, s, tag, target, base, map, reference, "sliced_tv");
    }
  }
  sort_rows(rows);
  return rows;
}

std::vector<ResultRow> run_two_mode_1d(const ExperimentConfig& config) {
  std::vector<double> gaps = config.gap_grid;
  if (gaps.empty()) gaps = {1.0, 2.0, 4.0, 8.0, 12.0};
  const double sigma = config.two_mode_sigma;
  const double eps = 0.08;
  std::vector<ResultRow> rows;
  for (double gap : gaps) {
    const double a = gap / 2.0;
    TwoMode1DSpec ts;
    ts.a = a;
    ts.sigma = sigma;
    TargetDistribution target = make_target(ts);
    auto logpdf = [target](double x) {
      return target.logpdf(Vector::Constant(1, x));
    };
    auto grad = [target](double x) {
      return target.grad_logpdf(Vector::Constant(1, x))[0];
    };
    const double prop_var = sigma * sigma + a * a;
    auto prop_logpdf = [prop_var](double x) { return -0.5 * x * x / prop_var; };

    GridChainConfig gc;
    gc.lo = -(a + 6.0 * sigma);
    gc.hi = a + 6.0 * sigma;
    gc.left_half_start = true;  // chain law starts confined to the left mode
    const std::string param = fmt_param("L", gap);

    {
      const auto t0 = Clock::now();
      gc.n_steps = config.n_steps;
      const auto curve = imh_tv_curve(logpdf, prop_logpdf, gc);
      add_row(rows, config, "gauss-imh", param, "steps_to_eps",
              static_cast<double>(steps_to_tv(curve, eps)), ms_since(t0));
      add_row(rows, config, "gauss-imh", param, "tv_final", curve.back(), ms_since(t0));
    }
    {
      const auto t0 = Clock::now();
      gc.n_steps = config.n_steps;
      const auto curve = mala_tv_curve(logpdf, grad, config.step_size, gc);
      add_row(rows, config, "mala", param, "steps_to_eps",
              static_cast<double>(steps_to_tv(curve, eps)), ms_since(t0));
      add_row(rows, config, "mala", param, "tv_final", curve.back(), ms_since(t0));
    }
  }
  sort_rows(rows);
  return rows;
}

namespace {

/// Per-mode ground truth for phi4: MALA that rejects proposals crossing to
/// the other mode.
KernelFn restricted_mala(const TargetDistribution& target, const std::vector<Vector>& modes,
                         int mode_index, double step) {
  return [target, modes, mode_index, step](const ChainState& s, RngStream& rng) {
    StepResult res = mala_step(s, target, step, rng);
    if (res.accepted && closest_mode(modes, res.state.x) != mode_index) return StepResult{s, false};
    return res;
  };
}

int count_mode_switches(const std::vector<Matrix>& chains, const std::vector<Vector>& modes) {
  int switches = 0;
  for (const auto& c : chains) {
    int prev = closest_mode(modes, c.row(0).transpose());
    for (int i = 1; i < c.rows(); ++i) {
      const int cur = closest_mode(modes, c.row(i).transpose());
      if (cur != prev) ++switches;
      prev = cur;
    }
  }
  return switches;
}

}  // namespace

std::vector<ResultRow> run_phi4(const ExperimentConfig& config) {
  Phi4Spec ps;
  ps.dim = config.dim;
  TargetDistribution target = make_target(ps);
  TargetDistribution base = phi4_base(ps);
  const auto& modes = target.modes();
  std::vector<ResultRow> rows;

  // per-mode ground truth: restricted MALA, 10x oversampled
  RngStream gt_rng(config.seed, fnv1a("groundtruth"));
  const double gt_step = tune_mala_step(target, modes[0], config.step_size, config.tune_steps,
                                        gt_rng);
  const int n_eval = config.n_chains * kept_per_chain(config);
  ExperimentConfig gt_config = config;
  gt_config.n_chains = std::max(4, config.n_chains / 4);
  gt_config.n_steps =
      2 * ((config.reference_factor * n_eval) / gt_config.n_chains + 1);
  std::vector<Matrix> gt_per_mode;
  for (int m = 0; m < 2; ++m) {
    InitFn init = [&modes, m](int, RngStream&) { return modes[m]; };
    Cell cell = run_cell(target, restricted_mala(target, modes, m, gt_step), init, gt_config,
                         cell_seed(config, "gt" + std::to_string(m)));
    gt_per_mode.push_back(cell.pooled);
  }

  // flow trained by forward KL on the symmetrized ground truth, colored base
  const auto t_train = Clock::now();
  CouplingFlowConfig fc;
  fc.dim = config.dim;
  fc.n_blocks = config.n_blocks;
  fc.hidden = config.hidden;
  RngStream train_rng(config.seed, fnv1a("train"));
  auto flow = std::make_shared<CouplingFlow>(fc, train_rng);
  flow->set_base(base);
  Matrix pool(gt_per_mode[0].rows() + gt_per_mode[1].rows(), config.dim);
  pool << gt_per_mode[0], gt_per_mode[1];
  TrainingConfig tc;
  tc.batch_size = config.train_batch;
  tc.iterations = config.train_iterations;
  tc.learning_rate = config.learning_rate;
  TrainingResult trained = train_forward_kl(*flow, pool, tc, train_rng);
  add_row(rows, config, "training", "d=" + std::to_string(config.dim), "final_loss",
          trained.final_loss, ms_since(t_train));
  MapPtr map = flow;

  TargetDistribution pushbackward = push_backward_density(target, map);
  const SlicedConfig sc = sliced_config(config);
  const std::string param = "d=" + std::to_string(config.dim);
  const auto samplers = samplers_or(config, {"neutra-mala", "flow-isir"});

  if (wants(samplers, "neutra-mala")) {
    // single-mode initialization: every chain starts at mode 0
    const auto t0 = Clock::now();
    const std::uint64_t seed = cell_seed(config, "neutra-mala/" + param);
    RngStream tune_rng(seed, 1u << 20);
    const Vector z0 = map->inverse(modes[0]);
    const double step =
        tune_mala_step(pushbackward, z0, config.step_size, config.tune_steps, tune_rng);
    NeutraKernel nk = neutra_mala(target, map, step);
    InitFn init = [z0](int, RngStream&) { return z0; };
    Cell cell = run_cell(nk.pushbackward, nk.latent_kernel, init, config, seed);
    for (auto& c : cell.kept) c = map_rows(*map, c);
    cell.pooled = map_rows(*map, cell.pooled);
    add_row(rows, config, "neutra-mala", param, "mode_switches",
            static_cast<double>(count_mode_switches(cell.kept, modes)), ms_since(t0));
    const Vector frac = mode_histogram(cell.pooled, modes);
    add_row(rows, config, "neutra-mala", param, "mode0_fraction", frac[0], ms_since(t0));
    add_row(rows, config, "neutra-mala", param, "mode1_fraction", frac[1], ms_since(t0));
    add_row(rows, config, "neutra-mala", param, "acceptance", cell.mean_acceptance, ms_since(t0));
  }

  if (wants(samplers, "flow-isir")) {
    const auto t0 = Clock::now();
    const std::uint64_t seed = cell_seed(config, "flow-isir/" + param);
    InitFn init = [&modes](int, RngStream&) { return modes[0]; };
    Cell cell = run_cell(target, flow_isir(target, base, map, config.n_proposals), init, config,
                         seed);
    const Vector frac = mode_histogram(cell.pooled, modes);
    add_row(rows, config, "flow-isir", param, "mode0_fraction", frac[0], ms_since(t0));
    add_row(rows, config, "flow-isir", param, "mode1_fraction", frac[1], ms_since(t0));
    add_row(rows, config, "flow-isir", param, "acceptance", cell.mean_acceptance, ms_since(t0));
    // within-mode quality against the restricted ground truth
    std::vector<int> in_mode0;
    for (int i = 0; i < cell.pooled.rows(); ++i)
      if (closest_mode(modes, cell.pooled.row(i).transpose()) == 0) in_mode0.push_back(i);
    if (in_mode0.size() >= 16) {
      Matrix sub(in_mode0.size(), config.dim);
      for (size_t i = 0; i < in_mode0.size(); ++i) sub.row(i) = cell.pooled.row(in_mode0[i]);
      add_row(rows, config, "flow-isir", param, "within_mode_sliced_tv",
              sliced_tv(sub, gt_per_mode[0], sc), ms_since(t0));
    }
  }
  sort_rows(rows);
  return rows;
}

std::vector<ResultRow> run_bound_study(const ExperimentConfig& config) {
  std::vector<double> lambdas = config.lambda_grid;
  if (lambdas.empty()) lambdas = {-0.01, -0.005, -0.001, 0.001, 0.005, 0.01};
  const double eps = 0.5, beta = 2.0, m = 1.0;
  std::vector<ResultRow> rows;
  for (double lambda : lambdas) {
    const auto t0 = Clock::now();
    const std::string param = fmt_param("lambda", lambda);
    const double radius = radius_R(1.0, m, eps, beta, 1);
    const double c_r = c_r_gaussian(radius, 1, lambda);
    const bool ok = check_theorem_41_condition(c_r, m);
    BoundInputs in;
    in.m = m;
    in.beta = beta;
    in.epsilon = eps;
    in.c_r = c_r;
    const double bound = imh_mixing_bound(in);

    GridChainConfig gc;
    gc.lo = -8.0;
    gc.hi = 8.0;
    gc.n_steps = config.n_steps;
    gc.beta_warm = beta;
    const double s = 1.0 + lambda;
    auto curve = imh_tv_curve([](double x) { return -0.5 * x * x; },
                              [s](double x) { return -0.5 * x * x / (s * s); }, gc);
    const int steps = steps_to_tv(curve, eps);
    add_row(rows, config, "gauss-imh", param, "c_r", c_r, ms_since(t0));
    add_row(rows, config, "gauss-imh", param, "condition_ok", ok ? 1.0 : 0.0, ms_since(t0));
    add_row(rows, config, "gauss-imh", param, "mixing_bound", bound, ms_since(t0));
    add_row(rows, config, "gauss-imh", param, "empirical_steps", static_cast<double>(steps),
            ms_since(t0));
  }
  sort_rows(rows);
  return rows;
}

const std::vector<std::string>& known_experiments() {
  static const std::vector<std::string> kList = {
      "three_flows",  "funnel_sweep", "mixture_modes", "banana_scaling",
      "two_mode_1d",  "phi4",         "bound_study"};
  return kList;
}

std::vector<ResultRow> run_experiment(const ExperimentConfig& config) {
  if (config.experiment == "three_flows") return run_three_flows(config);
  if (config.experiment == "funnel_sweep") return run_funnel_sweep(config);
  if (config.experiment == "mixture_modes") return run_mixture_modes(config);
  if (config.experiment == "banana_scaling") return run_banana_scaling(config);
  if (config.experiment == "two_mode_1d") return run_two_mode_1d(config);
  if (config.experiment == "phi4") return run_phi4(config);
  if (config.experiment == "bound_study") return run_bound_study(config);
  throw std::invalid_argument("unknown experiment: " + config.experiment);
}

// ---------------------------------------------------------------------------
// Config parsing and artifact emission

namespace {

template <typename T>
void read_scalar(const json& j, const char* key, T* out) {
  if (j.contains(key)) *out = j.at(key).get<T>();
}

template <typename T>
void read_array(const json& j, const char* key, std::vector<T>* out) {
  if (j.contains(key)) *out = j.at(key).get<std::vector<T>>();
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
  json j = json::parse(json_text);
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  static const std::vector<std::string> kKnown = {
      "experiment",    "dim",           "n_chains",        "n_steps",
      "seed",          "output_dir",    "samplers",        "t_grid",
      "beta_grid",     "dim_grid",      "corruption_grid", "gap_grid",
      "lambda_grid",   "n_proposals",   "n_local",         "n_leapfrog",
      "step_size",     "tune_steps",    "mixture_a",       "two_mode_sigma",
      "reference_factor", "flow_file",  "train_iterations", "train_batch",
      "learning_rate", "hidden",        "n_blocks",        "parallel",
      "record_wall_ms"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(kKnown.begin(), kKnown.end(), it.key()) == kKnown.end())
      throw std::invalid_argument("unknown config key: " + it.key());
  }
  ExperimentConfig c;
  if (!j.contains("experiment")) throw std::invalid_argument("config missing 'experiment'");
  c.experiment = j.at("experiment").get<std::string>();
  if (std::find(known_experiments().begin(), known_experiments().end(), c.experiment) ==
      known_experiments().end())
    throw std::invalid_argument("unknown experiment: " + c.experiment);
  read_scalar(j, "dim", &c.dim);
  read_scalar(j, "n_chains", &c.n_chains);
  read_scalar(j, "n_steps", &c.n_steps);
  read_scalar(j, "seed", &c.seed);
  read_scalar(j, "output_dir", &c.output_dir);
  read_array(j, "samplers", &c.samplers);
  read_array(j, "t_grid", &c.t_grid);
  read_array(j, "beta_grid", &c.beta_grid);
  read_array(j, "dim_grid", &c.dim_grid);
  read_array(j, "corruption_grid", &c.corruption_grid);
  read_array(j, "gap_grid", &c.gap_grid);
  read_array(j, "lambda_grid", &c.lambda_grid);
  read_scalar(j, "n_proposals", &c.n_proposals);
  read_scalar(j, "n_local", &c.n_local);
  read_scalar(j, "n_leapfrog", &c.n_leapfrog);
  read_scalar(j, "step_size", &c.step_size);
  read_scalar(j, "tune_steps", &c.tune_steps);
  read_scalar(j, "mixture_a", &c.mixture_a);
  read_scalar(j, "two_mode_sigma", &c.two_mode_sigma);
  read_scalar(j, "reference_factor", &c.reference_factor);
  read_scalar(j, "flow_file", &c.flow_file);
  read_scalar(j, "train_iterations", &c.train_iterations);
  read_scalar(j, "train_batch", &c.train_batch);
  read_scalar(j, "learning_rate", &c.learning_rate);
  read_scalar(j, "hidden", &c.hidden);
  read_scalar(j, "n_blocks", &c.n_blocks);
  read_scalar(j, "parallel", &c.parallel);
  read_scalar(j, "record_wall_ms", &c.record_wall_ms);
  if (c.n_steps <= 0 || c.n_steps % 2 != 0)
    throw std::invalid_argument("n_steps must be positive and even (half-chain warmup)");
  if (c.output_dir.empty()) c.output_dir = default_output_dir();
  if (!c.flow_file.empty()) {
    std::ifstream probe(c.flow_file);
    if (!probe) throw std::invalid_argument("flow_file does not exist: " + c.flow_file);
  }
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_to_json(const ExperimentConfig& c) {
  json j;
  j["experiment"] = c.experiment;
  j["dim"] = c.dim;
  j["n_chains"] = c.n_chains;
  j["n_steps"] = c.n_steps;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  j["samplers"] = c.samplers;
  j["t_grid"] = c.t_grid;
  j["beta_grid"] = c.beta_grid;
  j["dim_grid"] = c.dim_grid;
  j["corruption_grid"] = c.corruption_grid;
  j["gap_grid"] = c.gap_grid;
  j["lambda_grid"] = c.lambda_grid;
  j["n_proposals"] = c.n_proposals;
  j["n_local"] = c.n_local;
  j["n_leapfrog"] = c.n_leapfrog;
  j["step_size"] = c.step_size;
  j["tune_steps"] = c.tune_steps;
  j["mixture_a"] = c.mixture_a;
  j["two_mode_sigma"] = c.two_mode_sigma;
  j["reference_factor"] = c.reference_factor;
  j["flow_file"] = c.flow_file;
  j["train_iterations"] = c.train_iterations;
  j["train_batch"] = c.train_batch;
  j["learning_rate"] = c.learning_rate;
  j["hidden"] = c.hidden;
  j["n_blocks"] = c.n_blocks;
  j["parallel"] = c.parallel;
  j["record_wall_ms"] = c.record_wall_ms;
  return j.dump(2);
}

void sort_rows(std::vector<ResultRow>& rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
    return std::tie(a.sampler, a.param, a.metric, a.seed) <
           std::tie(b.sampler, b.param, b.metric, b.seed);
  });
}

std::string rows_to_csv(const std::vector<ResultRow>& rows) {
  std::string out = "experiment,sampler,param,metric,value,seed,wall_ms\n";
  for (const auto& r : rows) {
    out += r.experiment + "," + r.sampler + "," + r.param + "," + r.metric + "," +
           fmt_value(r.value) + "," + std::to_string(r.seed) + "," + fmt_value(r.wall_ms) + "\n";
  }
  return out;
}

std::vector<ResultRow> parse_csv(const std::string& text) {
  std::vector<ResultRow> rows;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty CSV");
  if (line != "experiment,sampler,param,metric,value,seed,wall_ms")
    throw std::runtime_error("unexpected CSV header: " + line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
      if (ch == ',') {
        fields.push_back(cur);
        cur.clear();
      } else {
        cur += ch;
      }
    }
    fields.push_back(cur);
    if (fields.size() != 7) throw std::runtime_error("malformed CSV row: " + line);
    ResultRow r;
    r.experiment = fields[0];
    r.sampler = fields[1];
    r.param = fields[2];
    r.metric = fields[3];
    r.value = std::stod(fields[4]);
    r.seed = std::stoull(fields[5]);
    r.wall_ms = std::stod(fields[6]);
    rows.push_back(r);
  }
  return rows;
}

void emit_csv(const std::vector<ResultRow>& rows, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << rows_to_csv(rows);
  if (!out) throw std::runtime_error("write failed: " + path);
}

void emit_json(const std::vector<ResultRow>& rows, const ExperimentConfig& config,
               const std::string& path) {
  json j;
  j["config"] = json::parse(config_to_json(config));
  json arr = json::array();
  for (const auto& r : rows) {
    json row;
    row["experiment"] = r.experiment;
    row["sampler"] = r.sampler;
    row["param"] = r.param;
    row["metric"] = r.metric;
    row["value"] = r.value;
    row["seed"] = r.seed;
    row["wall_ms"] = r.wall_ms;
    arr.push_back(row);
  }
  j["rows"] = arr;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << "\n";
}

std::string default_output_dir() {
  const char* env = std::getenv("FLOWMC_OUTPUT_DIR");
  return env && *env ? env : ".";
}

}  // namespace flowmc
