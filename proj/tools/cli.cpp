// flowmc command-line driver: experiment runner plus small inspection tools.
#include <cstdio>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "flowmc/metrics.hpp"
#include "flowmc/neuralflow.hpp"
#include "flowmc/runner.hpp"
#include "flowmc/samplers.hpp"
#include "flowmc/theory.hpp"
#include "flowmc/transport.hpp"

namespace {

using namespace flowmc;

int cmd_run(const std::string& config_path) {
  ExperimentConfig config = load_config(config_path);
  std::vector<ResultRow> rows = run_experiment(config);
  std::filesystem::create_directories(config.output_dir);
  const std::string stem = config.output_dir + "/" + config.experiment;
  emit_csv(rows, stem + ".csv");
  emit_json(rows, config, stem + ".json");
  std::cout << "wrote " << rows.size() << " rows to " << stem << ".csv\n";
  return 0;
}

MapPtr build_map(const std::string& name, double a, double b, double alpha, double t,
                 double sigma, double sigma_tilde, int dim, const std::string& flow_file) {
  if (!flow_file.empty()) return std::make_shared<CouplingFlow>(CouplingFlow::load(flow_file));
  if (name == "identity") return identity_map(dim);
  if (name == "interpolated") {
    IllConditionedGaussianSpec spec;
    spec.dim = dim;
    return interpolated_gaussian_flow(spec, t);
  }
  if (name == "funnel") return funnel_flow(a, b, alpha, dim);
  if (name == "funnel-beta") return funnel_flow_beta(alpha, dim);
  if (name == "banana") return banana_flow(a, b, dim);
  if (name == "bogachev1d") return std::make_shared<Bogachev1DMap>(a, sigma, sigma_tilde);
  if (name == "bogachev2d") return std::make_shared<Bogachev2DMap>(a, sigma, sigma_tilde);
  if (name == "smoothed-bogachev")
    return std::make_shared<SmoothedBogachev1DMap>(a, sigma, sigma_tilde);
  throw CLI::ValidationError("unknown map: " + name);
}

int cmd_dump_map(const MapPtr& map, double lo, double hi, int n, const std::string& out_path) {
  FILE* out = out_path.empty() ? stdout : std::fopen(out_path.c_str(), "w");
  if (!out) {
    std::cerr << "cannot open " << out_path << "\n";
    return 1;
  }
  const int d = map->dim();
  for (int j = 0; j < d; ++j) std::fprintf(out, "z%d,", j + 1);
  for (int j = 0; j < d; ++j) std::fprintf(out, "x%d,", j + 1);
  std::fprintf(out, "log_det\n");
  for (int i = 0; i < n; ++i) {
    // grid along the first coordinate, remaining coordinates at zero
    Vector z = Vector::Zero(d);
    z[0] = lo + (hi - lo) * i / (n - 1);
    const Vector x = map->forward(z);
    for (int j = 0; j < d; ++j) std::fprintf(out, "%.17g,", z[j]);
    for (int j = 0; j < d; ++j) std::fprintf(out, "%.17g,", x[j]);
    std::fprintf(out, "%.17g\n", map->log_det_forward(z));
  }
  if (out != stdout) std::fclose(out);
  return 0;
}

int cmd_bound_calc(const BoundInputs& in, int dim, double sigma, const std::string& csv_path) {
  validate(in);
  const double psi = psi_isoperimetry(in.m);
  const double phi = conductance_lower_bound(in);
  const double lovasz = lovasz_mixing_time(in);
  const double direct = imh_mixing_bound(in);
  const bool cond = check_theorem_41_condition(in.c_r, in.m);
  const double radius = radius_R(sigma, in.m, in.epsilon, in.beta, dim);
  struct Entry {
    const char* key;
    double value;
  } entries[] = {
      {"psi", psi},
      {"conductance_lower_bound", phi},
      {"lovasz_mixing_time", lovasz},
      {"imh_mixing_bound", direct},
      {"condition_ok", cond ? 1.0 : 0.0},
      {"radius_R", radius},
      {"lambda_scaling", lambda_scaling(dim)},
  };
  for (const auto& e : entries) std::printf("%-26s %.17g\n", e.key, e.value);
  if (!csv_path.empty()) {
    FILE* out = std::fopen(csv_path.c_str(), "w");
    if (!out) {
      std::cerr << "cannot open " << csv_path << "\n";
      return 1;
    }
    std::fprintf(out, "key,value\n");
    for (const auto& e : entries) std::fprintf(out, "%s,%.17g\n", e.key, e.value);
    std::fclose(out);
  }
  return 0;
}

int cmd_grad_check(int dim, int n_blocks, int hidden, int batch, std::uint64_t seed,
                   double tol) {
  CouplingFlowConfig fc;
  fc.dim = dim;
  fc.n_blocks = n_blocks;
  fc.hidden = hidden;
  fc.init_weight_std = 0.1;  // exercise nonlinear regions, not just identity
  RngStream rng(seed);
  CouplingFlow flow(fc, rng);
  TargetDistribution target = make_target(Mixture4Spec{dim, 0.5919});
  const Matrix target_batch = target.sample(rng, batch);
  const Matrix base_batch = flow.base().sample(rng, batch);
  const double fwd = grad_check_forward_kl(flow, target_batch);
  const double rev = grad_check_reverse_kl(flow, target, base_batch);
  std::printf("forward-KL max relative gradient error: %.3e\n", fwd);
  std::printf("reverse-KL max relative gradient error: %.3e\n", rev);
  const bool ok = fwd < tol && rev < tol;
  std::printf("%s (tolerance %.1e)\n", ok ? "PASS" : "FAIL", tol);
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"transport-map-enhanced samplers: experiments and calculators"};
  app.require_subcommand(1);

  std::string config_path;
  auto* run = app.add_subcommand("run", "run an experiment from a JSON config");
  run->add_option("config", config_path, "path to the experiment config")->required();

  auto* dump = app.add_subcommand("dump-map", "tabulate (z, T(z), log|J|) on a grid");
  std::string map_name = "funnel", flow_file, dump_out;
  double a = 3.0, b = 1.0, alpha = 1.0, t = 0.5, sigma = 1.0, sigma_tilde = 1.0;
  double lo = -4.0, hi = 4.0;
  int dim = 2, n_points = 101;
  dump->add_option("--map", map_name,
                   "identity|interpolated|funnel|funnel-beta|banana|bogachev1d|bogachev2d|"
                   "smoothed-bogachev");
  dump->add_option("--flow-file", flow_file, "trained coupling-flow file (overrides --map)");
  dump->add_option("--a", a);
  dump->add_option("--b", b);
  dump->add_option("--alpha", alpha, "alpha (funnel) or beta (funnel-beta)");
  dump->add_option("--t", t, "interpolation parameter");
  dump->add_option("--sigma", sigma);
  dump->add_option("--sigma-tilde", sigma_tilde);
  dump->add_option("--dim", dim);
  dump->add_option("--lo", lo);
  dump->add_option("--hi", hi);
  dump->add_option("--n", n_points);
  dump->add_option("--out", dump_out, "output CSV (default stdout)");

  auto* bound = app.add_subcommand("bound-calc", "mixing-time bound calculators");
  BoundInputs in;
  int bound_dim = 1;
  double bound_sigma = 1.0;
  std::string bound_csv;
  bound->add_option("--m", in.m, "strong log-concavity constant");
  bound->add_option("--beta", in.beta, "warm-start constant");
  bound->add_option("--epsilon", in.epsilon, "TV accuracy");
  bound->add_option("--c-r", in.c_r, "local weight-oscillation constant");
  bound->add_option("--alpha", in.alpha, "s-conductance split point");
  bound->add_option("--dim", bound_dim);
  bound->add_option("--sigma", bound_sigma, "proposal std for radius_R");
  bound->add_option("--csv", bound_csv, "also write a key,value CSV");

  auto* gc = app.add_subcommand("grad-check", "finite-difference check of the flow gradients");
  int gc_dim = 2, gc_blocks = 2, gc_hidden = 8, gc_batch = 16;
  std::uint64_t gc_seed = 0;
  double gc_tol = 1e-4;
  gc->add_option("--dim", gc_dim);
  gc->add_option("--blocks", gc_blocks);
  gc->add_option("--hidden", gc_hidden);
  gc->add_option("--batch", gc_batch);
  gc->add_option("--seed", gc_seed);
  gc->add_option("--tol", gc_tol);

  auto* le = app.add_subcommand("list-experiments", "print known experiment ids");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path);
    if (dump->parsed())
      return cmd_dump_map(
          build_map(map_name, a, b, alpha, t, sigma, sigma_tilde, dim, flow_file), lo, hi,
          n_points, dump_out);
    if (bound->parsed()) return cmd_bound_calc(in, bound_dim, bound_sigma, bound_csv);
    if (gc->parsed()) return cmd_grad_check(gc_dim, gc_blocks, gc_hidden, gc_batch, gc_seed,
                                            gc_tol);
    if (le->parsed()) {
      for (const auto& e : flowmc::known_experiments()) std::cout << e << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
