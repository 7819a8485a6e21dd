#pragma once

#include <string>
#include <vector>

#include "flowmc/distributions.hpp"

namespace flowmc {

struct ResultRow {
  std::string experiment;
  std::string sampler;
  std::string param;   // sweep parameter, e.g. "t=0.5"
  std::string metric;
  double value = 0.0;
  std::uint64_t seed = 0;
  double wall_ms = 0.0;
};

/// Flat, typed configuration record: one JSON object per experiment, scalar
/// or numeric-array values only, unknown keys rejected. The full schema is
/// documented in the README.
struct ExperimentConfig {
  std::string experiment;  // three_flows | funnel_sweep | mixture_modes |
                           // banana_scaling | two_mode_1d | phi4 | bound_study
  int dim = 16;
  int n_chains = 64;
  int n_steps = 1000;  // even; the first half of every chain is discarded
  std::uint64_t seed = 0;
  std::string output_dir;  // default: $FLOWMC_OUTPUT_DIR or "."
  std::vector<std::string> samplers;  // empty: experiment default

  std::vector<double> t_grid;           // three_flows
  std::vector<double> beta_grid;        // funnel_sweep
  std::vector<int> dim_grid;            // mixture_modes / banana_scaling
  std::vector<double> corruption_grid;  // banana_scaling: factor applied to a
  std::vector<double> gap_grid;         // two_mode_1d: mode gaps L
  std::vector<double> lambda_grid;      // bound_study

  int n_proposals = 32;  // i-SIR slots
  int n_local = 5;       // neutraflow local steps
  int n_leapfrog = 5;
  double step_size = 0.05;  // pre-tuned per cell unless tune_steps = 0
  int tune_steps = 400;
  double mixture_a = 0.5919;
  double two_mode_sigma = 1.0;
  int reference_factor = 10;  // reference set oversize (M = factor * N)

  std::string flow_file;  // optional pre-trained coupling flow
  int train_iterations = 1200;
  int train_batch = 256;
  double learning_rate = 5e-3;
  int hidden = 32;
  int n_blocks = 4;

  bool parallel = true;
  /// When false (default), wall_ms is reported as 0 so identical config +
  /// seed reproduces the CSV byte for byte; when true, measured timings are
  /// recorded instead.
  bool record_wall_ms = false;
};

/// Parse a config from JSON text; unknown keys raise std::invalid_argument.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);
/// Resolved config back as canonical JSON (all fields, sorted keys).
std::string config_to_json(const ExperimentConfig& config);

const std::vector<std::string>& known_experiments();

std::vector<ResultRow> run_three_flows(const ExperimentConfig& config);
std::vector<ResultRow> run_funnel_sweep(const ExperimentConfig& config);
std::vector<ResultRow> run_mixture_modes(const ExperimentConfig& config);
std::vector<ResultRow> run_banana_scaling(const ExperimentConfig& config);
std::vector<ResultRow> run_two_mode_1d(const ExperimentConfig& config);
std::vector<ResultRow> run_phi4(const ExperimentConfig& config);
std::vector<ResultRow> run_bound_study(const ExperimentConfig& config);
/// Dispatch on config.experiment; rows come back in canonical order.
std::vector<ResultRow> run_experiment(const ExperimentConfig& config);

/// Canonical ordering: (sampler, param, metric, seed), stable.
void sort_rows(std::vector<ResultRow>& rows);

/// CSV with fixed header experiment,sampler,param,metric,value,seed,wall_ms;
/// floats at 17 significant digits.
std::string rows_to_csv(const std::vector<ResultRow>& rows);
std::vector<ResultRow> parse_csv(const std::string& text);
void emit_csv(const std::vector<ResultRow>& rows, const std::string& path);
/// JSON artifact: rows plus the resolved config for provenance.
void emit_json(const std::vector<ResultRow>& rows, const ExperimentConfig& config,
               const std::string& path);

std::string default_output_dir();

}  // namespace flowmc
