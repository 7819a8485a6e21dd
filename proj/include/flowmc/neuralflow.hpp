#pragma once

#include <vector>

#include "flowmc/transport.hpp"

namespace flowmc {

/// Small dense net: tanh hidden layers, linear output. Forward evaluation
/// records the activations needed for exact reverse-mode differentiation.
struct Mlp {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;

  Mlp() = default;
  Mlp(int in, int hidden, int out, int n_hidden_layers);

  struct Tape {
    Vector input;
    std::vector<Vector> hidden;  // post-tanh activations per hidden layer
  };

  Vector eval(const Vector& x, Tape* tape = nullptr) const;
  /// Accumulates parameter gradients into `grad` and returns dL/dx.
  Vector backprop(const Tape& tape, const Vector& dy, Mlp& grad) const;

  void fill(double value);
  int n_params() const;
};

struct CouplingFlowConfig {
  int dim = 2;
  int n_blocks = 2;
  int hidden = 8;
  int n_hidden_layers = 1;  // "2-layer perceptron": one tanh hidden layer + linear out
  double base_sigma = 1.0;  // ignored when an explicit base is installed
  double init_weight_std = 1e-6;
  double scale_cap_init = 2.0;
};

struct AdamState {
  Vector m, v;
  long step = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  explicit AdamState(int n_params, double lr_in = 1e-3)
      : m(Vector::Zero(n_params)), v(Vector::Zero(n_params)), lr(lr_in) {}

  /// Bias-corrected update, applied in place to `params`.
  void step_update(Vector& params, const Vector& grad);
};

struct TrainingConfig {
  enum class Objective { kForwardKl, kReverseKl };
  Objective objective = Objective::kForwardKl;
  int batch_size = 256;
  int iterations = 1000;
  double learning_rate = 1e-2;
  double lr_decay = 0.5;
  int patience = 100;
  int invertibility_check_every = 500;
};

/// RealNVP-style affine coupling stack with alternating half masks and a
/// learnable per-block cap on the (tanh-squashed) log-scales. Gradients for
/// both KL objectives are computed by hand-rolled reverse mode.
class CouplingFlow : public TransportMap {
 public:
  CouplingFlow(const CouplingFlowConfig& config, RngStream& rng);

  int dim() const override { return config_.dim; }
  Vector forward(const Vector& z) const override;
  Vector inverse(const Vector& x) const override;
  double log_det_forward(const Vector& z) const override;
  double log_det_inverse(const Vector& x) const override;

  /// Forward evaluation that also returns per-block tapes and the log-det.
  struct ForwardResult {
    Vector x;
    double log_det = 0.0;
  };
  ForwardResult forward_checked(const Vector& z) const;

  /// Base distribution (defaults to N(0, base_sigma^2 I)). The base must
  /// carry an analytic gradient for training.
  const TargetDistribution& base() const { return base_; }
  void set_base(TargetDistribution base);

  int n_params() const;
  Vector get_params() const;
  void set_params(const Vector& flat);

  /// Gradient of -1/B sum_i log pushforward(x_i) over the batch rows.
  /// Returns the loss value through `loss` when non-null.
  Vector grad_forward_kl(const Matrix& batch, double* loss = nullptr) const;
  /// Reparameterized reverse-KL gradient at `batch` base draws (one per row).
  Vector grad_reverse_kl(const TargetDistribution& target, const Matrix& base_batch,
                         double* loss = nullptr) const;

  const CouplingFlowConfig& config() const { return config_; }

  void save(const std::string& path) const;
  static CouplingFlow load(const std::string& path);

 private:
  friend struct FlowGradWork;

  struct Block {
    Mlp scale_net;
    Mlp shift_net;
    double cap = 2.0;
    bool even_mask = true;  // even: first half passes through
  };

  std::vector<int> pass_idx(int b) const;
  std::vector<int> trans_idx(int b) const;

  CouplingFlowConfig config_;
  std::vector<Block> blocks_;
  TargetDistribution base_;
};

struct TrainingResult {
  std::vector<double> loss_trace;
  double final_loss = 0.0;
  bool diverged = false;
};

/// Forward-KL training from a fixed pool of target samples (rows); batches
/// are drawn from the pool with the given rng. Plateau scheduler halves the
/// learning rate after `patience` iterations without improvement.
TrainingResult train_forward_kl(CouplingFlow& flow, const Matrix& target_samples,
                                const TrainingConfig& config, RngStream& rng);
/// Reverse-KL (variational) training against an explicit target density.
TrainingResult train_reverse_kl(CouplingFlow& flow, const TargetDistribution& target,
                                const TrainingConfig& config, RngStream& rng);

/// Worst relative mismatch between the analytic gradient and a central
/// finite difference of the loss, over every parameter. O(P) loss
/// evaluations; intended for tests and the grad-check CLI.
double grad_check_forward_kl(CouplingFlow& flow, const Matrix& batch, double fd_eps = 1e-5);
double grad_check_reverse_kl(CouplingFlow& flow, const TargetDistribution& target,
                             const Matrix& base_batch, double fd_eps = 1e-5);

}  // namespace flowmc
