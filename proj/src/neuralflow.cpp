#include "flowmc/neuralflow.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace flowmc {

Mlp::Mlp(int in, int hidden, int out, int n_hidden_layers) {
  weights.push_back(Matrix::Zero(hidden, in));
  biases.push_back(Vector::Zero(hidden));
  for (int i = 1; i < n_hidden_layers; ++i) {
    weights.push_back(Matrix::Zero(hidden, hidden));
    biases.push_back(Vector::Zero(hidden));
  }
  weights.push_back(Matrix::Zero(out, hidden));
  biases.push_back(Vector::Zero(out));
}

Vector Mlp::eval(const Vector& x, Tape* tape) const {
  if (tape) {
    tape->input = x;
    tape->hidden.clear();
  }
  Vector h = x;
  const int n_layers = static_cast<int>(weights.size());
  for (int l = 0; l < n_layers - 1; ++l) {
    h = (weights[l] * h + biases[l]).array().tanh().matrix();
    if (tape) tape->hidden.push_back(h);
  }
  return weights.back() * h + biases.back();
}

Vector Mlp::backprop(const Tape& tape, const Vector& dy, Mlp& grad) const {
  const int n_layers = static_cast<int>(weights.size());
  const Vector& last_h = tape.hidden.back();
  grad.biases.back() += dy;
  grad.weights.back() += dy * last_h.transpose();
  Vector dh = weights.back().transpose() * dy;
  for (int l = n_layers - 2; l >= 0; --l) {
    const Vector& h = tape.hidden[l];
    const Vector dpre = dh.cwiseProduct((1.0 - h.array().square()).matrix());
    const Vector& in = l == 0 ? tape.input : tape.hidden[l - 1];
    grad.biases[l] += dpre;
    grad.weights[l] += dpre * in.transpose();
    dh = weights[l].transpose() * dpre;
  }
  return dh;
}

void Mlp::fill(double value) {
  for (auto& w : weights) w.setConstant(value);
  for (auto& b : biases) b.setConstant(value);
}

int Mlp::n_params() const {
  int n = 0;
  for (const auto& w : weights) n += static_cast<int>(w.size());
  for (const auto& b : biases) n += static_cast<int>(b.size());
  return n;
}

void AdamState::step_update(Vector& params, const Vector& grad) {
  ++step;
  m = beta1 * m + (1.0 - beta1) * grad;
  v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
  params -= (lr / bc1) * m.cwiseQuotient(((v / bc2).cwiseSqrt().array() + eps).matrix());
}

CouplingFlow::CouplingFlow(const CouplingFlowConfig& config, RngStream& rng) : config_(config) {
  const int d = config.dim;
  const int half = (d + 1) / 2;
  const int other = d - half;
  for (int b = 0; b < config.n_blocks; ++b) {
    Block block;
    block.even_mask = (b % 2 == 0);
    const int n_in = block.even_mask ? half : other;
    const int n_out = d - n_in;
    block.scale_net = Mlp(n_in, config.hidden, n_out, config.n_hidden_layers);
    block.shift_net = Mlp(n_in, config.hidden, n_out, config.n_hidden_layers);
    for (Mlp* net : {&block.scale_net, &block.shift_net}) {
      for (auto& w : net->weights)
        for (int i = 0; i < w.size(); ++i) w.data()[i] = config.init_weight_std * rng.normal();
    }
    block.cap = config.scale_cap_init;
    blocks_.push_back(std::move(block));
  }
  base_ = isotropic_gaussian(d, config.base_sigma);
}

void CouplingFlow::set_base(TargetDistribution base) {
  if (base.dim() != config_.dim) throw std::invalid_argument("base dimension mismatch");
  base_ = std::move(base);
}

std::vector<int> CouplingFlow::pass_idx(int b) const {
  const int d = config_.dim;
  const int half = (d + 1) / 2;
  std::vector<int> idx;
  if (blocks_[b].even_mask)
    for (int i = 0; i < half; ++i) idx.push_back(i);
  else
    for (int i = half; i < d; ++i) idx.push_back(i);
  return idx;
}

std::vector<int> CouplingFlow::trans_idx(int b) const {
  const int d = config_.dim;
  const int half = (d + 1) / 2;
  std::vector<int> idx;
  if (blocks_[b].even_mask)
    for (int i = half; i < d; ++i) idx.push_back(i);
  else
    for (int i = 0; i < half; ++i) idx.push_back(i);
  return idx;
}

namespace {

Vector gather(const Vector& v, const std::vector<int>& idx) {
  Vector out(idx.size());
  for (size_t i = 0; i < idx.size(); ++i) out[i] = v[idx[i]];
  return out;
}

void scatter(Vector& v, const std::vector<int>& idx, const Vector& vals) {
  for (size_t i = 0; i < idx.size(); ++i) v[idx[i]] = vals[i];
}

}  // namespace

// Tape for one block evaluation plus the per-sample gradient workspace.
struct FlowGradWork {
  struct BlockTape {
    Mlp::Tape scale_tape, shift_tape;
    Vector raw, s, t;    // raw scale output, squashed log-scale, shift
    Vector in_trans;     // transformed-side values on the z side of the block
  };

  const CouplingFlow& flow;
  std::vector<Mlp> scale_grads, shift_grads;
  std::vector<double> cap_grads;

  explicit FlowGradWork(const CouplingFlow& f, bool alloc_grads = true) : flow(f) {
    if (!alloc_grads) return;
    for (const auto& block : f.blocks_) {
      scale_grads.push_back(block.scale_net);
      shift_grads.push_back(block.shift_net);
      scale_grads.back().fill(0.0);
      shift_grads.back().fill(0.0);
      cap_grads.push_back(0.0);
    }
  }

  // y = block_b(u); returns y, fills tape, adds sum(s) to *log_det.
  Vector forward_block(int b, const Vector& u, BlockTape& tape, double* log_det) const {
    const auto& block = flow.blocks_[b];
    const auto pass = flow.pass_idx(b);
    const auto trans = flow.trans_idx(b);
    const Vector ua = gather(u, pass);
    const Vector ut = gather(u, trans);
    tape.raw = block.scale_net.eval(ua, &tape.scale_tape);
    tape.s = block.cap * tape.raw.array().tanh();
    tape.t = block.shift_net.eval(ua, &tape.shift_tape);
    tape.in_trans = ut;
    Vector y = u;
    scatter(y, trans, (ut.array() * tape.s.array().exp() + tape.t.array()).matrix());
    if (log_det) *log_det += tape.s.sum();
    return y;
  }

  // u = block_b^{-1}(y); tape stores the z-side transformed values.
  Vector inverse_block(int b, const Vector& y, BlockTape& tape, double* log_det) const {
    const auto& block = flow.blocks_[b];
    const auto pass = flow.pass_idx(b);
    const auto trans = flow.trans_idx(b);
    const Vector ya = gather(y, pass);
    const Vector yt = gather(y, trans);
    tape.raw = block.scale_net.eval(ya, &tape.scale_tape);
    tape.s = block.cap * tape.raw.array().tanh();
    tape.t = block.shift_net.eval(ya, &tape.shift_tape);
    Vector u = y;
    tape.in_trans = ((yt - tape.t).array() * (-tape.s.array()).exp()).matrix();
    scatter(u, trans, tape.in_trans);
    if (log_det) *log_det += tape.s.sum();  // forward log-det of this block
    return u;
  }

  // VJP through y = block_b(u). alpha is dL/d(sum s).
  Vector backprop_forward_block(int b, const BlockTape& tape, const Vector& dy, double alpha) {
    const auto& block = flow.blocks_[b];
    const auto pass = flow.pass_idx(b);
    const auto trans = flow.trans_idx(b);
    const Vector dyt = gather(dy, trans);
    const Vector exp_s = tape.s.array().exp();
    const Vector dut = dyt.cwiseProduct(exp_s);
    const Vector ds =
        (dyt.array() * tape.in_trans.array() * exp_s.array() + alpha).matrix();
    const Vector& dt = dyt;
    Vector du = dy;
    scatter(du, trans, dut);
    Vector dua = propagate_nets(b, tape, ds, dt);
    for (size_t i = 0; i < pass.size(); ++i) du[pass[i]] = dy[pass[i]] + dua[i];
    return du;
  }

  // VJP through u = block_b^{-1}(y). alpha is dL/d(sum s).
  Vector backprop_inverse_block(int b, const BlockTape& tape, const Vector& du, double alpha) {
    const auto pass = flow.pass_idx(b);
    const auto trans = flow.trans_idx(b);
    const Vector dut = gather(du, trans);
    const Vector exp_neg_s = (-tape.s.array()).exp();
    const Vector dyt = dut.cwiseProduct(exp_neg_s);
    const Vector ds = (-dut.array() * tape.in_trans.array() + alpha).matrix();
    const Vector dt = -dyt;
    Vector dy = du;
    scatter(dy, trans, dyt);
    Vector dya = propagate_nets(b, tape, ds, dt);
    for (size_t i = 0; i < pass.size(); ++i) dy[pass[i]] = du[pass[i]] + dya[i];
    return dy;
  }

  // shared net backprop: s = cap * tanh(raw), t = shift_net(a)
  Vector propagate_nets(int b, const BlockTape& tape, const Vector& ds, const Vector& dt) {
    const auto& block = flow.blocks_[b];
    const Vector tanh_raw = tape.raw.array().tanh();
    cap_grads[b] += ds.dot(tanh_raw);
    const Vector draw =
        (ds.array() * block.cap * (1.0 - tanh_raw.array().square())).matrix();
    Vector da = block.scale_net.backprop(tape.scale_tape, draw, scale_grads[b]);
    da += block.shift_net.backprop(tape.shift_tape, dt, shift_grads[b]);
    return da;
  }

  Vector flatten_and_scale(double scale) const {
    Vector out(flow.n_params());
    int pos = 0;
    for (size_t b = 0; b < scale_grads.size(); ++b) {
      for (const Mlp* net : {&scale_grads[b], &shift_grads[b]}) {
        for (size_t l = 0; l < net->weights.size(); ++l) {
          const auto& w = net->weights[l];
          for (int i = 0; i < w.size(); ++i) out[pos++] = scale * w.data()[i];
          for (int i = 0; i < net->biases[l].size(); ++i)
            out[pos++] = scale * net->biases[l][i];
        }
      }
      out[pos++] = scale * cap_grads[b];
    }
    return out;
  }
};

Vector CouplingFlow::forward(const Vector& z) const {
  return forward_checked(z).x;
}

CouplingFlow::ForwardResult CouplingFlow::forward_checked(const Vector& z) const {
  FlowGradWork work(*this, false);
  FlowGradWork::BlockTape tape;
  ForwardResult result;
  Vector u = z;
  for (int b = 0; b < static_cast<int>(blocks_.size()); ++b) {
    u = work.forward_block(b, u, tape, &result.log_det);
    if (!u.allFinite()) {
      throw std::runtime_error("non-finite value in coupling block " + std::to_string(b));
    }
  }
  result.x = u;
  return result;
}

Vector CouplingFlow::inverse(const Vector& x) const {
  FlowGradWork work(*this, false);
  FlowGradWork::BlockTape tape;
  Vector u = x;
  for (int b = static_cast<int>(blocks_.size()) - 1; b >= 0; --b)
    u = work.inverse_block(b, u, tape, nullptr);
  return u;
}

double CouplingFlow::log_det_forward(const Vector& z) const {
  FlowGradWork work(*this, false);
  FlowGradWork::BlockTape tape;
  double log_det = 0.0;
  Vector u = z;
  for (int b = 0; b < static_cast<int>(blocks_.size()); ++b)
    u = work.forward_block(b, u, tape, &log_det);
  return log_det;
}

double CouplingFlow::log_det_inverse(const Vector& x) const {
  FlowGradWork work(*this, false);
  FlowGradWork::BlockTape tape;
  double log_det = 0.0;
  Vector u = x;
  for (int b = static_cast<int>(blocks_.size()) - 1; b >= 0; --b)
    u = work.inverse_block(b, u, tape, &log_det);
  return -log_det;
}

int CouplingFlow::n_params() const {
  int n = 0;
  for (const auto& block : blocks_)
    n += block.scale_net.n_params() + block.shift_net.n_params() + 1;
  return n;
}

Vector CouplingFlow::get_params() const {
  Vector out(n_params());
  int pos = 0;
  for (const auto& block : blocks_) {
    for (const Mlp* net : {&block.scale_net, &block.shift_net}) {
      for (size_t l = 0; l < net->weights.size(); ++l) {
        const auto& w = net->weights[l];
        for (int i = 0; i < w.size(); ++i) out[pos++] = w.data()[i];
        for (int i = 0; i < net->biases[l].size(); ++i) out[pos++] = net->biases[l][i];
      }
    }
    out[pos++] = block.cap;
  }
  return out;
}

void CouplingFlow::set_params(const Vector& flat) {
  if (flat.size() != n_params()) throw std::invalid_argument("parameter size mismatch");
  int pos = 0;
  for (auto& block : blocks_) {
    for (Mlp* net : {&block.scale_net, &block.shift_net}) {
      for (size_t l = 0; l < net->weights.size(); ++l) {
        auto& w = net->weights[l];
        for (int i = 0; i < w.size(); ++i) w.data()[i] = flat[pos++];
        for (int i = 0; i < net->biases[l].size(); ++i) net->biases[l][i] = flat[pos++];
      }
    }
    block.cap = flat[pos++];
  }
}

Vector CouplingFlow::grad_forward_kl(const Matrix& batch, double* loss) const {
  if (batch.rows() == 0) throw std::invalid_argument("empty batch");
  if (!base_.has_grad()) throw std::runtime_error("base gradient required for training");
  const int n_blocks = static_cast<int>(blocks_.size());
  FlowGradWork work(*this);
  std::vector<FlowGradWork::BlockTape> tapes(n_blocks);
  double total_loss = 0.0;
  for (int i = 0; i < batch.rows(); ++i) {
    // z = T^{-1}(x); per-sample loss = -log rho(z) + sum_b sum_j s_bj
    Vector u = batch.row(i).transpose();
    double fwd_log_det = 0.0;
    for (int b = n_blocks - 1; b >= 0; --b)
      u = work.inverse_block(b, u, tapes[b], &fwd_log_det);
    total_loss += -base_.logpdf(u) + fwd_log_det;
    Vector g = -base_.grad_logpdf(u);
    for (int b = 0; b < n_blocks; ++b) g = work.backprop_inverse_block(b, tapes[b], g, 1.0);
  }
  const double inv_n = 1.0 / batch.rows();
  if (loss) *loss = total_loss * inv_n;
  if (!std::isfinite(total_loss)) throw std::runtime_error("non-finite forward-KL loss");
  return work.flatten_and_scale(inv_n);
}

Vector CouplingFlow::grad_reverse_kl(const TargetDistribution& target, const Matrix& base_batch,
                                     double* loss) const {
  if (base_batch.rows() == 0) throw std::invalid_argument("empty batch");
  if (!target.has_grad()) throw std::runtime_error("target gradient required for reverse KL");
  const int n_blocks = static_cast<int>(blocks_.size());
  FlowGradWork work(*this);
  std::vector<FlowGradWork::BlockTape> tapes(n_blocks);
  double total_loss = 0.0;
  for (int i = 0; i < base_batch.rows(); ++i) {
    const Vector z = base_batch.row(i).transpose();
    Vector u = z;
    double fwd_log_det = 0.0;
    for (int b = 0; b < n_blocks; ++b) u = work.forward_block(b, u, tapes[b], &fwd_log_det);
    // per-sample loss = log rho(z) - log|J|(z) - log pi(T(z)); the first term
    // is parameter-free but kept so the trace estimates the actual KL
    total_loss += base_.logpdf(z) - fwd_log_det - target.logpdf(u);
    Vector g = -target.grad_logpdf(u);
    for (int b = n_blocks - 1; b >= 0; --b)
      g = work.backprop_forward_block(b, tapes[b], g, -1.0);
  }
  const double inv_n = 1.0 / base_batch.rows();
  if (loss) *loss = total_loss * inv_n;
  if (!std::isfinite(total_loss)) throw std::runtime_error("non-finite reverse-KL loss");
  return work.flatten_and_scale(inv_n);
}

namespace {

TrainingResult run_training(CouplingFlow& flow, const TrainingConfig& config, RngStream& rng,
                            const std::function<Vector(double*)>& grad_fn) {
  TrainingResult result;
  Vector params = flow.get_params();
  AdamState adam(static_cast<int>(params.size()), config.learning_rate);
  double best = std::numeric_limits<double>::infinity();
  int since_best = 0;
  for (int iter = 0; iter < config.iterations; ++iter) {
    double loss = 0.0;
    Vector grad;
    try {
      grad = grad_fn(&loss);
    } catch (const std::runtime_error&) {
      result.diverged = true;
      return result;
    }
    result.loss_trace.push_back(loss);
    adam.step_update(params, grad);
    flow.set_params(params);
    if (loss < best - 1e-12) {
      best = loss;
      since_best = 0;
    } else if (++since_best > config.patience) {
      adam.lr *= config.lr_decay;
      since_best = 0;
    }
    if (config.invertibility_check_every > 0 &&
        (iter + 1) % config.invertibility_check_every == 0) {
      const Vector z = rng.normal_vector(flow.dim());
      const double err = (flow.inverse(flow.forward(z)) - z).norm();
      if (!(err < 1e-5)) throw std::runtime_error("flow lost invertibility during training");
    }
  }
  result.final_loss = result.loss_trace.empty() ? 0.0 : result.loss_trace.back();
  return result;
}

}  // namespace

TrainingResult train_forward_kl(CouplingFlow& flow, const Matrix& target_samples,
                                const TrainingConfig& config, RngStream& rng) {
  const int pool = static_cast<int>(target_samples.rows());
  const int batch_size = std::min(config.batch_size, pool);
  return run_training(flow, config, rng, [&](double* loss) {
    Matrix batch(batch_size, target_samples.cols());
    for (int i = 0; i < batch_size; ++i) {
      const int row = std::min(pool - 1, static_cast<int>(rng.uniform() * pool));
      batch.row(i) = target_samples.row(row);
    }
    return flow.grad_forward_kl(batch, loss);
  });
}

TrainingResult train_reverse_kl(CouplingFlow& flow, const TargetDistribution& target,
                                const TrainingConfig& config, RngStream& rng) {
  return run_training(flow, config, rng, [&](double* loss) {
    Matrix batch(config.batch_size, flow.dim());
    for (int i = 0; i < config.batch_size; ++i)
      batch.row(i) = flow.base().sample(rng).transpose();
    return flow.grad_reverse_kl(target, batch, loss);
  });
}

namespace {

double grad_check(CouplingFlow& flow, const Vector& analytic,
                  const std::function<double()>& loss_fn, double fd_eps) {
  const Vector params = flow.get_params();
  double worst = 0.0;
  for (int i = 0; i < params.size(); ++i) {
    Vector p = params;
    p[i] = params[i] + fd_eps;
    flow.set_params(p);
    const double lp = loss_fn();
    p[i] = params[i] - fd_eps;
    flow.set_params(p);
    const double lm = loss_fn();
    const double fd = (lp - lm) / (2.0 * fd_eps);
    const double denom = std::max({std::abs(fd), std::abs(analytic[i]), 1e-4});
    worst = std::max(worst, std::abs(fd - analytic[i]) / denom);
  }
  flow.set_params(params);
  return worst;
}

}  // namespace

double grad_check_forward_kl(CouplingFlow& flow, const Matrix& batch, double fd_eps) {
  double loss = 0.0;
  const Vector analytic = flow.grad_forward_kl(batch, &loss);
  return grad_check(flow, analytic,
                    [&]() {
                      double l = 0.0;
                      flow.grad_forward_kl(batch, &l);
                      return l;
                    },
                    fd_eps);
}

double grad_check_reverse_kl(CouplingFlow& flow, const TargetDistribution& target,
                             const Matrix& base_batch, double fd_eps) {
  double loss = 0.0;
  const Vector analytic = flow.grad_reverse_kl(target, base_batch, &loss);
  return grad_check(flow, analytic,
                    [&]() {
                      double l = 0.0;
                      flow.grad_reverse_kl(target, base_batch, &l);
                      return l;
                    },
                    fd_eps);
}

void CouplingFlow::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "couplingflow " << config_.dim << " " << config_.n_blocks << " " << config_.hidden
      << " " << config_.n_hidden_layers << " " << config_.base_sigma << "\n";
  const Vector params = get_params();
  char buf[64];
  for (int i = 0; i < params.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", params[i]);
    out << buf << "\n";
  }
}

CouplingFlow CouplingFlow::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string tag;
  CouplingFlowConfig config;
  in >> tag >> config.dim >> config.n_blocks >> config.hidden >> config.n_hidden_layers >>
      config.base_sigma;
  if (tag != "couplingflow") throw std::runtime_error("bad flow file header");
  RngStream dummy(0);
  CouplingFlow flow(config, dummy);
  Vector params(flow.n_params());
  for (int i = 0; i < params.size(); ++i) {
    if (!(in >> params[i])) throw std::runtime_error("truncated flow file");
  }
  flow.set_params(params);
  return flow;
}

}  // namespace flowmc
