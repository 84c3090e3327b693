#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <variant>
#include <vector>

namespace taflab::rnn {

// Elman cell parameters plus the trainable initial hidden state:
//   h(t) = tanh(W_hh h(t-1) + W_uh u(t) + b_h),  y(t) = sigmoid(W_hy h(t) + b_y)
struct RnnParams {
  int n_in = 0, n_h = 0, n_out = 0;
  std::vector<double> w_uh;  // n_h x n_in, row-major
  std::vector<double> w_hh;  // n_h x n_h
  std::vector<double> w_hy;  // n_out x n_h
  std::vector<double> b_h;   // n_h
  std::vector<double> b_y;   // n_out
  std::vector<double> h0;    // n_h

  std::size_t param_count() const {
    return w_uh.size() + w_hh.size() + w_hy.size() + b_h.size() + b_y.size() +
           h0.size();
  }
};

struct ParamView {
  double* data;
  std::size_t size;
};
struct ConstParamView {
  const double* data;
  std::size_t size;
};

// Fixed traversal order shared by the optimizer and checkpoint code.
std::array<ParamView, 6> param_views(RnnParams& p);
std::array<ConstParamView, 6> param_views(const RnnParams& p);

// Entries drawn from centered normals with standard deviations
// 1/sqrt(N_in), 1/sqrt(N_h), 1/sqrt(N_out) for the weight matrices,
// 1/sqrt(N_h) and 1/sqrt(N_out) for the biases, and g_h0/sqrt(N_h) for h0.
RnnParams init_params(std::uint64_t seed, int n_in, int n_h, int n_out,
                      double g_h0 = 0.05);

// One cell update; `h_next` may not alias `h`.
void step_cell(const RnnParams& p, std::span<const double> h,
               std::span<const double> u, std::span<double> h_next);

struct ForwardTrace {
  int length = 0, n_h = 0, n_out = 0;
  std::vector<double> hidden;   // T x n_h
  std::vector<double> preact;   // T x n_h
  std::vector<double> outputs;  // T x n_out, post-sigmoid
};

// Single-sequence inference from the trained h0.
ForwardTrace forward(const RnnParams& p, std::span<const double> inputs,
                     int length);

// Mean binary cross entropy with probabilities clamped at 1e-12.
double bce_loss(std::span<const double> outputs,
                std::span<const double> targets);

// Time-major minibatch: inputs[t*B*n_in + b*n_in + j].
struct Batch {
  int size = 0, length = 0, n_in = 0, n_out = 0;
  std::vector<double> inputs;   // T x B x n_in
  std::vector<double> targets;  // T x B x n_out
};

struct BatchTrace {
  std::vector<double> hidden;   // (T+1) x B x n_h; slab 0 is h0 replicated
  std::vector<double> outputs;  // T x B x n_out, post-sigmoid
};

// Returns mean BCE loss over all batch/time/output elements.
double forward_batch(const RnnParams& p, const Batch& batch, BatchTrace& trace);

struct Gradients {
  std::vector<double> w_uh, w_hh, w_hy, b_h, b_y, h0;

  void resize_like(const RnnParams& p);
  void zero();
  double squared_norm() const;
  void scale(double s);
};

std::array<ParamView, 6> param_views(Gradients& g);
std::array<ConstParamView, 6> param_views(const Gradients& g);

// Full-length BPTT of the mean BCE loss over the batch; fills `grads`
// (including d/dh0) and returns the loss. `trace` must come from
// forward_batch on the same params and batch.
double backward(const RnnParams& p, const Batch& batch, const BatchTrace& trace,
                Gradients& grads);

struct AdamState {
  std::vector<double> m, v;  // first/second moments over flattened params
  long step_count = 0;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
};

struct RmspropState {
  std::vector<double> mean_square;
  double decay = 0.99, eps = 1e-8;
};

struct OptimizerState {
  std::variant<AdamState, RmspropState> state;
  double learning_rate = 1e-3;

  static OptimizerState adam(double lr, std::size_t n_params);
  static OptimizerState rmsprop(double lr, std::size_t n_params);
};

// Applies one Adam (bias-corrected) or RMSProp update to every parameter
// array, h0 included.
void optimizer_step(OptimizerState& opt, RnnParams& p, const Gradients& grads);

}  // namespace taflab::rnn
