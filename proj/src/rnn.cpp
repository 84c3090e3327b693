#include "taflab/rnn.hpp"

#include <cmath>
#include <stdexcept>

#include "taflab/rng.hpp"

namespace taflab::rnn {

namespace {

inline double sigmoid(double z) {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z))
                  : std::exp(z) / (1.0 + std::exp(z));
}

// C (m x n) = A (m x k) * B^T (B stored n x k row-major), optionally accumulating.
void gemm_nt(const double* a, const double* b, double* c, int m, int n, int k,
             bool accumulate) {
  for (int i = 0; i < m; ++i) {
    const double* ai = a + static_cast<std::size_t>(i) * k;
    double* ci = c + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const double* bj = b + static_cast<std::size_t>(j) * k;
      double acc = accumulate ? ci[j] : 0.0;
      for (int l = 0; l < k; ++l) acc += ai[l] * bj[l];
      ci[j] = acc;
    }
  }
}

// C (m x n) = A (m x k) * B (k x n), optionally accumulating.
void gemm_nn(const double* a, const double* b, double* c, int m, int n, int k,
             bool accumulate) {
  for (int i = 0; i < m; ++i) {
    double* ci = c + static_cast<std::size_t>(i) * n;
    if (!accumulate)
      for (int j = 0; j < n; ++j) ci[j] = 0.0;
    const double* ai = a + static_cast<std::size_t>(i) * k;
    for (int l = 0; l < k; ++l) {
      const double ail = ai[l];
      if (ail == 0.0) continue;
      const double* bl = b + static_cast<std::size_t>(l) * n;
      for (int j = 0; j < n; ++j) ci[j] += ail * bl[j];
    }
  }
}

// C (m x n) += A^T * B with A (k x m) and B (k x n): outer-product
// accumulation over the batch dimension k.
void gemm_tn_acc(const double* a, const double* b, double* c, int m, int n,
                 int k) {
  for (int l = 0; l < k; ++l) {
    const double* al = a + static_cast<std::size_t>(l) * m;
    const double* bl = b + static_cast<std::size_t>(l) * n;
    for (int i = 0; i < m; ++i) {
      const double ali = al[i];
      if (ali == 0.0) continue;
      double* ci = c + static_cast<std::size_t>(i) * n;
      for (int j = 0; j < n; ++j) ci[j] += ali * bl[j];
    }
  }
}

}  // namespace

std::array<ParamView, 6> param_views(RnnParams& p) {
  return {{{p.w_uh.data(), p.w_uh.size()},
           {p.w_hh.data(), p.w_hh.size()},
           {p.w_hy.data(), p.w_hy.size()},
           {p.b_h.data(), p.b_h.size()},
           {p.b_y.data(), p.b_y.size()},
           {p.h0.data(), p.h0.size()}}};
}

std::array<ConstParamView, 6> param_views(const RnnParams& p) {
  return {{{p.w_uh.data(), p.w_uh.size()},
           {p.w_hh.data(), p.w_hh.size()},
           {p.w_hy.data(), p.w_hy.size()},
           {p.b_h.data(), p.b_h.size()},
           {p.b_y.data(), p.b_y.size()},
           {p.h0.data(), p.h0.size()}}};
}

std::array<ParamView, 6> param_views(Gradients& g) {
  return {{{g.w_uh.data(), g.w_uh.size()},
           {g.w_hh.data(), g.w_hh.size()},
           {g.w_hy.data(), g.w_hy.size()},
           {g.b_h.data(), g.b_h.size()},
           {g.b_y.data(), g.b_y.size()},
           {g.h0.data(), g.h0.size()}}};
}

std::array<ConstParamView, 6> param_views(const Gradients& g) {
  return {{{g.w_uh.data(), g.w_uh.size()},
           {g.w_hh.data(), g.w_hh.size()},
           {g.w_hy.data(), g.w_hy.size()},
           {g.b_h.data(), g.b_h.size()},
           {g.b_y.data(), g.b_y.size()},
           {g.h0.data(), g.h0.size()}}};
}

RnnParams init_params(std::uint64_t seed, int n_in, int n_h, int n_out,
                      double g_h0) {
  if (n_in < 1 || n_h < 1 || n_out < 1)
    throw std::invalid_argument("init_params: dimensions must be >= 1");
  RnnParams p;
  p.n_in = n_in;
  p.n_h = n_h;
  p.n_out = n_out;
  p.w_uh.resize(static_cast<std::size_t>(n_h) * n_in);
  p.w_hh.resize(static_cast<std::size_t>(n_h) * n_h);
  p.w_hy.resize(static_cast<std::size_t>(n_out) * n_h);
  p.b_h.resize(n_h);
  p.b_y.resize(n_out);
  p.h0.resize(n_h);

  rng::Xoshiro256pp gen(seed);
  const double s_in = 1.0 / std::sqrt(static_cast<double>(n_in));
  const double s_h = 1.0 / std::sqrt(static_cast<double>(n_h));
  const double s_out = 1.0 / std::sqrt(static_cast<double>(n_out));
  for (double& w : p.w_uh) w = gen.normal(0.0, s_in);
  for (double& w : p.w_hh) w = gen.normal(0.0, s_h);
  for (double& w : p.w_hy) w = gen.normal(0.0, s_out);
  for (double& w : p.b_h) w = gen.normal(0.0, s_h);
  for (double& w : p.b_y) w = gen.normal(0.0, s_out);
  for (double& w : p.h0) w = gen.normal(0.0, g_h0 * s_h);
  return p;
}

void step_cell(const RnnParams& p, std::span<const double> h,
               std::span<const double> u, std::span<double> h_next) {
  for (int i = 0; i < p.n_h; ++i) {
    double z = p.b_h[i];
    const double* whh = p.w_hh.data() + static_cast<std::size_t>(i) * p.n_h;
    for (int j = 0; j < p.n_h; ++j) z += whh[j] * h[j];
    const double* wuh = p.w_uh.data() + static_cast<std::size_t>(i) * p.n_in;
    for (int j = 0; j < p.n_in; ++j) z += wuh[j] * u[j];
    h_next[i] = std::tanh(z);
  }
}

ForwardTrace forward(const RnnParams& p, std::span<const double> inputs,
                     int length) {
  if (length < 1) throw std::invalid_argument("forward: length must be >= 1");
  ForwardTrace trace;
  trace.length = length;
  trace.n_h = p.n_h;
  trace.n_out = p.n_out;
  trace.hidden.resize(static_cast<std::size_t>(length) * p.n_h);
  trace.preact.resize(static_cast<std::size_t>(length) * p.n_h);
  trace.outputs.resize(static_cast<std::size_t>(length) * p.n_out);

  const double* h_prev = p.h0.data();
  for (int t = 0; t < length; ++t) {
    const double* u = inputs.data() + static_cast<std::size_t>(t) * p.n_in;
    double* z = trace.preact.data() + static_cast<std::size_t>(t) * p.n_h;
    double* h = trace.hidden.data() + static_cast<std::size_t>(t) * p.n_h;
    for (int i = 0; i < p.n_h; ++i) {
      double acc = p.b_h[i];
      const double* whh = p.w_hh.data() + static_cast<std::size_t>(i) * p.n_h;
      for (int j = 0; j < p.n_h; ++j) acc += whh[j] * h_prev[j];
      const double* wuh = p.w_uh.data() + static_cast<std::size_t>(i) * p.n_in;
      for (int j = 0; j < p.n_in; ++j) acc += wuh[j] * u[j];
      z[i] = acc;
      h[i] = std::tanh(acc);
    }
    double* y = trace.outputs.data() + static_cast<std::size_t>(t) * p.n_out;
    for (int o = 0; o < p.n_out; ++o) {
      double acc = p.b_y[o];
      const double* why = p.w_hy.data() + static_cast<std::size_t>(o) * p.n_h;
      for (int j = 0; j < p.n_h; ++j) acc += why[j] * h[j];
      y[o] = sigmoid(acc);
    }
    h_prev = h;
  }
  return trace;
}

double bce_loss(std::span<const double> outputs,
                std::span<const double> targets) {
  if (outputs.size() != targets.size() || outputs.empty())
    throw std::invalid_argument("bce_loss: size mismatch");
  double loss = 0.0;
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    const double p = std::min(std::max(outputs[i], 1e-12), 1.0 - 1e-12);
    loss -= targets[i] * std::log(p) + (1.0 - targets[i]) * std::log(1.0 - p);
  }
  return loss / static_cast<double>(outputs.size());
}

double forward_batch(const RnnParams& p, const Batch& batch,
                     BatchTrace& trace) {
  const int B = batch.size, T = batch.length;
  const std::size_t slab = static_cast<std::size_t>(B) * p.n_h;
  trace.hidden.resize(slab * (T + 1));
  trace.outputs.resize(static_cast<std::size_t>(T) * B * p.n_out);

  // slab 0: replicated trainable initial state
  for (int b = 0; b < B; ++b)
    for (int i = 0; i < p.n_h; ++i)
      trace.hidden[static_cast<std::size_t>(b) * p.n_h + i] = p.h0[i];

  double loss = 0.0;
  for (int t = 0; t < T; ++t) {
    const double* h_prev = trace.hidden.data() + slab * t;
    double* h = trace.hidden.data() + slab * (t + 1);
    const double* u = batch.inputs.data() +
                      static_cast<std::size_t>(t) * B * p.n_in;

    gemm_nt(h_prev, p.w_hh.data(), h, B, p.n_h, p.n_h, false);
    gemm_nt(u, p.w_uh.data(), h, B, p.n_h, p.n_in, true);
    for (int b = 0; b < B; ++b) {
      double* hb = h + static_cast<std::size_t>(b) * p.n_h;
      for (int i = 0; i < p.n_h; ++i) hb[i] = std::tanh(hb[i] + p.b_h[i]);
    }

    double* y = trace.outputs.data() +
                static_cast<std::size_t>(t) * B * p.n_out;
    gemm_nt(h, p.w_hy.data(), y, B, p.n_out, p.n_h, false);
    const double* target = batch.targets.data() +
                           static_cast<std::size_t>(t) * B * p.n_out;
    for (int i = 0; i < B * p.n_out; ++i) {
      y[i] = sigmoid(y[i] + p.b_y[i % p.n_out]);
      const double prob = std::min(std::max(y[i], 1e-12), 1.0 - 1e-12);
      loss -= target[i] * std::log(prob) +
              (1.0 - target[i]) * std::log(1.0 - prob);
    }
  }
  return loss / (static_cast<double>(T) * B * p.n_out);
}

void Gradients::resize_like(const RnnParams& p) {
  w_uh.assign(p.w_uh.size(), 0.0);
  w_hh.assign(p.w_hh.size(), 0.0);
  w_hy.assign(p.w_hy.size(), 0.0);
  b_h.assign(p.b_h.size(), 0.0);
  b_y.assign(p.b_y.size(), 0.0);
  h0.assign(p.h0.size(), 0.0);
}

void Gradients::zero() {
  for (auto view : param_views(*this))
    for (std::size_t i = 0; i < view.size; ++i) view.data[i] = 0.0;
}

double Gradients::squared_norm() const {
  double acc = 0.0;
  for (auto view : param_views(*this))
    for (std::size_t i = 0; i < view.size; ++i)
      acc += view.data[i] * view.data[i];
  return acc;
}

void Gradients::scale(double s) {
  for (auto view : param_views(*this))
    for (std::size_t i = 0; i < view.size; ++i) view.data[i] *= s;
}

double backward(const RnnParams& p, const Batch& batch,
                const BatchTrace& trace, Gradients& grads) {
  const int B = batch.size, T = batch.length;
  const std::size_t slab = static_cast<std::size_t>(B) * p.n_h;
  const double scale = 1.0 / (static_cast<double>(T) * B * p.n_out);

  grads.resize_like(p);

  std::vector<double> d_out(static_cast<std::size_t>(B) * p.n_out);
  std::vector<double> d_h(slab, 0.0);   // dL/dh at the current step
  std::vector<double> carry(slab, 0.0); // contribution flowing from t+1

  double loss = 0.0;
  for (int t = T - 1; t >= 0; --t) {
    const double* y = trace.outputs.data() +
                      static_cast<std::size_t>(t) * B * p.n_out;
    const double* target = batch.targets.data() +
                           static_cast<std::size_t>(t) * B * p.n_out;
    for (int i = 0; i < B * p.n_out; ++i) {
      const double prob = std::min(std::max(y[i], 1e-12), 1.0 - 1e-12);
      loss -= target[i] * std::log(prob) +
              (1.0 - target[i]) * std::log(1.0 - prob);
      d_out[i] = (y[i] - target[i]) * scale;  // sigmoid + BCE shortcut
    }

    const double* h = trace.hidden.data() + slab * (t + 1);
    const double* h_prev = trace.hidden.data() + slab * t;

    gemm_tn_acc(d_out.data(), h, grads.w_hy.data(), p.n_out, p.n_h, B);
    for (int b = 0; b < B; ++b)
      for (int o = 0; o < p.n_out; ++o)
        grads.b_y[o] += d_out[static_cast<std::size_t>(b) * p.n_out + o];

    // dL/dh(t) = carry from t+1 plus the readout path
    d_h = carry;
    gemm_nn(d_out.data(), p.w_hy.data(), d_h.data(), B, p.n_h, p.n_out, true);

    // through tanh: dz = dh * (1 - h^2)
    for (std::size_t i = 0; i < slab; ++i) d_h[i] *= 1.0 - h[i] * h[i];

    gemm_tn_acc(d_h.data(), h_prev, grads.w_hh.data(), p.n_h, p.n_h, B);
    const double* u = batch.inputs.data() +
                      static_cast<std::size_t>(t) * B * p.n_in;
    gemm_tn_acc(d_h.data(), u, grads.w_uh.data(), p.n_h, p.n_in, B);
    for (int b = 0; b < B; ++b) {
      const double* row = d_h.data() + static_cast<std::size_t>(b) * p.n_h;
      for (int i = 0; i < p.n_h; ++i) grads.b_h[i] += row[i];
    }

    gemm_nn(d_h.data(), p.w_hh.data(), carry.data(), B, p.n_h, p.n_h, false);
  }

  // h0 is shared across the batch
  for (int b = 0; b < B; ++b) {
    const double* row = carry.data() + static_cast<std::size_t>(b) * p.n_h;
    for (int i = 0; i < p.n_h; ++i) grads.h0[i] += row[i];
  }
  return loss / (static_cast<double>(T) * B * p.n_out);
}

OptimizerState OptimizerState::adam(double lr, std::size_t n_params) {
  AdamState s;
  s.m.assign(n_params, 0.0);
  s.v.assign(n_params, 0.0);
  return {std::move(s), lr};
}

OptimizerState OptimizerState::rmsprop(double lr, std::size_t n_params) {
  RmspropState s;
  s.mean_square.assign(n_params, 0.0);
  return {std::move(s), lr};
}

void optimizer_step(OptimizerState& opt, RnnParams& p, const Gradients& grads) {
  auto params = param_views(p);
  auto grad_views = param_views(grads);
  const double lr = opt.learning_rate;

  if (auto* adam = std::get_if<AdamState>(&opt.state)) {
    ++adam->step_count;
    const double bc1 = 1.0 - std::pow(adam->beta1, adam->step_count);
    const double bc2 = 1.0 - std::pow(adam->beta2, adam->step_count);
    std::size_t offset = 0;
    for (std::size_t a = 0; a < params.size(); ++a) {
      double* w = params[a].data;
      const double* g = grad_views[a].data;
      for (std::size_t i = 0; i < params[a].size; ++i) {
        double& m = adam->m[offset + i];
        double& v = adam->v[offset + i];
        m = adam->beta1 * m + (1.0 - adam->beta1) * g[i];
        v = adam->beta2 * v + (1.0 - adam->beta2) * g[i] * g[i];
        w[i] -= lr * (m / bc1) / (std::sqrt(v / bc2) + adam->eps);
      }
      offset += params[a].size;
    }
  } else {
    auto& rms = std::get<RmspropState>(opt.state);
    std::size_t offset = 0;
    for (std::size_t a = 0; a < params.size(); ++a) {
      double* w = params[a].data;
      const double* g = grad_views[a].data;
      for (std::size_t i = 0; i < params[a].size; ++i) {
        double& ms = rms.mean_square[offset + i];
        ms = rms.decay * ms + (1.0 - rms.decay) * g[i] * g[i];
        w[i] -= lr * g[i] / (std::sqrt(ms) + rms.eps);
      }
      offset += params[a].size;
    }
  }
}

}  // namespace taflab::rnn
