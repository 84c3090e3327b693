#include "taflab/projections.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace taflab::proj {

LabeledStates collect_labeled_states(const rnn::RnnParams& p,
                                     const ta::Dataset& data,
                                     int n_sequences) {
  const int n = std::min<int>(n_sequences, data.examples.size());
  const int T = data.sequence_length;
  const int n_in = data.automaton.alphabet_size();
  const bool relative = ta::is_relative(data.automaton.temporal());

  LabeledStates out;
  out.states = num::Matrix(n * T, p.n_h);
  out.prev_symbol.reserve(n * T);
  out.time_mod_p.reserve(n * T);
  out.ta_state.reserve(n * T);
  out.theta.reserve(n * T);

  std::vector<double> inputs(static_cast<std::size_t>(T) * n_in);
  for (int s = 0; s < n; ++s) {
    const auto& ex = data.examples[s];
    for (int t = 0; t < T; ++t)
      ta::encode_symbol(ex.inputs[t], n_in,
                        {inputs.data() + static_cast<std::size_t>(t) * n_in,
                         static_cast<std::size_t>(n_in)});
    const auto trace = rnn::forward(p, inputs, T);

    long clock = 0;
    for (int t = 0; t < T; ++t) {
      const int row = s * T + t;
      for (int i = 0; i < p.n_h; ++i)
        out.states(row, i) =
            trace.hidden[static_cast<std::size_t>(t) * p.n_h + i];
      out.prev_symbol.push_back(ex.inputs[t]);
      out.ta_state.push_back(ex.targets[t]);
      if (relative) {
        const auto& rel = std::get<ta::RelativeTiming>(data.automaton.temporal());
        clock = ex.inputs[t].is_null() ? clock + 1 : 0;
        out.time_mod_p.push_back(-1);
        out.theta.push_back(ta::theta_relative(clock, rel.threshold));
      } else {
        const int period = std::get<ta::PeriodicTiming>(data.automaton.temporal()).period;
        out.time_mod_p.push_back(static_cast<int>((t + 1) % period));
        out.theta.push_back(ta::theta_periodic(t + 1, period));
      }
    }
  }
  return out;
}

PcaStates pca_states(const num::Matrix& states, int k) {
  auto result = num::pca(states, k);
  PcaStates out;
  out.basis.components = std::move(result.components);
  out.basis.mean = std::move(result.mean);
  out.basis.explained_variance = std::move(result.explained_variance);
  out.coords = std::move(result.projected);
  return out;
}

TaTimeBasis ta_time_basis(const rnn::RnnParams& p,
                          const num::Matrix& hidden_states,
                          const std::vector<int>& theta_labels,
                          TaAxisMode mode) {
  TaTimeBasis basis;
  const int d = p.n_h;

  if (mode == TaAxisMode::kSingularDirection) {
    // leading eigenvector of W_uh W_uh^T = leading left-singular direction
    num::Matrix gram(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = i; j < d; ++j) {
        double acc = 0.0;
        for (int k = 0; k < p.n_in; ++k)
          acc += p.w_uh[static_cast<std::size_t>(i) * p.n_in + k] *
                 p.w_uh[static_cast<std::size_t>(j) * p.n_in + k];
        gram(i, j) = gram(j, i) = acc;
      }
    std::vector<double> evals;
    num::Matrix evecs;
    num::symmetric_eigen(gram, evals, evecs);
    basis.h_ta.assign(d, 0.0);
    for (int i = 0; i < d; ++i) basis.h_ta[i] = evecs(0, i);
  } else {
    // PCA over the per-symbol input projections {W_uh e_c : c in alphabet}
    num::Matrix points(p.n_in, d);
    for (int c = 0; c < p.n_in; ++c)
      for (int i = 0; i < d; ++i)
        points(c, i) = p.w_uh[static_cast<std::size_t>(i) * p.n_in + c];
    const auto result = num::pca(points, 1);
    basis.h_ta.assign(d, 0.0);
    for (int i = 0; i < d; ++i) basis.h_ta[i] = result.components(0, i);
  }

  // orientation convention: largest-magnitude entry positive
  double peak = 0.0;
  for (double x : basis.h_ta)
    if (std::fabs(x) > std::fabs(peak)) peak = x;
  if (peak < 0.0)
    for (double& x : basis.h_ta) x = -x;

  const auto model = num::logistic_fit(hidden_states, theta_labels);
  basis.h_lr = model.weights;

  double norm = 0.0;
  for (double x : basis.h_lr) norm += x * x;
  if (norm <= 0.0)
    throw std::runtime_error("ta_time_basis: zero logistic direction");

  basis.basis = num::Matrix(d, 2);
  for (int i = 0; i < d; ++i) {
    basis.basis(i, 0) = basis.h_ta[i];
    basis.basis(i, 1) = basis.h_lr[i];
  }
  // fail eagerly on a collinear pair rather than at first projection
  (void)num::pinv_project(basis.basis, std::vector<double>(d, 0.0));
  return basis;
}

std::vector<double> project(const PcaBasis& basis, std::span<const double> h) {
  const int k = basis.components.rows();
  const int d = basis.components.cols();
  if (h.size() != static_cast<std::size_t>(d))
    throw std::invalid_argument("project: dimension mismatch");
  std::vector<double> coords(k, 0.0);
  for (int r = 0; r < k; ++r) {
    double acc = 0.0;
    for (int j = 0; j < d; ++j)
      acc += (h[j] - basis.mean[j]) * basis.components(r, j);
    coords[r] = acc;
  }
  return coords;
}

std::array<double, 2> project(const TaTimeBasis& basis,
                              std::span<const double> h) {
  return num::pinv_project(basis.basis, h);
}

void write_projection_csv(const std::string& path, const num::Matrix& coords,
                          const LabeledStates& labels) {
  if (coords.rows() != labels.states.rows())
    throw std::invalid_argument("write_projection_csv: row mismatch");
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os << "index";
  for (int c = 0; c < coords.cols(); ++c) os << ",coord" << c;
  os << ",prev_symbol,time_mod_p,ta_state,theta\n";
  os.precision(10);
  for (int i = 0; i < coords.rows(); ++i) {
    os << i;
    for (int c = 0; c < coords.cols(); ++c) os << ',' << coords(i, c);
    const auto sym = labels.prev_symbol[i];
    os << ',' << (sym.is_null() ? std::string("null")
                                : std::string(1, static_cast<char>('a' + sym.id)));
    os << ',' << labels.time_mod_p[i];
    os << ',' << static_cast<int>(labels.ta_state[i].id) + 1;
    os << ',' << labels.theta[i] << '\n';
  }
  if (!os) throw std::runtime_error("write failed: " + path);
}

}  // namespace taflab::proj
