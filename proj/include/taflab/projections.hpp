#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "taflab/numerics.hpp"
#include "taflab/rnn.hpp"
#include "taflab/ta.hpp"

namespace taflab::proj {

// Hidden states pooled from inference, annotated with the labels used for
// downstream coloring and classifier checks.
struct LabeledStates {
  num::Matrix states;                   // n x n_h, state after consuming u(t)
  std::vector<ta::Symbol> prev_symbol;  // u(t)
  std::vector<int> time_mod_p;          // periodic task; -1 otherwise
  std::vector<ta::TaState> ta_state;    // y(t)
  std::vector<int> theta;               // clock/phase class at that point
};

// Runs the network over the first `n_sequences` examples and pools every
// hidden state. For the relative task, theta labels the clock value after
// consuming u(t) against the threshold (the class the state must encode
// going forward); for the periodic task it is the phase at time t.
LabeledStates collect_labeled_states(const rnn::RnnParams& p,
                                     const ta::Dataset& data, int n_sequences);

struct PcaBasis {
  num::Matrix components;  // k x d
  std::vector<double> mean;
  std::vector<double> explained_variance;
};

struct PcaStates {
  PcaBasis basis;
  num::Matrix coords;  // n x k
};

PcaStates pca_states(const num::Matrix& states, int k = 3);

// How the TA-state axis is derived from the input weights: the leading
// left-singular direction of W_uh, or PCA over the per-symbol input
// projections {W_uh e_c}.
enum class TaAxisMode { kSingularDirection, kSymbolPca };

struct TaTimeBasis {
  std::vector<double> h_ta;  // TA-state axis (y in the standard plot)
  std::vector<double> h_lr;  // logistic clock-classifier weights (x axis)
  num::Matrix basis;         // d x 2, columns [h_ta | h_lr]
};

// Throws std::runtime_error when the two directions are degenerate and
// std::invalid_argument unless both theta classes are present.
TaTimeBasis ta_time_basis(const rnn::RnnParams& p,
                          const num::Matrix& hidden_states,
                          const std::vector<int>& theta_labels,
                          TaAxisMode mode = TaAxisMode::kSingularDirection);

std::vector<double> project(const PcaBasis& basis, std::span<const double> h);

// (w_ta, w_lr) pseudo-inverse coordinates in span{h_ta, h_lr}.
std::array<double, 2> project(const TaTimeBasis& basis,
                              std::span<const double> h);

// CSV: one row per state with projected coordinates and labels.
void write_projection_csv(const std::string& path, const num::Matrix& coords,
                          const LabeledStates& labels);

}  // namespace taflab::proj
