#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "taflab/checkpoint.hpp"
#include "taflab/rnn.hpp"
#include "taflab/ta.hpp"

namespace taflab::trainer {

// Accuracy restricted to the timesteps receiving the time-dependent symbol
// (a), the time-independent symbol (b), and the null symbol. Components
// with no qualifying timesteps are absent rather than 0/0.
struct AccuracyBreakdown {
  std::optional<double> td, ti, null_acc;
  double overall = 0.0;
  long td_count = 0, ti_count = 0, null_count = 0;
};

// `outputs` holds one probability per timestep (prediction: > 0.5 reads as
// state 2); spans are flattened over sequences.
AccuracyBreakdown td_ti_accuracy(std::span<const ta::Symbol> inputs,
                                 std::span<const double> outputs,
                                 std::span<const ta::TaState> targets);

struct LearningCurves {
  std::vector<long> iterations;
  std::vector<double> loss;      // training minibatch loss
  std::vector<double> td_acc;    // held-out, NaN when absent
  std::vector<double> ti_acc;
  std::vector<double> null_acc;  // relative task only, NaN otherwise
  std::vector<double> test_acc;  // overall held-out accuracy

  std::size_t size() const { return iterations.size(); }
};

// Columns: iteration, loss, td_acc, ti_acc, null_acc, test_acc. Absent
// values are written as empty fields.
void write_curves_csv(const std::string& path, const LearningCurves& curves);
LearningCurves read_curves_csv(const std::string& path);

struct PhaseReport {
  std::optional<long> phase1_end;   // TI accuracy first sustains >= 0.99
  std::optional<long> plateau_exit; // TD accuracy first crosses 0.75
  std::optional<long> convergence;  // TD accuracy first sustains >= 0.99
};

// Threshold crossings with a sustain window to suppress noise; a crossing
// at the tail counts if the curve never dips below before it ends.
PhaseReport detect_phases(const LearningCurves& curves, int sustain_window = 10);

enum class OptimizerKind { kAdam, kRmsprop };

struct TrainConfig {
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double learning_rate = 1e-3;
  int batch_size = 128;
  int max_iterations = 512;
  int eval_size = 256;       // fixed held-out slice evaluated every iteration
  int checkpoint_every = 1;
  std::uint64_t seed = 1;    // run root seed; init/shuffle streams derive from it
  int n_h = 32;
  double g_h0 = 0.05;
  double stop_train_acc = 0.999;  // early stop once sustained...
  int stop_window = 20;           // ...for this many iterations
  bool clip_gradients = false;
  double clip_norm = 1.0;
};

struct TrainResult {
  LearningCurves curves;
  std::vector<rnn::Checkpoint> checkpoints;
  bool diverged = false;
  long stopped_at = 0;  // last completed iteration
};

// Minibatch SGD over a shuffled-per-epoch dataset. Metrics are computed on
// a fixed held-out slice every iteration; full snapshots are taken every
// `checkpoint_every` iterations (plus iteration 0). Training stops at
// max_iterations or once the minibatch accuracy sustains stop_train_acc.
// Passing `resume_from` continues a run bit-identically from that snapshot.
TrainResult train(const ta::Dataset& train_set, const ta::Dataset& test_set,
                  const TrainConfig& config,
                  const rnn::Checkpoint* resume_from = nullptr);

// Time-major encoding of the selected examples (1-hot symbols, scalar
// state targets).
rnn::Batch encode_batch(const ta::Dataset& dataset,
                        std::span<const int> indices);

}  // namespace taflab::trainer
