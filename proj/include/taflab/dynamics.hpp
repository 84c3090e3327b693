#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "taflab/checkpoint.hpp"
#include "taflab/numerics.hpp"
#include "taflab/rnn.hpp"
#include "taflab/ta.hpp"
#include "taflab/trainer.hpp"

namespace taflab::dynamics {

// Converged minimum of q(h) = 0.5 ||F(h,u) - h||^2 for one input symbol,
// with the Jacobian spectrum at that point.
struct FixedPointRecord {
  std::vector<double> location;
  ta::Symbol input;
  double residual = 0.0;  // q at the located point
  num::ComplexSpectrum spectrum;
  double lambda_max = 0.0;
  bool stable = false;  // |lambda_max| < 1
};

struct FindFpOptions {
  double tol = 1e-10;      // q below this reports a fixed point
  double slow_tol = 1e-6;  // q in [tol, slow_tol) reports a slow point
  double q_target = 1e-12; // optimizer early exit
  int max_iter = 5000;
  double lr = 0.01;
  double dedup_radius = 1e-3;
};

struct FpSearchResult {
  std::vector<FixedPointRecord> fixed_points;
  std::vector<FixedPointRecord> slow_points;
  std::vector<double> candidate_q;  // final q of every candidate (diagnostic)
};

// Minimizes q from every row of `seeds` (Adam, adaptive early exit),
// deduplicates survivors within `dedup_radius`, and attaches the Jacobian
// spectrum to each. An empty result carries the q values as diagnostics.
FpSearchResult find_fixed_points(const rnn::RnnParams& p,
                                 std::span<const double> u,
                                 const num::Matrix& seeds,
                                 const FindFpOptions& opts = {});

// Analytic Jacobian diag(1 - tanh^2(z)) * W_hh at (h, u).
num::Matrix jacobian_at(const rnn::RnnParams& p, std::span<const double> h,
                        std::span<const double> u);

// Candidate seeds: states sampled from observed trajectories, Gaussian
// perturbations of them, and the origin.
num::Matrix make_fp_seeds(const num::Matrix& trajectory_states, int n_seeds,
                          double sigma, std::uint64_t rng_seed);

// Pools hidden states from inference on the first `n_sequences` examples.
num::Matrix collect_trajectory_states(const rnn::RnnParams& p,
                                      const ta::Dataset& data,
                                      int n_sequences);

struct StabilityEntry {
  long iteration = 0;
  bool failed = false;
  // parallel to StabilityTrace::symbols
  std::vector<int> fp_count;
  std::vector<int> stable_count;
  std::vector<double> max_lambda;  // NaN when the symbol has no FP
  std::vector<std::vector<FixedPointRecord>> fps;
};

struct StabilityTrace {
  std::vector<ta::Symbol> symbols;
  std::vector<StabilityEntry> entries;  // iterations strictly increasing
};

struct TraceOptions {
  FindFpOptions fp;
  int n_seeds = 64;
  double perturb_sigma = 0.5;
  int n_trajectory_sequences = 8;
  int analysis_stride = 1;  // analyze every k-th checkpoint
  std::uint64_t rng_seed = 0x7a51ab5eedULL;
};

// Fixed-point census per (checkpoint, symbol). Seeds for checkpoint k+1
// include the survivors from checkpoint k (warm-start continuation);
// per-checkpoint failures are recorded as gaps and the trace continues.
StabilityTrace trace_stability(std::span<const rnn::Checkpoint> checkpoints,
                               std::span<const ta::Symbol> symbols,
                               const ta::Dataset& probe_data,
                               const TraceOptions& opts = {});

struct OrbitSummary {
  num::Matrix trajectory;  // steps x n_h
  bool period_found = false;
  double estimated_period = 0.0;  // real-valued timesteps
  bool sustained = false;
};

// Rolls the cell under constant input. The period comes from the first
// dominant autocorrelation peak of the leading PCA coordinate; `sustained`
// compares oscillation amplitude in the first vs last quarter.
OrbitSummary constant_input_orbit(const rnn::RnnParams& p,
                                  std::span<const double> start,
                                  std::span<const double> u, int steps = 200);

struct SymbolCrossing {
  ta::Symbol symbol;
  std::optional<long> destabilization_iter;  // |lambda_max| sustains > 1
  std::optional<double> lambda_at_td075;     // interpolated at the TD crossing
};

struct BifurcationReport {
  std::optional<long> td075_iter;
  std::vector<SymbolCrossing> symbols;
  // per symbol: (|lambda_max|, TD accuracy) samples over the trace, for
  // cross-seed binning
  std::vector<std::vector<std::pair<double, double>>> lambda_td_samples;
};

BifurcationReport bifurcation_report(const StabilityTrace& trace,
                                     const trainer::LearningCurves& curves,
                                     int lambda_sustain = 5);

// First iteration at which the (stable) FP count for `symbol` reaches
// `count` and holds for `sustain` consecutive analyzed checkpoints.
std::optional<long> fp_emergence_iteration(const StabilityTrace& trace,
                                           ta::Symbol symbol, int count,
                                           int sustain = 5,
                                           bool stable_only = true);

// One JSON object per (checkpoint, symbol) line.
void write_stability_trace_jsonl(const std::string& path,
                                 const StabilityTrace& trace);
StabilityTrace read_stability_trace_jsonl(const std::string& path);

}  // namespace taflab::dynamics
