#pragma once

#include <cstdint>
#include <limits>
#include <string>

#include "taflab/rnn.hpp"

namespace taflab::rnn {

// Frozen training snapshot: parameters, optimizer state, iteration number,
// the run's root seed (all stream states are derived from it), and the
// metrics measured at that iteration.
struct Checkpoint {
  long iteration = 0;
  std::uint64_t run_seed = 0;
  long stop_streak = 0;  // consecutive iterations at/above the stop threshold
  RnnParams params;
  OptimizerState opt;

  double loss = std::numeric_limits<double>::quiet_NaN();
  double train_acc = std::numeric_limits<double>::quiet_NaN();
  double td_acc = std::numeric_limits<double>::quiet_NaN();
  double ti_acc = std::numeric_limits<double>::quiet_NaN();
  double null_acc = std::numeric_limits<double>::quiet_NaN();
  double test_acc = std::numeric_limits<double>::quiet_NaN();
};

// Versioned little-endian binary container; round-trips bit-exactly.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace taflab::rnn
