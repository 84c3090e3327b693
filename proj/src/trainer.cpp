#include "taflab/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "taflab/rng.hpp"

namespace taflab::trainer {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Deterministic shuffled-epoch index stream with O(1) seek: the
// permutation of epoch e depends only on (seed, e).
class BatchSampler {
 public:
  BatchSampler(std::uint64_t seed, int n_examples, int batch_size)
      : seed_(seed), n_(n_examples), batch_(batch_size) {}

  // indices for training iteration `it` (1-based)
  std::vector<int> batch_indices(long it) {
    std::vector<int> out(batch_);
    long pos = (it - 1) * static_cast<long>(batch_);
    for (int i = 0; i < batch_; ++i, ++pos) {
      const long epoch = pos / n_;
      ensure_epoch(epoch);
      out[i] = perm_[pos % n_];
    }
    return out;
  }

 private:
  void ensure_epoch(long epoch) {
    if (epoch == cached_epoch_) return;
    perm_.resize(n_);
    for (int i = 0; i < n_; ++i) perm_[i] = i;
    rng::Xoshiro256pp gen(rng::derive_seed(seed_, "shuffle", epoch));
    for (int i = n_ - 1; i > 0; --i)
      std::swap(perm_[i], perm_[gen.uniform_int(i + 1)]);
    cached_epoch_ = epoch;
  }

  std::uint64_t seed_;
  int n_, batch_;
  long cached_epoch_ = -1;
  std::vector<int> perm_;
};

struct EvalData {
  rnn::Batch batch;
  std::vector<ta::Symbol> symbols;   // flattened, example-major
  std::vector<ta::TaState> targets;  // flattened, example-major
};

EvalData make_eval_data(const ta::Dataset& test_set, int eval_size) {
  const int n = std::min<int>(eval_size, test_set.examples.size());
  std::vector<int> indices(n);
  for (int i = 0; i < n; ++i) indices[i] = i;
  EvalData eval;
  eval.batch = encode_batch(test_set, indices);
  for (int i = 0; i < n; ++i) {
    const auto& ex = test_set.examples[i];
    eval.symbols.insert(eval.symbols.end(), ex.inputs.begin(), ex.inputs.end());
    eval.targets.insert(eval.targets.end(), ex.targets.begin(), ex.targets.end());
  }
  return eval;
}

// Re-orders time-major batch outputs (T x B) into example-major flat spans
// aligned with EvalData::symbols.
std::vector<double> example_major_outputs(const rnn::BatchTrace& trace, int B,
                                          int T) {
  std::vector<double> out(static_cast<std::size_t>(B) * T);
  for (int t = 0; t < T; ++t)
    for (int b = 0; b < B; ++b)
      out[static_cast<std::size_t>(b) * T + t] =
          trace.outputs[static_cast<std::size_t>(t) * B + b];
  return out;
}

bool sustained_at(const std::vector<double>& values, std::size_t start,
                  double threshold, int window) {
  const std::size_t end =
      std::min(values.size(), start + static_cast<std::size_t>(window));
  for (std::size_t i = start; i < end; ++i) {
    if (std::isnan(values[i]) || values[i] < threshold) return false;
  }
  return true;
}

std::optional<long> first_sustained(const LearningCurves& curves,
                                    const std::vector<double>& values,
                                    double threshold, int window) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isnan(values[i]) && values[i] >= threshold &&
        sustained_at(values, i, threshold, window))
      return curves.iterations[i];
  }
  return std::nullopt;
}

}  // namespace

AccuracyBreakdown td_ti_accuracy(std::span<const ta::Symbol> inputs,
                                 std::span<const double> outputs,
                                 std::span<const ta::TaState> targets) {
  if (inputs.size() != outputs.size() || inputs.size() != targets.size())
    throw std::invalid_argument("td_ti_accuracy: span size mismatch");
  long correct[3] = {0, 0, 0};
  long total[3] = {0, 0, 0};
  long correct_all = 0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const int predicted = outputs[i] > 0.5 ? 1 : 0;
    const bool ok = predicted == targets[i].id;
    const int bucket = inputs[i].is_null() ? 2 : (inputs[i].id == 0 ? 0 : 1);
    ++total[bucket];
    if (ok) {
      ++correct[bucket];
      ++correct_all;
    }
  }
  AccuracyBreakdown acc;
  acc.td_count = total[0];
  acc.ti_count = total[1];
  acc.null_count = total[2];
  if (total[0] > 0) acc.td = static_cast<double>(correct[0]) / total[0];
  if (total[1] > 0) acc.ti = static_cast<double>(correct[1]) / total[1];
  if (total[2] > 0) acc.null_acc = static_cast<double>(correct[2]) / total[2];
  acc.overall = inputs.empty()
                    ? 0.0
                    : static_cast<double>(correct_all) / inputs.size();
  return acc;
}

rnn::Batch encode_batch(const ta::Dataset& dataset,
                        std::span<const int> indices) {
  const int B = static_cast<int>(indices.size());
  const int T = dataset.sequence_length;
  const int n_in = dataset.automaton.alphabet_size();
  rnn::Batch batch;
  batch.size = B;
  batch.length = T;
  batch.n_in = n_in;
  batch.n_out = 1;
  batch.inputs.assign(static_cast<std::size_t>(T) * B * n_in, 0.0);
  batch.targets.resize(static_cast<std::size_t>(T) * B);
  for (int b = 0; b < B; ++b) {
    const auto& ex = dataset.examples[indices[b]];
    for (int t = 0; t < T; ++t) {
      auto* u = batch.inputs.data() +
                (static_cast<std::size_t>(t) * B + b) * n_in;
      ta::encode_symbol(ex.inputs[t], n_in, {u, static_cast<std::size_t>(n_in)});
      batch.targets[static_cast<std::size_t>(t) * B + b] =
          ta::encode_state(ex.targets[t]);
    }
  }
  return batch;
}

PhaseReport detect_phases(const LearningCurves& curves, int sustain_window) {
  if (curves.size() == 0)
    throw std::invalid_argument("detect_phases: empty curves");
  PhaseReport report;
  report.phase1_end = first_sustained(curves, curves.ti_acc, 0.99, sustain_window);
  report.plateau_exit = first_sustained(curves, curves.td_acc, 0.75, sustain_window);
  report.convergence = first_sustained(curves, curves.td_acc, 0.99, sustain_window);
  return report;
}

TrainResult train(const ta::Dataset& train_set, const ta::Dataset& test_set,
                  const TrainConfig& config,
                  const rnn::Checkpoint* resume_from) {
  if (train_set.examples.empty() || test_set.examples.empty())
    throw std::invalid_argument("train: datasets must be non-empty");

  const int n_in = train_set.automaton.alphabet_size();
  TrainResult result;

  rnn::RnnParams params;
  rnn::OptimizerState opt{{}, config.learning_rate};
  long start_iteration = 0;
  int stop_streak = 0;
  if (resume_from != nullptr) {
    params = resume_from->params;
    opt = resume_from->opt;
    start_iteration = resume_from->iteration;
    stop_streak = static_cast<int>(resume_from->stop_streak);
  } else {
    params = rnn::init_params(rng::derive_seed(config.seed, "init"), n_in,
                              config.n_h, 1, config.g_h0);
    opt = config.optimizer == OptimizerKind::kAdam
              ? rnn::OptimizerState::adam(config.learning_rate,
                                          params.param_count())
              : rnn::OptimizerState::rmsprop(config.learning_rate,
                                             params.param_count());
  }

  EvalData eval = make_eval_data(test_set, config.eval_size);
  rnn::BatchTrace eval_trace;

  auto evaluate = [&](rnn::Checkpoint& ckpt) {
    rnn::forward_batch(params, eval.batch, eval_trace);
    const auto outputs =
        example_major_outputs(eval_trace, eval.batch.size, eval.batch.length);
    const auto acc = td_ti_accuracy(eval.symbols, outputs, eval.targets);
    ckpt.td_acc = acc.td.value_or(kNaN);
    ckpt.ti_acc = acc.ti.value_or(kNaN);
    ckpt.null_acc = acc.null_acc.value_or(kNaN);
    ckpt.test_acc = acc.overall;
    return acc;
  };

  auto snapshot = [&](long iteration) {
    rnn::Checkpoint ckpt;
    ckpt.iteration = iteration;
    ckpt.run_seed = config.seed;
    ckpt.params = params;
    ckpt.opt = opt;
    return ckpt;
  };

  if (resume_from == nullptr) {
    rnn::Checkpoint init_ckpt = snapshot(0);
    evaluate(init_ckpt);
    result.checkpoints.push_back(std::move(init_ckpt));
  }

  BatchSampler sampler(config.seed, static_cast<int>(train_set.examples.size()),
                       config.batch_size);
  rnn::BatchTrace trace;
  rnn::Gradients grads;
  long it = start_iteration;

  while (it < config.max_iterations) {
    ++it;
    const auto indices = sampler.batch_indices(it);
    const auto batch = encode_batch(train_set, indices);

    rnn::forward_batch(params, batch, trace);
    const double loss = rnn::backward(params, batch, trace, grads);

    if (!std::isfinite(loss)) {
      // divergence: keep a diagnostic snapshot and stop
      rnn::Checkpoint ckpt = snapshot(it);
      ckpt.loss = loss;
      result.checkpoints.push_back(std::move(ckpt));
      result.diverged = true;
      result.stopped_at = it;
      return result;
    }

    if (config.clip_gradients) {
      const double norm = std::sqrt(grads.squared_norm());
      if (norm > config.clip_norm) grads.scale(config.clip_norm / norm);
    }
    rnn::optimizer_step(opt, params, grads);

    // minibatch accuracy (for the stopping rule)
    long correct = 0;
    const std::size_t n_preds = batch.targets.size();
    for (std::size_t i = 0; i < n_preds; ++i) {
      const int predicted = trace.outputs[i] > 0.5 ? 1 : 0;
      if (predicted == static_cast<int>(batch.targets[i])) ++correct;
    }
    const double train_acc = static_cast<double>(correct) / n_preds;
    stop_streak = train_acc >= config.stop_train_acc ? stop_streak + 1 : 0;

    rnn::Checkpoint ckpt = snapshot(it);
    ckpt.loss = loss;
    ckpt.train_acc = train_acc;
    ckpt.stop_streak = stop_streak;
    const auto acc = evaluate(ckpt);

    result.curves.iterations.push_back(it);
    result.curves.loss.push_back(loss);
    result.curves.td_acc.push_back(acc.td.value_or(kNaN));
    result.curves.ti_acc.push_back(acc.ti.value_or(kNaN));
    result.curves.null_acc.push_back(acc.null_acc.value_or(kNaN));
    result.curves.test_acc.push_back(acc.overall);

    if (config.checkpoint_every > 0 && it % config.checkpoint_every == 0)
      result.checkpoints.push_back(std::move(ckpt));

    if (stop_streak >= config.stop_window) break;
  }

  result.stopped_at = it;
  // make sure the final state is always snapshotted
  if (result.checkpoints.empty() || result.checkpoints.back().iteration != it) {
    rnn::Checkpoint ckpt = snapshot(it);
    evaluate(ckpt);
    result.checkpoints.push_back(std::move(ckpt));
  }
  return result;
}

void write_curves_csv(const std::string& path, const LearningCurves& curves) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os << "iteration,loss,td_acc,ti_acc,null_acc,test_acc\n";
  os.precision(17);
  for (std::size_t i = 0; i < curves.size(); ++i) {
    os << curves.iterations[i] << ',' << curves.loss[i] << ',';
    auto cell = [&](double v) {
      if (!std::isnan(v)) os << v;
    };
    cell(curves.td_acc[i]);
    os << ',';
    cell(curves.ti_acc[i]);
    os << ',';
    cell(curves.null_acc[i]);
    os << ',';
    os << curves.test_acc[i] << '\n';
  }
  if (!os) throw std::runtime_error("write failed: " + path);
}

LearningCurves read_curves_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  LearningCurves curves;
  std::string line;
  if (!std::getline(is, line))
    throw std::runtime_error("empty curves file: " + path);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    auto next = [&]() {
      if (!std::getline(ss, cell, ','))
        throw std::runtime_error("malformed curves row in " + path);
      return cell;
    };
    curves.iterations.push_back(std::stol(next()));
    curves.loss.push_back(std::stod(next()));
    auto opt_cell = [&]() {
      const std::string c = next();
      return c.empty() ? kNaN : std::stod(c);
    };
    curves.td_acc.push_back(opt_cell());
    curves.ti_acc.push_back(opt_cell());
    curves.null_acc.push_back(opt_cell());
    std::getline(ss, cell);  // last column, no trailing comma
    curves.test_acc.push_back(cell.empty() ? kNaN : std::stod(cell));
  }
  return curves;
}

}  // namespace taflab::trainer
