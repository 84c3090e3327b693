#include "taflab/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <json.hpp>

#include "taflab/rng.hpp"

namespace taflab::dynamics {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string symbol_name(ta::Symbol s) {
  if (s.is_null()) return "null";
  if (s.id == 0) return "a";
  if (s.id == 1) return "b";
  return "s" + std::to_string(static_cast<int>(s.id));
}

ta::Symbol symbol_from_name(const std::string& name) {
  if (name == "null") return ta::Symbol::null();
  if (name == "a") return ta::Symbol{0};
  if (name == "b") return ta::Symbol{1};
  if (!name.empty() && name[0] == 's')
    return ta::Symbol{static_cast<std::uint8_t>(std::stoi(name.substr(1)))};
  throw std::runtime_error("unknown symbol name: " + name);
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

}  // namespace

num::Matrix jacobian_at(const rnn::RnnParams& p, std::span<const double> h,
                        std::span<const double> u) {
  if (h.size() != static_cast<std::size_t>(p.n_h) ||
      u.size() != static_cast<std::size_t>(p.n_in))
    throw std::invalid_argument("jacobian_at: shape mismatch");
  num::Matrix j(p.n_h, p.n_h);
  for (int i = 0; i < p.n_h; ++i) {
    double z = p.b_h[i];
    const double* whh = p.w_hh.data() + static_cast<std::size_t>(i) * p.n_h;
    for (int k = 0; k < p.n_h; ++k) z += whh[k] * h[k];
    const double* wuh = p.w_uh.data() + static_cast<std::size_t>(i) * p.n_in;
    for (int k = 0; k < p.n_in; ++k) z += wuh[k] * u[k];
    const double th = std::tanh(z);
    const double gain = 1.0 - th * th;  // sech^2(z)
    for (int k = 0; k < p.n_h; ++k) j(i, k) = gain * whh[k];
  }
  return j;
}

FpSearchResult find_fixed_points(const rnn::RnnParams& p,
                                 std::span<const double> u,
                                 const num::Matrix& seeds,
                                 const FindFpOptions& opts) {
  const int n_h = p.n_h;
  const int n_cand = seeds.rows();
  if (seeds.cols() != n_h)
    throw std::invalid_argument("find_fixed_points: seed width != n_h");

  // constant part of the preactivation
  std::vector<double> drive(n_h);
  for (int i = 0; i < n_h; ++i) {
    double z = p.b_h[i];
    const double* wuh = p.w_uh.data() + static_cast<std::size_t>(i) * p.n_in;
    for (int k = 0; k < p.n_in; ++k) z += wuh[k] * u[k];
    drive[i] = z;
  }

  std::vector<double> h(seeds.data(), seeds.data() + seeds.rows() * n_h);
  std::vector<double> best_h = h;
  std::vector<double> best_q(n_cand, std::numeric_limits<double>::infinity());
  std::vector<double> m(h.size(), 0.0), v(h.size(), 0.0);
  std::vector<int> last_improve(n_cand, 0);
  std::vector<char> active(n_cand, 1);
  std::vector<int> converged;  // candidates at q < q_target, dedup anchors

  std::vector<double> f(n_h), r(n_h), d(n_h), grad(n_h);
  const double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;

  int n_active = n_cand;
  for (int step = 1; step <= opts.max_iter && n_active > 0; ++step) {
    const double bc1 = 1.0 - std::pow(beta1, step);
    const double bc2 = 1.0 - std::pow(beta2, step);
    for (int b = 0; b < n_cand; ++b) {
      if (!active[b]) continue;
      double* hb = h.data() + static_cast<std::size_t>(b) * n_h;

      double q = 0.0;
      for (int i = 0; i < n_h; ++i) {
        double z = drive[i];
        const double* whh = p.w_hh.data() + static_cast<std::size_t>(i) * n_h;
        for (int k = 0; k < n_h; ++k) z += whh[k] * hb[k];
        f[i] = std::tanh(z);
        r[i] = f[i] - hb[i];
        q += r[i] * r[i];
      }
      q *= 0.5;

      if (q < 0.999 * best_q[b]) last_improve[b] = step;
      if (q < best_q[b]) {
        best_q[b] = q;
        std::copy(hb, hb + n_h, best_h.data() + static_cast<std::size_t>(b) * n_h);
      }
      if (q < opts.q_target) {
        active[b] = 0;
        --n_active;
        converged.push_back(b);
        continue;
      }
      if (step - last_improve[b] > 300) {  // stalled
        active[b] = 0;
        --n_active;
        continue;
      }

      // grad q = (J - I)^T r with J = diag(1 - f^2) W_hh
      for (int i = 0; i < n_h; ++i) d[i] = r[i] * (1.0 - f[i] * f[i]);
      for (int l = 0; l < n_h; ++l) grad[l] = -r[l];
      for (int k = 0; k < n_h; ++k) {
        const double dk = d[k];
        if (dk == 0.0) continue;
        const double* whh = p.w_hh.data() + static_cast<std::size_t>(k) * n_h;
        for (int l = 0; l < n_h; ++l) grad[l] += dk * whh[l];
      }

      double* mb = m.data() + static_cast<std::size_t>(b) * n_h;
      double* vb = v.data() + static_cast<std::size_t>(b) * n_h;
      for (int i = 0; i < n_h; ++i) {
        mb[i] = beta1 * mb[i] + (1.0 - beta1) * grad[i];
        vb[i] = beta2 * vb[i] + (1.0 - beta2) * grad[i] * grad[i];
        hb[i] -= opts.lr * (mb[i] / bc1) / (std::sqrt(vb[i] / bc2) + adam_eps);
      }
    }

    // candidates that have entered the neighborhood of an already-converged
    // point would be removed by dedup anyway; stop iterating them
    if (step % 25 == 0 && !converged.empty()) {
      const double merge2 =
          (opts.dedup_radius / 4.0) * (opts.dedup_radius / 4.0);
      for (int b = 0; b < n_cand; ++b) {
        if (!active[b]) continue;
        const double* hb = h.data() + static_cast<std::size_t>(b) * n_h;
        for (int c : converged) {
          const double* hc =
              best_h.data() + static_cast<std::size_t>(c) * n_h;
          if (squared_distance({hb, static_cast<std::size_t>(n_h)},
                               {hc, static_cast<std::size_t>(n_h)}) < merge2) {
            active[b] = 0;
            --n_active;
            break;
          }
        }
      }
    }
  }

  FpSearchResult result;
  result.candidate_q = best_q;

  // dedup over the combined candidate pool, best q first
  std::vector<int> order;
  for (int b = 0; b < n_cand; ++b)
    if (best_q[b] < opts.slow_tol) order.push_back(b);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return best_q[a] < best_q[b]; });

  std::vector<int> accepted;
  const double radius2 = opts.dedup_radius * opts.dedup_radius;
  for (int b : order) {
    std::span<const double> hb{best_h.data() + static_cast<std::size_t>(b) * n_h,
                               static_cast<std::size_t>(n_h)};
    bool duplicate = false;
    for (int a : accepted) {
      std::span<const double> ha{
          best_h.data() + static_cast<std::size_t>(a) * n_h,
          static_cast<std::size_t>(n_h)};
      if (squared_distance(hb, ha) < radius2) {
        duplicate = true;
        break;
      }
    }
    if (!duplicate) accepted.push_back(b);
  }

  std::vector<double> u_copy(u.begin(), u.end());
  for (int b : accepted) {
    FixedPointRecord record;
    record.location.assign(best_h.data() + static_cast<std::size_t>(b) * n_h,
                           best_h.data() + static_cast<std::size_t>(b + 1) * n_h);
    record.residual = best_q[b];
    record.spectrum =
        num::eigenvalues(jacobian_at(p, record.location, u_copy));
    record.lambda_max = record.spectrum.max_modulus();
    record.stable = record.lambda_max < 1.0;
    if (best_q[b] < opts.tol)
      result.fixed_points.push_back(std::move(record));
    else
      result.slow_points.push_back(std::move(record));
  }
  return result;
}

num::Matrix collect_trajectory_states(const rnn::RnnParams& p,
                                      const ta::Dataset& data,
                                      int n_sequences) {
  const int n = std::min<int>(n_sequences, data.examples.size());
  const int T = data.sequence_length;
  const int n_in = data.automaton.alphabet_size();
  num::Matrix states(n * T, p.n_h);
  std::vector<double> inputs(static_cast<std::size_t>(T) * n_in);
  for (int s = 0; s < n; ++s) {
    const auto& ex = data.examples[s];
    for (int t = 0; t < T; ++t)
      ta::encode_symbol(ex.inputs[t], n_in,
                        {inputs.data() + static_cast<std::size_t>(t) * n_in,
                         static_cast<std::size_t>(n_in)});
    const auto trace = rnn::forward(p, inputs, T);
    for (int t = 0; t < T; ++t)
      for (int i = 0; i < p.n_h; ++i)
        states(s * T + t, i) = trace.hidden[static_cast<std::size_t>(t) * p.n_h + i];
  }
  return states;
}

num::Matrix make_fp_seeds(const num::Matrix& trajectory_states, int n_seeds,
                          double sigma, std::uint64_t rng_seed) {
  const int n_h = trajectory_states.cols();
  const int n_states = trajectory_states.rows();
  num::Matrix seeds(n_seeds, n_h);
  rng::Xoshiro256pp gen(rng_seed);

  const int n_raw = n_states > 0 ? n_seeds / 2 : 0;
  for (int s = 0; s < n_seeds - 1; ++s) {
    if (n_states > 0) {
      const auto row = static_cast<int>(gen.uniform_int(n_states));
      for (int i = 0; i < n_h; ++i) seeds(s, i) = trajectory_states(row, i);
      if (s >= n_raw)
        for (int i = 0; i < n_h; ++i) seeds(s, i) += gen.normal(0.0, sigma);
    } else {
      for (int i = 0; i < n_h; ++i) seeds(s, i) = gen.normal(0.0, sigma);
    }
  }
  // last seed: the origin (row already zero-initialized)
  return seeds;
}

StabilityTrace trace_stability(std::span<const rnn::Checkpoint> checkpoints,
                               std::span<const ta::Symbol> symbols,
                               const ta::Dataset& probe_data,
                               const TraceOptions& opts) {
  StabilityTrace trace;
  trace.symbols.assign(symbols.begin(), symbols.end());
  const int n_sym = static_cast<int>(symbols.size());
  const int n_in = probe_data.automaton.alphabet_size();

  std::vector<std::vector<std::vector<double>>> warm(n_sym);

  const int stride = std::max(opts.analysis_stride, 1);
  for (std::size_t c = 0; c < checkpoints.size(); ++c) {
    const auto& ckpt = checkpoints[c];
    const bool last = c + 1 == checkpoints.size();
    if (!last && ckpt.iteration % stride != 0) continue;

    StabilityEntry entry;
    entry.iteration = ckpt.iteration;
    entry.fp_count.assign(n_sym, 0);
    entry.stable_count.assign(n_sym, 0);
    entry.max_lambda.assign(n_sym, kNaN);
    entry.fps.resize(n_sym);

    try {
      const auto states = collect_trajectory_states(
          ckpt.params, probe_data, opts.n_trajectory_sequences);
      for (int s = 0; s < n_sym; ++s) {
        std::vector<double> u(n_in, 0.0);
        ta::encode_symbol(symbols[s], n_in, u);

        num::Matrix seeds = make_fp_seeds(
            states, opts.n_seeds, opts.perturb_sigma,
            rng::derive_seed(opts.rng_seed, "fp-seeds",
                             static_cast<std::uint64_t>(ckpt.iteration) *
                                     16 + s));
        // warm-start continuation from the previous checkpoint's survivors
        if (!warm[s].empty()) {
          num::Matrix combined(seeds.rows() + static_cast<int>(warm[s].size()),
                               seeds.cols());
          std::copy(seeds.data(), seeds.data() + seeds.rows() * seeds.cols(),
                    combined.data());
          for (std::size_t w = 0; w < warm[s].size(); ++w)
            for (int i = 0; i < seeds.cols(); ++i)
              combined(seeds.rows() + static_cast<int>(w), i) = warm[s][w][i];
          seeds = std::move(combined);
        }

        auto found = find_fixed_points(ckpt.params, u, seeds, opts.fp);
        for (auto& fp : found.fixed_points) fp.input = symbols[s];
        for (auto& sp : found.slow_points) sp.input = symbols[s];
        entry.fp_count[s] = static_cast<int>(found.fixed_points.size());
        double lam = kNaN;
        for (const auto& fp : found.fixed_points) {
          if (fp.stable) ++entry.stable_count[s];
          if (std::isnan(lam) || fp.lambda_max > lam) lam = fp.lambda_max;
        }
        entry.max_lambda[s] = lam;

        warm[s].clear();
        for (const auto& fp : found.fixed_points) warm[s].push_back(fp.location);
        for (const auto& sp : found.slow_points) warm[s].push_back(sp.location);
        entry.fps[s] = std::move(found.fixed_points);
      }
    } catch (const std::exception&) {
      entry.failed = true;  // recorded as a gap; the trace continues
    }
    trace.entries.push_back(std::move(entry));
  }
  return trace;
}

OrbitSummary constant_input_orbit(const rnn::RnnParams& p,
                                  std::span<const double> start,
                                  std::span<const double> u, int steps) {
  if (steps < 8) throw std::invalid_argument("constant_input_orbit: too few steps");
  OrbitSummary summary;
  summary.trajectory = num::Matrix(steps, p.n_h);
  std::vector<double> h(start.begin(), start.end()), h_next(p.n_h);
  for (int t = 0; t < steps; ++t) {
    rnn::step_cell(p, h, u, h_next);
    std::swap(h, h_next);
    for (int i = 0; i < p.n_h; ++i) summary.trajectory(t, i) = h[i];
  }

  // leading PCA coordinate of the rollout
  const auto pca = num::pca(summary.trajectory, 1);
  std::vector<double> x(steps);
  for (int t = 0; t < steps; ++t) x[t] = pca.projected(t, 0);

  const int quarter = steps / 4;
  auto peak_to_peak = [&](int begin, int end) {
    double lo = x[begin], hi = x[begin];
    for (int t = begin; t < end; ++t) {
      lo = std::min(lo, x[t]);
      hi = std::max(hi, x[t]);
    }
    return hi - lo;
  };
  const double amp_first = peak_to_peak(0, quarter);
  const double amp_last = peak_to_peak(steps - quarter, steps);
  summary.sustained = amp_last > 1e-6 && amp_last >= 0.5 * amp_first;

  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= steps;
  double var = 0.0;
  for (double& v : x) {
    v -= mean;
    var += v * v;
  }
  if (var < 1e-18) return summary;  // no oscillation to measure

  const int max_lag = steps / 2;
  std::vector<double> corr(max_lag + 1, 0.0);
  for (int lag = 1; lag <= max_lag; ++lag) {
    double acc = 0.0;
    for (int t = 0; t + lag < steps; ++t) acc += x[t] * x[t + lag];
    corr[lag] = acc / var;
  }

  double best = 0.0;
  for (int lag = 2; lag < max_lag; ++lag) best = std::max(best, corr[lag]);
  if (best <= 0.0) return summary;
  for (int lag = 2; lag < max_lag; ++lag) {
    if (corr[lag] >= corr[lag - 1] && corr[lag] >= corr[lag + 1] &&
        corr[lag] >= 0.8 * best) {
      // parabolic refinement around the first dominant peak
      const double denom = corr[lag - 1] - 2.0 * corr[lag] + corr[lag + 1];
      double offset = 0.0;
      if (denom < 0.0)
        offset = 0.5 * (corr[lag - 1] - corr[lag + 1]) / denom;
      summary.estimated_period = lag + offset;
      summary.period_found = true;
      break;
    }
  }
  return summary;
}

BifurcationReport bifurcation_report(const StabilityTrace& trace,
                                     const trainer::LearningCurves& curves,
                                     int lambda_sustain) {
  BifurcationReport report;
  report.td075_iter = trainer::detect_phases(curves).plateau_exit;

  // TD accuracy by iteration for sample pairing
  auto td_at = [&](long iteration) -> double {
    for (std::size_t i = 0; i < curves.size(); ++i)
      if (curves.iterations[i] == iteration) return curves.td_acc[i];
    return kNaN;
  };

  const int n_sym = static_cast<int>(trace.symbols.size());
  report.lambda_td_samples.resize(n_sym);
  for (int s = 0; s < n_sym; ++s) {
    SymbolCrossing crossing;
    crossing.symbol = trace.symbols[s];

    // (iteration, lambda) series over valid entries
    std::vector<std::pair<long, double>> series;
    for (const auto& entry : trace.entries) {
      if (entry.failed || std::isnan(entry.max_lambda[s])) continue;
      series.emplace_back(entry.iteration, entry.max_lambda[s]);
      const double td = td_at(entry.iteration);
      if (!std::isnan(td))
        report.lambda_td_samples[s].emplace_back(entry.max_lambda[s], td);
    }

    for (std::size_t i = 0; i < series.size(); ++i) {
      if (series[i].second <= 1.0) continue;
      bool sustained = true;
      const std::size_t end =
          std::min(series.size(), i + static_cast<std::size_t>(lambda_sustain));
      for (std::size_t j = i; j < end; ++j)
        if (series[j].second <= 1.0) sustained = false;
      if (sustained) {
        crossing.destabilization_iter = series[i].first;
        break;
      }
    }

    if (report.td075_iter) {
      const long target = *report.td075_iter;
      for (std::size_t i = 0; i + 1 < series.size(); ++i) {
        if (series[i].first <= target && target <= series[i + 1].first) {
          const auto [it0, l0] = series[i];
          const auto [it1, l1] = series[i + 1];
          crossing.lambda_at_td075 =
              it0 == it1 ? l0
                         : l0 + (l1 - l0) * static_cast<double>(target - it0) /
                                    static_cast<double>(it1 - it0);
          break;
        }
      }
    }
    report.symbols.push_back(std::move(crossing));
  }
  return report;
}

std::optional<long> fp_emergence_iteration(const StabilityTrace& trace,
                                           ta::Symbol symbol, int count,
                                           int sustain, bool stable_only) {
  int sym_index = -1;
  for (std::size_t s = 0; s < trace.symbols.size(); ++s)
    if (trace.symbols[s] == symbol) sym_index = static_cast<int>(s);
  if (sym_index < 0)
    throw std::invalid_argument("fp_emergence_iteration: symbol not traced");

  const auto& entries = trace.entries;
  auto count_at = [&](const StabilityEntry& e) {
    return stable_only ? e.stable_count[sym_index] : e.fp_count[sym_index];
  };
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].failed || count_at(entries[i]) < count) continue;
    bool sustained = true;
    std::size_t seen = 0;
    for (std::size_t j = i; j < entries.size() && seen < static_cast<std::size_t>(sustain); ++j) {
      if (entries[j].failed) continue;
      ++seen;
      if (count_at(entries[j]) < count) {
        sustained = false;
        break;
      }
    }
    if (sustained) return entries[i].iteration;
  }
  return std::nullopt;
}

void write_stability_trace_jsonl(const std::string& path,
                                 const StabilityTrace& trace) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  for (const auto& entry : trace.entries) {
    for (std::size_t s = 0; s < trace.symbols.size(); ++s) {
      nlohmann::json line;
      line["iteration"] = entry.iteration;
      line["symbol"] = symbol_name(trace.symbols[s]);
      line["failed"] = entry.failed;
      if (!entry.failed) {
        line["fp_count"] = entry.fp_count[s];
        line["stable_count"] = entry.stable_count[s];
        if (!std::isnan(entry.max_lambda[s]))
          line["max_lambda"] = entry.max_lambda[s];
        nlohmann::json fps = nlohmann::json::array();
        for (const auto& fp : entry.fps[s]) {
          nlohmann::json j;
          j["q"] = fp.residual;
          j["lambda_max"] = fp.lambda_max;
          j["stable"] = fp.stable;
          j["location"] = fp.location;
          nlohmann::json eigs = nlohmann::json::array();
          for (const auto& ev : fp.spectrum.eigenvalues)
            eigs.push_back({ev.real(), ev.imag()});
          j["eigenvalues"] = std::move(eigs);
          fps.push_back(std::move(j));
        }
        line["fixed_points"] = std::move(fps);
      }
      os << line.dump() << '\n';
    }
  }
  if (!os) throw std::runtime_error("write failed: " + path);
}

StabilityTrace read_stability_trace_jsonl(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  StabilityTrace trace;
  std::string line;
  StabilityEntry* entry = nullptr;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    const long iteration = j.at("iteration").get<long>();
    const ta::Symbol symbol = symbol_from_name(j.at("symbol").get<std::string>());

    int sym_index = -1;
    for (std::size_t s = 0; s < trace.symbols.size(); ++s)
      if (trace.symbols[s] == symbol) sym_index = static_cast<int>(s);
    if (sym_index < 0) {
      if (!trace.entries.empty() && trace.entries.front().iteration != iteration)
        throw std::runtime_error("inconsistent symbol set in " + path);
      trace.symbols.push_back(symbol);
      sym_index = static_cast<int>(trace.symbols.size()) - 1;
    }

    if (trace.entries.empty() || trace.entries.back().iteration != iteration) {
      trace.entries.emplace_back();
      entry = &trace.entries.back();
      entry->iteration = iteration;
    }
    entry->fp_count.resize(trace.symbols.size(), 0);
    entry->stable_count.resize(trace.symbols.size(), 0);
    entry->max_lambda.resize(trace.symbols.size(), kNaN);
    entry->fps.resize(trace.symbols.size());

    if (j.at("failed").get<bool>()) {
      entry->failed = true;
      continue;
    }
    entry->fp_count[sym_index] = j.at("fp_count").get<int>();
    entry->stable_count[sym_index] = j.at("stable_count").get<int>();
    if (j.contains("max_lambda"))
      entry->max_lambda[sym_index] = j.at("max_lambda").get<double>();
    for (const auto& jf : j.at("fixed_points")) {
      FixedPointRecord fp;
      fp.input = symbol;
      fp.residual = jf.at("q").get<double>();
      fp.lambda_max = jf.at("lambda_max").get<double>();
      fp.stable = jf.at("stable").get<bool>();
      fp.location = jf.at("location").get<std::vector<double>>();
      for (const auto& ev : jf.at("eigenvalues"))
        fp.spectrum.eigenvalues.emplace_back(ev.at(0).get<double>(),
                                             ev.at(1).get<double>());
      entry->fps[sym_index].push_back(std::move(fp));
    }
  }
  return trace;
}

}  // namespace taflab::dynamics
