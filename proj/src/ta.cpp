#include "taflab/ta.hpp"

#include <stdexcept>
#include <utility>

#include "taflab/rng.hpp"

namespace taflab::ta {

bool is_relative(const TemporalVariableKind& kind) {
  return std::holds_alternative<RelativeTiming>(kind);
}

namespace {

void validate_temporal(const TemporalVariableKind& kind) {
  if (const auto* p = std::get_if<PeriodicTiming>(&kind)) {
    if (p->period < 2 || p->period % 2 != 0)
      throw std::invalid_argument("periodic timing requires an even period >= 2");
  } else {
    const auto& r = std::get<RelativeTiming>(kind);
    if (r.threshold < 1)
      throw std::invalid_argument("relative timing requires threshold >= 1");
    if (!(r.non_null_prob > 0.0 && r.non_null_prob <= 1.0))
      throw std::invalid_argument("non-null probability must be in (0, 1]");
  }
}

}  // namespace

TimedAutomaton::TimedAutomaton(int alphabet_size, int state_count,
                               std::vector<TaState> delta0,
                               std::vector<TaState> delta1, TaState start_state,
                               TemporalVariableKind temporal)
    : alphabet_size_(alphabet_size),
      state_count_(state_count),
      delta0_(std::move(delta0)),
      delta1_(std::move(delta1)),
      start_state_(start_state),
      temporal_(std::move(temporal)) {
  if (alphabet_size_ < 1 || state_count_ < 1)
    throw std::invalid_argument("automaton needs >= 1 symbol and state");
  const auto expected = static_cast<std::size_t>(alphabet_size_) * state_count_;
  if (delta0_.size() != expected || delta1_.size() != expected)
    throw std::invalid_argument("transition tables must be total over alphabet x states");
  for (const auto& table : {delta0_, delta1_})
    for (TaState s : table)
      if (s.id >= state_count_)
        throw std::invalid_argument("transition table entry out of state range");
  if (start_state_.id >= state_count_)
    throw std::invalid_argument("start state out of range");
  validate_temporal(temporal_);
}

TimedAutomaton TimedAutomaton::flipflop(TemporalVariableKind temporal) {
  // rows: symbol a (id 0), symbol b (id 1); columns: current state.
  // State ids 0/1 stand for the task's states 1/2.
  const TaState s1{0}, s2{1};
  std::vector<TaState> delta0 = {s1, s1,   // a -> state 1 regardless of s
                                 s2, s2};  // b -> state 2 regardless of s
  std::vector<TaState> delta1 = {s2, s2,   // a -> state 2 at night
                                 s2, s2};  // b -> state 2 always
  return TimedAutomaton(2, 2, std::move(delta0), std::move(delta1), s1,
                        std::move(temporal));
}

TaState TimedAutomaton::table_lookup(int theta, Symbol c, TaState s) const {
  const auto& table = theta == 0 ? delta0_ : delta1_;
  return table[static_cast<std::size_t>(c.id) * state_count_ + s.id];
}

int theta_periodic(long t, int period) {
  if (period < 2 || period % 2 != 0)
    throw std::invalid_argument("theta_periodic requires an even period >= 2");
  long m = t % period;
  if (m < 0) m += period;
  return m < period / 2 ? 0 : 1;
}

int theta_relative(long clock, int threshold) {
  return clock <= threshold ? 0 : 1;
}

TaState step(const TimedAutomaton& ta, TaState s, Symbol c, int theta) {
  if (s.id >= ta.state_count())
    throw std::invalid_argument("step: state out of range");
  if (c.is_null()) return s;
  if (c.id >= ta.alphabet_size())
    throw std::invalid_argument("step: unknown symbol");
  return ta.table_lookup(theta, c, s);
}

std::vector<TaState> run(const TimedAutomaton& ta,
                         std::span<const Symbol> inputs, long start_time,
                         long initial_clock) {
  std::vector<TaState> outputs;
  outputs.reserve(inputs.size());
  TaState state = ta.start_state();
  long clock = initial_clock;
  long t = start_time;
  for (Symbol c : inputs) {
    int theta;
    if (const auto* p = std::get_if<PeriodicTiming>(&ta.temporal())) {
      theta = theta_periodic(t, p->period);
    } else {
      theta = theta_relative(clock, std::get<RelativeTiming>(ta.temporal()).threshold);
      clock = c.is_null() ? clock + 1 : 0;
    }
    state = step(ta, state, c, theta);
    outputs.push_back(state);
    ++t;
  }
  return outputs;
}

std::vector<Symbol> generate_inputs(std::uint64_t seed, int length,
                                    const TemporalVariableKind& temporal,
                                    int alphabet_size) {
  if (length < 1) throw std::invalid_argument("sequence length must be >= 1");
  rng::Xoshiro256pp gen(seed);
  std::vector<Symbol> inputs(length);
  const double p = is_relative(temporal)
                       ? std::get<RelativeTiming>(temporal).non_null_prob
                       : 1.0;
  for (auto& c : inputs) {
    if (p < 1.0 && gen.uniform() >= p) {
      c = Symbol::null();
    } else {
      c = Symbol{static_cast<std::uint8_t>(gen.uniform_int(alphabet_size))};
    }
  }
  return inputs;
}

Dataset generate_dataset(const TimedAutomaton& ta, int n_examples, int length,
                         std::uint64_t seed) {
  if (n_examples < 1) throw std::invalid_argument("need >= 1 example");
  Dataset ds{ta, {}, length, seed};
  ds.examples.reserve(n_examples);
  for (int i = 0; i < n_examples; ++i) {
    const std::uint64_t example_seed = rng::derive_seed(seed, "example", i);
    SequencePair pair;
    pair.inputs = generate_inputs(example_seed, length, ta.temporal(),
                                  ta.alphabet_size());
    pair.targets = run(ta, pair.inputs);
    ds.examples.push_back(std::move(pair));
  }
  return ds;
}

void encode_symbol(Symbol c, int alphabet_size, std::span<double> out) {
  if (static_cast<std::size_t>(alphabet_size) > out.size())
    throw std::invalid_argument("encode_symbol: alphabet wider than output vector");
  for (int i = 0; i < alphabet_size; ++i) out[i] = 0.0;
  if (c.is_null()) return;
  if (c.id >= alphabet_size)
    throw std::invalid_argument("encode_symbol: unknown symbol");
  out[c.id] = 1.0;
}

double encode_state(TaState s) { return static_cast<double>(s.id); }

}  // namespace taflab::ta
