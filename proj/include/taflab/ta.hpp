#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace taflab::ta {

// Input symbol: index into the automaton alphabet. A distinguished null
// symbol exists for relative-timing tasks; it is never part of the
// alphabet proper and acts as the identity transition.
struct Symbol {
  std::uint8_t id = 0;

  static constexpr std::uint8_t kNullId = 0xff;
  static constexpr Symbol null() { return Symbol{kNullId}; }
  constexpr bool is_null() const { return id == kNullId; }

  friend constexpr bool operator==(Symbol, Symbol) = default;
};

struct TaState {
  std::uint8_t id = 0;
  friend constexpr bool operator==(TaState, TaState) = default;
};

// Square-wave temporal variable: days of P timesteps, each split into a
// day phase (theta = 0) and a night phase (theta = 1) of P/2 steps.
struct PeriodicTiming {
  int period = 10;  // P, even, >= 2
};

// Clock-threshold temporal variable: theta = 1 once more than `threshold`
// timesteps have passed since the last non-null input symbol.
struct RelativeTiming {
  int threshold = 5;          // tau >= 1
  double non_null_prob = 0.2; // p in (0, 1]
};

using TemporalVariableKind = std::variant<PeriodicTiming, RelativeTiming>;

bool is_relative(const TemporalVariableKind& kind);

// Deterministic finite automaton with a binary temporal variable selecting
// between two transition tables. Tables are total over alphabet x states;
// the null symbol is handled before table lookup and never indexes them.
class TimedAutomaton {
 public:
  TimedAutomaton(int alphabet_size, int state_count,
                 std::vector<TaState> delta0, std::vector<TaState> delta1,
                 TaState start_state, TemporalVariableKind temporal);

  // Two-state flipflop: symbol a (id 0) -> state 1 when theta = 0 and
  // state 2 when theta = 1; symbol b (id 1) -> state 2 always.
  static TimedAutomaton flipflop(TemporalVariableKind temporal);

  int alphabet_size() const { return alphabet_size_; }
  int state_count() const { return state_count_; }
  TaState start_state() const { return start_state_; }
  const TemporalVariableKind& temporal() const { return temporal_; }

  TaState table_lookup(int theta, Symbol c, TaState s) const;

  const std::vector<TaState>& delta0() const { return delta0_; }
  const std::vector<TaState>& delta1() const { return delta1_; }

 private:
  int alphabet_size_;
  int state_count_;
  std::vector<TaState> delta0_;  // alphabet_size x state_count, row per symbol
  std::vector<TaState> delta1_;
  TaState start_state_;
  TemporalVariableKind temporal_;
};

struct SequencePair {
  std::vector<Symbol> inputs;
  std::vector<TaState> targets;
};

struct Dataset {
  TimedAutomaton automaton;
  std::vector<SequencePair> examples;
  int sequence_length = 0;
  std::uint64_t seed = 0;
};

// theta for the periodic task: 0 if t mod P < P/2, else 1.
// Throws std::invalid_argument when P is odd or < 2.
int theta_periodic(long t, int period);

// theta for the relative task: 0 while the clock (timesteps since the last
// non-null symbol) is <= tau, 1 once it exceeds tau.
int theta_relative(long clock, int threshold);

// One transition: null is the identity; otherwise the theta-selected table.
// Throws std::invalid_argument for out-of-range symbols or states.
TaState step(const TimedAutomaton& ta, TaState s, Symbol c, int theta);

// Runs the recurrence y(t) = delta_theta(t)(u(t), y(t-1)) for t = 1..T.
// theta(t) uses the arrival time of the consumed symbol (periodic) or the
// clock value before consuming u(t) (relative); the clock starts at
// `initial_clock` and resets on non-null input. `start_time` offsets the
// periodic phase (t runs start_time, start_time+1, ...).
std::vector<TaState> run(const TimedAutomaton& ta,
                         std::span<const Symbol> inputs, long start_time = 1,
                         long initial_clock = 0);

// Random input sequence: uniform over the alphabet each step; in the
// relative task each step is non-null with probability p, else null.
std::vector<Symbol> generate_inputs(std::uint64_t seed, int length,
                                    const TemporalVariableKind& temporal,
                                    int alphabet_size);

// Supervised dataset; example i is generated from a per-example seed
// derived from (seed, i), so sharded generation is deterministic.
Dataset generate_dataset(const TimedAutomaton& ta, int n_examples, int length,
                         std::uint64_t seed);

// 1-hot symbol encoding (null -> zero vector). `out` must hold at least
// alphabet_size entries; larger alphabets than the vector width throw.
void encode_symbol(Symbol c, int alphabet_size, std::span<double> out);

// State index as the scalar regression target (state 1 -> 0.0, 2 -> 1.0).
double encode_state(TaState s);

}  // namespace taflab::ta
