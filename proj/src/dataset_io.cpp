#include "taflab/dataset_io.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace taflab::ta {

namespace {

constexpr char kMagic[8] = {'T', 'F', 'D', 'S', '0', '0', '0', '1'};

template <typename T>
void write_raw(std::ostream& os, const T& value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_raw(std::istream& is) {
  T value{};
  is.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!is) throw std::runtime_error("dataset file truncated");
  return value;
}

void write_table(std::ostream& os, const std::vector<TaState>& table) {
  for (TaState s : table) write_raw(os, s.id);
}

std::vector<TaState> read_table(std::istream& is, std::size_t n) {
  std::vector<TaState> table(n);
  for (auto& s : table) s.id = read_raw<std::uint8_t>(is);
  return table;
}

}  // namespace

void save_dataset(const std::string& path, const Dataset& dataset) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os.write(kMagic, sizeof(kMagic));

  const auto& ta = dataset.automaton;
  const std::uint8_t kind = is_relative(ta.temporal()) ? 1 : 0;
  write_raw(os, kind);
  if (kind == 0) {
    write_raw(os, static_cast<std::int32_t>(
                      std::get<PeriodicTiming>(ta.temporal()).period));
    write_raw(os, std::int32_t{0});
    write_raw(os, double{0});
  } else {
    const auto& rel = std::get<RelativeTiming>(ta.temporal());
    write_raw(os, std::int32_t{0});
    write_raw(os, static_cast<std::int32_t>(rel.threshold));
    write_raw(os, rel.non_null_prob);
  }
  write_raw(os, static_cast<std::int32_t>(ta.alphabet_size()));
  write_raw(os, static_cast<std::int32_t>(ta.state_count()));
  write_raw(os, ta.start_state().id);
  write_table(os, ta.delta0());
  write_table(os, ta.delta1());

  write_raw(os, static_cast<std::int32_t>(dataset.sequence_length));
  write_raw(os, dataset.seed);
  write_raw(os, static_cast<std::int64_t>(dataset.examples.size()));
  for (const auto& ex : dataset.examples) {
    if (static_cast<int>(ex.inputs.size()) != dataset.sequence_length ||
        static_cast<int>(ex.targets.size()) != dataset.sequence_length)
      throw std::runtime_error("dataset example length mismatch");
    for (Symbol c : ex.inputs) write_raw(os, c.id);
    for (TaState s : ex.targets) write_raw(os, s.id);
  }
  if (!os) throw std::runtime_error("write failed: " + path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("not a dataset file: " + path);

  const auto kind = read_raw<std::uint8_t>(is);
  const auto period = read_raw<std::int32_t>(is);
  const auto threshold = read_raw<std::int32_t>(is);
  const auto non_null_prob = read_raw<double>(is);
  TemporalVariableKind temporal =
      kind == 0 ? TemporalVariableKind{PeriodicTiming{period}}
                : TemporalVariableKind{RelativeTiming{threshold, non_null_prob}};

  const auto alphabet_size = read_raw<std::int32_t>(is);
  const auto state_count = read_raw<std::int32_t>(is);
  TaState start{read_raw<std::uint8_t>(is)};
  const std::size_t table_size =
      static_cast<std::size_t>(alphabet_size) * state_count;
  auto delta0 = read_table(is, table_size);
  auto delta1 = read_table(is, table_size);
  TimedAutomaton ta(alphabet_size, state_count, std::move(delta0),
                    std::move(delta1), start, std::move(temporal));

  const auto sequence_length = read_raw<std::int32_t>(is);
  const auto seed = read_raw<std::uint64_t>(is);
  const auto n_examples = read_raw<std::int64_t>(is);
  if (sequence_length < 1 || n_examples < 0)
    throw std::runtime_error("corrupt dataset header: " + path);

  Dataset ds{std::move(ta), {}, sequence_length, seed};
  ds.examples.resize(n_examples);
  for (auto& ex : ds.examples) {
    ex.inputs.resize(sequence_length);
    ex.targets.resize(sequence_length);
    for (auto& c : ex.inputs) c.id = read_raw<std::uint8_t>(is);
    for (auto& s : ex.targets) s.id = read_raw<std::uint8_t>(is);
  }
  return ds;
}

}  // namespace taflab::ta
