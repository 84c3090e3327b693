#include "taflab/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace taflab::rnn {

namespace {

constexpr char kMagic[8] = {'T', 'F', 'C', 'K', '0', '0', '0', '1'};

template <typename T>
void write_raw(std::ostream& os, const T& value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_raw(std::istream& is) {
  T value{};
  is.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!is) throw std::runtime_error("checkpoint file truncated");
  return value;
}

void write_array(std::ostream& os, const std::vector<double>& a) {
  write_raw(os, static_cast<std::uint64_t>(a.size()));
  os.write(reinterpret_cast<const char*>(a.data()),
           static_cast<std::streamsize>(a.size() * sizeof(double)));
}

std::vector<double> read_array(std::istream& is) {
  const auto n = read_raw<std::uint64_t>(is);
  std::vector<double> a(n);
  is.read(reinterpret_cast<char*>(a.data()),
          static_cast<std::streamsize>(n * sizeof(double)));
  if (!is) throw std::runtime_error("checkpoint file truncated");
  return a;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os.write(kMagic, sizeof(kMagic));
  write_raw(os, static_cast<std::int64_t>(ckpt.iteration));
  write_raw(os, ckpt.run_seed);
  write_raw(os, static_cast<std::int64_t>(ckpt.stop_streak));
  write_raw(os, static_cast<std::int32_t>(ckpt.params.n_in));
  write_raw(os, static_cast<std::int32_t>(ckpt.params.n_h));
  write_raw(os, static_cast<std::int32_t>(ckpt.params.n_out));
  for (auto view : param_views(ckpt.params)) {
    write_raw(os, static_cast<std::uint64_t>(view.size));
    os.write(reinterpret_cast<const char*>(view.data),
             static_cast<std::streamsize>(view.size * sizeof(double)));
  }

  write_raw(os, ckpt.opt.learning_rate);
  if (const auto* adam = std::get_if<AdamState>(&ckpt.opt.state)) {
    write_raw(os, std::uint8_t{0});
    write_raw(os, static_cast<std::int64_t>(adam->step_count));
    write_raw(os, adam->beta1);
    write_raw(os, adam->beta2);
    write_raw(os, adam->eps);
    write_array(os, adam->m);
    write_array(os, adam->v);
  } else {
    const auto& rms = std::get<RmspropState>(ckpt.opt.state);
    write_raw(os, std::uint8_t{1});
    write_raw(os, rms.decay);
    write_raw(os, rms.eps);
    write_array(os, rms.mean_square);
  }

  write_raw(os, ckpt.loss);
  write_raw(os, ckpt.train_acc);
  write_raw(os, ckpt.td_acc);
  write_raw(os, ckpt.ti_acc);
  write_raw(os, ckpt.null_acc);
  write_raw(os, ckpt.test_acc);
  if (!os) throw std::runtime_error("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("not a checkpoint file: " + path);

  Checkpoint ckpt;
  ckpt.iteration = static_cast<long>(read_raw<std::int64_t>(is));
  ckpt.run_seed = read_raw<std::uint64_t>(is);
  ckpt.stop_streak = static_cast<long>(read_raw<std::int64_t>(is));
  ckpt.params.n_in = read_raw<std::int32_t>(is);
  ckpt.params.n_h = read_raw<std::int32_t>(is);
  ckpt.params.n_out = read_raw<std::int32_t>(is);
  for (auto view : {&ckpt.params.w_uh, &ckpt.params.w_hh, &ckpt.params.w_hy,
                    &ckpt.params.b_h, &ckpt.params.b_y, &ckpt.params.h0})
    *view = read_array(is);

  const double lr = read_raw<double>(is);
  const auto kind = read_raw<std::uint8_t>(is);
  if (kind == 0) {
    AdamState adam;
    adam.step_count = static_cast<long>(read_raw<std::int64_t>(is));
    adam.beta1 = read_raw<double>(is);
    adam.beta2 = read_raw<double>(is);
    adam.eps = read_raw<double>(is);
    adam.m = read_array(is);
    adam.v = read_array(is);
    ckpt.opt = OptimizerState{std::move(adam), lr};
  } else if (kind == 1) {
    RmspropState rms;
    rms.decay = read_raw<double>(is);
    rms.eps = read_raw<double>(is);
    rms.mean_square = read_array(is);
    ckpt.opt = OptimizerState{std::move(rms), lr};
  } else {
    throw std::runtime_error("unknown optimizer kind in " + path);
  }

  ckpt.loss = read_raw<double>(is);
  ckpt.train_acc = read_raw<double>(is);
  ckpt.td_acc = read_raw<double>(is);
  ckpt.ti_acc = read_raw<double>(is);
  ckpt.null_acc = read_raw<double>(is);
  ckpt.test_acc = read_raw<double>(is);
  return ckpt;
}

}  // namespace taflab::rnn
