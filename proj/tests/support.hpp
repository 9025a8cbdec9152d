#pragma once

// Small configurations and helpers shared by the unit tests.

#include <atomic>
#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>

#include "brainnet/bcpc.hpp"
#include "brainnet/hierarchy.hpp"
#include "brainnet/seeg_data.hpp"
#include "brainnet/synthgen.hpp"
#include "brainnet/trainer_eval.hpp"

namespace testing {

namespace fs = std::filesystem;
using namespace brainnet;

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("brainnet_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline bcpc::BcpcConfig tiny_bcpc() {
  bcpc::BcpcConfig c;
  c.local_window = 4;
  c.n_positions = 6;
  c.d_local = 5;
  c.d_context = 6;
  c.d_repr = 4;
  c.horizon = 2;
  c.n_negatives = 3;
  c.encoder_strides = {2, 2};
  c.encoder_width = 3;
  c.n_layers = 1;
  c.n_heads = 2;
  c.ff_width = 8;
  return c;
}

inline synth::ScenarioConfig tiny_scenario(std::uint64_t seed = 3) {
  synth::ScenarioConfig c;
  c.n_channels = 4;
  c.n_regions = 2;
  c.event_rate_per_hour = 600.0;
  c.sample_rate = 128.0;
  c.duration_seconds = 60.0;
  c.seed = seed;
  return c;
}

inline data::ChannelMap tiny_map() {
  return data::ChannelMap({"A1", "A2", "B1", "B2", "B3"}, {"A", "B"}, {0, 0, 1, 1, 1});
}

// Segments of a tiny scenario sized for tiny_bcpc().
inline data::SegmentSet tiny_segments(std::uint64_t seed = 3) {
  const synth::Scenario s = synth::generate(tiny_scenario(seed));
  const std::size_t k = tiny_bcpc().segment_length();
  return data::segment(s.recording, {k, k / 2});
}

inline hier::ModelConfig tiny_model_config() {
  hier::ModelConfig m;
  m.bcpc = tiny_bcpc();
  m.discriminator_hidden = 6;
  return m;
}

inline train::TrainConfig tiny_train_config() {
  train::TrainConfig t;
  t.epochs = 2;
  t.window_len = 6;
  t.batch_windows = 2;
  t.patience = 0;
  t.seed = 5;
  return t;
}

}  // namespace testing
