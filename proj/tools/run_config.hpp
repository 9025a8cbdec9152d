#pragma once

// Experiment configuration file: one JSON object with optional sections.
// Precedence is defaults < file < command-line flags. A top-level "seed"
// (or --seed) replaces every component seed.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "brainnet/bcpc.hpp"
#include "brainnet/hierarchy.hpp"
#include "brainnet/seeg_data.hpp"
#include "brainnet/synthgen.hpp"
#include "brainnet/trainer_eval.hpp"

namespace brainnet::cli {

// Contiguous train / valid / test ranges of the segmentation, separated by
// `gap` segments. A count of 0 falls back to the fraction.
struct SplitConfig {
  std::size_t train_segments = 0;
  std::size_t valid_segments = 0;
  double train_fraction = 0.6;
  double valid_fraction = 0.1;
  std::size_t gap = 2;
};

struct PretrainSection {
  bcpc::PretrainConfig config{};
  std::size_t max_train_segments = 8000;  // normal one-channel segments drawn from train
  std::size_t max_valid_segments = 512;
};

struct SweepConfig {
  std::vector<double> theta_inner;  // empty: sweep::default_grid()
  std::vector<double> theta_cross;
  std::string ratio = "1:50";
};

struct RunConfig {
  std::optional<std::uint64_t> seed;
  synth::ScenarioConfig scenario{};
  // window 0: the BCPC segment length; stride 0: half the window.
  data::SegmentationConfig segmentation{};
  SplitConfig split{};
  hier::ModelConfig model{};
  PretrainSection pretrain{};
  train::TrainConfig train{};
  train::EvalConfig eval{};
  SweepConfig sweep{};
  std::string output;  // empty: $BRAINNET_OUT, else "runs"
};

RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& config);
// kIo when the file cannot be read, kInvalidConfig on malformed content.
RunConfig load_run_config(const std::filesystem::path& path);

// Replaces every component seed.
void apply_seed(RunConfig& config, std::uint64_t seed);
// Fills derived defaults (segmentation, sweep grids) and validates sections.
void resolve(RunConfig& config);

std::filesystem::path output_root(const RunConfig& config);

struct SplitRanges {
  std::size_t train_begin, train_count;
  std::size_t valid_begin, valid_count;
  std::size_t test_begin, test_count;
};
SplitRanges split_ranges(const SplitConfig& split, std::size_t n_segments);

}  // namespace brainnet::cli
