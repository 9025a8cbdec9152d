#pragma once

// Grid search over the inner-time and cross-time diffusion thresholds.

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "brainnet/trainer_eval.hpp"

namespace brainnet::sweep {

std::vector<double> default_grid();  // {0.05, 0.1, 0.3, 0.6}

struct SweepPoint {
  double theta_inner = 0.0;
  double theta_cross = 0.0;
  train::MetricsReport report;
  double channel_f2 = 0.0;  // percent, at the sweep ratio
  double channel_auc = 0.0;
  // Channel-level test graphs of the model trained at this point, both directions.
  std::size_t cross_edges = 0;
  std::size_t inner_edges = 0;
  double cross_density = 0.0;  // edges / possible entries
  double inner_density = 0.0;
};

struct SweepResult {
  std::vector<double> grid_inner;
  std::vector<double> grid_cross;
  std::vector<SweepPoint> points;  // inner-major
  data::Ratio ratio{1, 50};
  // Edge counts obtained by re-thresholding the fixed pre-threshold scores of
  // the base model (the default-threshold point when present, else the first).
  std::size_t base_index = 0;
  std::vector<std::size_t> base_cross_edges;  // per grid_cross value
  std::vector<std::size_t> base_inner_edges;  // per grid_inner value
  std::size_t best_index = 0;
  bool best_interior = false;
  std::string best_location;

  const SweepPoint& at(std::size_t i_inner, std::size_t i_cross) const {
    return points[i_inner * grid_cross.size() + i_cross];
  }
};

// Trains and evaluates one model per grid point. Grids must be nonempty and
// strictly increasing.
SweepResult sweep_thresholds(const bcpc::BcpcModel& pretrained, const data::SegmentSet& train_set,
                             const data::SegmentSet& valid_set, const data::SegmentSet& test_set,
                             const hier::ModelConfig& model_config, const train::TrainConfig& train_config,
                             const train::EvalConfig& eval_config, const std::vector<double>& grid_inner,
                             const std::vector<double>& grid_cross, data::Ratio ratio = {1, 50});

// One row per grid point plus the base-model edge counts.
void write_sweep_csv(const SweepResult& result, const std::filesystem::path& path);

}  // namespace brainnet::sweep
