#pragma once

// Detection training, ratio-stratified evaluation and metric reports.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "brainnet/bcpc.hpp"
#include "brainnet/error.hpp"
#include "brainnet/hierarchy.hpp"
#include "brainnet/optim.hpp"
#include "brainnet/seeg_data.hpp"

namespace brainnet::train {

// ---- metrics ---------------------------------------------------------------------

// (1 + b^2) P R / (b^2 P + R); 0 when P = R = 0.
double f_beta(double precision, double recall, double beta);

// Probability that a random positive outscores a random negative, ties
// counted half. Throws kUndefinedMetric unless both classes are present.
double auc(std::span<const double> scores, std::span<const std::uint8_t> labels);

struct Confusion {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

// A unit is predicted positive iff its score is strictly greater than threshold.
Confusion confusion(std::span<const double> scores, std::span<const std::uint8_t> labels, double threshold = 0.5);
// 0 when the denominator is 0.
double precision(const Confusion& c);
double recall(const Confusion& c);

// ---- configuration ----------------------------------------------------------------

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_windows = 2;  // contiguous windows per optimiser step
  std::size_t window_len = 16;    // |S| per training window
  optim::AdamConfig adam{};
  bool cosine_decay = true;
  std::uint64_t seed = 0;
  bool freeze_encoder = false;
  hier::Ablations ablations{};
  // Epochs without improvement of validation channel F2 before stopping; 0 disables.
  std::size_t patience = 5;
};

nlohmann::json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j);

// ---- prediction ---------------------------------------------------------------------

// Per level, |S| x nodes probabilities. Segments are processed in consecutive
// windows of window_len (the last may be shorter), each starting from the
// virtual node set.
using LevelScores = std::array<Matrix, 3>;
LevelScores predict_segments(hier::BrainNetModel& model, const data::SegmentSet& segments, std::size_t window_len);

// Learned graphs over a segment set, windowed like predict_segments.
// Indexed [level][direction][segment]; direction 0 = forward, 1 = reverse.
struct GraphTrace {
  std::array<std::array<std::vector<Matrix>, 2>, 3> cross;
  std::array<std::array<std::vector<Matrix>, 2>, 3> inner;
  std::array<std::array<std::vector<Matrix>, 2>, 3> cross_scores;  // pre-threshold
  std::array<std::array<std::vector<Matrix>, 2>, 3> inner_scores;
};
GraphTrace trace_graphs(hier::BrainNetModel& model, const data::SegmentSet& segments, std::size_t window_len);

// ---- training --------------------------------------------------------------------

struct EpochRecord {
  std::size_t epoch;
  double train_loss;  // mean joint loss per channel unit
  double valid_loss;
  double valid_channel_f2;  // fraction, threshold 0.5
  double learning_rate;
};

struct TrainResult {
  hier::BrainNetModel model;
  std::vector<EpochRecord> curve;
  std::size_t best_epoch = 0;  // 0 = initialization
};

// Raised on a non-finite loss; carries the last finite model state.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& msg, Checkpoint last_good)
      : Error(ErrorCode::kDivergence, msg), last_good_(std::move(last_good)) {}
  const Checkpoint& last_good() const { return last_good_; }

 private:
  Checkpoint last_good_;
};

// Builds the detection model around `pretrained` (or a fresh encoder under
// no_bcpc) and optimises the joint loss on contiguous windows of `train_set`.
// Keeps the state with the best validation channel F2 (ties: lower loss).
TrainResult train(const bcpc::BcpcModel& pretrained, const data::SegmentSet& train_set,
                  const data::SegmentSet& valid_set, const hier::ModelConfig& model_config,
                  const TrainConfig& config);

void write_curve_csv(const std::vector<EpochRecord>& curve, const std::filesystem::path& path);
void write_pretrain_curve_csv(const std::vector<bcpc::CurvePoint>& curve, const std::filesystem::path& path);

// ---- evaluation -------------------------------------------------------------------

struct EvalConfig {
  std::vector<data::Ratio> ratios{{1, 5}, {1, 50}, {1, 500}};
  std::uint64_t seed = 0;
  std::size_t window_len = 16;
  // Positives per sampled set; 0 takes the largest feasible count.
  std::size_t count_positive = 0;
  double threshold = 0.5;
};

struct Metrics {
  data::Level level = data::Level::kChannel;
  data::Ratio ratio{};
  bool available = false;  // false when the ratio cannot be sampled
  std::string note;
  // Percent scale.
  double precision = 0.0, recall = 0.0, f1 = 0.0, f2 = 0.0, auc = 0.0;
  Confusion confusion;
  std::size_t n_positive = 0, n_negative = 0;
};

// Metrics of one sampled set given per-level scores.
Metrics score_sample(const LevelScores& scores, const data::EvalSample& sample, double threshold = 0.5);

enum class Averaging {
  kMetricMean,  // mean of per-run metrics
  kPooled,      // metrics from summed confusion counts; AUC is the mean of run AUCs
};
const char* to_string(Averaging a);
Averaging parse_averaging(const std::string& s);

struct MetricsReport {
  std::vector<Metrics> entries;  // level-major, then ratio
  nlohmann::json metadata = nlohmann::json::object();

  const Metrics& at(data::Level level, const data::Ratio& ratio) const;
};

MetricsReport evaluate(hier::BrainNetModel& model, const data::SegmentSet& test_set, const EvalConfig& config);
MetricsReport evaluate_scores(const LevelScores& scores, const data::SegmentSet& test_set, const EvalConfig& config);

// Combines reports with identical (level, ratio) layouts.
MetricsReport average_reports(std::span<const MetricsReport> reports, Averaging mode);

nlohmann::json to_json(const MetricsReport& report);
MetricsReport report_from_json(const nlohmann::json& j);
void store_report(const MetricsReport& report, const std::filesystem::path& path);
MetricsReport load_report(const std::filesystem::path& path);
// Levels x ratios x metrics grid.
std::string format_table(const MetricsReport& report);

// 64-bit FNV-1a of the compact JSON dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& config);

}  // namespace brainnet::train
