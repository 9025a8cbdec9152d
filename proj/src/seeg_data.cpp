#include "brainnet/seeg_data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "brainnet/error.hpp"

namespace brainnet::data {

const char* to_string(Level level) {
  switch (level) {
    case Level::kChannel: return "channel";
    case Level::kRegion: return "region";
    case Level::kPatient: return "patient";
  }
  return "?";
}

Level parse_level(const std::string& name) {
  if (name == "channel") return Level::kChannel;
  if (name == "region") return Level::kRegion;
  if (name == "patient") return Level::kPatient;
  fail(ErrorCode::kInvalidConfig, "unknown level '" + name + "'");
}

ChannelMap::ChannelMap(std::vector<std::string> channels, std::vector<std::string> regions,
                       std::vector<std::size_t> assignment)
    : channels_(std::move(channels)), regions_(std::move(regions)), assignment_(std::move(assignment)) {
  require(!channels_.empty(), ErrorCode::kMapping, "channel map without channels");
  require(assignment_.size() == channels_.size(), ErrorCode::kMapping,
          "assignment covers " + std::to_string(assignment_.size()) + " of " +
              std::to_string(channels_.size()) + " channels");
  require(std::set<std::string>(channels_.begin(), channels_.end()).size() == channels_.size(),
          ErrorCode::kMapping, "duplicate channel identifier");
  require(std::set<std::string>(regions_.begin(), regions_.end()).size() == regions_.size(),
          ErrorCode::kMapping, "duplicate region identifier");
  members_.assign(regions_.size(), {});
  for (std::size_t c = 0; c < channels_.size(); ++c) {
    require(assignment_[c] < regions_.size(), ErrorCode::kMapping,
            "channel '" + channels_[c] + "' maps to unknown region " + std::to_string(assignment_[c]));
    members_[assignment_[c]].push_back(c);
  }
  for (std::size_t b = 0; b < regions_.size(); ++b)
    require(!members_[b].empty(), ErrorCode::kMapping, "region '" + regions_[b] + "' has no channels");
}

Recording::Recording(std::vector<float> samples, std::vector<std::uint8_t> labels, double sample_rate,
                     ChannelMap channel_map, std::string provenance)
    : samples_(std::move(samples)),
      labels_(std::move(labels)),
      sample_rate_(sample_rate),
      channel_map_(std::move(channel_map)),
      provenance_(std::move(provenance)) {
  const std::size_t nc = channel_map_.n_channels();
  require(nc > 0, ErrorCode::kDataValidation, "recording without channels");
  require(samples_.size() % nc == 0 && !samples_.empty(), ErrorCode::kDataValidation,
          "sample count is not a positive multiple of the channel count");
  require(labels_.size() == samples_.size(), ErrorCode::kDataValidation, "label and sample arrays differ in size");
  require(sample_rate_ > 0.0 && std::isfinite(sample_rate_), ErrorCode::kDataValidation, "sample rate must be positive");
  if (!provenance_.empty()) {
    try {
      provenance_ = nlohmann::json::parse(provenance_).dump();
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::kDataValidation, std::string("provenance is not valid JSON: ") + e.what());
    }
  }
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    require(std::isfinite(samples_[i]), ErrorCode::kDataValidation,
            "non-finite sample at point " + std::to_string(i / nc) + ", channel " + std::to_string(i % nc));
    require(labels_[i] <= 1, ErrorCode::kDataValidation,
            "non-binary label at point " + std::to_string(i / nc) + ", channel " + std::to_string(i % nc));
  }
}

double Recording::positive_ratio() const {
  if (labels_.empty()) return 0.0;
  std::size_t pos = 0;
  for (auto v : labels_) pos += v;
  return static_cast<double>(pos) / static_cast<double>(labels_.size());
}

std::size_t segment_count(std::size_t n_points, const SegmentationConfig& config) {
  require(config.window >= 1 && config.stride >= 1, ErrorCode::kInvalidConfig, "window and stride must be >= 1");
  require(config.window <= n_points, ErrorCode::kInvalidConfig,
          "window of " + std::to_string(config.window) + " points exceeds recording of " +
              std::to_string(n_points));
  return (n_points - config.window) / config.stride + 1;
}

HierarchyLabels build_hierarchy_labels(const BinaryMatrix& channel_labels, const ChannelMap& map) {
  require(channel_labels.cols == map.n_channels(), ErrorCode::kMapping,
          "labels carry " + std::to_string(channel_labels.cols) + " channels, map has " +
              std::to_string(map.n_channels()));
  HierarchyLabels out{BinaryMatrix(channel_labels.rows, map.n_regions()),
                      std::vector<std::uint8_t>(channel_labels.rows, 0)};
  for (std::size_t t = 0; t < channel_labels.rows; ++t) {
    for (std::size_t c = 0; c < channel_labels.cols; ++c) {
      const std::uint8_t y = channel_labels(t, c);
      require(y <= 1, ErrorCode::kDataValidation, "non-binary channel label");
      out.region(t, map.region_of(c)) |= y;
    }
    for (std::size_t b = 0; b < map.n_regions(); ++b) out.patient[t] |= out.region(t, b);
  }
  return out;
}

SegmentSet::SegmentSet(std::vector<float> data, BinaryMatrix channel_labels, SegmentationConfig config,
                       ChannelMap channel_map, double sample_rate, std::size_t origin)
    : data_(std::move(data)),
      channel_labels_(std::move(channel_labels)),
      config_(config),
      channel_map_(std::move(channel_map)),
      sample_rate_(sample_rate),
      origin_(origin) {
  require(data_.size() == channel_labels_.rows * channel_labels_.cols * config_.window, ErrorCode::kShape,
          "segment data size does not match |S| x |C| x k");
  hierarchy_ = build_hierarchy_labels(channel_labels_, channel_map_);
  patient_matrix_ = BinaryMatrix(hierarchy_.patient.size(), 1);
  patient_matrix_.values = hierarchy_.patient;
}

const BinaryMatrix& SegmentSet::labels(Level level) const {
  switch (level) {
    case Level::kChannel: return channel_labels_;
    case Level::kRegion: return hierarchy_.region;
    case Level::kPatient: return patient_matrix_;
  }
  return channel_labels_;
}

SegmentSet SegmentSet::span(std::size_t begin, std::size_t count) const {
  require(begin + count <= size(), ErrorCode::kInvalidConfig,
          "span [" + std::to_string(begin) + ", " + std::to_string(begin + count) + ") exceeds " +
              std::to_string(size()) + " segments");
  const std::size_t per = n_channels() * config_.window;
  std::vector<float> data(data_.begin() + static_cast<std::ptrdiff_t>(begin * per),
                          data_.begin() + static_cast<std::ptrdiff_t>((begin + count) * per));
  BinaryMatrix labels(count, n_channels());
  std::copy_n(channel_labels_.values.begin() + static_cast<std::ptrdiff_t>(begin * n_channels()),
              count * n_channels(), labels.values.begin());
  return SegmentSet(std::move(data), std::move(labels), config_, channel_map_, sample_rate_, origin_ + begin);
}

SegmentSet segment(const Recording& recording, const SegmentationConfig& config) {
  const std::size_t n = segment_count(recording.n_points(), config);
  const std::size_t nc = recording.n_channels();
  std::vector<float> data(n * nc * config.window);
  BinaryMatrix labels(n, nc);
  for (std::size_t t = 0; t < n; ++t) {
    const std::size_t start = t * config.stride;
    for (std::size_t c = 0; c < nc; ++c) {
      float* dst = data.data() + (t * nc + c) * config.window;
      std::uint8_t y = 0;
      for (std::size_t i = 0; i < config.window; ++i) {
        dst[i] = recording.sample(start + i, c);
        y = std::max(y, recording.label(start + i, c));
      }
      labels(t, c) = y;
    }
  }
  return SegmentSet(std::move(data), std::move(labels), config, recording.channel_map(), recording.sample_rate());
}

Ratio parse_ratio(const std::string& text) {
  const auto colon = text.find(':');
  Ratio r{};
  auto parse = [&](std::string_view s, std::size_t& out) {
    auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc() && res.ptr == s.data() + s.size();
  };
  const bool ok = colon != std::string::npos &&
                  parse(std::string_view(text).substr(0, colon), r.positive) &&
                  parse(std::string_view(text).substr(colon + 1), r.negative);
  require(ok && r.positive > 0 && r.negative > 0, ErrorCode::kInvalidConfig,
          "ratio '" + text + "' is not of the form P:N with positive integers");
  return r;
}

std::string to_string(const Ratio& ratio) {
  return std::to_string(ratio.positive) + ":" + std::to_string(ratio.negative);
}

std::size_t EvalSample::n_positive() const {
  std::size_t n = 0;
  for (auto y : labels) n += y;
  return n;
}

namespace {

void split_units(const SegmentSet& segments, Level level, std::vector<EvalUnit>& pos, std::vector<EvalUnit>& neg) {
  const BinaryMatrix& y = segments.labels(level);
  for (std::size_t t = 0; t < y.rows; ++t)
    for (std::size_t n = 0; n < y.cols; ++n) (y(t, n) ? pos : neg).push_back({t, n});
}

std::size_t negatives_for(std::size_t count_positive, Ratio ratio) {
  require(count_positive % ratio.positive == 0, ErrorCode::kSamplingInfeasible,
          "positive count " + std::to_string(count_positive) + " is not a multiple of ratio " + to_string(ratio));
  return count_positive / ratio.positive * ratio.negative;
}

}  // namespace

std::size_t max_feasible_positives(const SegmentSet& segments, Ratio ratio, Level level) {
  std::vector<EvalUnit> pos, neg;
  split_units(segments, level, pos, neg);
  const std::size_t by_neg = neg.size() / ratio.negative * ratio.positive;
  const std::size_t n = std::min(pos.size(), by_neg);
  return n - n % ratio.positive;
}

EvalSample sample_eval_set(const SegmentSet& segments, Ratio ratio, std::size_t count_positive, std::uint64_t seed,
                           Level level) {
  require(count_positive > 0, ErrorCode::kSamplingInfeasible, "requested zero positives");
  std::vector<EvalUnit> pos, neg;
  split_units(segments, level, pos, neg);
  const std::size_t count_negative = negatives_for(count_positive, ratio);
  require(pos.size() >= count_positive, ErrorCode::kSamplingInfeasible,
          "need " + std::to_string(count_positive) + " positives at " + to_string(level) + " level, have " +
              std::to_string(pos.size()) + " (short by " + std::to_string(count_positive - pos.size()) + ")");
  require(neg.size() >= count_negative, ErrorCode::kSamplingInfeasible,
          "need " + std::to_string(count_negative) + " negatives at " + to_string(level) + " level for ratio " +
              to_string(ratio) + ", have " + std::to_string(neg.size()) + " (short by " +
              std::to_string(count_negative - neg.size()) + ")");

  std::mt19937_64 rng(seed);
  EvalSample out;
  out.level = level;
  out.ratio = ratio;
  std::vector<EvalUnit> chosen;
  std::sample(pos.begin(), pos.end(), std::back_inserter(chosen), count_positive, rng);
  std::sample(neg.begin(), neg.end(), std::back_inserter(chosen), count_negative, rng);
  std::sort(chosen.begin(), chosen.end());
  const BinaryMatrix& y = segments.labels(level);
  out.units = std::move(chosen);
  out.labels.reserve(out.units.size());
  for (const EvalUnit& u : out.units) out.labels.push_back(y(u.segment, u.node));
  return out;
}

}  // namespace brainnet::data
