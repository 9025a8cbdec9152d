#pragma once

// Multichannel recordings, sliding-window segmentation and the three label
// levels (channel, region, patient).
//
// Index conventions: segment t (0-based in storage) covers raw points
// [t * stride, t * stride + window) -- the 1-based segment t+1 of the
// textbook formula. Trailing points not covered by a full window are dropped.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace brainnet::data {

enum class Level { kChannel, kRegion, kPatient };

const char* to_string(Level level);
Level parse_level(const std::string& name);

class ChannelMap {
 public:
  ChannelMap() = default;
  // assignment[c] is the region index of channel c. Throws kMapping when a
  // channel has no valid region or a region has no channel.
  ChannelMap(std::vector<std::string> channels, std::vector<std::string> regions,
             std::vector<std::size_t> assignment);

  std::size_t n_channels() const { return channels_.size(); }
  std::size_t n_regions() const { return regions_.size(); }
  const std::vector<std::string>& channels() const { return channels_; }
  const std::vector<std::string>& regions() const { return regions_; }
  const std::vector<std::size_t>& assignment() const { return assignment_; }
  std::size_t region_of(std::size_t channel) const { return assignment_.at(channel); }
  const std::vector<std::size_t>& members(std::size_t region) const { return members_.at(region); }
  const std::vector<std::vector<std::size_t>>& all_members() const { return members_; }

  bool operator==(const ChannelMap& o) const {
    return channels_ == o.channels_ && regions_ == o.regions_ && assignment_ == o.assignment_;
  }

 private:
  std::vector<std::string> channels_;
  std::vector<std::string> regions_;
  std::vector<std::size_t> assignment_;
  std::vector<std::vector<std::size_t>> members_;
};

// Row-major 0/1 matrix.
struct BinaryMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> values;

  BinaryMatrix() = default;
  BinaryMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), values(r * c, 0) {}
  std::uint8_t operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  std::uint8_t& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  bool operator==(const BinaryMatrix&) const = default;
};

class Recording {
 public:
  Recording() = default;
  // samples and labels are time-major: index t * n_channels + c.
  // Throws kDataValidation on non-finite samples, non-binary labels or
  // inconsistent sizes.
  Recording(std::vector<float> samples, std::vector<std::uint8_t> labels, double sample_rate,
            ChannelMap channel_map, std::string provenance = {});

  std::size_t n_points() const { return channel_map_.n_channels() ? samples_.size() / channel_map_.n_channels() : 0; }
  std::size_t n_channels() const { return channel_map_.n_channels(); }
  float sample(std::size_t t, std::size_t c) const { return samples_[t * n_channels() + c]; }
  std::uint8_t label(std::size_t t, std::size_t c) const { return labels_[t * n_channels() + c]; }
  const std::vector<float>& samples() const { return samples_; }
  const std::vector<std::uint8_t>& labels() const { return labels_; }
  double sample_rate() const { return sample_rate_; }
  const ChannelMap& channel_map() const { return channel_map_; }
  // Generator provenance as JSON text; empty when unknown.
  const std::string& provenance() const { return provenance_; }
  double positive_ratio() const;

  bool operator==(const Recording&) const = default;

 private:
  std::vector<float> samples_;
  std::vector<std::uint8_t> labels_;
  double sample_rate_ = 0.0;
  ChannelMap channel_map_;
  std::string provenance_;
};

struct SegmentationConfig {
  std::size_t window = 0;  // k, points per segment
  std::size_t stride = 0;  // l, points between segment starts
  bool operator==(const SegmentationConfig&) const = default;
};

// floor((n_points - window) / stride) + 1; throws kInvalidConfig when the
// window does not fit.
std::size_t segment_count(std::size_t n_points, const SegmentationConfig& config);

struct HierarchyLabels {
  BinaryMatrix region;              // |S| x |B|
  std::vector<std::uint8_t> patient;  // |S|
};

class SegmentSet {
 public:
  SegmentSet() = default;
  SegmentSet(std::vector<float> data, BinaryMatrix channel_labels, SegmentationConfig config,
             ChannelMap channel_map, double sample_rate, std::size_t origin = 0);

  std::size_t size() const { return channel_labels_.rows; }
  std::size_t n_channels() const { return channel_map_.n_channels(); }
  std::size_t window() const { return config_.window; }

  // k raw points of segment t, channel c.
  const float* segment(std::size_t t, std::size_t c) const {
    return data_.data() + (t * n_channels() + c) * config_.window;
  }
  const std::vector<float>& data() const { return data_; }
  const BinaryMatrix& channel_labels() const { return channel_labels_; }
  const BinaryMatrix& region_labels() const { return hierarchy_.region; }
  const std::vector<std::uint8_t>& patient_labels() const { return hierarchy_.patient; }
  const BinaryMatrix& labels(Level level) const;
  const SegmentationConfig& config() const { return config_; }
  const ChannelMap& channel_map() const { return channel_map_; }
  double sample_rate() const { return sample_rate_; }
  // Index of segment 0 within the segmentation of the source recording.
  std::size_t origin() const { return origin_; }
  // First raw point (of the source recording) covered by segment t.
  std::size_t start_point(std::size_t t) const { return (origin_ + t) * config_.stride; }

  // Contiguous sub-range, keeping provenance via origin().
  SegmentSet span(std::size_t begin, std::size_t count) const;

  bool operator==(const SegmentSet& o) const {
    return data_ == o.data_ && channel_labels_ == o.channel_labels_ && config_ == o.config_ &&
           channel_map_ == o.channel_map_ && sample_rate_ == o.sample_rate_ && origin_ == o.origin_;
  }

 private:
  std::vector<float> data_;
  BinaryMatrix channel_labels_;
  HierarchyLabels hierarchy_;
  BinaryMatrix patient_matrix_;
  SegmentationConfig config_;
  ChannelMap channel_map_;
  double sample_rate_ = 0.0;
  std::size_t origin_ = 0;
};

SegmentSet segment(const Recording& recording, const SegmentationConfig& config);

// Region label = OR over member channels; patient label = OR over regions.
HierarchyLabels build_hierarchy_labels(const BinaryMatrix& channel_labels, const ChannelMap& map);

struct Ratio {
  std::size_t positive = 1;
  std::size_t negative = 1;
  bool operator==(const Ratio&) const = default;
};

// Parses "1:50".
Ratio parse_ratio(const std::string& text);
std::string to_string(const Ratio& ratio);

struct EvalUnit {
  std::size_t segment;
  std::size_t node;  // channel, region, or 0 for the patient level
  bool operator==(const EvalUnit&) const = default;
  auto operator<=>(const EvalUnit&) const = default;
};

// A ratio-controlled subset of the (segment, node) units of one level.
struct EvalSample {
  Level level = Level::kChannel;
  Ratio ratio;
  std::vector<EvalUnit> units;  // sorted by (segment, node)
  std::vector<std::uint8_t> labels;
  std::size_t n_positive() const;
};

// Draws exactly count_positive positives and count_positive * negative /
// positive negatives without replacement; deterministic in seed. Throws
// kSamplingInfeasible naming the shortfall.
EvalSample sample_eval_set(const SegmentSet& segments, Ratio ratio, std::size_t count_positive,
                           std::uint64_t seed, Level level = Level::kChannel);

// Largest positive count for which sample_eval_set is feasible.
std::size_t max_feasible_positives(const SegmentSet& segments, Ratio ratio, Level level);

// ---- persistence ----------------------------------------------------------
//
// Little-endian layout:
//   "BNSEEG\0\0"         8-byte magic
//   u32 format version   (currently 1)
//   u32 kind             1 = recording, 2 = segment set
//   u64 total file size in bytes
//   u64 metadata length, followed by that many bytes of JSON metadata
//   array blocks: u32 tag, u32 element type (1 = f32, 2 = u8), u64 count, payload
//   u32 CRC-32 of every preceding byte
// A pretty-printed copy of the metadata is written to <path>.meta.json.

inline constexpr std::uint32_t kFormatVersion = 1;

void store(const Recording& recording, const std::filesystem::path& path);
void store(const SegmentSet& segments, const std::filesystem::path& path);
Recording load_recording(const std::filesystem::path& path);
SegmentSet load_segments(const std::filesystem::path& path);

}  // namespace brainnet::data
