#pragma once

// Synthetic multichannel recordings with planted traveling-wave events.
//
// Background is white or pink Gaussian noise per channel. Each event starts at
// a seed channel and spreads breadth-first along the planted directed graph:
// an edge u -> v with weight w fires with probability w, and v's arrival is
// u's arrival plus a uniform delay. A channel is reached at most once per
// event. Every reached channel carries the event waveform for the event's
// duration from its arrival, and those points are labeled positive.
//
// Waveform templates (tau = seconds since arrival, D = duration, f = jittered
// frequency, A = amplitude * attenuation^hops, g(u) = exp(-u^2 / 2)):
//   spike-train:  A * sum_n g((tau - (n + 0.5) / f) / 0.012)
//   spike-wave:   per cycle phase p = frac(tau * f):
//                 A * g((p / f - 0.05) / 0.012) - 0.4 A * sin(pi * (p - 0.15) / 0.85) for p > 0.15
//   hf-burst:     A * sin(2 pi f tau) * sin(pi tau / D)^2
// Spike-train and spike-wave carry 40 ms raised-cosine edge ramps.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "brainnet/matrix.hpp"
#include "brainnet/seeg_data.hpp"

namespace brainnet::synth {

enum class Waveform { kSpikeTrain, kSpikeAndWave, kHighFrequencyBurst };
enum class NoiseSpectrum { kWhite, kPink };

const char* to_string(Waveform w);
const char* to_string(NoiseSpectrum n);
Waveform parse_waveform(const std::string& s);
NoiseSpectrum parse_noise(const std::string& s);

struct ScenarioConfig {
  std::size_t n_channels = 8;
  std::size_t n_regions = 3;
  // Region of each channel; empty means contiguous, near-equal blocks.
  std::vector<std::size_t> region_assignment;
  // n_channels x n_channels weights in [0, 1]; empty means default_planted_graph().
  Matrix planted_graph;
  // Channels allowed to seed events; empty means all channels.
  std::vector<std::size_t> seed_channels;
  double event_rate_per_hour = 20.0;
  double event_duration_min = 1.0;  // seconds
  double event_duration_max = 2.0;
  double delay_min = 0.05;  // seconds per edge
  double delay_max = 0.25;
  Waveform waveform = Waveform::kSpikeAndWave;
  double event_amplitude = 4.0;  // in units of the noise standard deviation
  double hop_attenuation = 1.0;  // amplitude factor per propagation hop
  double frequency_jitter = 0.2;  // relative, uniform +/-
  NoiseSpectrum noise = NoiseSpectrum::kPink;
  double noise_amplitude = 1.0;  // standard deviation
  double sample_rate = 256.0;
  double duration_seconds = 600.0;
  std::uint64_t seed = 0;
};

// Empty region_assignment / planted_graph stay empty (defaults apply at use).
nlohmann::json to_json(const ScenarioConfig& config);
// Strict: unknown keys throw kInvalidConfig; absent keys keep defaults.
ScenarioConfig scenario_config_from_json(const nlohmann::json& j);

// Directed chain 0 -> 1 -> ... -> n-1 with weight 0.9 plus one skip edge per
// third channel with weight 0.6 (i -> i + 2 for i % 3 == 0).
Matrix default_planted_graph(std::size_t n_channels);

// Throws kInvalidConfig when the configuration violates its invariants.
void validate(const ScenarioConfig& config);
data::ChannelMap scenario_channel_map(const ScenarioConfig& config);

struct ChannelArrival {
  std::size_t channel = 0;
  std::size_t start = 0;  // first positive sample
  std::size_t end = 0;    // one past the last positive sample (clipped to the recording)
  std::size_t hops = 0;
};

struct Event {
  std::size_t seed_channel = 0;
  std::size_t onset = 0;
  double duration_seconds = 0.0;
  double frequency_hz = 0.0;
  double amplitude = 0.0;
  // Only channels reached inside the recording; absent channels did not arrive.
  std::vector<ChannelArrival> arrivals;
};

struct PlantedTruth {
  Matrix planted_graph;
  double sample_rate = 0.0;
  std::vector<Event> events;
};

struct Scenario {
  data::Recording recording;
  PlantedTruth truth;
};

// Deterministic in config.seed. Throws kSaturation when more than half of all
// points end up labeled positive.
Scenario generate(const ScenarioConfig& config);

// Background noise for one channel.
std::vector<double> make_noise(NoiseSpectrum spectrum, std::size_t n, double amplitude, std::uint64_t seed);

double waveform_value(Waveform w, double tau, double duration, double frequency, double amplitude);

// ---- structure recovery ---------------------------------------------------

struct SegmentWindow {
  std::size_t begin;  // first segment index (inclusive)
  std::size_t end;    // one past the last
};

// Segments of `segments` that overlap each event's full extent (earliest
// arrival start to latest arrival end). Events not overlapping are skipped.
std::vector<SegmentWindow> event_segment_windows(const PlantedTruth& truth, const data::SegmentSet& segments);

// For each window, averages the learned graphs over its segments and takes
// (mean weight on planted edges - mean weight on other off-diagonal pairs)
// divided by the largest off-diagonal weight; returns the mean over windows.
// The result lies in [-1, 1]. Throws kUndefinedScore for an empty window list.
double truth_alignment_score(std::span<const Matrix> graphs, const Matrix& planted_graph,
                             std::span<const SegmentWindow> windows);

// ---- truth sidecar --------------------------------------------------------

void store_truth(const PlantedTruth& truth, const std::filesystem::path& path);
PlantedTruth load_truth(const std::filesystem::path& path);

}  // namespace brainnet::synth
