#include "brainnet/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <numbers>
#include <random>

#include <nlohmann/json.hpp>

#include "brainnet/error.hpp"
#include "json_fields.hpp"

namespace brainnet::synth {

using nlohmann::json;

const char* to_string(Waveform w) {
  switch (w) {
    case Waveform::kSpikeTrain: return "spike-train";
    case Waveform::kSpikeAndWave: return "spike-and-wave";
    case Waveform::kHighFrequencyBurst: return "high-frequency-burst";
  }
  return "?";
}

const char* to_string(NoiseSpectrum n) { return n == NoiseSpectrum::kWhite ? "white" : "pink"; }

Waveform parse_waveform(const std::string& s) {
  if (s == "spike-train") return Waveform::kSpikeTrain;
  if (s == "spike-and-wave") return Waveform::kSpikeAndWave;
  if (s == "high-frequency-burst") return Waveform::kHighFrequencyBurst;
  fail(ErrorCode::kInvalidConfig, "unknown waveform '" + s + "'");
}

NoiseSpectrum parse_noise(const std::string& s) {
  if (s == "white") return NoiseSpectrum::kWhite;
  if (s == "pink") return NoiseSpectrum::kPink;
  fail(ErrorCode::kInvalidConfig, "unknown noise spectrum '" + s + "'");
}

Matrix default_planted_graph(std::size_t n) {
  Matrix g(n, n);
  for (std::size_t i = 0; i + 1 < n; ++i) g(i, i + 1) = 0.9;
  for (std::size_t i = 0; i + 2 < n; i += 3) g(i, i + 2) = 0.6;
  return g;
}

namespace {

std::vector<std::size_t> assignment_of(const ScenarioConfig& c) {
  if (!c.region_assignment.empty()) return c.region_assignment;
  std::vector<std::size_t> a(c.n_channels);
  for (std::size_t ch = 0; ch < c.n_channels; ++ch) a[ch] = ch * c.n_regions / c.n_channels;
  return a;
}

Matrix graph_of(const ScenarioConfig& c) {
  return c.planted_graph.empty() ? default_planted_graph(c.n_channels) : c.planted_graph;
}

void invalid(bool bad, const std::string& msg) { require(!bad, ErrorCode::kInvalidConfig, msg); }

}  // namespace

void validate(const ScenarioConfig& c) {
  invalid(c.n_channels == 0 || c.n_regions == 0 || c.n_regions > c.n_channels,
          "need 1 <= n_regions <= n_channels");
  invalid(!c.region_assignment.empty() && c.region_assignment.size() != c.n_channels,
          "region_assignment must list every channel");
  const Matrix g = graph_of(c);
  invalid(g.rows() != c.n_channels || g.cols() != c.n_channels, "planted_graph must be n_channels x n_channels");
  for (double w : g.values()) invalid(!(w >= 0.0 && w <= 1.0), "planted_graph weights must lie in [0, 1]");
  for (std::size_t s : c.seed_channels) invalid(s >= c.n_channels, "seed channel out of range");
  invalid(!(c.event_rate_per_hour >= 0.0), "event_rate_per_hour must be >= 0");
  invalid(!(c.event_duration_min > 0.0 && c.event_duration_max >= c.event_duration_min),
          "event durations must satisfy 0 < min <= max");
  invalid(!(c.delay_min >= 0.0 && c.delay_max >= c.delay_min), "delays must satisfy 0 <= min <= max");
  invalid(!(c.event_amplitude >= 0.0 && c.hop_attenuation > 0.0), "amplitudes must be non-negative");
  invalid(!(c.frequency_jitter >= 0.0 && c.frequency_jitter < 1.0), "frequency_jitter must lie in [0, 1)");
  invalid(!(c.noise_amplitude >= 0.0), "noise_amplitude must be >= 0");
  invalid(!(c.sample_rate > 0.0 && c.duration_seconds > 0.0), "sample_rate and duration must be positive");
  invalid(c.waveform == Waveform::kHighFrequencyBurst && c.sample_rate < 4.0 * 60.0,
          "high-frequency bursts need sample_rate >= 240");
  // Regions must each receive a channel.
  (void)scenario_channel_map(c);
}

data::ChannelMap scenario_channel_map(const ScenarioConfig& c) {
  std::vector<std::string> channels, regions;
  for (std::size_t i = 0; i < c.n_channels; ++i) channels.push_back("CH" + std::to_string(i));
  for (std::size_t b = 0; b < c.n_regions; ++b) regions.push_back("R" + std::to_string(b));
  try {
    return data::ChannelMap(std::move(channels), std::move(regions), assignment_of(c));
  } catch (const Error& e) {
    fail(ErrorCode::kInvalidConfig, std::string("scenario channel map: ") + e.what());
  }
}

std::vector<double> make_noise(NoiseSpectrum spectrum, std::size_t n, double amplitude, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> out(n);
  if (spectrum == NoiseSpectrum::kWhite) {
    for (double& x : out) x = amplitude * normal(rng);
    return out;
  }
  // Kellet's refined pink filter: six one-pole sections plus a direct term.
  double b[7] = {0, 0, 0, 0, 0, 0, 0};
  auto next = [&]() {
    const double w = normal(rng);
    b[0] = 0.99886 * b[0] + w * 0.0555179;
    b[1] = 0.99332 * b[1] + w * 0.0750759;
    b[2] = 0.96900 * b[2] + w * 0.1538520;
    b[3] = 0.86650 * b[3] + w * 0.3104856;
    b[4] = 0.55000 * b[4] + w * 0.5329522;
    b[5] = -0.7616 * b[5] - w * 0.0168980;
    const double y = b[0] + b[1] + b[2] + b[3] + b[4] + b[5] + b[6] + w * 0.5362;
    b[6] = w * 0.115926;
    return y;
  };
  for (int i = 0; i < 8192; ++i) next();
  double mean = 0.0;
  for (double& x : out) mean += (x = next());
  mean /= static_cast<double>(std::max<std::size_t>(n, 1));
  double var = 0.0;
  for (double x : out) var += (x - mean) * (x - mean);
  const double sd = std::sqrt(var / static_cast<double>(std::max<std::size_t>(n, 1)));
  const double k = sd > 0.0 ? amplitude / sd : 0.0;
  for (double& x : out) x = (x - mean) * k;
  return out;
}

double waveform_value(Waveform w, double tau, double duration, double f, double a) {
  if (tau < 0.0 || tau >= duration) return 0.0;
  auto g = [](double u) { return std::exp(-0.5 * u * u); };
  auto ramp = [&](double x) {
    constexpr double kRamp = 0.04;
    double r = 1.0;
    if (x < kRamp) r *= 0.5 * (1.0 - std::cos(std::numbers::pi * x / kRamp));
    if (duration - x < kRamp) r *= 0.5 * (1.0 - std::cos(std::numbers::pi * (duration - x) / kRamp));
    return r;
  };
  switch (w) {
    case Waveform::kSpikeTrain: {
      const double n = std::floor(tau * f);
      double v = 0.0;
      for (double k = n - 1; k <= n + 1; k += 1.0) v += g((tau - (k + 0.5) / f) / 0.012);
      return a * v * ramp(tau);
    }
    case Waveform::kSpikeAndWave: {
      const double p = tau * f - std::floor(tau * f);
      double v = g((p / f - 0.05) / 0.012);
      if (p > 0.15) v -= 0.4 * std::sin(std::numbers::pi * (p - 0.15) / 0.85);
      return a * v * ramp(tau);
    }
    case Waveform::kHighFrequencyBurst: {
      const double e = std::sin(std::numbers::pi * tau / duration);
      return a * std::sin(2.0 * std::numbers::pi * f * tau) * e * e;
    }
  }
  return 0.0;
}

namespace {

double base_frequency(Waveform w) {
  switch (w) {
    case Waveform::kSpikeTrain: return 5.0;
    case Waveform::kSpikeAndWave: return 3.0;
    case Waveform::kHighFrequencyBurst: return 60.0;
  }
  return 1.0;
}

json config_to_json(const ScenarioConfig& c) {
  const Matrix g = graph_of(c);
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < g.rows(); ++i) rows.emplace_back(g.row(i).begin(), g.row(i).end());
  return json{{"n_channels", c.n_channels},
              {"n_regions", c.n_regions},
              {"region_assignment", assignment_of(c)},
              {"planted_graph", rows},
              {"seed_channels", c.seed_channels},
              {"event_rate_per_hour", c.event_rate_per_hour},
              {"event_duration_min", c.event_duration_min},
              {"event_duration_max", c.event_duration_max},
              {"delay_min", c.delay_min},
              {"delay_max", c.delay_max},
              {"waveform", to_string(c.waveform)},
              {"event_amplitude", c.event_amplitude},
              {"hop_attenuation", c.hop_attenuation},
              {"frequency_jitter", c.frequency_jitter},
              {"noise", to_string(c.noise)},
              {"noise_amplitude", c.noise_amplitude},
              {"sample_rate", c.sample_rate},
              {"duration_seconds", c.duration_seconds},
              {"seed", c.seed}};
}

}  // namespace

json to_json(const ScenarioConfig& c) {
  json j = config_to_json(c);
  j["region_assignment"] = c.region_assignment;
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < c.planted_graph.rows(); ++i)
    rows.emplace_back(c.planted_graph.row(i).begin(), c.planted_graph.row(i).end());
  j["planted_graph"] = rows;
  return j;
}

ScenarioConfig scenario_config_from_json(const json& j) {
  ScenarioConfig c;
  detail::FieldReader r(j, "scenario");
  r.get("n_channels", c.n_channels);
  r.get("n_regions", c.n_regions);
  r.get("region_assignment", c.region_assignment);
  std::vector<std::vector<double>> rows;
  r.get("planted_graph", rows);
  if (!rows.empty()) {
    c.planted_graph = Matrix(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      require(rows[i].size() == c.planted_graph.cols(), ErrorCode::kInvalidConfig, "planted_graph rows differ in length");
      std::copy(rows[i].begin(), rows[i].end(), c.planted_graph.row(i).begin());
    }
  }
  r.get("seed_channels", c.seed_channels);
  r.get("event_rate_per_hour", c.event_rate_per_hour);
  r.get("event_duration_min", c.event_duration_min);
  r.get("event_duration_max", c.event_duration_max);
  r.get("delay_min", c.delay_min);
  r.get("delay_max", c.delay_max);
  std::string waveform = to_string(c.waveform), noise = to_string(c.noise);
  r.get("waveform", waveform);
  r.get("noise", noise);
  c.waveform = parse_waveform(waveform);
  c.noise = parse_noise(noise);
  r.get("event_amplitude", c.event_amplitude);
  r.get("hop_attenuation", c.hop_attenuation);
  r.get("frequency_jitter", c.frequency_jitter);
  r.get("noise_amplitude", c.noise_amplitude);
  r.get("sample_rate", c.sample_rate);
  r.get("duration_seconds", c.duration_seconds);
  r.get("seed", c.seed);
  r.finish();
  return c;
}

Scenario generate(const ScenarioConfig& config) {
  validate(config);
  const data::ChannelMap map = scenario_channel_map(config);
  const Matrix graph = graph_of(config);
  const std::size_t nc = config.n_channels;
  const std::size_t n = static_cast<std::size_t>(std::llround(config.duration_seconds * config.sample_rate));
  require(n > 0, ErrorCode::kInvalidConfig, "scenario has no samples");
  const double fs = config.sample_rate;

  std::vector<double> signal(n * nc);
  std::mt19937_64 seeder(config.seed);
  for (std::size_t c = 0; c < nc; ++c) {
    auto noise = make_noise(config.noise, n, config.noise_amplitude, seeder());
    for (std::size_t t = 0; t < n; ++t) signal[t * nc + c] = noise[t];
  }

  std::mt19937_64 rng(seeder());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::size_t> seeds = config.seed_channels;
  if (seeds.empty())
    for (std::size_t c = 0; c < nc; ++c) seeds.push_back(c);

  PlantedTruth truth{graph, fs, {}};
  std::vector<std::uint8_t> labels(n * nc, 0);
  const double rate_per_second = config.event_rate_per_hour / 3600.0;
  double clock = 0.0;
  while (rate_per_second > 0.0) {
    clock += -std::log(1.0 - unit(rng)) / rate_per_second;
    if (clock >= config.duration_seconds) break;
    Event ev;
    ev.seed_channel = seeds[static_cast<std::size_t>(unit(rng) * static_cast<double>(seeds.size())) % seeds.size()];
    ev.onset = static_cast<std::size_t>(std::floor(clock * fs));
    ev.duration_seconds = config.event_duration_min + unit(rng) * (config.event_duration_max - config.event_duration_min);
    ev.frequency_hz = base_frequency(config.waveform) * (1.0 + config.frequency_jitter * (2.0 * unit(rng) - 1.0));
    ev.amplitude = config.event_amplitude * config.noise_amplitude;

    // Breadth-first spread; arrival times in samples, unclipped.
    std::vector<long long> arrival(nc, -1);
    std::vector<std::size_t> hops(nc, 0);
    std::deque<std::size_t> queue{ev.seed_channel};
    arrival[ev.seed_channel] = static_cast<long long>(ev.onset);
    std::vector<std::size_t> order;
    while (!queue.empty()) {
      const std::size_t u = queue.front();
      queue.pop_front();
      order.push_back(u);
      for (std::size_t v = 0; v < nc; ++v) {
        const double w = graph(u, v);
        if (v == u || w <= 0.0 || arrival[v] >= 0) continue;
        if (unit(rng) >= w) continue;
        const double delay = config.delay_min + unit(rng) * (config.delay_max - config.delay_min);
        arrival[v] = arrival[u] + static_cast<long long>(std::llround(delay * fs));
        hops[v] = hops[u] + 1;
        queue.push_back(v);
      }
    }

    const auto span = static_cast<std::size_t>(std::max(1.0, std::round(ev.duration_seconds * fs)));
    for (std::size_t c : order) {
      const auto start = static_cast<std::size_t>(arrival[c]);
      if (start >= n) continue;
      const std::size_t end = std::min(n, start + span);
      const double amp = ev.amplitude * std::pow(config.hop_attenuation, static_cast<double>(hops[c]));
      for (std::size_t t = start; t < end; ++t) {
        const double tau = static_cast<double>(t - start) / fs;
        signal[t * nc + c] += waveform_value(config.waveform, tau, ev.duration_seconds, ev.frequency_hz, amp);
        labels[t * nc + c] = 1;
      }
      ev.arrivals.push_back({c, start, end, hops[c]});
    }
    truth.events.push_back(std::move(ev));
  }

  std::size_t positives = 0;
  for (auto y : labels) positives += y;
  const double ratio = static_cast<double>(positives) / static_cast<double>(labels.size());
  require(ratio <= 0.5, ErrorCode::kSaturation,
          "events label " + std::to_string(ratio * 100.0) + "% of points positive (limit 50%)");

  std::vector<float> samples(signal.size());
  for (std::size_t i = 0; i < signal.size(); ++i) samples[i] = static_cast<float>(signal[i]);
  json prov{{"generator", "brainnet-synthgen"}, {"scenario", config_to_json(config)}};
  return Scenario{data::Recording(std::move(samples), std::move(labels), fs, map, prov.dump()), std::move(truth)};
}

std::vector<SegmentWindow> event_segment_windows(const PlantedTruth& truth, const data::SegmentSet& segments) {
  std::vector<SegmentWindow> out;
  if (segments.size() == 0) return out;
  const std::size_t k = segments.config().window;
  for (const Event& ev : truth.events) {
    if (ev.arrivals.empty()) continue;
    std::size_t lo = ev.arrivals.front().start, hi = ev.arrivals.front().end;
    for (const ChannelArrival& a : ev.arrivals) {
      lo = std::min(lo, a.start);
      hi = std::max(hi, a.end);
    }
    std::size_t begin = segments.size(), end = 0;
    for (std::size_t t = 0; t < segments.size(); ++t) {
      const std::size_t s = segments.start_point(t);
      if (s < hi && s + k > lo) {
        begin = std::min(begin, t);
        end = t + 1;
      }
    }
    if (begin < end) out.push_back({begin, end});
  }
  return out;
}

double truth_alignment_score(std::span<const Matrix> graphs, const Matrix& planted, std::span<const SegmentWindow> windows) {
  require(!windows.empty(), ErrorCode::kUndefinedScore, "no event windows to score");
  const std::size_t n = planted.rows();
  require(planted.cols() == n, ErrorCode::kUndefinedScore, "planted graph must be square");
  std::size_t n_edges = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) n_edges += (i != j && planted(i, j) > 0.0);
  const std::size_t n_other = n * (n - 1) - n_edges;
  require(n_edges > 0 && n_other > 0, ErrorCode::kUndefinedScore, "planted graph needs both edges and non-edges");

  double total = 0.0;
  for (const SegmentWindow& w : windows) {
    require(w.begin < w.end && w.end <= graphs.size(), ErrorCode::kUndefinedScore, "event window outside graph sequence");
    Matrix mean(n, n);
    for (std::size_t t = w.begin; t < w.end; ++t) {
      require(graphs[t].rows() == n && graphs[t].cols() == n, ErrorCode::kShape, "learned graph shape mismatch");
      mean += graphs[t];
    }
    double on = 0.0, off = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        const double v = mean(i, j) / static_cast<double>(w.end - w.begin);
        (planted(i, j) > 0.0 ? on : off) += v;
        scale = std::max(scale, std::abs(v));
      }
    }
    if (scale > 0.0) total += (on / static_cast<double>(n_edges) - off / static_cast<double>(n_other)) / scale;
  }
  return total / static_cast<double>(windows.size());
}

void store_truth(const PlantedTruth& truth, const std::filesystem::path& path) {
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < truth.planted_graph.rows(); ++i)
    rows.emplace_back(truth.planted_graph.row(i).begin(), truth.planted_graph.row(i).end());
  json events = json::array();
  for (const Event& ev : truth.events) {
    json arrivals = json::array();
    for (const ChannelArrival& a : ev.arrivals)
      arrivals.push_back({{"channel", a.channel}, {"start_sample", a.start}, {"end_sample", a.end}, {"hops", a.hops}});
    events.push_back({{"seed_channel", ev.seed_channel},
                      {"onset_sample", ev.onset},
                      {"onset_seconds", static_cast<double>(ev.onset) / truth.sample_rate},
                      {"duration_seconds", ev.duration_seconds},
                      {"frequency_hz", ev.frequency_hz},
                      {"amplitude", ev.amplitude},
                      {"arrivals", arrivals}});
  }
  json j{{"format", "brainnet-truth"}, {"version", 1}, {"sample_rate", truth.sample_rate},
         {"planted_graph", rows}, {"events", events}};
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

PlantedTruth load_truth(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open '" + path.string() + "'");
  try {
    const json j = json::parse(in);
    PlantedTruth t;
    t.sample_rate = j.at("sample_rate").get<double>();
    const auto rows = j.at("planted_graph").get<std::vector<std::vector<double>>>();
    t.planted_graph = Matrix(rows.size(), rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t k = 0; k < rows[i].size() && k < rows.size(); ++k) t.planted_graph(i, k) = rows[i][k];
    for (const json& e : j.at("events")) {
      Event ev;
      ev.seed_channel = e.at("seed_channel").get<std::size_t>();
      ev.onset = e.at("onset_sample").get<std::size_t>();
      ev.duration_seconds = e.at("duration_seconds").get<double>();
      ev.frequency_hz = e.at("frequency_hz").get<double>();
      ev.amplitude = e.at("amplitude").get<double>();
      for (const json& a : e.at("arrivals"))
        ev.arrivals.push_back({a.at("channel").get<std::size_t>(), a.at("start_sample").get<std::size_t>(),
                               a.at("end_sample").get<std::size_t>(), a.at("hops").get<std::size_t>()});
      t.events.push_back(std::move(ev));
    }
    return t;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kDataValidation, "bad truth file '" + path.string() + "': " + e.what());
  }
}

}  // namespace brainnet::synth
