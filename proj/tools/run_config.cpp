#include "run_config.hpp"

#include <cstdlib>
#include <fstream>

#include "brainnet/error.hpp"
#include "brainnet/sweep.hpp"
#include "json_fields.hpp"

namespace brainnet::cli {

using nlohmann::json;

namespace {

SplitConfig split_from_json(const json& j) {
  SplitConfig s;
  detail::FieldReader f(j, "split");
  f.get("train_segments", s.train_segments);
  f.get("valid_segments", s.valid_segments);
  f.get("train_fraction", s.train_fraction);
  f.get("valid_fraction", s.valid_fraction);
  f.get("gap", s.gap);
  f.finish();
  return s;
}

json to_json(const SplitConfig& s) {
  return {{"train_segments", s.train_segments}, {"valid_segments", s.valid_segments},
          {"train_fraction", s.train_fraction}, {"valid_fraction", s.valid_fraction},
          {"gap", s.gap}};
}

PretrainSection pretrain_from_json(const json& j) {
  PretrainSection p;
  json rest = j;
  require(j.is_object(), ErrorCode::kInvalidConfig, "pretrain must be a JSON object");
  for (const char* key : {"max_train_segments", "max_valid_segments"}) {
    if (!j.contains(key)) continue;
    try {
      (std::string(key) == "max_train_segments" ? p.max_train_segments : p.max_valid_segments) =
          j.at(key).get<std::size_t>();
    } catch (const json::exception& e) {
      fail(ErrorCode::kInvalidConfig, std::string("pretrain.") + key + ": " + e.what());
    }
    rest.erase(key);
  }
  p.config = bcpc::pretrain_config_from_json(rest);
  return p;
}

json to_json(const PretrainSection& p) {
  json j = bcpc::to_json(p.config);
  j["max_train_segments"] = p.max_train_segments;
  j["max_valid_segments"] = p.max_valid_segments;
  return j;
}

train::EvalConfig eval_from_json(const json& j) {
  train::EvalConfig e;
  detail::FieldReader f(j, "eval");
  std::vector<std::string> ratios;
  f.get("ratios", ratios);
  if (f.has("ratios")) {
    e.ratios.clear();
    for (const std::string& r : ratios) e.ratios.push_back(data::parse_ratio(r));
  }
  f.get("seed", e.seed);
  f.get("window_len", e.window_len);
  f.get("count_positive", e.count_positive);
  f.get("threshold", e.threshold);
  f.finish();
  return e;
}

json to_json(const train::EvalConfig& e) {
  std::vector<std::string> ratios;
  for (const data::Ratio& r : e.ratios) ratios.push_back(data::to_string(r));
  return {{"ratios", ratios},
          {"seed", e.seed},
          {"window_len", e.window_len},
          {"count_positive", e.count_positive},
          {"threshold", e.threshold}};
}

SweepConfig sweep_from_json(const json& j) {
  SweepConfig s;
  detail::FieldReader f(j, "sweep");
  f.get("theta_inner", s.theta_inner);
  f.get("theta_cross", s.theta_cross);
  f.get("ratio", s.ratio);
  f.finish();
  return s;
}

}  // namespace

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  detail::FieldReader f(j, "config");
  if (f.has("seed")) {
    std::uint64_t seed = 0;
    f.get("seed", seed);
    c.seed = seed;
  }
  if (f.has("scenario")) c.scenario = synth::scenario_config_from_json(f.at("scenario"));
  if (f.has("segmentation")) {
    detail::FieldReader s(f.at("segmentation"), "segmentation");
    s.get("window", c.segmentation.window);
    s.get("stride", c.segmentation.stride);
    s.finish();
  }
  if (f.has("split")) c.split = split_from_json(f.at("split"));
  if (f.has("model")) c.model = hier::model_config_from_json(f.at("model"));
  if (f.has("pretrain")) c.pretrain = pretrain_from_json(f.at("pretrain"));
  if (f.has("train")) c.train = train::train_config_from_json(f.at("train"));
  if (f.has("eval")) c.eval = eval_from_json(f.at("eval"));
  if (f.has("sweep")) c.sweep = sweep_from_json(f.at("sweep"));
  f.get("output", c.output);
  f.finish();
  if (c.seed) apply_seed(c, *c.seed);
  return c;
}

json to_json(const RunConfig& c) {
  json j{{"scenario", synth::to_json(c.scenario)},
         {"segmentation", {{"window", c.segmentation.window}, {"stride", c.segmentation.stride}}},
         {"split", to_json(c.split)},
         {"model", hier::to_json(c.model)},
         {"pretrain", to_json(c.pretrain)},
         {"train", train::to_json(c.train)},
         {"eval", to_json(c.eval)},
         {"sweep", {{"theta_inner", c.sweep.theta_inner}, {"theta_cross", c.sweep.theta_cross}, {"ratio", c.sweep.ratio}}},
         {"output", c.output}};
  if (c.seed) j["seed"] = *c.seed;
  return j;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open config '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorCode::kInvalidConfig, "config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return run_config_from_json(j);
}

void apply_seed(RunConfig& c, std::uint64_t seed) {
  c.seed = seed;
  c.scenario.seed = seed;
  c.pretrain.config.seed = seed;
  c.train.seed = seed;
  c.eval.seed = seed;
}

void resolve(RunConfig& c) {
  bcpc::validate(c.model.bcpc);
  if (c.segmentation.window == 0) c.segmentation.window = c.model.bcpc.segment_length();
  if (c.segmentation.stride == 0) c.segmentation.stride = std::max<std::size_t>(1, c.segmentation.window / 2);
  require(c.segmentation.window == c.model.bcpc.segment_length(), ErrorCode::kInvalidConfig,
          "segmentation.window must equal local_window * n_positions (" +
              std::to_string(c.model.bcpc.segment_length()) + ")");
  if (c.sweep.theta_inner.empty()) c.sweep.theta_inner = sweep::default_grid();
  if (c.sweep.theta_cross.empty()) c.sweep.theta_cross = sweep::default_grid();
  data::parse_ratio(c.sweep.ratio);
  require(!c.eval.ratios.empty(), ErrorCode::kInvalidConfig, "eval.ratios is empty");
  const SplitConfig& s = c.split;
  require(s.train_fraction > 0.0 && s.valid_fraction > 0.0 && s.train_fraction + s.valid_fraction < 1.0,
          ErrorCode::kInvalidConfig, "split fractions must be positive and sum below 1");
}

std::filesystem::path output_root(const RunConfig& c) {
  if (!c.output.empty()) return c.output;
  if (const char* env = std::getenv("BRAINNET_OUT"); env != nullptr && *env != '\0') return env;
  return "runs";
}

SplitRanges split_ranges(const SplitConfig& s, std::size_t n) {
  const auto frac = [n](double f) { return static_cast<std::size_t>(f * static_cast<double>(n)); };
  const std::size_t n_train = s.train_segments ? s.train_segments : frac(s.train_fraction);
  const std::size_t n_valid = s.valid_segments ? s.valid_segments : frac(s.valid_fraction);
  const std::size_t used = n_train + n_valid + 2 * s.gap;
  require(n_train > 0 && n_valid > 0 && used < n, ErrorCode::kInvalidConfig,
          "split needs " + std::to_string(used + 1) + " segments, recording has " + std::to_string(n));
  SplitRanges r;
  r.train_begin = 0;
  r.train_count = n_train;
  r.valid_begin = n_train + s.gap;
  r.valid_count = n_valid;
  r.test_begin = r.valid_begin + n_valid + s.gap;
  r.test_count = n - r.test_begin;
  return r;
}

}  // namespace brainnet::cli
