#include <doctest.h>

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "brainnet/error.hpp"
#include "cli.hpp"
#include "run_config.hpp"
#include "support.hpp"

using namespace brainnet;
using namespace brainnet::cli;

namespace {

// Runs the command line in-process with stdout and stderr captured.
struct Invocation {
  int code = -1;
  std::string out, err;
};

Invocation invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "brainnet");
  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  std::streambuf* old_out = std::cout.rdbuf(out.rdbuf());
  std::streambuf* old_err = std::cerr.rdbuf(err.rdbuf());
  Invocation r;
  r.code = run(static_cast<int>(argv.size()), argv.data());
  std::cout.rdbuf(old_out);
  std::cerr.rdbuf(old_err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

RunConfig tiny_run_config() {
  RunConfig c;
  c.scenario = testing::tiny_scenario(3);
  c.model = testing::tiny_model_config();
  c.split.train_segments = 200;
  c.split.valid_segments = 100;
  c.pretrain.config.steps = 20;
  c.pretrain.config.batch_size = 4;
  c.pretrain.config.eval_every = 10;
  c.pretrain.max_train_segments = 300;
  c.pretrain.max_valid_segments = 64;
  c.train = testing::tiny_train_config();
  c.train.epochs = 1;
  c.eval.ratios = {{1, 2}};
  c.eval.window_len = 6;
  return c;
}

std::string write_config(const testing::TempDir& dir, const nlohmann::json& j, const std::string& name = "cfg.json") {
  std::ofstream out(dir / name);
  out << j.dump(2);
  return (dir / name).string();
}

nlohmann::json read_json(const std::filesystem::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

std::string file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("exit code mapping") {
  CHECK(exit_code(ErrorCode::kInvalidConfig) == 2);
  for (ErrorCode c : {ErrorCode::kDataValidation, ErrorCode::kMapping, ErrorCode::kSamplingInfeasible,
                      ErrorCode::kShape, ErrorCode::kUndefinedMetric, ErrorCode::kUndefinedScore})
    CHECK(exit_code(c) == 3);
  for (ErrorCode c : {ErrorCode::kIo, ErrorCode::kVersionMismatch, ErrorCode::kTruncated, ErrorCode::kChecksum})
    CHECK(exit_code(c) == 4);
  CHECK(exit_code(ErrorCode::kSaturation) == 5);
  CHECK(exit_code(ErrorCode::kDivergence) == 6);
  CHECK(exit_code(ErrorCode::kMapMismatch) == 7);
}

TEST_CASE("run config is strict and seeds propagate") {
  const RunConfig c = tiny_run_config();
  const nlohmann::json j = to_json(c);
  CHECK(to_json(run_config_from_json(j)) == j);

  nlohmann::json bad = j;
  bad["trian"] = nlohmann::json::object();
  CHECK_THROWS_AS(run_config_from_json(bad), Error);
  bad = j;
  bad["split"]["gaps"] = 3;
  CHECK_THROWS_AS(run_config_from_json(bad), Error);

  nlohmann::json seeded = j;
  seeded["seed"] = 77;
  const RunConfig s = run_config_from_json(seeded);
  CHECK(s.scenario.seed == 77);
  CHECK(s.train.seed == 77);
  CHECK(s.eval.seed == 77);
  CHECK(s.pretrain.config.seed == 77);

  RunConfig r = c;
  apply_seed(r, 5);
  CHECK(r.scenario.seed == 5);
  CHECK(r.pretrain.config.seed == 5);
}

TEST_CASE("resolve fills derived defaults") {
  RunConfig c = tiny_run_config();
  resolve(c);
  CHECK(c.segmentation.window == testing::tiny_bcpc().segment_length());
  CHECK(c.segmentation.stride == c.segmentation.window / 2);
  CHECK(c.sweep.theta_inner.size() == 4);
  c.segmentation.window = 30;
  CHECK_THROWS_AS(resolve(c), Error);
  c = tiny_run_config();
  c.sweep.ratio = "1-50";
  CHECK_THROWS_AS(resolve(c), Error);
}

TEST_CASE("split ranges") {
  SplitConfig s;
  s.train_segments = 10;
  s.valid_segments = 4;
  s.gap = 2;
  const SplitRanges r = split_ranges(s, 30);
  CHECK(r.valid_begin == 12);
  CHECK(r.test_begin == 18);
  CHECK(r.test_count == 12);
  CHECK_THROWS_AS(split_ranges(s, 18), Error);
  SplitConfig f;
  const SplitRanges rf = split_ranges(f, 100);
  CHECK(rf.train_count == 60);
  CHECK(rf.valid_count == 10);
  CHECK(rf.test_begin == 74);
}

TEST_CASE("output root precedence") {
  RunConfig c;
  c.output = "explicit";
  CHECK(output_root(c) == "explicit");
  c.output.clear();
  ::setenv("BRAINNET_OUT", "from_env", 1);
  CHECK(output_root(c) == "from_env");
  ::unsetenv("BRAINNET_OUT");
  CHECK(output_root(c) == "runs");
}

TEST_CASE("command line errors map to exit codes") {
  testing::TempDir dir;
  CHECK(invoke({}).code == 2);
  CHECK(invoke({"generate", "--bogus"}).code == 2);
  CHECK(invoke({"generate", "--config", (dir / "missing.json").string()}).code == 4);

  nlohmann::json j = to_json(tiny_run_config());
  j["scenario"]["n_chanels"] = 4;
  CHECK(invoke({"generate", "--config", write_config(dir, j), "--out", (dir / "a").string()}).code == 2);

  j = to_json(tiny_run_config());
  j["scenario"]["event_rate_per_hour"] = 40000.0;
  j["scenario"]["event_duration_min"] = 3.0;
  j["scenario"]["event_duration_max"] = 4.0;
  const Invocation sat = invoke({"generate", "--config", write_config(dir, j), "--out", (dir / "b").string()});
  CHECK(sat.code == 5);
  CHECK_FALSE(sat.err.empty());

  {
    std::ofstream out(dir / "broken.json");
    out << "{\"seed\": ";
  }
  CHECK(invoke({"generate", "--config", (dir / "broken.json").string()}).code == 2);
}

TEST_CASE("end-to-end pipeline through the command line") {
  testing::TempDir dir;
  const std::string cfg = write_config(dir, to_json(tiny_run_config()));
  const std::string out = (dir / "run").string();

  REQUIRE(invoke({"generate", "--config", cfg, "--out", out}).code == 0);
  for (const char* f : {"recording.bnr", "truth.json", "train.bns", "valid.bns", "test.bns", "config.json"})
    CHECK(std::filesystem::exists(dir / "run" / f));
  const std::string first = file_bytes(dir / "run" / "recording.bnr");
  REQUIRE(invoke({"generate", "--config", cfg, "--out", out}).code == 0);
  CHECK(file_bytes(dir / "run" / "recording.bnr") == first);

  // Evaluating before training finds no checkpoint.
  CHECK(invoke({"evaluate", "--config", cfg, "--out", out}).code == 4);

  REQUIRE(invoke({"pretrain", "--config", cfg, "--out", out, "--steps", "0"}).code == 0);
  CHECK(std::filesystem::exists(dir / "run" / "bcpc.ckpt"));
  CHECK(std::filesystem::exists(dir / "run" / "pretrain_curve.csv"));

  REQUIRE(invoke({"train", "--config", cfg, "--out", out}).code == 0);
  CHECK(std::filesystem::exists(dir / "run" / "model.ckpt"));
  CHECK(std::filesystem::exists(dir / "run" / "train_curve.csv"));
  REQUIRE(invoke({"train", "--config", cfg, "--out", out, "--ablate", "no_graph"}).code == 0);
  CHECK(std::filesystem::exists(dir / "run" / "model_no_graph.ckpt"));

  const Invocation ev = invoke({"evaluate", "--config", cfg, "--out", out});
  REQUIRE(ev.code == 0);
  const nlohmann::json full = read_json(dir / "run" / "report.json");
  CHECK(full.at("metadata").at("ablate") == "full");
  CHECK(full.at("entries").size() == 3);
  CHECK(ev.out.find("channel") != std::string::npos);

  // Without a configured ratio list the defaults apply; infeasible ratios are kept with a note.
  nlohmann::json no_ratios = to_json(tiny_run_config());
  no_ratios["eval"].erase("ratios");
  const std::string cfg2 = write_config(dir, no_ratios, "cfg2.json");
  REQUIRE(invoke({"evaluate", "--config", cfg2, "--out", out}).code == 0);
  const nlohmann::json defaults = read_json(dir / "run" / "report.json");
  std::vector<std::string> ratios;
  for (const auto& e : defaults.at("entries"))
    if (e.at("level") == "channel") ratios.push_back(e.at("ratio").get<std::string>());
  CHECK(ratios == std::vector<std::string>{"1:5", "1:50", "1:500"});

  REQUIRE(invoke({"evaluate", "--config", cfg, "--out", out, "--ablate", "no_graph"}).code == 0);
  CHECK(read_json(dir / "run" / "report_no_graph.json").at("metadata").at("ablate") == "no_graph");

  const Invocation ex = invoke({"export-graphs", "--config", cfg, "--out", out, "--count", "4"});
  REQUIRE(ex.code == 0);
  CHECK(std::filesystem::exists(dir / "run" / "graphs" / "test_0_4" / "edges.csv"));
  CHECK(std::filesystem::exists(dir / "run" / "graphs" / "test_0_4" / "channel" / "forward" / "cross_t000.json"));
  CHECK(invoke({"export-graphs", "--config", cfg, "--out", out, "--begin", "100000"}).code == 2);

  const Invocation rep = invoke({"report", "--out", out, "--averaging", "pooled",
                                 (dir / "run" / "report.json").string(), (dir / "run" / "report.json").string()});
  REQUIRE(rep.code == 0);
  CHECK(read_json(dir / "run" / "summary.json").at("metadata").at("averaging") == "pooled");
  CHECK(invoke({"report", "--out", out, "--averaging", "median", (dir / "run" / "report.json").string()}).code == 2);

  // A model applied to a recording with a different montage.
  nlohmann::json wide = to_json(tiny_run_config());
  wide["scenario"]["n_channels"] = 5;
  const std::string cfg_wide = write_config(dir, wide, "wide.json");
  const std::string out_wide = (dir / "wide").string();
  REQUIRE(invoke({"generate", "--config", cfg_wide, "--out", out_wide}).code == 0);
  CHECK(invoke({"evaluate", "--config", cfg_wide, "--out", out_wide, "--model", (dir / "run" / "model.ckpt").string()})
            .code == 7);
}
