#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "brainnet/error.hpp"
#include "brainnet/trainer_eval.hpp"
#include "oracles/oracles.hpp"
#include "support.hpp"

using namespace brainnet;
using namespace brainnet::train;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kIo;
}

Metrics entry(data::Level level, data::Ratio ratio, std::size_t tp, std::size_t fp, std::size_t tn, std::size_t fn,
              double auc_value) {
  Metrics m;
  m.level = level;
  m.ratio = ratio;
  m.available = true;
  m.confusion = {tp, fp, tn, fn};
  const double p = precision(m.confusion), r = recall(m.confusion);
  m.precision = 100.0 * p;
  m.recall = 100.0 * r;
  m.f1 = 100.0 * f_beta(p, r, 1.0);
  m.f2 = 100.0 * f_beta(p, r, 2.0);
  m.auc = auc_value;
  m.n_positive = tp + fn;
  m.n_negative = fp + tn;
  return m;
}

struct TinyRun {
  data::SegmentSet segs = testing::tiny_segments();
  data::SegmentSet train_set = segs.span(0, 240);
  data::SegmentSet valid_set = segs.span(250, 120);
  data::SegmentSet test_set = segs.span(380, segs.size() - 380);
  bcpc::BcpcModel encoder{testing::tiny_bcpc(), 21};
};

}  // namespace

TEST_CASE("F-beta matches the count formula") {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::size_t> u(0, 40);
  for (int trial = 0; trial < 200; ++trial) {
    const Confusion c{u(rng), u(rng), u(rng), u(rng)};
    for (double beta : {0.5, 1.0, 2.0}) {
      const double got = f_beta(precision(c), recall(c), beta);
      CHECK(got == doctest::Approx(oracle::f_beta_counts(c.tp, c.fp, c.fn, beta)).epsilon(1e-12));
    }
  }
  CHECK(f_beta(0.0, 0.0, 2.0) == 0.0);
  CHECK(precision(Confusion{}) == 0.0);
  CHECK(recall(Confusion{}) == 0.0);
}

TEST_CASE("AUC matches pair counting with ties") {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> level(0, 6);
  std::bernoulli_distribution pos(0.3);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> s(30);
    std::vector<std::uint8_t> y(30);
    for (std::size_t i = 0; i < s.size(); ++i) {
      s[i] = level(rng) / 6.0;  // coarse grid forces ties
      y[i] = pos(rng);
    }
    y[0] = 1;
    y[1] = 0;
    CHECK(auc(s, y) == doctest::Approx(oracle::auc_pairs(s, y)).epsilon(1e-12));
  }
  const std::vector<double> s{0.1, 0.2};
  CHECK(code_of([&] { auc(s, std::vector<std::uint8_t>{1, 1}); }) == ErrorCode::kUndefinedMetric);
  CHECK(code_of([&] { auc(s, std::vector<std::uint8_t>{0, 0}); }) == ErrorCode::kUndefinedMetric);
}

TEST_CASE("confusion uses a strict threshold") {
  const std::vector<double> s{0.5, 0.51, 0.2, 0.5, 0.9};
  const std::vector<std::uint8_t> y{1, 1, 0, 0, 0};
  const Confusion c = confusion(s, y, 0.5);
  CHECK(c.tp == 1);
  CHECK(c.fn == 1);
  CHECK(c.fp == 1);
  CHECK(c.tn == 2);
}

TEST_CASE("averaging modes") {
  using data::Level;
  MetricsReport a, b;
  a.entries.push_back(entry(Level::kChannel, {1, 5}, 8, 2, 40, 2, 90.0));
  b.entries.push_back(entry(Level::kChannel, {1, 5}, 1, 9, 30, 9, 70.0));
  a.metadata["config_hash"] = "aa";
  b.metadata["config_hash"] = "bb";
  const std::vector<MetricsReport> both{a, b};

  const MetricsReport mean = average_reports(both, Averaging::kMetricMean);
  CHECK(mean.entries[0].f2 == doctest::Approx((a.entries[0].f2 + b.entries[0].f2) / 2.0));
  CHECK(mean.entries[0].auc == doctest::Approx(80.0));

  const MetricsReport pooled = average_reports(both, Averaging::kPooled);
  CHECK(pooled.entries[0].f2 == doctest::Approx(100.0 * oracle::f_beta_counts(9, 11, 11, 2.0)));
  CHECK(pooled.entries[0].confusion.tn == 70);
  CHECK(pooled.metadata.at("averaging") == "pooled");
  CHECK(pooled.metadata.at("config_hashes") == nlohmann::json::array({"aa", "bb"}));

  MetricsReport c = b;
  c.entries[0].ratio = {1, 50};
  const std::vector<MetricsReport> mixed{a, c};
  CHECK_THROWS_AS(average_reports(mixed, Averaging::kPooled), Error);
  CHECK(parse_averaging("metric-mean") == Averaging::kMetricMean);
  CHECK_THROWS_AS(parse_averaging("median"), Error);
}

TEST_CASE("report JSON round trip") {
  testing::TempDir dir;
  MetricsReport r;
  r.entries.push_back(entry(data::Level::kRegion, {1, 50}, 3, 4, 100, 1, 88.125));
  Metrics missing;
  missing.level = data::Level::kPatient;
  missing.ratio = {1, 500};
  missing.note = "not enough units";
  r.entries.push_back(missing);
  r.metadata["ablate"] = "no_graph";
  store_report(r, dir / "r.json");
  const MetricsReport back = load_report(dir / "r.json");
  CHECK(to_json(back) == to_json(r));
  CHECK(back.at(data::Level::kPatient, {1, 500}).note == "not enough units");
  CHECK_THROWS_AS(back.at(data::Level::kChannel, {1, 5}), Error);
  CHECK(format_table(back).find("region") != std::string::npos);
}

TEST_CASE("config hash is stable and sensitive") {
  const nlohmann::json a = hier::to_json(testing::tiny_model_config());
  CHECK(config_hash(a) == config_hash(a));
  CHECK(config_hash(a).size() == 16);
  hier::ModelConfig other = testing::tiny_model_config();
  other.theta_cross = 0.2;
  CHECK(config_hash(hier::to_json(other)) != config_hash(a));
  // FNV-1a of the empty object dump "{}".
  std::uint64_t h = 14695981039346656037ULL;
  for (char ch : std::string("{}")) {
    h ^= static_cast<unsigned char>(ch);
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  CHECK(config_hash(nlohmann::json::object()) == buf);
}

TEST_CASE("training config JSON") {
  TrainConfig t = testing::tiny_train_config();
  t.ablations.no_cross = true;
  CHECK(to_json(train_config_from_json(to_json(t))) == to_json(t));
  nlohmann::json j = to_json(t);
  j["epoch"] = 3;
  CHECK_THROWS_AS(train_config_from_json(j), Error);
}

TEST_CASE("tiny training run is deterministic and evaluates") {
  TinyRun run;
  const hier::ModelConfig mc = testing::tiny_model_config();
  TrainConfig tc = testing::tiny_train_config();
  tc.epochs = 3;
  const TrainResult a = train::train(run.encoder, run.train_set, run.valid_set, mc, tc);
  const TrainResult b = train::train(run.encoder, run.train_set, run.valid_set, mc, tc);
  // Entry 0 is the initialization, which has no training loss.
  REQUIRE(a.curve.size() == 4);
  CHECK(a.curve[0].epoch == 0);
  CHECK(std::isnan(a.curve[0].train_loss));
  for (std::size_t e = 1; e < 4; ++e) {
    CHECK(a.curve[e].epoch == e);
    CHECK(a.curve[e].train_loss == b.curve[e].train_loss);
    CHECK(std::isfinite(a.curve[e].valid_loss));
  }
  CHECK(a.curve.back().train_loss < a.curve[1].train_loss);

  hier::BrainNetModel model = a.model;
  EvalConfig ec;
  ec.ratios = {{1, 2}};
  ec.window_len = 6;
  const MetricsReport report = evaluate(model, run.test_set, ec);
  CHECK(report.entries.size() == 3);
  CHECK(report.metadata.at("ablate") == "full");
  CHECK(report.metadata.at("config_hash") == config_hash(hier::to_json(model.config())));
  CHECK(report.at(data::Level::kChannel, {1, 2}).available);
  CHECK(EvalConfig{}.ratios == std::vector<data::Ratio>{{1, 5}, {1, 50}, {1, 500}});

  // Scores agree with an independent pass through predict_segments.
  const LevelScores scores = predict_segments(model, run.test_set, ec.window_len);
  CHECK(to_json(evaluate_scores(scores, run.test_set, ec)).at("entries") == to_json(report).at("entries"));

  testing::TempDir dir;
  write_curve_csv(a.curve, dir / "c.csv");
  std::ifstream in(dir / "c.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "epoch,train_loss,valid_loss,valid_channel_f2,learning_rate");
  std::size_t lines = 0;
  for (std::string line; std::getline(in, line);) ++lines;
  CHECK(lines == 4);
}

TEST_CASE("ablated training keeps its tag and frozen encoders stay fixed") {
  TinyRun run;
  TrainConfig tc = testing::tiny_train_config();
  tc.epochs = 1;
  tc.freeze_encoder = true;
  tc.ablations = hier::parse_ablations("no_graph");
  TrainResult r = train::train(run.encoder, run.train_set, run.valid_set, testing::tiny_model_config(), tc);
  CHECK(r.model.config().ablations.tag() == "no_graph");
  const Matrix x = bcpc::channel_rows(run.test_set, 0, 2);
  bcpc::BcpcModel fresh = run.encoder;
  CHECK(r.model.encoder().represent(x) == fresh.represent(x));
}

TEST_CASE("a model applied to a different montage is a map mismatch") {
  TinyRun run;
  TrainConfig tc = testing::tiny_train_config();
  tc.epochs = 1;
  TrainResult r = train::train(run.encoder, run.train_set, run.valid_set, testing::tiny_model_config(), tc);
  synth::ScenarioConfig sc = testing::tiny_scenario();
  sc.n_channels = 5;
  const std::size_t k = testing::tiny_bcpc().segment_length();
  const data::SegmentSet other = data::segment(synth::generate(sc).recording, {k, k / 2});
  CHECK(code_of([&] { evaluate(r.model, other, EvalConfig{}); }) == ErrorCode::kMapMismatch);
}
