#include "cli.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "brainnet/bcpc.hpp"
#include "brainnet/checkpoint.hpp"
#include "brainnet/graph_diffusion.hpp"
#include "brainnet/hierarchy.hpp"
#include "brainnet/seeg_data.hpp"
#include "brainnet/sweep.hpp"
#include "brainnet/synthgen.hpp"
#include "brainnet/trainer_eval.hpp"
#include "run_config.hpp"

namespace brainnet::cli {

namespace fs = std::filesystem;
using nlohmann::json;

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidConfig: return kExitConfig;
    case ErrorCode::kDataValidation:
    case ErrorCode::kMapping:
    case ErrorCode::kSamplingInfeasible:
    case ErrorCode::kShape:
    case ErrorCode::kUndefinedMetric:
    case ErrorCode::kUndefinedScore: return kExitData;
    case ErrorCode::kIo:
    case ErrorCode::kVersionMismatch:
    case ErrorCode::kTruncated:
    case ErrorCode::kChecksum: return kExitIo;
    case ErrorCode::kSaturation: return kExitSaturation;
    case ErrorCode::kDivergence: return kExitDivergence;
    case ErrorCode::kMapMismatch: return kExitMapMismatch;
  }
  return kExitUnexpected;
}

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<std::size_t> steps;
  std::optional<std::string> ablate;
  bool freeze_encoder = false;
  std::string ratios;
  std::string model;
  std::string split = "test";
  std::size_t begin = 0;
  std::size_t count = 10;
  std::string grid_inner;
  std::string grid_cross;
  std::vector<std::string> reports;
  std::string averaging = "metric-mean";
};

struct Context {
  RunConfig config;
  fs::path root;
};

Context make_context(const Options& o) {
  Context ctx;
  if (!o.config.empty()) ctx.config = load_run_config(o.config);
  if (o.seed) apply_seed(ctx.config, *o.seed);
  if (!o.out.empty()) ctx.config.output = o.out;
  resolve(ctx.config);
  ctx.root = output_root(ctx.config);
  return ctx;
}

std::string file_tag(const hier::Ablations& a) {
  if (!a.any()) return "";
  std::string t = a.tag();
  for (char& ch : t)
    if (ch == ',') ch = '+';
  return "_" + t;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      require(used == item.size(), ErrorCode::kInvalidConfig, "bad number '" + item + "'");
    } catch (const std::logic_error&) {
      fail(ErrorCode::kInvalidConfig, "bad number '" + item + "'");
    }
  }
  return out;
}

std::vector<data::Ratio> parse_ratios(const std::string& text) {
  std::vector<data::Ratio> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(data::parse_ratio(item));
  require(!out.empty(), ErrorCode::kInvalidConfig, "--ratios is empty");
  return out;
}

void write_json(const json& j, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

data::SegmentSet load_split(const Context& ctx, const std::string& name) {
  require(name == "train" || name == "valid" || name == "test", ErrorCode::kInvalidConfig,
          "unknown split '" + name + "'");
  return data::load_segments(ctx.root / (name + ".bns"));
}

bcpc::BcpcModel load_encoder(const Context& ctx) {
  const Checkpoint ckpt = load_checkpoint(ctx.root / "bcpc.ckpt");
  return bcpc::BcpcModel::from_checkpoint(ckpt);
}

fs::path model_path(const Context& ctx, const Options& o, const hier::Ablations& a) {
  return o.model.empty() ? ctx.root / ("model" + file_tag(a) + ".ckpt") : fs::path(o.model);
}

// ---- commands --------------------------------------------------------------------

int cmd_generate(const Options& o) {
  Context ctx = make_context(o);
  const synth::Scenario scenario = synth::generate(ctx.config.scenario);
  fs::create_directories(ctx.root);
  data::store(scenario.recording, ctx.root / "recording.bnr");
  synth::store_truth(scenario.truth, ctx.root / "truth.json");
  const data::SegmentSet all = data::segment(scenario.recording, ctx.config.segmentation);
  const SplitRanges r = split_ranges(ctx.config.split, all.size());
  data::store(all.span(r.train_begin, r.train_count), ctx.root / "train.bns");
  data::store(all.span(r.valid_begin, r.valid_count), ctx.root / "valid.bns");
  data::store(all.span(r.test_begin, r.test_count), ctx.root / "test.bns");
  write_json(to_json(ctx.config), ctx.root / "config.json");
  std::cout << "seed " << ctx.config.scenario.seed << '\n'
            << "points " << scenario.recording.n_points() << " x " << scenario.recording.n_channels() << " channels\n"
            << "positive ratio " << std::fixed << std::setprecision(4) << scenario.recording.positive_ratio() << '\n'
            << "events " << scenario.truth.events.size() << '\n'
            << "segments train " << r.train_count << " valid " << r.valid_count << " test " << r.test_count << '\n'
            << "wrote " << ctx.root.string() << '\n';
  return kExitOk;
}

int cmd_pretrain(const Options& o) {
  Context ctx = make_context(o);
  bcpc::PretrainConfig pc = ctx.config.pretrain.config;
  if (o.steps) pc.steps = *o.steps;
  const data::SegmentSet train_set = load_split(ctx, "train");
  const data::SegmentSet valid_set = load_split(ctx, "valid");
  const Matrix train_rows = bcpc::normal_channel_segments(train_set, ctx.config.pretrain.max_train_segments, pc.seed);
  const Matrix valid_rows =
      bcpc::normal_channel_segments(valid_set, ctx.config.pretrain.max_valid_segments, pc.seed + 1);
  bcpc::BcpcModel model(ctx.config.model.bcpc, pc.seed);
  const bcpc::PretrainResult result = bcpc::pretrain(model, train_rows, valid_rows, pc);
  Checkpoint ckpt = model.to_checkpoint();
  ckpt.header["pretrain"] = bcpc::to_json(pc);
  store_checkpoint(ckpt, ctx.root / "bcpc.ckpt");
  train::write_pretrain_curve_csv(result.curve, ctx.root / "pretrain_curve.csv");
  const double ln_n = std::log(static_cast<double>(ctx.config.model.bcpc.n_negatives + 1));
  std::cout << "steps " << pc.steps << '\n'
            << std::fixed << std::setprecision(6) << "valid loss initial " << result.initial_valid_loss << " final "
            << result.final_valid_loss << " (ln N = " << ln_n << ")\n"
            << "wrote " << (ctx.root / "bcpc.ckpt").string() << '\n';
  return kExitOk;
}

int cmd_train(const Options& o) {
  Context ctx = make_context(o);
  train::TrainConfig tc = ctx.config.train;
  if (o.ablate) tc.ablations = hier::parse_ablations(*o.ablate);
  if (o.freeze_encoder) tc.freeze_encoder = true;
  const bcpc::BcpcModel encoder = load_encoder(ctx);
  const data::SegmentSet train_set = load_split(ctx, "train");
  const data::SegmentSet valid_set = load_split(ctx, "valid");
  const std::string tag = file_tag(tc.ablations);
  const fs::path out = model_path(ctx, o, tc.ablations);
  try {
    train::TrainResult result = train::train(encoder, train_set, valid_set, ctx.config.model, tc);
    Checkpoint ckpt = result.model.to_checkpoint();
    ckpt.header["train"] = train::to_json(tc);
    store_checkpoint(ckpt, out);
    train::write_curve_csv(result.curve, ctx.root / ("train_curve" + tag + ".csv"));
    std::cout << "ablate " << tc.ablations.tag() << '\n'
              << "epochs " << result.curve.size() - 1 << " best " << result.best_epoch << '\n'
              << "wrote " << out.string() << '\n';
  } catch (const train::DivergenceError& e) {
    store_checkpoint(e.last_good(), ctx.root / ("model" + tag + ".diverged.ckpt"));
    throw;
  }
  return kExitOk;
}

int cmd_evaluate(const Options& o) {
  Context ctx = make_context(o);
  train::EvalConfig ec = ctx.config.eval;
  if (!o.ratios.empty()) ec.ratios = parse_ratios(o.ratios);
  const hier::Ablations a = o.ablate ? hier::parse_ablations(*o.ablate) : hier::Ablations{};
  const fs::path path = model_path(ctx, o, a);
  hier::BrainNetModel model = hier::BrainNetModel::from_checkpoint(load_checkpoint(path));
  const data::SegmentSet test_set = load_split(ctx, o.split);
  train::MetricsReport report = train::evaluate(model, test_set, ec);
  report.metadata["checkpoint"] = path.string();
  report.metadata["split"] = o.split;
  const fs::path out = ctx.root / ("report" + file_tag(model.config().ablations) + ".json");
  train::store_report(report, out);
  std::cout << "model " << path.string() << " (ablate " << model.config().ablations.tag() << ")\n"
            << train::format_table(report) << "wrote " << out.string() << '\n';
  return kExitOk;
}

int cmd_export_graphs(const Options& o) {
  Context ctx = make_context(o);
  const hier::Ablations a = o.ablate ? hier::parse_ablations(*o.ablate) : hier::Ablations{};
  const fs::path path = model_path(ctx, o, a);
  hier::BrainNetModel model = hier::BrainNetModel::from_checkpoint(load_checkpoint(path));
  const data::SegmentSet source = load_split(ctx, o.split);
  require(o.count > 0 && o.begin < source.size() && o.count <= source.size() - o.begin, ErrorCode::kInvalidConfig,
          "span [" + std::to_string(o.begin) + ", " + std::to_string(o.begin + o.count) + ") is outside the " +
              o.split + " split of " + std::to_string(source.size()) + " segments");
  const data::SegmentSet span = source.span(o.begin, o.count);
  const std::size_t window = std::max(ctx.config.eval.window_len, o.count);
  const train::GraphTrace trace = train::trace_graphs(model, span, window);

  const fs::path dir = ctx.root / "graphs" / (o.split + "_" + std::to_string(o.begin) + "_" + std::to_string(o.count));
  fs::create_directories(dir);
  std::ofstream table(dir / "edges.csv", std::ios::trunc);
  require(static_cast<bool>(table), ErrorCode::kIo, "cannot write edge table");
  table << std::setprecision(10) << "level,direction,kind,step,segment,time_s,source,target,weight\n";
  std::size_t files = 0;
  for (data::Level level : hier::kLevels) {
    const auto li = static_cast<std::size_t>(level);
    const std::vector<std::string> labels = model.node_labels(level);
    for (std::size_t d = 0; d < 2; ++d) {
      const auto direction = d == 0 ? graph::Direction::kForward : graph::Direction::kReverse;
      for (const char* kind : {"cross", "inner"}) {
        const bool cross = std::string(kind) == "cross";
        const auto& graphs = cross ? trace.cross[li][d] : trace.inner[li][d];
        for (std::size_t t = 0; t < graphs.size(); ++t) {
          graph::GraphRecord rec;
          rec.level = data::to_string(level);
          rec.direction = graph::to_string(direction);
          rec.kind = kind;
          rec.step = t;
          rec.segment = span.origin() + t;
          rec.threshold = cross ? model.config().theta_cross : model.config().theta_inner;
          rec.graph = {labels, labels, graphs[t]};
          std::ostringstream name;
          name << kind << "_t" << std::setw(3) << std::setfill('0') << t << ".json";
          graph::store_graph(rec, dir / rec.level / rec.direction / name.str());
          ++files;
          const double time_s = static_cast<double>(span.start_point(t)) / span.sample_rate();
          for (std::size_t i = 0; i < labels.size(); ++i)
            for (std::size_t j = 0; j < labels.size(); ++j)
              table << rec.level << ',' << rec.direction << ',' << kind << ',' << t << ',' << rec.segment << ','
                    << time_s << ',' << labels[i] << ',' << labels[j] << ',' << graphs[t](i, j) << '\n';
        }
      }
    }
  }
  std::cout << "wrote " << files << " graph files to " << dir.string() << '\n';

  const fs::path truth_path = ctx.root / "truth.json";
  json alignment{{"level", "channel"}, {"direction", "forward"}, {"kind", "cross"}};
  if (fs::exists(truth_path)) {
    const synth::PlantedTruth truth = synth::load_truth(truth_path);
    const auto windows = synth::event_segment_windows(truth, span);
    alignment["windows"] = windows.size();
    if (windows.empty()) {
      alignment["score"] = nullptr;
      alignment["note"] = "no event falls inside the span";
      std::cout << "alignment score: no event inside the span\n";
    } else {
      const double score = synth::truth_alignment_score(trace.cross[0][0], truth.planted_graph, windows);
      alignment["score"] = score;
      std::cout << "alignment score " << std::fixed << std::setprecision(4) << score << " over " << windows.size()
                << " event windows\n";
    }
  } else {
    alignment["score"] = nullptr;
    alignment["note"] = "no truth file";
  }
  write_json(alignment, dir / "alignment.json");
  return kExitOk;
}

int cmd_sweep(const Options& o) {
  Context ctx = make_context(o);
  if (!o.grid_inner.empty()) ctx.config.sweep.theta_inner = parse_list(o.grid_inner);
  if (!o.grid_cross.empty()) ctx.config.sweep.theta_cross = parse_list(o.grid_cross);
  train::TrainConfig tc = ctx.config.train;
  if (o.ablate) tc.ablations = hier::parse_ablations(*o.ablate);
  if (o.freeze_encoder) tc.freeze_encoder = true;
  train::EvalConfig ec = ctx.config.eval;
  if (!o.ratios.empty()) ec.ratios = parse_ratios(o.ratios);
  const data::Ratio ratio = data::parse_ratio(ctx.config.sweep.ratio);
  bool has_ratio = false;
  for (const data::Ratio& r : ec.ratios) has_ratio |= r == ratio;
  if (!has_ratio) ec.ratios.push_back(ratio);

  const bcpc::BcpcModel encoder = load_encoder(ctx);
  const data::SegmentSet train_set = load_split(ctx, "train");
  const data::SegmentSet valid_set = load_split(ctx, "valid");
  const data::SegmentSet test_set = load_split(ctx, o.split);
  const sweep::SweepResult r = sweep::sweep_thresholds(encoder, train_set, valid_set, test_set, ctx.config.model, tc,
                                                       ec, ctx.config.sweep.theta_inner, ctx.config.sweep.theta_cross,
                                                       ratio);
  const fs::path dir = ctx.root / "sweep";
  sweep::write_sweep_csv(r, dir / "sweep.csv");
  json points = json::array();
  for (const sweep::SweepPoint& p : r.points)
    points.push_back({{"theta_inner", p.theta_inner}, {"theta_cross", p.theta_cross}, {"channel_f2", p.channel_f2},
                      {"channel_auc", p.channel_auc}, {"cross_edges", p.cross_edges}, {"inner_edges", p.inner_edges},
                      {"report", train::to_json(p.report)}});
  write_json({{"ratio", data::to_string(ratio)},
              {"theta_inner", r.grid_inner},
              {"theta_cross", r.grid_cross},
              {"points", points},
              {"base_index", r.base_index},
              {"base_cross_edges", r.base_cross_edges},
              {"base_inner_edges", r.base_inner_edges},
              {"best_index", r.best_index},
              {"best_location", r.best_location}},
             dir / "sweep.json");

  std::cout << "channel F2 at " << data::to_string(ratio) << " (rows theta_inner, columns theta_cross)\n"
            << std::setw(10) << "";
  for (double c : r.grid_cross) std::cout << std::setw(10) << c;
  std::cout << '\n' << std::fixed << std::setprecision(2);
  for (std::size_t i = 0; i < r.grid_inner.size(); ++i) {
    std::cout << std::setw(10) << r.grid_inner[i];
    for (std::size_t j = 0; j < r.grid_cross.size(); ++j) std::cout << std::setw(10) << r.at(i, j).channel_f2;
    std::cout << '\n';
  }
  std::cout << "best " << r.best_location << '\n' << "wrote " << (dir / "sweep.csv").string() << '\n';
  return kExitOk;
}

int cmd_report(const Options& o) {
  Context ctx = make_context(o);
  require(!o.reports.empty(), ErrorCode::kInvalidConfig, "report needs at least one report file");
  std::vector<train::MetricsReport> reports;
  for (const std::string& p : o.reports) reports.push_back(train::load_report(p));
  const train::Averaging mode = train::parse_averaging(o.averaging);
  train::MetricsReport combined = train::average_reports(reports, mode);
  combined.metadata["inputs"] = o.reports;
  const fs::path out = ctx.root / "summary.json";
  train::store_report(combined, out);
  std::cout << "averaging " << train::to_string(mode) << " over " << reports.size() << " report(s)\n"
            << train::format_table(combined) << "wrote " << out.string() << '\n';
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Seizure detection on multichannel recordings with learned diffusion graphs", "brainnet"};
  app.require_subcommand(1);
  Options o;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "JSON run configuration");
    sub->add_option("--seed", o.seed, "Seed for every component (overrides the config)");
    sub->add_option("--out", o.out, "Output root (default: config output, $BRAINNET_OUT, ./runs)");
  };
  auto add_model = [&](CLI::App* sub) {
    sub->add_option("--model", o.model, "Model checkpoint (default: <out>/model[_<ablation>].ckpt)");
    sub->add_option("--ablate", o.ablate, "Ablation flags selecting the model file");
  };

  CLI::App* gen = app.add_subcommand("generate", "Synthesize a recording and its train/valid/test segments");
  add_common(gen);
  CLI::App* pre = app.add_subcommand("pretrain", "Pretrain the segment encoder");
  add_common(pre);
  pre->add_option("--steps", o.steps, "Optimizer steps (0 writes the initialization)");
  CLI::App* tr = app.add_subcommand("train", "Train the detection model");
  add_common(tr);
  tr->add_option("--ablate", o.ablate, "Comma-separated: no_bcpc,no_graph,no_inner,no_cross,no_hierarchy");
  tr->add_flag("--freeze-encoder", o.freeze_encoder, "Keep the pretrained encoder fixed");
  tr->add_option("--model", o.model, "Output checkpoint path");
  CLI::App* ev = app.add_subcommand("evaluate", "Evaluate a model at the configured ratios");
  add_common(ev);
  add_model(ev);
  ev->add_option("--ratios", o.ratios, "Comma-separated ratios, e.g. 1:5,1:50,1:500");
  ev->add_option("--split", o.split, "Segment split to evaluate on");
  CLI::App* ex = app.add_subcommand("export-graphs", "Write learned graphs over a span of segments");
  add_common(ex);
  add_model(ex);
  ex->add_option("--split", o.split, "Segment split");
  ex->add_option("--begin", o.begin, "First segment of the span");
  ex->add_option("--count", o.count, "Number of segments");
  CLI::App* sw = app.add_subcommand("sweep-thresholds", "Train and evaluate over a threshold grid");
  add_common(sw);
  sw->add_option("--theta-inner", o.grid_inner, "Comma-separated inner-time thresholds");
  sw->add_option("--theta-cross", o.grid_cross, "Comma-separated cross-time thresholds");
  sw->add_option("--ablate", o.ablate, "Ablation flags for every grid point");
  sw->add_flag("--freeze-encoder", o.freeze_encoder, "Keep the pretrained encoder fixed");
  sw->add_option("--ratios", o.ratios, "Ratios evaluated per grid point");
  sw->add_option("--split", o.split, "Segment split to evaluate on");
  CLI::App* rep = app.add_subcommand("report", "Combine metric reports");
  add_common(rep);
  rep->add_option("reports", o.reports, "Report JSON files")->required();
  rep->add_option("--averaging", o.averaging, "metric-mean or pooled");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (gen->parsed()) return cmd_generate(o);
    if (pre->parsed()) return cmd_pretrain(o);
    if (tr->parsed()) return cmd_train(o);
    if (ev->parsed()) return cmd_evaluate(o);
    if (ex->parsed()) return cmd_export_graphs(o);
    if (sw->parsed()) return cmd_sweep(o);
    if (rep->parsed()) return cmd_report(o);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << '\n';
    return kExitUnexpected;
  }
  return kExitConfig;
}

}  // namespace brainnet::cli
