#include "brainnet/trainer_eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "json_fields.hpp"

namespace brainnet::train {

using ad::Tape;
using ad::Var;
using data::Level;

// ---- metrics ---------------------------------------------------------------------

double f_beta(double p, double r, double beta) {
  const double b2 = beta * beta;
  const double den = b2 * p + r;
  return den == 0.0 ? 0.0 : (1.0 + b2) * p * r / den;
}

double auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  require(scores.size() == labels.size(), ErrorCode::kShape, "scores and labels differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Sum of midranks of the positives.
  double rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]]) rank_sum += mid;
    i = j;
  }
  for (auto y : labels) n_pos += y != 0;
  const std::size_t n_neg = labels.size() - n_pos;
  require(n_pos > 0 && n_neg > 0, ErrorCode::kUndefinedMetric, "AUC needs both positive and negative units");
  const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

Confusion confusion(std::span<const double> scores, std::span<const std::uint8_t> labels, double threshold) {
  require(scores.size() == labels.size(), ErrorCode::kShape, "scores and labels differ in length");
  Confusion c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] > threshold;
    if (labels[i]) (pred ? c.tp : c.fn)++;
    else (pred ? c.fp : c.tn)++;
  }
  return c;
}

double precision(const Confusion& c) {
  return c.tp + c.fp == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
}

double recall(const Confusion& c) {
  return c.tp + c.fn == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
}

// ---- configuration ----------------------------------------------------------------

nlohmann::json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_windows", c.batch_windows},
          {"window_len", c.window_len},
          {"optimizer", optim::to_json(c.adam)},
          {"cosine_decay", c.cosine_decay},
          {"seed", c.seed},
          {"freeze_encoder", c.freeze_encoder},
          {"ablate", c.ablations.tag()},
          {"patience", c.patience}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  detail::FieldReader f(j, "train");
  f.get("epochs", c.epochs);
  f.get("batch_windows", c.batch_windows);
  f.get("window_len", c.window_len);
  if (f.has("optimizer")) c.adam = optim::adam_config_from_json(f.at("optimizer"));
  f.get("cosine_decay", c.cosine_decay);
  f.get("seed", c.seed);
  f.get("freeze_encoder", c.freeze_encoder);
  std::string ablate;
  f.get("ablate", ablate);
  c.ablations = hier::parse_ablations(ablate);
  f.get("patience", c.patience);
  f.finish();
  require(c.batch_windows >= 1 && c.window_len >= 1, ErrorCode::kInvalidConfig,
          "batch_windows and window_len must be >= 1");
  return c;
}

// ---- prediction ---------------------------------------------------------------------

namespace {

constexpr std::size_t kEncodeChunk = 128;  // segments per encoder pass

Matrix encode_all(bcpc::BcpcModel& encoder, const data::SegmentSet& set) {
  const std::size_t nc = set.n_channels();
  Matrix reps(set.size() * nc, encoder.config().d_repr);
  for (std::size_t begin = 0; begin < set.size(); begin += kEncodeChunk) {
    const std::size_t count = std::min(kEncodeChunk, set.size() - begin);
    const Matrix r = encoder.represent(bcpc::channel_rows(set, begin, count));
    std::copy(r.values().begin(), r.values().end(), reps.row(begin * nc).begin());
  }
  return reps;
}

Matrix slice(const Matrix& m, std::size_t row, std::size_t count) {
  Matrix out(count, m.cols());
  std::copy_n(m.row(row).begin(), count * m.cols(), out.values().begin());
  return out;
}

void check_map(hier::BrainNetModel& model, const data::SegmentSet& set) {
  require(model.channel_map() == set.channel_map(), ErrorCode::kMapMismatch,
          "segment set channel map differs from the model's");
  require(set.window() == model.config().bcpc.segment_length(), ErrorCode::kShape,
          "segment length " + std::to_string(set.window()) + " differs from the model's " +
              std::to_string(model.config().bcpc.segment_length()));
}

LevelScores predict_from_reps(hier::BrainNetModel& model, const Matrix& reps, std::size_t n_segments,
                              std::size_t window_len) {
  const std::size_t nc = model.channel_map().n_channels();
  LevelScores out;
  for (std::size_t l = 0; l < 3; ++l) out[l] = Matrix(n_segments, model.nodes(hier::kLevels[l]));
  for (std::size_t begin = 0; begin < n_segments; begin += window_len) {
    const std::size_t count = std::min(window_len, n_segments - begin);
    Tape tape(false);
    hier::WindowOutput w =
        model.forward_from_representations(tape, tape.constant(slice(reps, begin * nc, count * nc)), count);
    for (std::size_t l = 0; l < 3; ++l) {
      const Matrix& p = w.probs[l].value();
      std::copy(p.values().begin(), p.values().end(), out[l].row(begin).begin());
    }
  }
  return out;
}

std::array<Matrix, 3> as_columns(const LevelScores& s) {
  std::array<Matrix, 3> out;
  for (std::size_t l = 0; l < 3; ++l) out[l] = Matrix(s[l].size(), 1, std::vector<double>(s[l].values().begin(), s[l].values().end()));
  return out;
}

std::array<Matrix, 3> all_labels(const data::SegmentSet& set) {
  std::array<Matrix, 3> out;
  for (std::size_t l = 0; l < 3; ++l) out[l] = hier::window_labels(set, hier::kLevels[l], 0, set.size());
  return out;
}

double channel_f2(const Matrix& scores, const data::SegmentSet& set, double threshold) {
  const auto& y = set.channel_labels().values;
  return f_beta(precision(confusion(scores.values(), y, threshold)), recall(confusion(scores.values(), y, threshold)),
                2.0);
}

}  // namespace

LevelScores predict_segments(hier::BrainNetModel& model, const data::SegmentSet& segments, std::size_t window_len) {
  require(window_len >= 1, ErrorCode::kInvalidConfig, "window_len must be >= 1");
  check_map(model, segments);
  return predict_from_reps(model, encode_all(model.encoder(), segments), segments.size(), window_len);
}

GraphTrace trace_graphs(hier::BrainNetModel& model, const data::SegmentSet& segments, std::size_t window_len) {
  require(window_len >= 1, ErrorCode::kInvalidConfig, "window_len must be >= 1");
  check_map(model, segments);
  const Matrix reps = encode_all(model.encoder(), segments);
  const std::size_t nc = segments.n_channels();
  GraphTrace trace;
  for (std::size_t begin = 0; begin < segments.size(); begin += window_len) {
    const std::size_t count = std::min(window_len, segments.size() - begin);
    Tape tape(false);
    hier::WindowOutput w =
        model.forward_from_representations(tape, tape.constant(slice(reps, begin * nc, count * nc)), count);
    for (std::size_t l = 0; l < 3; ++l) {
      const std::size_t n = model.nodes(hier::kLevels[l]);
      for (std::size_t d = 0; d < 2; ++d) {
        const graph::SequenceResult& seq = d == 0 ? w.forward[l] : w.reverse[l];
        for (std::size_t t = 0; t < count; ++t) {
          const bool none = seq.cross_graphs.empty();
          trace.cross[l][d].push_back(none ? Matrix(n, n) : seq.cross_graphs[t]);
          trace.inner[l][d].push_back(none ? Matrix(n, n) : seq.inner_graphs[t]);
          trace.cross_scores[l][d].push_back(none ? Matrix(n, n) : seq.cross_scores[t]);
          trace.inner_scores[l][d].push_back(none ? Matrix(n, n) : seq.inner_scores[t]);
        }
      }
    }
  }
  return trace;
}

// ---- training --------------------------------------------------------------------

TrainResult train(const bcpc::BcpcModel& pretrained, const data::SegmentSet& train_set,
                  const data::SegmentSet& valid_set, const hier::ModelConfig& model_config,
                  const TrainConfig& config) {
  require(train_set.size() > 0 && valid_set.size() > 0, ErrorCode::kDataValidation,
          "training and validation sets must be nonempty");
  require(config.batch_windows >= 1 && config.window_len >= 1, ErrorCode::kInvalidConfig,
          "batch_windows and window_len must be >= 1");
  hier::ModelConfig mc = model_config;
  mc.bcpc = pretrained.config();
  mc.ablations = config.ablations;
  if (mc.ablations.no_hierarchy) mc.level_weights = {mc.level_weights.channel, 0.0, 0.0};

  std::mt19937_64 rng(config.seed);
  bcpc::BcpcModel encoder = pretrained;
  if (mc.ablations.no_bcpc) {
    encoder = bcpc::BcpcModel(mc.bcpc, rng());
    encoder.set_input_scale(pretrained.input_scale());
  }
  TrainResult result{hier::BrainNetModel(mc, std::move(encoder), train_set.channel_map(), rng()), {}, 0};
  hier::BrainNetModel& model = result.model;
  check_map(model, train_set);
  check_map(model, valid_set);

  const bool frozen = config.freeze_encoder;
  for (ad::Parameter* p : model.encoder().representation_parameters()) p->trainable = !frozen;
  auto params = model.parameters(!frozen);
  optim::Adam adam(params, config.adam);
  const std::size_t nc = train_set.n_channels();
  const Matrix frozen_train = frozen ? encode_all(model.encoder(), train_set) : Matrix();
  const Matrix frozen_valid = frozen ? encode_all(model.encoder(), valid_set) : Matrix();
  const std::array<Matrix, 3> valid_labels = all_labels(valid_set);
  const double valid_units = static_cast<double>(valid_set.size() * nc);

  auto snapshot = [&]() {
    std::vector<Matrix> v;
    for (ad::Parameter* p : params) v.push_back(p->value);
    return v;
  };
  auto restore = [&](const std::vector<Matrix>& v) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = v[i];
  };
  auto validate_model = [&](double& loss, double& f2) {
    const LevelScores s = frozen ? predict_from_reps(model, frozen_valid, valid_set.size(), config.window_len)
                                 : predict_segments(model, valid_set, config.window_len);
    loss = hier::joint_loss(as_columns(s), valid_labels, mc.level_weights) / valid_units;
    f2 = channel_f2(s[0], valid_set, 0.5);
  };

  double best_loss = 0.0, best_f2 = 0.0;
  validate_model(best_loss, best_f2);
  result.curve.push_back({0, std::nan(""), best_loss, best_f2, config.adam.learning_rate});
  std::vector<Matrix> best = snapshot();
  std::vector<Matrix> last_good = best;

  const std::size_t wl = std::min(config.window_len, train_set.size());
  const std::size_t n_windows_max = train_set.size() / wl;
  const std::size_t steps_per_epoch = (n_windows_max + config.batch_windows - 1) / config.batch_windows;
  const std::size_t total_steps = config.epochs * steps_per_epoch;
  std::size_t step = 0, since_best = 0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const std::size_t offset = train_set.size() > wl ? rng() % (train_set.size() - wl * n_windows_max + 1) : 0;
    std::vector<std::size_t> starts;
    for (std::size_t s = offset; s + wl <= train_set.size(); s += wl) starts.push_back(s);
    std::shuffle(starts.begin(), starts.end(), rng);

    double epoch_loss = 0.0, epoch_units = 0.0, lr = config.adam.learning_rate;
    for (std::size_t b = 0; b < starts.size(); b += config.batch_windows) {
      const std::size_t nb = std::min(config.batch_windows, starts.size() - b);
      adam.zero_grad();
      Tape tape;
      std::vector<Var> losses;
      for (std::size_t w = 0; w < nb; ++w) {
        const std::size_t s0 = starts[b + w];
        hier::WindowOutput out =
            frozen ? model.forward_from_representations(tape, tape.constant(slice(frozen_train, s0 * nc, wl * nc)), wl)
                   : model.forward(tape, bcpc::channel_rows(train_set, s0, wl), wl);
        std::array<Matrix, 3> labels;
        for (std::size_t l = 0; l < 3; ++l) labels[l] = hier::window_labels(train_set, hier::kLevels[l], s0, wl);
        losses.push_back(hier::joint_loss(out.probs, labels, mc.level_weights, 1e-7, mc.positive_weight));
      }
      const double units = static_cast<double>(nb * wl * nc);
      Var loss = ad::weighted_sum(losses, std::vector<double>(losses.size(), 1.0 / units));
      if (!std::isfinite(loss.scalar())) {
        restore(last_good);
        throw DivergenceError("training loss became non-finite at epoch " + std::to_string(epoch) + ", step " +
                                  std::to_string(step),
                              model.to_checkpoint());
      }
      tape.backward(loss);
      lr = config.cosine_decay ? optim::cosine_lr(config.adam.learning_rate, step, total_steps)
                               : config.adam.learning_rate;
      adam.step(lr);
      ++step;
      epoch_loss += loss.scalar() * units;
      epoch_units += units;
    }

    double vloss = 0.0, vf2 = 0.0;
    validate_model(vloss, vf2);
    if (!std::isfinite(vloss)) {
      restore(last_good);
      throw DivergenceError("validation loss became non-finite at epoch " + std::to_string(epoch),
                            model.to_checkpoint());
    }
    last_good = snapshot();
    result.curve.push_back({epoch, epoch_units > 0 ? epoch_loss / epoch_units : std::nan(""), vloss, vf2, lr});
    if (vf2 > best_f2 || (vf2 == best_f2 && vloss < best_loss)) {
      best_f2 = vf2;
      best_loss = vloss;
      best = last_good;
      result.best_epoch = epoch;
      since_best = 0;
    } else if (config.patience > 0 && ++since_best >= config.patience) {
      break;
    }
  }
  restore(best);
  for (ad::Parameter* p : model.encoder().representation_parameters()) p->trainable = true;
  return result;
}

void write_curve_csv(const std::vector<EpochRecord>& curve, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write '" + path.string() + "'");
  out << "epoch,train_loss,valid_loss,valid_channel_f2,learning_rate\n" << std::setprecision(10);
  for (const EpochRecord& r : curve)
    out << r.epoch << ',' << r.train_loss << ',' << r.valid_loss << ',' << r.valid_channel_f2 << ','
        << r.learning_rate << '\n';
}

void write_pretrain_curve_csv(const std::vector<bcpc::CurvePoint>& curve, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write '" + path.string() + "'");
  out << "step,train_loss,valid_loss,learning_rate\n" << std::setprecision(10);
  for (const bcpc::CurvePoint& p : curve)
    out << p.step << ',' << p.train_loss << ',' << p.valid_loss << ',' << p.learning_rate << '\n';
}

// ---- evaluation -------------------------------------------------------------------

Metrics score_sample(const LevelScores& scores, const data::EvalSample& sample, double threshold) {
  const std::size_t l = static_cast<std::size_t>(sample.level);
  std::vector<double> s;
  s.reserve(sample.units.size());
  for (const data::EvalUnit& u : sample.units) s.push_back(scores[l](u.segment, u.node));
  Metrics m;
  m.level = sample.level;
  m.ratio = sample.ratio;
  m.available = true;
  m.confusion = confusion(s, sample.labels, threshold);
  const double p = precision(m.confusion), r = recall(m.confusion);
  m.precision = 100.0 * p;
  m.recall = 100.0 * r;
  m.f1 = 100.0 * f_beta(p, r, 1.0);
  m.f2 = 100.0 * f_beta(p, r, 2.0);
  m.auc = 100.0 * auc(s, sample.labels);
  m.n_positive = sample.n_positive();
  m.n_negative = sample.units.size() - m.n_positive;
  return m;
}

const char* to_string(Averaging a) { return a == Averaging::kPooled ? "pooled" : "metric-mean"; }

Averaging parse_averaging(const std::string& s) {
  if (s == "pooled") return Averaging::kPooled;
  if (s == "metric-mean") return Averaging::kMetricMean;
  fail(ErrorCode::kInvalidConfig, "unknown averaging mode '" + s + "'");
}

const Metrics& MetricsReport::at(Level level, const data::Ratio& ratio) const {
  for (const Metrics& m : entries)
    if (m.level == level && m.ratio == ratio) return m;
  fail(ErrorCode::kInvalidConfig,
       std::string("report has no entry for ") + data::to_string(level) + " at " + data::to_string(ratio));
}

MetricsReport evaluate_scores(const LevelScores& scores, const data::SegmentSet& test_set, const EvalConfig& config) {
  MetricsReport report;
  for (Level level : hier::kLevels) {
    for (std::size_t r = 0; r < config.ratios.size(); ++r) {
      const data::Ratio ratio = config.ratios[r];
      const std::uint64_t seed = config.seed * 1000003ULL + static_cast<std::uint64_t>(level) * 101ULL + r;
      std::size_t count = config.count_positive;
      if (count == 0) count = data::max_feasible_positives(test_set, ratio, level);
      Metrics m;
      m.level = level;
      m.ratio = ratio;
      if (count == 0) {
        m.note = "not enough units to sample this ratio";
      } else {
        try {
          m = score_sample(scores, data::sample_eval_set(test_set, ratio, count, seed, level), config.threshold);
        } catch (const Error& e) {
          if (e.code() != ErrorCode::kSamplingInfeasible) throw;
          m.note = e.what();
        }
      }
      report.entries.push_back(m);
    }
  }
  report.metadata["eval"] = {{"seed", config.seed},
                             {"window_len", config.window_len},
                             {"count_positive", config.count_positive},
                             {"threshold", config.threshold},
                             {"threshold_rule", "score > threshold"}};
  return report;
}

MetricsReport evaluate(hier::BrainNetModel& model, const data::SegmentSet& test_set, const EvalConfig& config) {
  const LevelScores scores = predict_segments(model, test_set, config.window_len);
  MetricsReport report = evaluate_scores(scores, test_set, config);
  const nlohmann::json mc = hier::to_json(model.config());
  report.metadata["model"] = mc;
  report.metadata["ablate"] = model.config().ablations.tag();
  report.metadata["config_hash"] = config_hash(mc);
  return report;
}

MetricsReport average_reports(std::span<const MetricsReport> reports, Averaging mode) {
  require(!reports.empty(), ErrorCode::kInvalidConfig, "no reports to average");
  MetricsReport out;
  out.metadata["averaging"] = to_string(mode);
  out.metadata["n_runs"] = reports.size();
  nlohmann::json hashes = nlohmann::json::array();
  for (const MetricsReport& r : reports) hashes.push_back(r.metadata.value("config_hash", ""));
  out.metadata["config_hashes"] = hashes;
  for (std::size_t e = 0; e < reports.front().entries.size(); ++e) {
    Metrics m;
    m.level = reports.front().entries[e].level;
    m.ratio = reports.front().entries[e].ratio;
    std::size_t n = 0;
    for (const MetricsReport& r : reports) {
      require(r.entries.size() == reports.front().entries.size() && r.entries[e].level == m.level &&
                  r.entries[e].ratio == m.ratio,
              ErrorCode::kInvalidConfig, "reports have different layouts");
      const Metrics& x = r.entries[e];
      if (!x.available) continue;
      ++n;
      m.precision += x.precision;
      m.recall += x.recall;
      m.f1 += x.f1;
      m.f2 += x.f2;
      m.auc += x.auc;
      m.confusion.tp += x.confusion.tp;
      m.confusion.fp += x.confusion.fp;
      m.confusion.tn += x.confusion.tn;
      m.confusion.fn += x.confusion.fn;
      m.n_positive += x.n_positive;
      m.n_negative += x.n_negative;
    }
    if (n == 0) {
      m.note = "no run could sample this ratio";
      out.entries.push_back(m);
      continue;
    }
    m.available = true;
    const double dn = static_cast<double>(n);
    m.auc /= dn;
    if (mode == Averaging::kMetricMean) {
      m.precision /= dn;
      m.recall /= dn;
      m.f1 /= dn;
      m.f2 /= dn;
    } else {
      const double p = precision(m.confusion), r = recall(m.confusion);
      m.precision = 100.0 * p;
      m.recall = 100.0 * r;
      m.f1 = 100.0 * f_beta(p, r, 1.0);
      m.f2 = 100.0 * f_beta(p, r, 2.0);
    }
    out.entries.push_back(m);
  }
  return out;
}

nlohmann::json to_json(const MetricsReport& report) {
  nlohmann::json entries = nlohmann::json::array();
  for (const Metrics& m : report.entries) {
    nlohmann::json e{{"level", data::to_string(m.level)}, {"ratio", data::to_string(m.ratio)},
                     {"available", m.available}};
    if (!m.note.empty()) e["note"] = m.note;
    if (m.available) {
      e["precision"] = m.precision;
      e["recall"] = m.recall;
      e["f1"] = m.f1;
      e["f2"] = m.f2;
      e["auc"] = m.auc;
      e["confusion"] = {{"tp", m.confusion.tp}, {"fp", m.confusion.fp}, {"tn", m.confusion.tn}, {"fn", m.confusion.fn}};
      e["n_positive"] = m.n_positive;
      e["n_negative"] = m.n_negative;
    }
    entries.push_back(e);
  }
  return {{"format", "brainnet-metrics"}, {"version", 1}, {"scale", "percent"},
          {"metadata", report.metadata},  {"entries", entries}};
}

MetricsReport report_from_json(const nlohmann::json& j) {
  try {
    MetricsReport r;
    r.metadata = j.at("metadata");
    for (const auto& e : j.at("entries")) {
      Metrics m;
      m.level = data::parse_level(e.at("level").get<std::string>());
      m.ratio = data::parse_ratio(e.at("ratio").get<std::string>());
      m.available = e.at("available").get<bool>();
      m.note = e.value("note", "");
      if (m.available) {
        m.precision = e.at("precision").get<double>();
        m.recall = e.at("recall").get<double>();
        m.f1 = e.at("f1").get<double>();
        m.f2 = e.at("f2").get<double>();
        m.auc = e.at("auc").get<double>();
        const auto& c = e.at("confusion");
        m.confusion = {c.at("tp").get<std::size_t>(), c.at("fp").get<std::size_t>(), c.at("tn").get<std::size_t>(),
                       c.at("fn").get<std::size_t>()};
        m.n_positive = e.at("n_positive").get<std::size_t>();
        m.n_negative = e.at("n_negative").get<std::size_t>();
      }
      r.entries.push_back(m);
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kDataValidation, std::string("bad metrics report: ") + e.what());
  }
}

void store_report(const MetricsReport& report, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write '" + path.string() + "'");
  out << to_json(report).dump(2) << '\n';
}

MetricsReport load_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open '" + path.string() + "'");
  try {
    return report_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kDataValidation, "bad metrics report '" + path.string() + "': " + e.what());
  }
}

std::string format_table(const MetricsReport& report) {
  std::ostringstream os;
  os << std::left << std::setw(9) << "level" << std::setw(8) << "ratio" << std::right;
  for (const char* h : {"Prec", "Rec", "F1", "F2", "AUC"}) os << std::setw(9) << h;
  os << "   tp/fp/tn/fn\n";
  os << std::fixed << std::setprecision(2);
  for (const Metrics& m : report.entries) {
    os << std::left << std::setw(9) << data::to_string(m.level) << std::setw(8) << data::to_string(m.ratio)
       << std::right;
    if (!m.available) {
      os << "  (unavailable: " << m.note << ")\n";
      continue;
    }
    for (double v : {m.precision, m.recall, m.f1, m.f2, m.auc}) os << std::setw(9) << v;
    os << "   " << m.confusion.tp << '/' << m.confusion.fp << '/' << m.confusion.tn << '/' << m.confusion.fn << '\n';
  }
  return os.str();
}

std::string config_hash(const nlohmann::json& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : config.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace brainnet::train
