#include "brainnet/hierarchy.hpp"

#include <sstream>

#include "brainnet/checkpoint.hpp"
#include "brainnet/error.hpp"
#include "json_fields.hpp"

namespace brainnet::hier {

using ad::Parameter;
using ad::Tape;
using ad::Var;
using data::Level;

namespace {

std::vector<std::vector<std::size_t>> region_groups(const data::ChannelMap& map) {
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t b = 0; b < map.n_regions(); ++b) {
    groups.push_back(map.members(b));
    require(!groups.back().empty(), ErrorCode::kMapping, "region '" + map.regions()[b] + "' has no channels");
  }
  return groups;
}

std::vector<std::vector<std::size_t>> all_rows(std::size_t n) {
  std::vector<std::size_t> g(n);
  for (std::size_t i = 0; i < n; ++i) g[i] = i;
  return {g};
}

}  // namespace

Var pool_to_region(const Var& r_channel, const data::ChannelMap& map) {
  require(r_channel.rows() == map.n_channels(), ErrorCode::kMapping, "representation rows do not match channel map");
  return ad::max_row_groups(r_channel, region_groups(map));
}

Var pool_to_patient(const Var& r_region) {
  require(r_region.rows() >= 1, ErrorCode::kShape, "patient pooling needs at least one region");
  return ad::max_row_groups(r_region, all_rows(r_region.rows()));
}

Matrix pool_to_region(const Matrix& r_channel, const data::ChannelMap& map) {
  Tape tape(false);
  return pool_to_region(tape.constant(r_channel), map).value();
}

Matrix pool_to_patient(const Matrix& r_region) {
  Tape tape(false);
  return pool_to_patient(tape.constant(r_region)).value();
}

Discriminator::Discriminator(std::size_t in_dim, std::size_t hidden, std::uint64_t seed) {
  require(in_dim > 0 && hidden > 0, ErrorCode::kInvalidConfig, "discriminator sizes must be positive");
  std::mt19937_64 rng(seed);
  w1_ = Parameter("disc.w1", glorot(in_dim, hidden, rng));
  b1_ = Parameter("disc.b1", Matrix(1, hidden));
  w2_ = Parameter("disc.w2", Matrix(hidden, 1));
  b2_ = Parameter("disc.b2", Matrix(1, 1));
}

Var Discriminator::forward(Tape& tape, const Var& features) {
  require(features.cols() == in_dim(), ErrorCode::kShape,
          "discriminator expects " + std::to_string(in_dim()) + " features, got " + std::to_string(features.cols()));
  Var h = ad::relu(ad::add_row(ad::matmul(features, tape.parameter(w1_)), tape.parameter(b1_)));
  return ad::sigmoid(ad::add_row(ad::matmul(h, tape.parameter(w2_)), tape.parameter(b2_)));
}

Var predict(Tape& tape, const Var& h_fwd, const Var& h_rev, const Var& r, Discriminator& d) {
  require(h_fwd.rows() == r.rows() && h_rev.rows() == r.rows() && h_fwd.cols() == r.cols() &&
              h_rev.cols() == r.cols(),
          ErrorCode::kShape, "prediction inputs must share node count and dimension");
  return d.forward(tape, ad::concat_cols({h_fwd, h_rev, r}));
}

Matrix predict(const Matrix& h_fwd, const Matrix& h_rev, const Matrix& r, Discriminator& d) {
  Tape tape(false);
  return predict(tape, tape.constant(h_fwd), tape.constant(h_rev), tape.constant(r), d).value();
}

Var joint_loss(const std::array<Var, 3>& predictions, const std::array<Matrix, 3>& labels, const LevelWeights& w,
               double eps, double positive_weight) {
  std::vector<Var> terms;
  std::vector<double> weights;
  for (std::size_t l = 0; l < 3; ++l) {
    if (w[l] == 0.0 || !predictions[l].valid()) continue;
    terms.push_back(ad::bce_sum(predictions[l], labels[l], eps, positive_weight));
    weights.push_back(w[l]);
  }
  require(!terms.empty(), ErrorCode::kInvalidConfig, "all level weights are zero");
  return ad::weighted_sum(terms, weights);
}

double joint_loss(const std::array<Matrix, 3>& predictions, const std::array<Matrix, 3>& labels,
                  const LevelWeights& weights, double eps) {
  Tape tape(false);
  std::array<Var, 3> p;
  for (std::size_t l = 0; l < 3; ++l) p[l] = tape.constant(predictions[l]);
  return joint_loss(p, labels, weights, eps).scalar();
}

std::string Ablations::tag() const {
  std::vector<std::string> parts;
  if (no_bcpc) parts.emplace_back("no_bcpc");
  if (no_graph) parts.emplace_back("no_graph");
  if (no_inner) parts.emplace_back("no_inner");
  if (no_cross) parts.emplace_back("no_cross");
  if (no_hierarchy) parts.emplace_back("no_hierarchy");
  if (parts.empty()) return "full";
  std::string out = parts.front();
  for (std::size_t i = 1; i < parts.size(); ++i) out += "," + parts[i];
  return out;
}

Ablations parse_ablations(const std::string& text) {
  Ablations a;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty() || item == "none" || item == "full") continue;
    if (item == "no_bcpc") a.no_bcpc = true;
    else if (item == "no_graph") a.no_graph = true;
    else if (item == "no_inner") a.no_inner = true;
    else if (item == "no_cross") a.no_cross = true;
    else if (item == "no_hierarchy") a.no_hierarchy = true;
    else fail(ErrorCode::kInvalidConfig, "unknown ablation '" + item + "'");
  }
  return a;
}

nlohmann::json to_json(const ModelConfig& c) {
  return {{"bcpc", bcpc::to_json(c.bcpc)},
          {"theta_inner", c.theta_inner},
          {"theta_cross", c.theta_cross},
          {"discriminator_hidden", c.discriminator_hidden},
          {"share_directions", c.share_directions},
          {"level_weights", {{"channel", c.level_weights.channel},
                             {"region", c.level_weights.region},
                             {"patient", c.level_weights.patient}}},
          {"positive_weight", c.positive_weight},
          {"ablate", c.ablations.tag()}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  detail::FieldReader f(j, "model");
  if (f.has("bcpc")) c.bcpc = bcpc::bcpc_config_from_json(f.at("bcpc"));
  f.get("theta_inner", c.theta_inner);
  f.get("theta_cross", c.theta_cross);
  f.get("discriminator_hidden", c.discriminator_hidden);
  f.get("share_directions", c.share_directions);
  if (f.has("level_weights")) {
    detail::FieldReader w(f.at("level_weights"), "model.level_weights");
    w.get("channel", c.level_weights.channel);
    w.get("region", c.level_weights.region);
    w.get("patient", c.level_weights.patient);
    w.finish();
  }
  f.get("positive_weight", c.positive_weight);
  std::string ablate;
  f.get("ablate", ablate);
  c.ablations = parse_ablations(ablate);
  f.finish();
  require(c.theta_inner > 0.0 && c.theta_inner <= 1.0 && c.theta_cross > 0.0 && c.theta_cross <= 1.0,
          ErrorCode::kInvalidConfig, "thresholds must lie in (0, 1]");
  require(c.level_weights.channel >= 0.0 && c.level_weights.region >= 0.0 && c.level_weights.patient >= 0.0,
          ErrorCode::kInvalidConfig, "level weights must be non-negative");
  require(c.positive_weight > 0.0, ErrorCode::kInvalidConfig, "positive_weight must be positive");
  return c;
}

// ---- model -------------------------------------------------------------------

BrainNetModel::BrainNetModel(const ModelConfig& config, bcpc::BcpcModel encoder, data::ChannelMap channel_map,
                             std::uint64_t seed)
    : config_(config), map_(std::move(channel_map)), encoder_(std::move(encoder)) {
  bcpc::validate(config_.bcpc);
  require(bcpc::to_json(encoder_.config()) == bcpc::to_json(config_.bcpc), ErrorCode::kInvalidConfig,
          "encoder configuration differs from the model configuration");
  std::mt19937_64 rng(seed);
  const std::size_t d = config_.bcpc.d_repr;
  diffusion_ = graph::DiffusionParams(d, config_.theta_inner, config_.theta_cross, rng(), config_.share_directions);
  const std::size_t in = config_.ablations.no_graph ? d : 3 * d;
  discriminator_ = Discriminator(in, config_.discriminator_hidden, rng());
}

std::size_t BrainNetModel::nodes(Level level) const {
  switch (level) {
    case Level::kChannel: return map_.n_channels();
    case Level::kRegion: return map_.n_regions();
    case Level::kPatient: return 1;
  }
  return 0;
}

std::vector<std::string> BrainNetModel::node_labels(Level level) const {
  switch (level) {
    case Level::kChannel: return map_.channels();
    case Level::kRegion: return map_.regions();
    case Level::kPatient: return {"patient"};
  }
  return {};
}

WindowOutput BrainNetModel::forward(Tape& tape, const Matrix& rows, std::size_t n_segments) {
  require(rows.rows() == n_segments * map_.n_channels(), ErrorCode::kShape,
          "window rows must be |S| x |C| one-channel segments");
  return forward_from_representations(tape, encoder_.represent(tape, rows), n_segments);
}

WindowOutput BrainNetModel::forward_from_representations(Tape& tape, const Var& reps, std::size_t n_segments) {
  const std::size_t nc = map_.n_channels();
  require(n_segments >= 1 && reps.rows() == n_segments * nc && reps.cols() == config_.bcpc.d_repr,
          ErrorCode::kShape, "representations must be (|S| * |C|) x d_repr");
  std::array<std::vector<Var>, 3> r;
  for (std::size_t t = 0; t < n_segments; ++t) {
    Var ch = ad::slice_rows(reps, t * nc, nc);
    Var region = pool_to_region(ch, map_);
    r[0].push_back(ch);
    r[1].push_back(region);
    r[2].push_back(pool_to_patient(region));
  }
  const Ablations& ab = config_.ablations;
  const graph::SequenceOptions options{!ab.no_cross, !ab.no_inner};
  WindowOutput out;
  for (std::size_t l = 0; l < 3; ++l) {
    const Level level = kLevels[l];
    std::vector<Var> features;
    if (ab.no_graph) {
      features = r[l];
    } else {
      graph::DiffusionParams& diffusion = diffusion_for(level);
      out.forward[l] = graph::run_sequence(tape, r[l], graph::Direction::kForward, diffusion, options);
      out.reverse[l] = graph::run_sequence(tape, r[l], graph::Direction::kReverse, diffusion, options);
      for (std::size_t t = 0; t < n_segments; ++t)
        features.push_back(ad::concat_cols({out.forward[l].h_in[t], out.reverse[l].h_in[t], r[l][t]}));
    }
    out.probs[l] = discriminator_for(level).forward(tape, ad::concat_rows(features));
  }
  return out;
}

std::vector<Parameter*> BrainNetModel::parameters(bool include_encoder) {
  std::vector<Parameter*> out;
  if (include_encoder) out = encoder_.representation_parameters();
  if (!config_.ablations.no_graph)
    for (Parameter* p : diffusion_.parameters()) out.push_back(p);
  for (Parameter* p : discriminator_.parameters()) out.push_back(p);
  return out;
}

Checkpoint BrainNetModel::to_checkpoint() {
  Checkpoint ckpt;
  ckpt.kind = "brainnet";
  ckpt.header["model"] = to_json(config_);
  ckpt.header["channel_map"] = {{"channels", map_.channels()}, {"regions", map_.regions()},
                                {"assignment", map_.assignment()}};
  // Every level reads the same diffusion and discriminator arrays.
  ckpt.header["shared_parameters"] = {{"diffusion.", {"channel", "region", "patient"}},
                                      {"disc.", {"channel", "region", "patient"}},
                                      {"encoder.proj.", {"channel", "region", "patient"}}};
  encoder_.export_to(ckpt, "encoder.");
  diffusion_.export_to(ckpt, "diffusion.");
  auto disc = discriminator_.parameters();
  export_parameters(ckpt, disc, "");
  return ckpt;
}

BrainNetModel BrainNetModel::from_checkpoint(const Checkpoint& ckpt) {
  require(ckpt.kind == "brainnet", ErrorCode::kDataValidation,
          "checkpoint kind '" + ckpt.kind + "' is not a detection model");
  try {
    const ModelConfig config = model_config_from_json(ckpt.header.at("model"));
    const auto& m = ckpt.header.at("channel_map");
    data::ChannelMap map(m.at("channels").get<std::vector<std::string>>(),
                         m.at("regions").get<std::vector<std::string>>(),
                         m.at("assignment").get<std::vector<std::size_t>>());
    bcpc::BcpcModel encoder(config.bcpc, 0);
    encoder.import_from(ckpt, "encoder.");
    BrainNetModel model(config, std::move(encoder), std::move(map), 0);
    model.diffusion_.import_from(ckpt, "diffusion.");
    auto disc = model.discriminator_.parameters();
    import_parameters(ckpt, disc, "");
    return model;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kDataValidation, std::string("bad detection checkpoint header: ") + e.what());
  }
}

Matrix window_labels(const data::SegmentSet& segments, Level level, std::size_t begin, std::size_t count) {
  const data::BinaryMatrix& y = segments.labels(level);
  require(begin + count <= y.rows, ErrorCode::kInvalidConfig, "label window out of range");
  Matrix out(count * y.cols, 1);
  for (std::size_t t = 0; t < count; ++t)
    for (std::size_t n = 0; n < y.cols; ++n) out(t * y.cols + n, 0) = y(begin + t, n);
  return out;
}

}  // namespace brainnet::hier
