#include "brainnet/bcpc.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "brainnet/error.hpp"
#include "json_fields.hpp"

namespace brainnet::bcpc {

using ad::Parameter;
using ad::Tape;
using ad::Var;

void validate(const BcpcConfig& c) {
  auto bad = [](bool cond, const std::string& msg) { require(!cond, ErrorCode::kInvalidConfig, msg); };
  bad(c.n_positions < 4 || c.n_positions % 2 != 0, "n_positions must be even and >= 4");
  bad(c.horizon < 1 || c.horizon > c.n_positions / 2 - 1,
      "horizon must satisfy 1 <= P <= n_positions / 2 - 1");
  bad(c.n_negatives < 1, "n_negatives must be >= 1");
  bad(c.d_local == 0 || c.d_context == 0 || c.d_repr == 0, "feature dimensions must be positive");
  bad(c.encoder_strides.empty(), "encoder needs at least one layer");
  std::size_t prod = 1;
  for (std::size_t s : c.encoder_strides) {
    bad(s == 0, "encoder strides must be positive");
    prod *= s;
  }
  bad(prod != c.local_window, "encoder strides must multiply to local_window");
  bad(c.encoder_strides.size() > 1 && c.encoder_width == 0, "encoder_width must be positive");
  bad(c.n_heads == 0 || c.d_context % c.n_heads != 0, "d_context must be a multiple of n_heads");
  bad(c.ff_width == 0, "ff_width must be positive");
}

nlohmann::json to_json(const BcpcConfig& c) {
  return {{"local_window", c.local_window}, {"n_positions", c.n_positions}, {"d_local", c.d_local},
          {"d_context", c.d_context},       {"d_repr", c.d_repr},           {"horizon", c.horizon},
          {"n_negatives", c.n_negatives},   {"encoder_strides", c.encoder_strides},
          {"encoder_width", c.encoder_width}, {"n_layers", c.n_layers},     {"n_heads", c.n_heads},
          {"ff_width", c.ff_width}};
}

BcpcConfig bcpc_config_from_json(const nlohmann::json& j) {
  BcpcConfig c;
  detail::FieldReader f(j, "bcpc");
  f.get("local_window", c.local_window);
  f.get("n_positions", c.n_positions);
  f.get("d_local", c.d_local);
  f.get("d_context", c.d_context);
  f.get("d_repr", c.d_repr);
  f.get("horizon", c.horizon);
  f.get("n_negatives", c.n_negatives);
  f.get("encoder_strides", c.encoder_strides);
  f.get("encoder_width", c.encoder_width);
  f.get("n_layers", c.n_layers);
  f.get("n_heads", c.n_heads);
  f.get("ff_width", c.ff_width);
  f.finish();
  validate(c);
  return c;
}

int signed_position(std::size_t index, std::size_t L) {
  const auto half = static_cast<int>(L / 2);
  const auto i = static_cast<int>(index);
  return i < half ? -(half - i) : i - half + 1;
}

std::size_t storage_index(int s, std::size_t L) {
  const auto half = static_cast<int>(L / 2);
  require(s != 0 && std::abs(s) <= half, ErrorCode::kInvalidConfig,
          "signed position " + std::to_string(s) + " outside a sequence of " + std::to_string(L));
  return static_cast<std::size_t>(s < 0 ? half + s : half + s - 1);
}

Matrix build_mask(std::size_t L) {
  require(L >= 4 && L % 2 == 0, ErrorCode::kInvalidConfig, "mask length must be even and >= 4");
  Matrix m(L, L);
  for (std::size_t i = 0; i < L; ++i)
    for (std::size_t j = 0; j < L; ++j)
      m(i, j) = std::abs(signed_position(j, L)) <= std::abs(signed_position(i, L)) ? 1.0 : 0.0;
  return m;
}

// ---- model -----------------------------------------------------------------

BcpcModel::BcpcModel(const BcpcConfig& config, std::uint64_t seed) : config_(config) {
  validate(config_);
  mask_ = build_mask(config_.n_positions);
  std::mt19937_64 rng(seed);
  const std::size_t dc = config_.d_context;

  std::size_t in_dim = 1;
  for (std::size_t i = 0; i < config_.encoder_strides.size(); ++i) {
    const std::size_t s = config_.encoder_strides[i];
    const bool last = i + 1 == config_.encoder_strides.size();
    const std::size_t out = last ? config_.d_local : config_.encoder_width;
    const std::string name = "enc.conv" + std::to_string(i);
    conv_.push_back({Parameter(name + ".w", glorot(s * in_dim, out, rng)), Parameter(name + ".b", Matrix(1, out)), s});
    in_dim = out;
  }
  in_w_ = Parameter("ar.in.w", glorot(config_.d_local, dc, rng));
  in_b_ = Parameter("ar.in.b", Matrix(1, dc));
  pos_ = Parameter("ar.pos", random_normal(config_.n_positions, dc, 0.1, rng));
  for (std::size_t l = 0; l < config_.n_layers; ++l) {
    const std::string n = "ar.block" + std::to_string(l) + ".";
    blocks_.push_back(Block{Parameter(n + "ln1.g", Matrix(1, dc, 1.0)), Parameter(n + "ln1.b", Matrix(1, dc)),
                            Parameter(n + "wq", glorot(dc, dc, rng)),    Parameter(n + "wk", glorot(dc, dc, rng)),
                            Parameter(n + "wv", glorot(dc, dc, rng)),    Parameter(n + "wo", glorot(dc, dc, rng)),
                            Parameter(n + "ln2.g", Matrix(1, dc, 1.0)), Parameter(n + "ln2.b", Matrix(1, dc)),
                            Parameter(n + "ff1.w", glorot(dc, config_.ff_width, rng)),
                            Parameter(n + "ff1.b", Matrix(1, config_.ff_width)),
                            Parameter(n + "ff2.w", glorot(config_.ff_width, dc, rng)),
                            Parameter(n + "ff2.b", Matrix(1, dc))});
  }
  lnf_g_ = Parameter("ar.lnf.g", Matrix(1, dc, 1.0));
  lnf_b_ = Parameter("ar.lnf.b", Matrix(1, dc));
  for (std::size_t p = 0; p < config_.horizon; ++p)
    scorers_.emplace_back("score.w" + std::to_string(p + 1), Matrix(config_.d_local, dc));
  proj_w_ = Parameter("proj.w", glorot(dc, config_.d_repr, rng));
  proj_b_ = Parameter("proj.b", Matrix(1, config_.d_repr));
}

Var BcpcModel::encode_local(Tape& tape, const Matrix& segments) {
  const std::size_t k = config_.segment_length();
  require(segments.cols() == k, ErrorCode::kShape,
          "segment length " + std::to_string(segments.cols()) + " does not match " + std::to_string(k));
  Matrix x = segments;
  if (input_scale_ != 1.0)
    for (double& v : x.values()) v *= input_scale_;
  const std::size_t s0 = conv_.front().stride;
  x.reshape(segments.rows() * k / s0, s0);
  Var h = tape.constant(std::move(x));
  for (std::size_t i = 0; i < conv_.size(); ++i) {
    if (i > 0) h = ad::reshape(h, h.rows() / conv_[i].stride, conv_[i].stride * h.cols());
    h = ad::add_row(ad::matmul(h, tape.parameter(conv_[i].w)), tape.parameter(conv_[i].b));
    if (i + 1 < conv_.size()) h = ad::relu(h);
  }
  return h;
}

Var BcpcModel::contextualize(Tape& tape, const Var& locals) { return contextualize(tape, locals, mask_); }

Var BcpcModel::contextualize(Tape& tape, const Var& locals, const Matrix& mask) {
  const std::size_t L = config_.n_positions;
  require(mask.rows() == L && mask.cols() == L, ErrorCode::kShape, "mask does not match n_positions");
  require(locals.cols() == config_.d_local && locals.rows() % L == 0, ErrorCode::kShape,
          "local features must be (segments * L) x d_local");
  Var x = ad::add_tiled(ad::add_row(ad::matmul(locals, tape.parameter(in_w_)), tape.parameter(in_b_)),
                        tape.parameter(pos_));
  for (Block& b : blocks_) {
    Var h = ad::layer_norm(x, tape.parameter(b.ln1_g), tape.parameter(b.ln1_b));
    Var a = ad::masked_attention(ad::matmul(h, tape.parameter(b.wq)), ad::matmul(h, tape.parameter(b.wk)),
                                 ad::matmul(h, tape.parameter(b.wv)), mask, L, config_.n_heads);
    x = ad::add(x, ad::matmul(a, tape.parameter(b.wo)));
    h = ad::layer_norm(x, tape.parameter(b.ln2_g), tape.parameter(b.ln2_b));
    Var f = ad::relu(ad::add_row(ad::matmul(h, tape.parameter(b.ff1_w)), tape.parameter(b.ff1_b)));
    x = ad::add(x, ad::add_row(ad::matmul(f, tape.parameter(b.ff2_w)), tape.parameter(b.ff2_b)));
  }
  return ad::layer_norm(x, tape.parameter(lnf_g_), tape.parameter(lnf_b_));
}

Var BcpcModel::pool_and_project(Tape& tape, const Var& contexts) {
  require(contexts.cols() == proj_w_.value.rows(), ErrorCode::kShape, "context width does not match projection");
  Var pooled = ad::mean_row_blocks(contexts, config_.n_positions);
  return ad::add_row(ad::matmul(pooled, tape.parameter(proj_w_)), tape.parameter(proj_b_));
}

Var BcpcModel::represent(Tape& tape, const Matrix& segments) {
  return pool_and_project(tape, contextualize(tape, encode_local(tape, segments)));
}

std::vector<Var> BcpcModel::predictions(Tape& tape, const Var& contexts) {
  std::vector<Var> out;
  for (Parameter& w : scorers_) out.push_back(ad::matmul_nt(contexts, tape.parameter(w)));
  return out;
}

Matrix BcpcModel::encode_local(const Matrix& segments) {
  Tape tape(false);
  return encode_local(tape, segments).value();
}

Matrix BcpcModel::contextualize(const Matrix& locals, const Matrix& mask) {
  Tape tape(false);
  return contextualize(tape, tape.constant(locals), mask).value();
}

Matrix BcpcModel::represent(const Matrix& segments) {
  Tape tape(false);
  return represent(tape, segments).value();
}

std::vector<Parameter*> BcpcModel::representation_parameters() {
  std::vector<Parameter*> out;
  for (ConvLayer& c : conv_) out.insert(out.end(), {&c.w, &c.b});
  out.insert(out.end(), {&in_w_, &in_b_, &pos_});
  for (Block& b : blocks_)
    out.insert(out.end(), {&b.ln1_g, &b.ln1_b, &b.wq, &b.wk, &b.wv, &b.wo, &b.ln2_g, &b.ln2_b, &b.ff1_w, &b.ff1_b,
                           &b.ff2_w, &b.ff2_b});
  out.insert(out.end(), {&lnf_g_, &lnf_b_, &proj_w_, &proj_b_});
  return out;
}

std::vector<Parameter*> BcpcModel::scorer_parameters() {
  std::vector<Parameter*> out;
  for (Parameter& w : scorers_) out.push_back(&w);
  return out;
}

std::vector<Parameter*> BcpcModel::parameters() {
  auto out = representation_parameters();
  for (Parameter* p : scorer_parameters()) out.push_back(p);
  return out;
}

void BcpcModel::export_to(Checkpoint& ckpt, const std::string& prefix) {
  ckpt.header[prefix + "config"] = to_json(config_);
  ckpt.arrays.emplace_back(prefix + "input_scale", Matrix(1, 1, input_scale_));
  auto params = parameters();
  export_parameters(ckpt, params, prefix);
}

void BcpcModel::import_from(const Checkpoint& ckpt, const std::string& prefix) {
  auto params = parameters();
  import_parameters(ckpt, params, prefix);
  input_scale_ = ckpt.array(prefix + "input_scale")(0, 0);
}

Checkpoint BcpcModel::to_checkpoint() {
  Checkpoint ckpt;
  ckpt.kind = "bcpc";
  export_to(ckpt, "");
  return ckpt;
}

BcpcModel BcpcModel::from_checkpoint(const Checkpoint& ckpt) {
  require(ckpt.kind == "bcpc", ErrorCode::kDataValidation, "checkpoint kind '" + ckpt.kind + "' is not bcpc");
  BcpcModel model(bcpc_config_from_json(ckpt.header.at("config")), 0);
  model.import_from(ckpt, "");
  return model;
}

// ---- loss ------------------------------------------------------------------

std::vector<ad::NceTerm> make_nce_terms(std::size_t batch, std::size_t L, std::size_t horizon,
                                        std::size_t n_negatives, std::mt19937_64& rng) {
  require(L >= 4 && L % 2 == 0, ErrorCode::kInvalidConfig, "n_positions must be even and >= 4");
  require(horizon >= 1 && horizon <= L / 2 - 1, ErrorCode::kInvalidConfig,
          "horizon " + std::to_string(horizon) + " too large for n_positions " + std::to_string(L));
  const std::size_t pool = batch * L;
  require(n_negatives == 0 || pool > 1, ErrorCode::kSamplingInfeasible, "no rows available as negatives");
  const auto half = static_cast<int>(L / 2);

  // Steps in range per storage position.
  std::vector<std::size_t> steps(L, 0);
  std::size_t contributing = 0;
  for (std::size_t i = 0; i < L; ++i) {
    const int t = signed_position(i, L);
    steps[i] = std::min<std::size_t>(horizon, static_cast<std::size_t>(half - std::abs(t)));
    contributing += steps[i] > 0;
  }
  const double total = static_cast<double>(contributing * batch);

  std::uniform_int_distribution<std::size_t> pick(0, pool > 1 ? pool - 2 : 0);
  std::vector<ad::NceTerm> terms;
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t i = 0; i < L; ++i) {
      if (steps[i] == 0) continue;
      const int t = signed_position(i, L);
      const int sign = t > 0 ? 1 : -1;
      for (std::size_t p = 1; p <= steps[i]; ++p) {
        ad::NceTerm term;
        term.query = b * L + i;
        term.step = p - 1;
        term.positive = b * L + storage_index(t + sign * static_cast<int>(p), L);
        term.weight = 1.0 / (static_cast<double>(steps[i]) * total);
        for (std::size_t n = 0; n < n_negatives; ++n) {
          std::size_t r = pick(rng);
          if (r >= term.positive) ++r;
          term.negatives.push_back(r);
        }
        terms.push_back(std::move(term));
      }
    }
  }
  return terms;
}

Var bcpc_loss(BcpcModel& model, const Var& locals, const Var& contexts, const std::vector<ad::NceTerm>& terms) {
  require(locals.rows() == contexts.rows(), ErrorCode::kShape, "locals and contexts differ in row count");
  return ad::info_nce(locals, model.predictions(contexts.tape(), contexts), terms);
}

Var bcpc_loss(Tape& tape, BcpcModel& model, const Matrix& segments, std::mt19937_64& rng) {
  const BcpcConfig& c = model.config();
  Var locals = model.encode_local(tape, segments);
  Var contexts = model.contextualize(tape, locals);
  auto terms = make_nce_terms(segments.rows(), c.n_positions, c.horizon, c.n_negatives, rng);
  return bcpc_loss(model, locals, contexts, terms);
}

// ---- pretraining -------------------------------------------------------------

nlohmann::json to_json(const PretrainConfig& c) {
  return {{"steps", c.steps},
          {"batch_size", c.batch_size},
          {"optimizer", optim::to_json(c.adam)},
          {"eval_every", c.eval_every},
          {"seed", c.seed},
          {"normalize_input", c.normalize_input}};
}

PretrainConfig pretrain_config_from_json(const nlohmann::json& j) {
  PretrainConfig c;
  detail::FieldReader f(j, "pretrain");
  f.get("steps", c.steps);
  f.get("batch_size", c.batch_size);
  if (f.has("optimizer")) c.adam = optim::adam_config_from_json(f.at("optimizer"));
  f.get("eval_every", c.eval_every);
  f.get("seed", c.seed);
  f.get("normalize_input", c.normalize_input);
  f.finish();
  require(c.batch_size >= 1 && c.eval_every >= 1, ErrorCode::kInvalidConfig,
          "pretrain batch_size and eval_every must be >= 1");
  return c;
}

namespace {

Matrix gather_rows(const Matrix& m, const std::vector<std::size_t>& rows) {
  Matrix out(rows.size(), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) std::copy(m.row(rows[i]).begin(), m.row(rows[i]).end(), out.row(i).begin());
  return out;
}

}  // namespace

double validation_loss(BcpcModel& model, const Matrix& valid, std::size_t batch_size, std::uint64_t seed) {
  require(valid.rows() > 0, ErrorCode::kDataValidation, "empty validation set");
  std::mt19937_64 rng(seed);
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t begin = 0; begin < valid.rows(); begin += batch_size) {
    const std::size_t count = std::min(batch_size, valid.rows() - begin);
    std::vector<std::size_t> rows(count);
    std::iota(rows.begin(), rows.end(), begin);
    Tape tape(false);
    sum += bcpc_loss(tape, model, gather_rows(valid, rows), rng).scalar();
    ++n;
  }
  return sum / static_cast<double>(n);
}

PretrainResult pretrain(BcpcModel& model, const Matrix& train, const Matrix& valid, const PretrainConfig& config) {
  require(train.rows() > 0, ErrorCode::kDataValidation, "pretraining needs at least one segment");
  require(train.cols() == model.config().segment_length() && valid.cols() == train.cols(), ErrorCode::kShape,
          "pretraining segments do not match the model's segment length");
  if (config.normalize_input) {
    double mean = 0.0, sq = 0.0;
    for (double v : train.values()) mean += v;
    mean /= static_cast<double>(train.size());
    for (double v : train.values()) sq += (v - mean) * (v - mean);
    const double sd = std::sqrt(sq / static_cast<double>(train.size()));
    if (sd > 0.0) model.set_input_scale(1.0 / sd);
  }
  const std::uint64_t valid_seed = config.seed ^ 0x5eed5eedULL;
  std::mt19937_64 rng(config.seed);
  optim::Adam adam(model.parameters(), config.adam);
  PretrainResult result;
  const double nan = std::numeric_limits<double>::quiet_NaN();

  auto check_finite = [](double v, std::size_t step, const char* what) {
    require(std::isfinite(v), ErrorCode::kDivergence,
            std::string(what) + " became non-finite at step " + std::to_string(step));
  };

  result.initial_valid_loss = validation_loss(model, valid, config.batch_size, valid_seed);
  check_finite(result.initial_valid_loss, 0, "validation loss");
  result.curve.push_back({0, nan, result.initial_valid_loss, config.adam.learning_rate});
  result.final_valid_loss = result.initial_valid_loss;

  std::vector<std::size_t> order(train.rows());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();
  double running = 0.0;
  std::size_t running_n = 0;
  for (std::size_t step = 1; step <= config.steps; ++step) {
    std::vector<std::size_t> rows;
    while (rows.size() < std::min(config.batch_size, train.rows())) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      rows.push_back(order[cursor++]);
    }
    adam.zero_grad();
    Tape tape;
    Var loss = bcpc_loss(tape, model, gather_rows(train, rows), rng);
    check_finite(loss.scalar(), step, "training loss");
    tape.backward(loss);
    const double lr = optim::cosine_lr(config.adam.learning_rate, step - 1, config.steps);
    const double gnorm = adam.step(lr);
    check_finite(gnorm, step, "gradient norm");
    running += loss.scalar();
    ++running_n;
    if (step % config.eval_every == 0 || step == config.steps) {
      const double v = validation_loss(model, valid, config.batch_size, valid_seed);
      check_finite(v, step, "validation loss");
      result.curve.push_back({step, running / static_cast<double>(running_n), v, lr});
      result.final_valid_loss = v;
      running = 0.0;
      running_n = 0;
    }
  }
  return result;
}

Matrix normal_channel_segments(const data::SegmentSet& segments, std::size_t max_count, std::uint64_t seed) {
  std::vector<std::pair<std::size_t, std::size_t>> pool;
  const auto& y = segments.channel_labels();
  for (std::size_t t = 0; t < segments.size(); ++t)
    for (std::size_t c = 0; c < segments.n_channels(); ++c)
      if (y(t, c) == 0) pool.emplace_back(t, c);
  std::mt19937_64 rng(seed);
  std::vector<std::pair<std::size_t, std::size_t>> chosen;
  std::sample(pool.begin(), pool.end(), std::back_inserter(chosen), std::min(max_count, pool.size()), rng);
  std::shuffle(chosen.begin(), chosen.end(), rng);
  const std::size_t k = segments.window();
  Matrix out(chosen.size(), k);
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    const float* src = segments.segment(chosen[i].first, chosen[i].second);
    for (std::size_t j = 0; j < k; ++j) out(i, j) = src[j];
  }
  return out;
}

Matrix channel_rows(const data::SegmentSet& segments, std::size_t begin, std::size_t count) {
  require(begin + count <= segments.size(), ErrorCode::kInvalidConfig, "segment range out of bounds");
  const std::size_t nc = segments.n_channels(), k = segments.window();
  Matrix out(count * nc, k);
  const float* src = segments.segment(begin, 0);
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = src[i];
  return out;
}

}  // namespace brainnet::bcpc
