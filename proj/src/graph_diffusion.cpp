#include "brainnet/graph_diffusion.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "brainnet/error.hpp"

namespace brainnet::graph {

using ad::Parameter;
using ad::Tape;
using ad::Var;

const char* to_string(Direction d) { return d == Direction::kForward ? "forward" : "reverse"; }

namespace {

void check_threshold(double t) {
  require(t > 0.0 && t <= 1.0, ErrorCode::kInvalidConfig,
          "diffusion threshold " + std::to_string(t) + " must lie in (0, 1]");
}

}  // namespace

StepParams make_step_params(const std::string& prefix, std::size_t dim, double threshold, std::mt19937_64& rng) {
  check_threshold(threshold);
  Matrix w1 = random_normal(1, dim, 0.1, rng);
  Matrix w2 = random_normal(1, dim, 0.1, rng);
  for (double& v : w1.values()) v += 1.0;
  for (double& v : w2.values()) v += 1.0;
  Matrix theta = random_normal(dim, dim, 0.1 / std::sqrt(static_cast<double>(dim)), rng);
  for (std::size_t i = 0; i < dim; ++i) theta(i, i) += 1.0;
  return StepParams{{Parameter(prefix + ".w1", std::move(w1)), Parameter(prefix + ".w2", std::move(w2)), threshold},
                    {Parameter(prefix + ".theta", std::move(theta))}};
}

DiffusionParams::DiffusionParams(std::size_t dim, double theta_inner, double theta_cross, std::uint64_t seed,
                                 bool share_directions)
    : dim_(dim), share_(share_directions) {
  require(dim > 0, ErrorCode::kInvalidConfig, "diffusion dimension must be positive");
  std::mt19937_64 rng(seed);
  forward_.cross = make_step_params("fwd.cross", dim, theta_cross, rng);
  forward_.inner = make_step_params("fwd.inner", dim, theta_inner, rng);
  reverse_.cross = make_step_params("rev.cross", dim, theta_cross, rng);
  reverse_.inner = make_step_params("rev.inner", dim, theta_inner, rng);
}

void DiffusionParams::set_thresholds(double theta_inner, double theta_cross) {
  check_threshold(theta_inner);
  check_threshold(theta_cross);
  for (DirectionParams* d : {&forward_, &reverse_}) {
    d->inner.structure.threshold = theta_inner;
    d->cross.structure.threshold = theta_cross;
  }
}

std::vector<Parameter*> DiffusionParams::parameters() {
  std::vector<Parameter*> out;
  auto add = [&](DirectionParams& d) {
    for (StepParams* s : {&d.cross, &d.inner})
      out.insert(out.end(), {&s->structure.w1, &s->structure.w2, &s->layer.theta});
  };
  add(forward_);
  if (!share_) add(reverse_);
  return out;
}

void DiffusionParams::export_to(Checkpoint& ckpt, const std::string& prefix) {
  ckpt.header[prefix + "config"] = {{"dim", dim_},
                                    {"share_directions", share_},
                                    {"theta_inner", theta_inner()},
                                    {"theta_cross", theta_cross()}};
  auto params = parameters();
  export_parameters(ckpt, params, prefix);
}

void DiffusionParams::import_from(const Checkpoint& ckpt, const std::string& prefix) {
  auto params = parameters();
  import_parameters(ckpt, params, prefix);
}

// ---- differentiable ops -------------------------------------------------------

Var learn_structure(Tape& tape, const Var& h1, const Var& h2, StructureLearnerParams& params, bool exclude_diagonal) {
  check_threshold(params.threshold);
  require(h1.cols() == params.w1.value.cols() && h2.cols() == params.w2.value.cols(), ErrorCode::kShape,
          "node features do not match the structure learner dimension");
  Var a = ad::mul_row(h1, tape.parameter(params.w1));
  Var b = ad::mul_row(h2, tape.parameter(params.w2));
  return ad::threshold_gate(ad::cosine_scores(a, b), params.threshold, exclude_diagonal);
}

Var diffuse(Tape& tape, const Var& adjacency, const Var& h1, const Var& h2, DiffusionLayerParams& layer) {
  require(adjacency.rows() == h1.rows() && adjacency.cols() == h2.rows() && h1.cols() == h2.cols() &&
              h2.cols() == layer.theta.value.rows(),
          ErrorCode::kShape, "diffusion shapes are inconsistent");
  return ad::relu(ad::matmul(ad::diffusion_aggregate(adjacency, h1, h2), tape.parameter(layer.theta)));
}

StepOutput cross_time_step(Tape& tape, const Var& h_in_prev, const Var& r_t, StepParams& params) {
  Var prev = h_in_prev.valid() ? h_in_prev : tape.constant(Matrix(r_t.rows(), r_t.cols()));
  require(prev.rows() == r_t.rows(), ErrorCode::kShape, "cross-time step needs the same node set at both times");
  Var scores = ad::cosine_scores(ad::mul_row(prev, tape.parameter(params.structure.w1)),
                                 ad::mul_row(r_t, tape.parameter(params.structure.w2)));
  check_threshold(params.structure.threshold);
  Var a = ad::threshold_gate(scores, params.structure.threshold, false);
  return {diffuse(tape, a, prev, r_t, params.layer), a.value(), scores.value()};
}

StepOutput inner_time_step(Tape& tape, const Var& h_cr_t, StepParams& params) {
  require(h_cr_t.cols() == params.structure.w1.value.cols(), ErrorCode::kShape,
          "node features do not match the structure learner dimension");
  Var scores = ad::cosine_scores(ad::mul_row(h_cr_t, tape.parameter(params.structure.w1)),
                                 ad::mul_row(h_cr_t, tape.parameter(params.structure.w2)));
  check_threshold(params.structure.threshold);
  Var a = ad::threshold_gate(scores, params.structure.threshold, true);
  return {diffuse(tape, a, h_cr_t, h_cr_t, params.layer), a.value(), scores.value()};
}

SequenceResult run_sequence(Tape& tape, const std::vector<Var>& r, Direction direction, DiffusionParams& params,
                            const SequenceOptions& options) {
  require(!r.empty(), ErrorCode::kShape, "sequence must hold at least one step");
  const std::size_t n = r.size();
  DirectionParams& p = params.direction(direction);
  SequenceResult out;
  out.h_in.resize(n);
  out.cross_graphs.resize(n);
  out.inner_graphs.resize(n);
  out.cross_scores.resize(n);
  out.inner_scores.resize(n);
  Var prev;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t t = direction == Direction::kForward ? k : n - 1 - k;
    Var h_cr = r[t];
    if (options.cross) {
      StepOutput s = cross_time_step(tape, prev, r[t], p.cross);
      h_cr = s.h;
      out.cross_graphs[t] = std::move(s.adjacency);
      out.cross_scores[t] = std::move(s.scores);
    } else {
      out.cross_graphs[t] = Matrix(r[t].rows(), r[t].rows());
      out.cross_scores[t] = out.cross_graphs[t];
    }
    Var h_in = h_cr;
    if (options.inner) {
      StepOutput s = inner_time_step(tape, h_cr, p.inner);
      h_in = s.h;
      out.inner_graphs[t] = std::move(s.adjacency);
      out.inner_scores[t] = std::move(s.scores);
    } else {
      out.inner_graphs[t] = Matrix(r[t].rows(), r[t].rows());
      out.inner_scores[t] = out.inner_graphs[t];
    }
    out.h_in[t] = h_in;
    prev = h_in;
  }
  return out;
}

// ---- inference helpers ----------------------------------------------------------

DiffusionGraph learn_structure(const Matrix& h1, const Matrix& h2, StructureLearnerParams& params,
                               bool exclude_diagonal) {
  Tape tape(false);
  return {{}, {}, learn_structure(tape, tape.constant(h1), tape.constant(h2), params, exclude_diagonal).value()};
}

Matrix diffuse(const DiffusionGraph& graph, const Matrix& h1, const Matrix& h2, DiffusionLayerParams& layer) {
  Tape tape(false);
  return diffuse(tape, tape.constant(graph.adjacency), tape.constant(h1), tape.constant(h2), layer).value();
}

std::size_t edge_count(const Matrix& adjacency) {
  std::size_t n = 0;
  for (double v : adjacency.values()) n += v != 0.0;
  return n;
}

std::size_t edges_at_threshold(const Matrix& scores, double threshold, bool exclude_diagonal) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < scores.rows(); ++i)
    for (std::size_t j = 0; j < scores.cols(); ++j)
      n += !(exclude_diagonal && i == j) && scores(i, j) >= threshold;
  return n;
}

// ---- export ---------------------------------------------------------------------

void store_graph(const GraphRecord& rec, const std::filesystem::path& path) {
  const Matrix& a = rec.graph.adjacency;
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < a.rows(); ++i) rows.emplace_back(a.row(i).begin(), a.row(i).end());
  nlohmann::json j{{"level", rec.level},       {"direction", rec.direction}, {"kind", rec.kind},
                   {"step", rec.step},         {"segment", rec.segment},     {"threshold", rec.threshold},
                   {"sources", rec.graph.sources}, {"targets", rec.graph.targets},
                   {"n_sources", a.rows()},    {"n_targets", a.cols()},      {"adjacency", rows}};
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write '" + path.string() + "'");
  out << j.dump(1) << '\n';
}

GraphRecord load_graph(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open '" + path.string() + "'");
  try {
    const nlohmann::json j = nlohmann::json::parse(in);
    GraphRecord rec;
    rec.level = j.at("level").get<std::string>();
    rec.direction = j.at("direction").get<std::string>();
    rec.kind = j.at("kind").get<std::string>();
    rec.step = j.at("step").get<std::size_t>();
    rec.segment = j.at("segment").get<std::size_t>();
    rec.threshold = j.at("threshold").get<double>();
    rec.graph.sources = j.at("sources").get<std::vector<std::string>>();
    rec.graph.targets = j.at("targets").get<std::vector<std::string>>();
    const auto rows = j.at("adjacency").get<std::vector<std::vector<double>>>();
    rec.graph.adjacency = Matrix(j.at("n_sources").get<std::size_t>(), j.at("n_targets").get<std::size_t>());
    require(rows.size() == rec.graph.adjacency.rows(), ErrorCode::kDataValidation, "adjacency row count mismatch");
    for (std::size_t i = 0; i < rows.size(); ++i) {
      require(rows[i].size() == rec.graph.adjacency.cols(), ErrorCode::kDataValidation,
              "adjacency column count mismatch");
      std::copy(rows[i].begin(), rows[i].end(), rec.graph.adjacency.row(i).begin());
    }
    return rec;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kDataValidation, "bad graph file '" + path.string() + "': " + e.what());
  }
}

}  // namespace brainnet::graph
