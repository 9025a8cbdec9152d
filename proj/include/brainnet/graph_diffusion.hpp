#pragma once

// Learned directed diffusion graphs between node sets.
//
// Structure: A0(i, j) = cos(W1 * h1(i), W2 * h2(j)) with elementwise
// reweighting; a pair involving a zero vector scores 0. Entries below the
// threshold are zeroed, as is the diagonal for inner-time graphs.
// Diffusion: h2'(j) = ReLU([(h2(j) + sum_i A(i,j) h1(i)) / (1 + sum_i A(i,j))] Theta).
//
// A sequence alternates a cross-time step (previous inner state -> current
// representation) and an inner-time step (among the current nodes). The first
// cross-time step reads from an all-zero virtual node set, which yields an
// empty graph. The reverse direction runs the same recurrence over the
// reversed order with its own parameters unless sharing is requested.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "brainnet/autodiff.hpp"
#include "brainnet/checkpoint.hpp"

namespace brainnet::graph {

enum class Direction { kForward, kReverse };
const char* to_string(Direction d);

struct StructureLearnerParams {
  ad::Parameter w1;  // 1 x d, source reweighting
  ad::Parameter w2;  // 1 x d, target reweighting
  double threshold = 0.1;
};

struct DiffusionLayerParams {
  ad::Parameter theta;  // d x d
};

struct StepParams {
  StructureLearnerParams structure;
  DiffusionLayerParams layer;
};

struct DirectionParams {
  StepParams cross;
  StepParams inner;
};

// Initial values: W1, W2 = 1 + N(0, 0.1^2); Theta = I + N(0, 0.1^2 / d).
StepParams make_step_params(const std::string& prefix, std::size_t dim, double threshold, std::mt19937_64& rng);

class DiffusionParams {
 public:
  DiffusionParams() = default;
  DiffusionParams(std::size_t dim, double theta_inner, double theta_cross, std::uint64_t seed,
                  bool share_directions = false);

  std::size_t dim() const { return dim_; }
  bool shares_directions() const { return share_; }
  DirectionParams& direction(Direction d) { return d == Direction::kReverse && !share_ ? reverse_ : forward_; }
  void set_thresholds(double theta_inner, double theta_cross);
  double theta_inner() const { return forward_.inner.structure.threshold; }
  double theta_cross() const { return forward_.cross.structure.threshold; }

  // Distinct parameter objects (reverse omitted when shared).
  std::vector<ad::Parameter*> parameters();

  void export_to(Checkpoint& ckpt, const std::string& prefix);
  void import_from(const Checkpoint& ckpt, const std::string& prefix);

 private:
  std::size_t dim_ = 0;
  bool share_ = false;
  DirectionParams forward_;
  DirectionParams reverse_;
};

struct DiffusionGraph {
  std::vector<std::string> sources;  // node labels of v1 (may be empty)
  std::vector<std::string> targets;  // node labels of v2 (may be empty)
  Matrix adjacency;                  // |v1| x |v2|
};

// ---- differentiable ops -------------------------------------------------------

ad::Var learn_structure(ad::Tape& tape, const ad::Var& h1, const ad::Var& h2, StructureLearnerParams& params,
                        bool exclude_diagonal);
ad::Var diffuse(ad::Tape& tape, const ad::Var& adjacency, const ad::Var& h1, const ad::Var& h2,
                DiffusionLayerParams& layer);

struct StepOutput {
  ad::Var h;
  Matrix adjacency;
  Matrix scores;  // A0 before thresholding
};

// An invalid h_in_prev stands for the virtual all-zero node set.
StepOutput cross_time_step(ad::Tape& tape, const ad::Var& h_in_prev, const ad::Var& r_t, StepParams& params);
StepOutput inner_time_step(ad::Tape& tape, const ad::Var& h_cr_t, StepParams& params);

struct SequenceOptions {
  bool cross = true;  // false: h_cr_t = r_t
  bool inner = true;  // false: h_in_t = h_cr_t
};

// Outputs are indexed by original time t in both directions.
struct SequenceResult {
  std::vector<ad::Var> h_in;
  std::vector<Matrix> cross_graphs;
  std::vector<Matrix> inner_graphs;
  std::vector<Matrix> cross_scores;  // pre-threshold A0
  std::vector<Matrix> inner_scores;
};

// Number of entries a threshold filter would keep in a score matrix.
std::size_t edges_at_threshold(const Matrix& scores, double threshold, bool exclude_diagonal);

SequenceResult run_sequence(ad::Tape& tape, const std::vector<ad::Var>& r, Direction direction,
                            DiffusionParams& params, const SequenceOptions& options = {});

// ---- inference helpers ----------------------------------------------------------

DiffusionGraph learn_structure(const Matrix& h1, const Matrix& h2, StructureLearnerParams& params,
                               bool exclude_diagonal);
Matrix diffuse(const DiffusionGraph& graph, const Matrix& h1, const Matrix& h2, DiffusionLayerParams& layer);

// Number of nonzero entries.
std::size_t edge_count(const Matrix& adjacency);

// ---- export ---------------------------------------------------------------------

struct GraphRecord {
  std::string level;      // channel, region or patient
  std::string direction;  // forward or reverse
  std::string kind;       // cross or inner
  std::size_t step = 0;   // position within the exported span
  std::size_t segment = 0;  // segment index in the source segmentation
  double threshold = 0.0;
  DiffusionGraph graph;
};

void store_graph(const GraphRecord& record, const std::filesystem::path& path);
GraphRecord load_graph(const std::filesystem::path& path);

}  // namespace brainnet::graph
