#pragma once

// Minimal reverse-mode differentiation over dense matrices.
//
// A Tape records every operation eagerly: values are computed immediately and,
// when the tape is recording, a backward closure is stored alongside. Tapes
// are single-use; build one per forward pass. A non-recording tape is the
// inference path and keeps no closures.

#include <cstddef>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "brainnet/matrix.hpp"

namespace brainnet::ad {

struct Parameter {
  Parameter() = default;
  Parameter(std::string name, Matrix value)
      : name(std::move(name)), value(std::move(value)), grad(this->value.rows(), this->value.cols()) {}

  void zero_grad() {
    if (!grad.same_shape(value)) grad = Matrix(value.rows(), value.cols());
    grad.fill(0.0);
  }

  std::string name;
  Matrix value;
  Matrix grad;
  bool trainable = true;
};

class Tape;

class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  double scalar() const;
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t)>;

  explicit Tape(bool record = true) : recording_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return recording_; }

  Var constant(Matrix value);
  // Leaf bound to a parameter; gradients flow into param.grad on backward().
  // Repeated calls with the same parameter return the same node.
  Var parameter(Parameter& param);

  // Records an op. `inputs` decides whether the node needs a gradient; the
  // closure receives the tape and the new node's id.
  Var record(Matrix value, std::initializer_list<Var> inputs, Backward backward);
  Var record(Matrix value, const std::vector<Var>& inputs, Backward backward);

  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  bool requires_grad(const Var& v) const { return nodes_[v.id()].requires_grad; }
  // Gradient buffer of a node, allocated as zeros on first access.
  Matrix& grad(std::size_t id);
  const Matrix* grad_if_any(std::size_t id) const;

  // Seeds d(loss)/d(loss) = 1 for a 1x1 node and runs all closures in reverse.
  void backward(const Var& loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Backward backward;
    Parameter* param = nullptr;
    bool requires_grad = false;
  };

  bool any_requires_grad(const Var* begin, const Var* end) const;

  bool recording_;
  std::vector<Node> nodes_;
  std::unordered_map<Parameter*, std::size_t> param_nodes_;
};

// ---- elementary ops -------------------------------------------------------

Var matmul(const Var& a, const Var& b);
// a * b^T
Var matmul_nt(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
// Adds a 1 x cols row to every row of a.
Var add_row(const Var& a, const Var& row);
// Multiplies every row of a elementwise by a 1 x cols row.
Var mul_row(const Var& a, const Var& row);
// Adds `block` (r x c) to every consecutive r-row block of a.
Var add_tiled(const Var& a, const Var& block);
Var relu(const Var& a);
Var sigmoid(const Var& a);
Var reshape(const Var& a, std::size_t rows, std::size_t cols);
Var select_rows(const Var& a, const std::vector<std::size_t>& rows);
Var slice_rows(const Var& a, std::size_t begin, std::size_t count);
Var concat_rows(const std::vector<Var>& parts);
Var concat_cols(const std::vector<Var>& parts);
// Mean over consecutive groups of `block` rows.
Var mean_row_blocks(const Var& a, std::size_t block);
// Coordinate-wise max over the listed rows, one output row per group.
Var max_row_groups(const Var& a, const std::vector<std::vector<std::size_t>>& groups);
Var sum_all(const Var& a);
// sum_i weights[i] * scalars[i] for 1x1 inputs.
Var weighted_sum(const std::vector<Var>& scalars, const std::vector<double>& weights);

// ---- fused ops -------------------------------------------------------------

// Row-wise layer normalisation with learned gain and bias (both 1 x cols).
Var layer_norm(const Var& a, const Var& gain, const Var& bias, double eps = 1e-5);

// Multi-head scaled dot-product attention applied independently to each
// consecutive block of `seq_len` rows. allowed(i, j) != 0 lets query position
// i attend to key position j; every row needs at least one allowed entry.
Var masked_attention(const Var& q, const Var& k, const Var& v, const Matrix& allowed,
                     std::size_t seq_len, std::size_t heads);

// cos(a_i, b_j) for all row pairs; a pair involving a zero row scores 0.
Var cosine_scores(const Var& a, const Var& b);

// Hard threshold filter: keeps entries >= threshold, zeroes the rest (and the
// diagonal when exclude_diagonal). Gradient passes only through kept entries.
Var threshold_gate(const Var& scores, double threshold, bool exclude_diagonal);

// Row j of the result is (h2_j + sum_i A(i,j) h1_i) / (1 + sum_i A(i,j)).
Var diffusion_aggregate(const Var& adjacency, const Var& h1, const Var& h2);

struct NceTerm {
  std::size_t query;      // row of the prediction matrix
  std::size_t step;       // which prediction matrix (0-based horizon index)
  std::size_t positive;   // row of the candidate matrix
  std::vector<std::size_t> negatives;
  double weight;
};

// sum_terms weight * -log softmax(candidates . prediction)[positive].
// predictions[s] row q is the bilinear image W_s z_q of the context at q.
Var info_nce(const Var& candidates, const std::vector<Var>& predictions,
             const std::vector<NceTerm>& terms);

// Summed binary cross entropy of probabilities (clamped to [eps, 1 - eps])
// against 0/1 labels of the same shape. Optional per-class weights.
Var bce_sum(const Var& probs, const Matrix& labels, double eps = 1e-7, double positive_weight = 1.0);

}  // namespace brainnet::ad
