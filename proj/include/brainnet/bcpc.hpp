#pragma once

// Bidirectional contrastive predictive coding.
//
// A one-channel segment of L * local_window points is cut into L positions.
// Positions carry signed indices -L/2..-1, 1..L/2 (no zero); storage index i
// maps to -(L/2 - i) for i < L/2 and to i - L/2 + 1 otherwise. The encoder is
// a stack of non-overlapping 1-D convolutions (kernel = stride) whose strides
// multiply to local_window, so each local feature sees exactly its own window.
// A pre-norm Transformer turns local features into contexts z under a mask
// that lets position t attend to j iff |j| <= |t|. Context z_t predicts the
// local feature at t + sgn(t) * p for p = 1..P through exp(a^T W_p z).

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include <nlohmann/json.hpp>

#include "brainnet/autodiff.hpp"
#include "brainnet/checkpoint.hpp"
#include "brainnet/optim.hpp"
#include "brainnet/seeg_data.hpp"

namespace brainnet::bcpc {

struct BcpcConfig {
  std::size_t local_window = 16;  // points per position
  std::size_t n_positions = 16;   // L, even
  std::size_t d_local = 64;
  std::size_t d_context = 64;
  std::size_t d_repr = 64;
  std::size_t horizon = 4;        // P
  std::size_t n_negatives = 15;   // |N_t| - 1
  std::vector<std::size_t> encoder_strides{4, 4};  // product must equal local_window
  std::size_t encoder_width = 32;  // channels of the hidden conv layers
  std::size_t n_layers = 2;
  std::size_t n_heads = 4;
  std::size_t ff_width = 128;

  std::size_t segment_length() const { return local_window * n_positions; }
};

void validate(const BcpcConfig& config);
nlohmann::json to_json(const BcpcConfig& config);
// Missing keys keep their defaults; unknown keys throw kInvalidConfig.
BcpcConfig bcpc_config_from_json(const nlohmann::json& j);

// Signed index of storage position i in a sequence of length L.
int signed_position(std::size_t index, std::size_t L);
std::size_t storage_index(int signed_pos, std::size_t L);

// L x L 0/1 matrix in storage order: entry (i, j) = 1 iff
// |signed(j)| <= |signed(i)|. Throws kInvalidConfig for odd L or L < 4.
Matrix build_mask(std::size_t L);

class BcpcModel {
 public:
  BcpcModel(const BcpcConfig& config, std::uint64_t seed);

  const BcpcConfig& config() const { return config_; }
  const Matrix& mask() const { return mask_; }

  // Raw input is multiplied by this before encoding; set by pretraining.
  double input_scale() const { return input_scale_; }
  void set_input_scale(double s) { input_scale_ = s; }

  // Rows of `segments` are one-channel segments of segment_length() points.
  // Result has L rows per segment.
  ad::Var encode_local(ad::Tape& tape, const Matrix& segments);
  ad::Var contextualize(ad::Tape& tape, const ad::Var& locals);
  ad::Var contextualize(ad::Tape& tape, const ad::Var& locals, const Matrix& mask);
  // Mean over the L context rows of each segment, then the linear projection.
  ad::Var pool_and_project(ad::Tape& tape, const ad::Var& contexts);
  ad::Var represent(ad::Tape& tape, const Matrix& segments);
  // Bilinear images W_p z for every context row, one matrix per step p.
  std::vector<ad::Var> predictions(ad::Tape& tape, const ad::Var& contexts);

  // Inference helpers on a non-recording tape.
  Matrix encode_local(const Matrix& segments);
  Matrix contextualize(const Matrix& locals, const Matrix& mask);
  Matrix represent(const Matrix& segments);

  std::vector<ad::Parameter*> parameters();
  // Everything the downstream representation depends on (scorers excluded).
  std::vector<ad::Parameter*> representation_parameters();
  std::vector<ad::Parameter*> scorer_parameters();
  ad::Parameter& scorer(std::size_t p) { return scorers_.at(p); }
  ad::Parameter& projection_weight() { return proj_w_; }
  ad::Parameter& projection_bias() { return proj_b_; }

  Checkpoint to_checkpoint();
  static BcpcModel from_checkpoint(const Checkpoint& ckpt);

  // Adds parameters and config to an enclosing checkpoint under `prefix`.
  void export_to(Checkpoint& ckpt, const std::string& prefix);
  void import_from(const Checkpoint& ckpt, const std::string& prefix);

 private:
  struct ConvLayer {
    ad::Parameter w, b;
    std::size_t stride;
  };
  struct Block {
    ad::Parameter ln1_g, ln1_b, wq, wk, wv, wo, ln2_g, ln2_b, ff1_w, ff1_b, ff2_w, ff2_b;
  };

  BcpcConfig config_;
  Matrix mask_;
  double input_scale_ = 1.0;
  std::vector<ConvLayer> conv_;
  ad::Parameter in_w_, in_b_, pos_;
  std::vector<Block> blocks_;
  ad::Parameter lnf_g_, lnf_b_;
  std::vector<ad::Parameter> scorers_;
  ad::Parameter proj_w_, proj_b_;
};

// One InfoNCE term per (segment, position t, step p) with an in-range target.
// Term weights are 1 / (P_t * T) where P_t counts the in-range steps of t and
// T the number of contributing positions over the batch, so the total is the
// mean over contributing t of the per-t average. Negatives are drawn uniformly
// (with replacement) from the other local-feature rows of the batch.
std::vector<ad::NceTerm> make_nce_terms(std::size_t batch, std::size_t L, std::size_t horizon,
                                        std::size_t n_negatives, std::mt19937_64& rng);

ad::Var bcpc_loss(BcpcModel& model, const ad::Var& locals, const ad::Var& contexts,
                  const std::vector<ad::NceTerm>& terms);
// Full forward on a batch of segments.
ad::Var bcpc_loss(ad::Tape& tape, BcpcModel& model, const Matrix& segments, std::mt19937_64& rng);

struct PretrainConfig {
  std::size_t steps = 2000;
  std::size_t batch_size = 16;
  optim::AdamConfig adam{};
  std::size_t eval_every = 100;
  std::uint64_t seed = 0;
  // Estimate 1 / std of the training data and store it as input scale.
  bool normalize_input = true;
};

nlohmann::json to_json(const PretrainConfig& config);
PretrainConfig pretrain_config_from_json(const nlohmann::json& j);

struct CurvePoint {
  std::size_t step;
  double train_loss;  // NaN at step 0
  double valid_loss;
  double learning_rate;
};

struct PretrainResult {
  std::vector<CurvePoint> curve;
  double initial_valid_loss = 0.0;
  double final_valid_loss = 0.0;
};

// Mean InfoNCE loss over fixed consecutive batches with a fixed negative seed.
double validation_loss(BcpcModel& model, const Matrix& valid, std::size_t batch_size, std::uint64_t seed);

// Trains `model` in place on rows of `train`; evaluates on `valid` every
// eval_every steps and at the end. Throws kDivergence on a non-finite loss.
PretrainResult pretrain(BcpcModel& model, const Matrix& train, const Matrix& valid, const PretrainConfig& config);

// Up to max_count one-channel rows whose channel label is 0, drawn without
// replacement. Segment length must match the model.
Matrix normal_channel_segments(const data::SegmentSet& segments, std::size_t max_count, std::uint64_t seed);

// All channel rows of segments [begin, begin + count) in segment-major order.
Matrix channel_rows(const data::SegmentSet& segments, std::size_t begin, std::size_t count);

}  // namespace brainnet::bcpc
