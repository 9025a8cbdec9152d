#pragma once

// Channel, region and patient level prediction with shared components.
//
// Channel representations r_t come from the BCPC encoder. Region and patient
// representations are coordinate-wise max pools of r_t. Every level runs the
// same forward/reverse diffusion parameters and the same discriminator
// D([h_fwd | h_rev | r]) -> sigmoid probability.

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "brainnet/autodiff.hpp"
#include "brainnet/bcpc.hpp"
#include "brainnet/graph_diffusion.hpp"
#include "brainnet/seeg_data.hpp"

namespace brainnet::hier {

inline constexpr std::array<data::Level, 3> kLevels{data::Level::kChannel, data::Level::kRegion,
                                                    data::Level::kPatient};

// r_region(b, i) = max over member channels c of r_channel(c, i).
Matrix pool_to_region(const Matrix& r_channel, const data::ChannelMap& map);
Matrix pool_to_patient(const Matrix& r_region);
ad::Var pool_to_region(const ad::Var& r_channel, const data::ChannelMap& map);
ad::Var pool_to_patient(const ad::Var& r_region);

class Discriminator {
 public:
  Discriminator() = default;
  // Hidden layer is glorot-initialised; the output layer starts at zero.
  Discriminator(std::size_t in_dim, std::size_t hidden, std::uint64_t seed);

  std::size_t in_dim() const { return w1_.value.rows(); }
  // One probability per row of `features`.
  ad::Var forward(ad::Tape& tape, const ad::Var& features);
  std::vector<ad::Parameter*> parameters() { return {&w1_, &b1_, &w2_, &b2_}; }

 private:
  ad::Parameter w1_, b1_, w2_, b2_;
};

// sigmoid(D([h_fwd | h_rev | r])) per node.
ad::Var predict(ad::Tape& tape, const ad::Var& h_fwd, const ad::Var& h_rev, const ad::Var& r, Discriminator& d);
Matrix predict(const Matrix& h_fwd, const Matrix& h_rev, const Matrix& r, Discriminator& d);

struct LevelWeights {
  double channel = 1.0;
  double region = 1.0;
  double patient = 1.0;

  double operator[](std::size_t level) const { return level == 0 ? channel : level == 1 ? region : patient; }
};

// w_ch L_ch + w_br L_br + w_pa L_pa with each term a summed BCE; probabilities
// are clamped to [eps, 1 - eps].
ad::Var joint_loss(const std::array<ad::Var, 3>& predictions, const std::array<Matrix, 3>& labels,
                   const LevelWeights& weights, double eps = 1e-7, double positive_weight = 1.0);
double joint_loss(const std::array<Matrix, 3>& predictions, const std::array<Matrix, 3>& labels,
                  const LevelWeights& weights, double eps = 1e-7);

struct Ablations {
  bool no_bcpc = false;       // encoder starts from random parameters
  bool no_graph = false;      // discriminator sees r only
  bool no_inner = false;      // h_in = h_cr
  bool no_cross = false;      // h_cr = r
  bool no_hierarchy = false;  // only the channel loss is optimised

  bool any() const { return no_bcpc || no_graph || no_inner || no_cross || no_hierarchy; }
  // Comma-separated flag names, or "full".
  std::string tag() const;
};

// Accepts a comma-separated list of flag names ("none" or "" for no flags).
Ablations parse_ablations(const std::string& text);

struct ModelConfig {
  bcpc::BcpcConfig bcpc{};
  double theta_inner = 0.1;
  double theta_cross = 0.05;
  std::size_t discriminator_hidden = 64;
  bool share_directions = false;
  LevelWeights level_weights{};
  double positive_weight = 1.0;
  Ablations ablations{};
};

nlohmann::json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

struct WindowOutput {
  // Per level, (|S| * nodes) x 1 probabilities in segment-major order.
  std::array<ad::Var, 3> probs;
  // Per level, per direction: graphs indexed by segment within the window.
  std::array<graph::SequenceResult, 3> forward;
  std::array<graph::SequenceResult, 3> reverse;
};

class BrainNetModel {
 public:
  BrainNetModel(const ModelConfig& config, bcpc::BcpcModel encoder, data::ChannelMap channel_map,
                std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const data::ChannelMap& channel_map() const { return map_; }
  std::size_t nodes(data::Level level) const;
  std::vector<std::string> node_labels(data::Level level) const;

  bcpc::BcpcModel& encoder() { return encoder_; }
  graph::DiffusionParams& diffusion() { return diffusion_; }
  Discriminator& discriminator() { return discriminator_; }
  // Objects used at a given level; identical for all levels by construction.
  graph::DiffusionParams& diffusion_for(data::Level) { return diffusion_; }
  Discriminator& discriminator_for(data::Level) { return discriminator_; }

  // `rows` holds |S| * |C| one-channel segments in segment-major order.
  WindowOutput forward(ad::Tape& tape, const Matrix& rows, std::size_t n_segments);
  // Same, from precomputed channel representations ((|S| * |C|) x d_repr).
  WindowOutput forward_from_representations(ad::Tape& tape, const ad::Var& representations,
                                            std::size_t n_segments);

  // Trainable parameters; the encoder is left out when frozen.
  std::vector<ad::Parameter*> parameters(bool include_encoder = true);

  Checkpoint to_checkpoint();
  static BrainNetModel from_checkpoint(const Checkpoint& ckpt);

 private:
  ModelConfig config_;
  data::ChannelMap map_;
  bcpc::BcpcModel encoder_;
  graph::DiffusionParams diffusion_;
  Discriminator discriminator_;
};

// Labels of segments [begin, begin + count) at a level, laid out like WindowOutput::probs.
Matrix window_labels(const data::SegmentSet& segments, data::Level level, std::size_t begin, std::size_t count);

}  // namespace brainnet::hier
