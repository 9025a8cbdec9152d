#pragma once

#include <cstddef>
#include <vector>

#include <nlohmann/json.hpp>

#include "brainnet/autodiff.hpp"

namespace brainnet::optim {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  // Global gradient-norm clip; <= 0 disables.
  double clip_norm = 5.0;
};

nlohmann::json to_json(const AdamConfig& config);
// Missing keys keep defaults; unknown keys throw kInvalidConfig.
AdamConfig adam_config_from_json(const nlohmann::json& j);

// Cosine decay from base to base * floor_ratio over total_steps.
double cosine_lr(double base, std::size_t step, std::size_t total_steps, double floor_ratio = 0.05);

class Adam {
 public:
  Adam(std::vector<ad::Parameter*> params, AdamConfig config);

  void zero_grad();
  // Applies one update with the given learning rate; returns the pre-clip
  // gradient norm.
  double step(double learning_rate);
  double step() { return step(config_.learning_rate); }

  const AdamConfig& config() const { return config_; }
  std::size_t steps_taken() const { return t_; }

 private:
  std::vector<ad::Parameter*> params_;
  AdamConfig config_;
  std::vector<Matrix> m_, v_;
  std::size_t t_ = 0;
};

}  // namespace brainnet::optim
