#include "brainnet/optim.hpp"

#include <cmath>
#include <numbers>

#include "json_fields.hpp"

namespace brainnet::optim {

nlohmann::json to_json(const AdamConfig& c) {
  return {{"learning_rate", c.learning_rate}, {"beta1", c.beta1}, {"beta2", c.beta2},
          {"eps", c.eps}, {"weight_decay", c.weight_decay}, {"clip_norm", c.clip_norm}};
}

AdamConfig adam_config_from_json(const nlohmann::json& j) {
  AdamConfig c;
  detail::FieldReader f(j, "optimizer");
  f.get("learning_rate", c.learning_rate);
  f.get("beta1", c.beta1);
  f.get("beta2", c.beta2);
  f.get("eps", c.eps);
  f.get("weight_decay", c.weight_decay);
  f.get("clip_norm", c.clip_norm);
  f.finish();
  require(c.learning_rate > 0.0 && c.beta1 >= 0.0 && c.beta1 < 1.0 && c.beta2 >= 0.0 && c.beta2 < 1.0 && c.eps > 0.0,
          ErrorCode::kInvalidConfig, "optimizer settings out of range");
  return c;
}

double cosine_lr(double base, std::size_t step, std::size_t total_steps, double floor_ratio) {
  if (total_steps == 0) return base;
  const double progress = std::min(1.0, static_cast<double>(step) / static_cast<double>(total_steps));
  const double cosine = 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
  return base * (floor_ratio + (1.0 - floor_ratio) * cosine);
}

Adam::Adam(std::vector<ad::Parameter*> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
  for (ad::Parameter* p : params_) {
    m_.emplace_back(p->value.rows(), p->value.cols());
    v_.emplace_back(p->value.rows(), p->value.cols());
    p->zero_grad();
  }
}

void Adam::zero_grad() {
  for (ad::Parameter* p : params_) p->zero_grad();
}

double Adam::step(double learning_rate) {
  double sq = 0.0;
  for (ad::Parameter* p : params_) {
    if (!p->trainable) continue;
    for (double g : p->grad.values()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  const double clip = (config_.clip_norm > 0.0 && norm > config_.clip_norm) ? config_.clip_norm / norm : 1.0;

  ++t_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    ad::Parameter& p = *params_[k];
    if (!p.trainable) continue;
    double* w = p.value.data();
    const double* g = p.grad.data();
    double* m = m_[k].data();
    double* v = v_[k].data();
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double gi = g[i] * clip + config_.weight_decay * w[i];
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * gi;
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * gi * gi;
      w[i] -= learning_rate * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + config_.eps);
    }
  }
  return norm;
}

}  // namespace brainnet::optim
