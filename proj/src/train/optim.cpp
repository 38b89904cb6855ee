#include "synermix/optim.hpp"

#include <cmath>

#include "synermix/errors.hpp"

namespace synermix {

void OptimConfig::validate() const {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("optim.lr", "must be nonnegative");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("optim.momentum", "must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("optim.weight_decay", "must be nonnegative");
  if (step_size == 0) throw ConfigError("optim.step_size", "must be positive");
  if (!(gamma > 0.0)) throw ConfigError("optim.gamma", "must be positive");
}

double lr_at(const OptimConfig& config, std::size_t epoch) {
  const auto decays = static_cast<double>(epoch / config.step_size);
  return config.lr * std::pow(config.gamma, decays);
}

SgdMomentum::SgdMomentum(const MlpModel& model, const OptimConfig& config)
    : config_(config), velocity_(Gradients::zeros_like(model)) {}

void SgdMomentum::step(MlpModel& model, const Gradients& grads, double lr) {
  auto& layers = model.mutable_layers();
  if (layers.size() != velocity_.weight.size()) throw DimensionError("optimizer/model mismatch");
  auto update = [&](Tensor& param, const Tensor& grad, Tensor& vel) {
    require_same_shape(param, grad, "SgdMomentum::step");
    for (std::size_t i = 0; i < param.size(); ++i) {
      vel[i] = config_.momentum * vel[i] + lr * (grad[i] + config_.weight_decay * param[i]);
      param[i] -= vel[i];
    }
  };
  for (std::size_t l = 0; l < layers.size(); ++l) {
    update(layers[l].weight, grads.weight[l], velocity_.weight[l]);
    update(layers[l].bias, grads.bias[l], velocity_.bias[l]);
  }
}

}  // namespace synermix
