#pragma once

#include <cstddef>

#include "synermix/mlp.hpp"

namespace synermix {

struct OptimConfig {
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::size_t step_size = 10;  // epochs between decays
  double gamma = 0.5;
  std::size_t epochs = 30;

  void validate() const;
};

/// lr * gamma^floor(epoch / step_size)
double lr_at(const OptimConfig& config, std::size_t epoch);

/// SGD with momentum and L2 weight decay:
///   v <- momentum * v + lr * (g + weight_decay * w);  w <- w - v
class SgdMomentum {
 public:
  SgdMomentum(const MlpModel& model, const OptimConfig& config);

  void step(MlpModel& model, const Gradients& grads, double lr);
  const Gradients& velocity() const { return velocity_; }

 private:
  OptimConfig config_;
  Gradients velocity_;
};

}  // namespace synermix
