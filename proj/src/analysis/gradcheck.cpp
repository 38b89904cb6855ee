#include "synermix/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "synermix/errors.hpp"

namespace synermix {

GradCheckResult check_gradients(MlpModel& model,
                                const std::function<double(const MlpModel&)>& objective,
                                const Gradients& analytic, double step) {
  if (analytic.weight.size() != model.depth()) throw DimensionError("gradient layout mismatch");
  GradCheckResult result;
  auto probe = [&](std::size_t layer, bool is_weight, std::size_t idx, double a) {
    auto param = [&]() -> double& {
      auto& l = model.mutable_layers()[layer];
      return is_weight ? l.weight[idx] : l.bias[idx];
    };
    const double original = param();
    param() = original + step;
    const double up = objective(model);
    param() = original - step;
    const double down = objective(model);
    param() = original;
    const double numeric = (up - down) / (2.0 * step);
    const double abs_err = std::abs(a - numeric);
    const double rel = abs_err / std::max({std::abs(a), std::abs(numeric), kGradCheckFloor});
    ++result.checked;
    result.max_abs_error = std::max(result.max_abs_error, abs_err);
    if (result.checked == 1 || rel > result.max_rel_error) {
      result.max_rel_error = rel;
      result.worst = "layer " + std::to_string(layer + 1) + (is_weight ? " weight[" : " bias[") +
                     std::to_string(idx) + "]";
    }
  };
  for (std::size_t l = 0; l < model.depth(); ++l) {
    for (std::size_t i = 0; i < analytic.weight[l].size(); ++i) probe(l, true, i, analytic.weight[l][i]);
    for (std::size_t i = 0; i < analytic.bias[l].size(); ++i) probe(l, false, i, analytic.bias[l][i]);
  }
  return result;
}

}  // namespace synermix
