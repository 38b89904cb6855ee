#pragma once

#include <cstddef>
#include <functional>
#include <string>

#include "synermix/mlp.hpp"

namespace synermix {

struct GradCheckResult {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t checked = 0;
  std::string worst;  // e.g. "layer 2 weight[3,1]"
};

/// Gradient magnitudes below this are compared on an absolute scale.
inline constexpr double kGradCheckFloor = 1e-6;

/// Compares `analytic` against central differences of `objective` for every
/// parameter. relative error = |a - n| / max(|a|, |n|, kGradCheckFloor).
/// The model is restored after each probe.
GradCheckResult check_gradients(MlpModel& model,
                                const std::function<double(const MlpModel&)>& objective,
                                const Gradients& analytic, double step = 1e-5);

}  // namespace synermix
