#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "synermix/tensor.hpp"

namespace synermix {

/// Probabilities below this are clamped before taking the log.
inline constexpr double kLogFloor = 1e-300;

/// Max-shifted softmax.
std::vector<double> softmax(std::span<const double> logits);
/// Row-wise softmax of a [n x C] tensor.
Tensor softmax_rows(const Tensor& logits);

/// -log p[c], with p[c] clamped at kLogFloor.
double cross_entropy(std::span<const double> probs, std::size_t target);

/// -sum_k t_k log p_k for a soft target t.
double soft_cross_entropy(std::span<const double> probs, std::span<const double> target);

/// Mean hard-label CE over the rows of `logits`. If `grad_logits` is non-null
/// it receives scale * d(mean CE)/d(logits) (= scale * (p - onehot) / n).
double mean_cross_entropy(const Tensor& logits, std::span<const std::size_t> labels,
                          Tensor* grad_logits = nullptr, double scale = 1.0);

/// Index of the largest logit; ties resolve to the lowest index.
std::size_t argmax(std::span<const double> values);

}  // namespace synermix
