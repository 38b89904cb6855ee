#include "synermix/loss.hpp"

#include <algorithm>
#include <cmath>

#include "synermix/errors.hpp"

namespace synermix {

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) throw ArgumentError("softmax of an empty vector");
  const double top = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - top);
    sum += p[i];
  }
  for (auto& v : p) v /= sum;
  return p;
}

Tensor softmax_rows(const Tensor& logits) {
  Tensor p = Tensor::matrix(logits.rows(), logits.cols());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto s = softmax(logits.row(r));
    std::copy(s.begin(), s.end(), p.row(r).begin());
  }
  return p;
}

double cross_entropy(std::span<const double> probs, std::size_t target) {
  if (target >= probs.size()) throw ArgumentError("class index out of range");
  return -std::log(std::max(probs[target], kLogFloor));
}

double soft_cross_entropy(std::span<const double> probs, std::span<const double> target) {
  if (probs.size() != target.size()) throw DimensionError("soft target width mismatch");
  double loss = 0.0;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    if (target[k] != 0.0) loss -= target[k] * std::log(std::max(probs[k], kLogFloor));
  }
  return loss;
}

double mean_cross_entropy(const Tensor& logits, std::span<const std::size_t> labels,
                          Tensor* grad_logits, double scale) {
  const std::size_t n = logits.rows();
  if (n == 0 || labels.size() != n) throw ArgumentError("label count must match logit rows");
  if (grad_logits) *grad_logits = Tensor::matrix(n, logits.cols());
  double total = 0.0;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r) {
    const auto p = softmax(logits.row(r));
    total += cross_entropy(p, labels[r]);
    if (grad_logits) {
      auto g = grad_logits->row(r);
      for (std::size_t k = 0; k < p.size(); ++k) {
        g[k] = scale * inv_n * (p[k] - (k == labels[r] ? 1.0 : 0.0));
      }
    }
  }
  return total * inv_n;
}

std::size_t argmax(std::span<const double> values) {
  if (values.empty()) throw ArgumentError("argmax of an empty vector");
  return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) -
                                  values.begin());
}

}  // namespace synermix
