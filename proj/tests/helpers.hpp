#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "synermix/mlp.hpp"
#include "synermix/rng.hpp"
#include "synermix/tensor.hpp"

namespace synermix::testing {

inline Tensor random_matrix(std::size_t rows, std::size_t cols, RngStream& rng, double scale = 1.0) {
  Tensor t = Tensor::matrix(rows, cols);
  for (auto& v : t.values()) v = scale * rng.normal();
  return t;
}

/// Seeded net with nonzero biases so ReLU kinks are not aligned at zero.
inline MlpModel random_model(std::size_t in, std::vector<std::size_t> hidden, std::size_t classes,
                             std::uint64_t seed) {
  RngStream rng(seed);
  MlpModel m = MlpModel::make(in, hidden, classes, rng);
  for (auto& l : m.mutable_layers()) {
    for (auto& b : l.bias.values()) b = 0.1 * rng.normal();
  }
  return m;
}

/// Balanced labels 0,1,..,C-1,0,1,.. so every class has >= 2 rows when n >= 2C.
inline std::vector<std::size_t> cyclic_labels(std::size_t n, std::size_t classes) {
  std::vector<std::size_t> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = i % classes;
  return y;
}

/// Scalar re-computation of one row: applies layers from+1..to, where
/// to == depth() yields logits. Independent of affine()/forward().
inline std::vector<double> row_forward(const MlpModel& m, std::vector<double> h, std::size_t from,
                                       std::size_t to) {
  for (std::size_t pos = from + 1; pos <= to; ++pos) {
    const DenseLayer& l = m.layer(pos - 1);
    std::vector<double> next(l.outputs());
    for (std::size_t o = 0; o < l.outputs(); ++o) {
      double acc = l.bias[o];
      for (std::size_t i = 0; i < l.inputs(); ++i) acc += l.weight(o, i) * h[i];
      next[o] = (l.activation == Activation::relu && acc < 0.0) ? 0.0 : acc;
    }
    h = std::move(next);
  }
  return h;
}

/// -sum_k t_k log softmax(z)_k evaluated in long double.
inline double soft_ce_oracle(const std::vector<double>& z, const std::vector<double>& t) {
  long double top = z[0];
  for (double v : z) top = v > top ? v : top;
  long double denom = 0;
  for (double v : z) denom += std::exp((long double)v - top);
  long double loss = 0;
  for (std::size_t k = 0; k < z.size(); ++k) {
    loss -= t[k] * (((long double)z[k] - top) - std::log(denom));
  }
  return (double)loss;
}

}  // namespace synermix::testing
