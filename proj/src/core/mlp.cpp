#include "synermix/mlp.hpp"

#include <cmath>

#include "synermix/errors.hpp"

namespace synermix {

MlpModel::MlpModel(std::vector<DenseLayer> layers) : layers_(std::move(layers)) { validate(); }

MlpModel MlpModel::make(std::size_t input_dim, std::span<const std::size_t> hidden,
                        std::size_t classes, RngStream& rng) {
  if (input_dim == 0 || classes == 0) throw ArgumentError("model dimensions must be positive");
  std::vector<DenseLayer> layers;
  std::size_t fan_in = input_dim;
  auto add = [&](std::size_t out, Activation act) {
    DenseLayer l{Tensor::matrix(out, fan_in), Tensor({out}, 0.0), act};
    const double scale = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (auto& w : l.weight.values()) w = scale * rng.normal();
    layers.push_back(std::move(l));
    fan_in = out;
  };
  for (auto width : hidden) add(width, Activation::relu);
  add(classes, Activation::identity);
  return MlpModel(std::move(layers));
}

void MlpModel::validate() const {
  if (layers_.empty()) throw ArgumentError("model needs at least the classifier layer");
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    if (l.weight.rank() != 2 || l.bias.rank() != 1 || l.bias.size() != l.weight.rows()) {
      throw DimensionError("layer " + std::to_string(i + 1) + ": weight " +
                           l.weight.shape_string() + " / bias " + l.bias.shape_string());
    }
    if (i > 0 && layers_[i - 1].outputs() != l.inputs()) {
      throw DimensionError("layer " + std::to_string(i + 1) + " expects " +
                           std::to_string(l.inputs()) + " inputs, previous layer emits " +
                           std::to_string(layers_[i - 1].outputs()));
    }
  }
  if (layers_.back().activation != Activation::identity) {
    throw ArgumentError("classifier layer must use the identity activation");
  }
}

std::size_t MlpModel::width_at(std::size_t position) const {
  if (position >= depth()) throw ArgumentError("activation position out of range");
  return position == 0 ? input_dim() : layers_[position - 1].outputs();
}

std::vector<DenseLayer>& MlpModel::mutable_layers() {
  ++version_;
  return layers_;
}

std::size_t MlpModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
  return n;
}

const Tensor& ForwardCache::at(std::size_t position) const {
  if (position < start || position > stop()) {
    throw StateError("activation position " + std::to_string(position) + " not cached");
  }
  return activations[position - start];
}

Gradients Gradients::zeros_like(const MlpModel& model) {
  Gradients g;
  for (const auto& l : model.layers()) {
    g.weight.emplace_back(l.weight.shape(), 0.0);
    g.bias.emplace_back(l.bias.shape(), 0.0);
  }
  return g;
}

void Gradients::zero() {
  for (auto& t : weight) t.fill(0.0);
  for (auto& t : bias) t.fill(0.0);
}

void Gradients::add_scaled(const Gradients& other, double scale) {
  if (other.weight.size() != weight.size()) throw DimensionError("gradient layouts differ");
  for (std::size_t l = 0; l < weight.size(); ++l) {
    require_same_shape(weight[l], other.weight[l], "Gradients::add_scaled");
    for (std::size_t i = 0; i < weight[l].size(); ++i) weight[l][i] += scale * other.weight[l][i];
    for (std::size_t i = 0; i < bias[l].size(); ++i) bias[l][i] += scale * other.bias[l][i];
  }
}

Tensor affine(const DenseLayer& layer, const Tensor& x) {
  const std::size_t n = x.rows();
  const std::size_t in = layer.inputs();
  const std::size_t out = layer.outputs();
  if (x.cols() != in) {
    throw DimensionError("layer expects " + std::to_string(in) + " inputs, got " +
                         x.shape_string());
  }
  Tensor y = Tensor::matrix(n, out);
  for (std::size_t r = 0; r < n; ++r) {
    auto xr = x.row(r);
    for (std::size_t o = 0; o < out; ++o) {
      auto w = layer.weight.row(o);
      double acc = layer.bias[o];
      for (std::size_t i = 0; i < in; ++i) acc += w[i] * xr[i];
      y(r, o) = acc;
    }
  }
  return y;
}

namespace {

void apply_activation(Activation act, Tensor& t) {
  if (act == Activation::relu) {
    for (auto& v : t.values()) v = v > 0.0 ? v : 0.0;
  }
}

ForwardCache run(const MlpModel& model, std::size_t start, const Tensor& input, std::size_t stop,
                 bool logits) {
  if (input.rank() != 2) throw DimensionError("forward expects a [batch x width] tensor");
  if (input.cols() != model.width_at(start)) {
    throw DimensionError("activation at position " + std::to_string(start) + " has width " +
                         std::to_string(model.width_at(start)) + ", got " +
                         input.shape_string());
  }
  ForwardCache cache;
  cache.start = start;
  cache.owner = &model;
  cache.version = model.version();
  cache.activations.push_back(input);
  for (std::size_t pos = start + 1; pos <= stop; ++pos) {
    const DenseLayer& l = model.layer(pos - 1);
    Tensor h = affine(l, cache.activations.back());
    apply_activation(l.activation, h);
    cache.activations.push_back(std::move(h));
  }
  if (logits) cache.logits = affine(model.classifier(), cache.activations.back());
  return cache;
}

void check_cache(const MlpModel& model, const ForwardCache& cache) {
  if (cache.owner != &model || cache.version != model.version()) {
    throw StateError("forward cache is stale: model changed since the forward pass");
  }
}

}  // namespace

ForwardCache forward(const MlpModel& model, const Tensor& x) {
  return run(model, 0, x, model.feature_position(), true);
}

ForwardCache forward_until(const MlpModel& model, const Tensor& x, std::size_t position) {
  if (position >= model.depth()) throw ArgumentError("stop position out of range");
  return run(model, 0, x, position, false);
}

ForwardCache forward_from(const MlpModel& model, std::size_t position, const Tensor& activation) {
  if (position >= model.depth()) throw ArgumentError("tap position out of range");
  return run(model, position, activation, model.feature_position(), true);
}

Tensor backward(const MlpModel& model, const ForwardCache& cache, const Tensor& grad_logits,
                Gradients& grads) {
  check_cache(model, cache);
  if (!cache.has_logits()) throw StateError("backward needs a pass that reached the logits");
  require_same_shape(grad_logits, cache.logits, "backward: grad_logits");
  const std::size_t last = model.depth() - 1;
  const DenseLayer& cls = model.classifier();
  const Tensor& feats = cache.at(model.feature_position());
  const std::size_t n = feats.rows();
  const std::size_t in = cls.inputs();
  const std::size_t out = cls.outputs();
  Tensor grad_feats = Tensor::matrix(n, in);
  for (std::size_t r = 0; r < n; ++r) {
    auto g = grad_logits.row(r);
    auto f = feats.row(r);
    auto gf = grad_feats.row(r);
    for (std::size_t o = 0; o < out; ++o) {
      const double go = g[o];
      grads.bias[last][o] += go;
      auto w = cls.weight.row(o);
      double* gw = &grads.weight[last](o, 0);
      for (std::size_t i = 0; i < in; ++i) {
        gw[i] += go * f[i];
        gf[i] += go * w[i];
      }
    }
  }
  return backward_from(model, cache, model.feature_position(), std::move(grad_feats), grads);
}

Tensor backward_from(const MlpModel& model, const ForwardCache& cache, std::size_t position,
                     Tensor grad, Gradients& grads) {
  check_cache(model, cache);
  require_same_shape(grad, cache.at(position), "backward_from: gradient");
  for (std::size_t pos = position; pos > cache.start; --pos) {
    const std::size_t li = pos - 1;
    const DenseLayer& l = model.layer(li);
    const Tensor& out_act = cache.at(pos);
    const Tensor& in_act = cache.at(pos - 1);
    if (l.activation == Activation::relu) {
      for (std::size_t i = 0; i < grad.size(); ++i) {
        if (!(out_act[i] > 0.0)) grad[i] = 0.0;
      }
    }
    const std::size_t n = grad.rows();
    const std::size_t in = l.inputs();
    const std::size_t out = l.outputs();
    Tensor grad_in = Tensor::matrix(n, in);
    for (std::size_t r = 0; r < n; ++r) {
      auto g = grad.row(r);
      auto a = in_act.row(r);
      auto gi = grad_in.row(r);
      for (std::size_t o = 0; o < out; ++o) {
        const double go = g[o];
        if (go == 0.0) continue;
        grads.bias[li][o] += go;
        auto w = l.weight.row(o);
        double* gw = &grads.weight[li](o, 0);
        for (std::size_t i = 0; i < in; ++i) {
          gw[i] += go * a[i];
          gi[i] += go * w[i];
        }
      }
    }
    grad = std::move(grad_in);
  }
  return grad;
}

}  // namespace synermix
