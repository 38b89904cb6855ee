#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "synermix/rng.hpp"
#include "synermix/tensor.hpp"

namespace synermix {

enum class Activation { relu, identity };

struct DenseLayer {
  Tensor weight;  // [out x in]
  Tensor bias;    // [out]
  Activation activation = Activation::identity;

  std::size_t inputs() const { return weight.cols(); }
  std::size_t outputs() const { return weight.rows(); }
};

/// Feed-forward stack whose last layer is the linear classifier.
///
/// Activations are addressed by *position*: position 0 is the network input
/// and position k (1 <= k < depth) is the output of layer k. Position
/// depth-1 is the feature representation consumed by the classifier.
class MlpModel {
 public:
  MlpModel() = default;
  explicit MlpModel(std::vector<DenseLayer> layers);

  /// ReLU hidden layers of the given widths plus an identity classifier,
  /// weights drawn He-normal from `rng`, biases zero.
  static MlpModel make(std::size_t input_dim, std::span<const std::size_t> hidden,
                       std::size_t classes, RngStream& rng);

  std::size_t depth() const { return layers_.size(); }
  std::size_t input_dim() const { return layers_.front().inputs(); }
  std::size_t feature_dim() const { return classifier().inputs(); }
  std::size_t classes() const { return classifier().outputs(); }
  std::size_t feature_position() const { return depth() - 1; }
  /// Width of the activation at `position`.
  std::size_t width_at(std::size_t position) const;

  const std::vector<DenseLayer>& layers() const { return layers_; }
  const DenseLayer& layer(std::size_t i) const { return layers_.at(i); }
  const DenseLayer& classifier() const { return layers_.back(); }

  /// Mutable access. Invalidates every outstanding ForwardCache.
  std::vector<DenseLayer>& mutable_layers();
  std::uint64_t version() const { return version_; }

  std::size_t parameter_count() const;

 private:
  void validate() const;

  std::vector<DenseLayer> layers_;
  std::uint64_t version_ = 0;
};

/// Activations recorded by a forward pass, needed by backward.
struct ForwardCache {
  std::size_t start = 0;            // position the pass began at
  std::vector<Tensor> activations;  // positions start..stop
  Tensor logits;                    // empty when the pass stopped early
  const MlpModel* owner = nullptr;
  std::uint64_t version = 0;

  std::size_t stop() const { return start + activations.size() - 1; }
  const Tensor& at(std::size_t position) const;
  bool has_logits() const { return !logits.empty(); }
};

/// Parameter gradients mirroring the model's layers.
struct Gradients {
  std::vector<Tensor> weight;
  std::vector<Tensor> bias;

  static Gradients zeros_like(const MlpModel& model);
  void zero();
  /// this += scale * other
  void add_scaled(const Gradients& other, double scale);
};

/// Full pass from the input.
ForwardCache forward(const MlpModel& model, const Tensor& x);
/// Pass from the input that stops after computing `position`.
ForwardCache forward_until(const MlpModel& model, const Tensor& x, std::size_t position);
/// Resume a pass with a replacement activation injected at `position`.
ForwardCache forward_from(const MlpModel& model, std::size_t position, const Tensor& activation);

/// Backpropagates dLoss/dLogits through the cached pass, accumulating into
/// `grads`. Returns dLoss/d(activation at cache.start).
Tensor backward(const MlpModel& model, const ForwardCache& cache, const Tensor& grad_logits,
                Gradients& grads);

/// Backpropagates a gradient arriving at activation `position` down to
/// cache.start.
Tensor backward_from(const MlpModel& model, const ForwardCache& cache, std::size_t position,
                     Tensor grad, Gradients& grads);

/// rows(x) * layer, before the activation function.
Tensor affine(const DenseLayer& layer, const Tensor& x);

}  // namespace synermix
