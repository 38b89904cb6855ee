#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "synermix/dataset.hpp"
#include "synermix/rng.hpp"
#include "synermix/tensor.hpp"

namespace synermix {

/// N distinct indices drawn uniformly without replacement.
std::vector<std::size_t> sample_batch(const Dataset& data, RngStream& rng, std::size_t batch_size);

/// One shuffled pass over n samples cut into consecutive batches; the last
/// batch holds the remainder.
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size,
                                                    RngStream& rng);

/// Adds one out-of-batch sample of the same class for every class that
/// appears exactly once. Originals keep their order; additions follow in
/// ascending class order. Throws DataError naming the class when no
/// outside sample exists.
std::vector<std::size_t> supplement(std::span<const std::size_t> batch, const Dataset& data,
                                    RngStream& rng);

struct AugmentPolicy {
  std::size_t crop_padding = 0;  // zero-pad then crop back at a random offset
  bool hflip = false;            // mirror with probability 0.5
  std::size_t cutout = 0;        // side of the zeroed square
  double noise_sigma = 0.0;      // additive Gaussian noise for vector data

  bool is_identity() const;
  bool needs_geometry() const { return crop_padding > 0 || hflip || cutout > 0; }
};

/// Rows are interpreted as HWC images when image ops are requested.
/// Throws ConfigError for image ops without geometry.
Tensor augment(const Tensor& originals, RngStream& rng, const AugmentPolicy& policy,
               const std::optional<ImageGeometry>& geometry);

void hflip_image(std::span<double> image, const ImageGeometry& g);
void cutout_image(std::span<double> image, const ImageGeometry& g, std::size_t side,
                  std::size_t top, std::size_t left);
void shift_crop_image(std::span<double> image, const ImageGeometry& g, std::size_t padding,
                      std::size_t dy, std::size_t dx);

/// Supplemented mini-batch with parallel original and augmented views.
struct DualBatch {
  Tensor originals;
  Tensor augmented;
  std::vector<std::size_t> labels;
  std::vector<std::size_t> indices;  // dataset rows, sampled then supplemented
  std::size_t supplemented_count = 0;

  std::size_t size() const { return labels.size(); }
  std::size_t sampled_count() const { return labels.size() - supplemented_count; }
};

DualBatch build_dual_batch(const Dataset& data, std::span<const std::size_t> batch,
                           RngStream& supplement_rng, RngStream& augment_rng,
                           const AugmentPolicy& policy);

}  // namespace synermix
