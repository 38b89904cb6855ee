#include "synermix/batch.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "synermix/errors.hpp"

namespace synermix {

std::vector<std::size_t> sample_batch(const Dataset& data, RngStream& rng, std::size_t batch_size) {
  if (batch_size == 0) throw ArgumentError("batch size must be positive");
  if (batch_size > data.size()) {
    throw ArgumentError("batch size " + std::to_string(batch_size) + " exceeds dataset size " +
                        std::to_string(data.size()));
  }
  auto order = rng.permutation(data.size());
  order.resize(batch_size);
  return order;
}

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size,
                                                    RngStream& rng) {
  if (batch_size == 0) throw ArgumentError("batch size must be positive");
  const auto order = rng.permutation(n);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t at = 0; at < n; at += batch_size) {
    const std::size_t end = std::min(n, at + batch_size);
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(at),
                     order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

std::vector<std::size_t> supplement(std::span<const std::size_t> batch, const Dataset& data,
                                    RngStream& rng) {
  std::map<std::size_t, std::size_t> counts;
  for (auto i : batch) {
    if (i >= data.size()) throw ArgumentError("batch index out of range");
    ++counts[data.label(i)];
  }
  const std::set<std::size_t> in_batch(batch.begin(), batch.end());
  std::vector<std::size_t> out(batch.begin(), batch.end());
  for (const auto& [c, n] : counts) {
    if (n != 1) continue;
    std::vector<std::size_t> outside;
    for (auto m : data.members(c)) {
      if (!in_batch.count(m)) outside.push_back(m);
    }
    if (outside.empty()) {
      throw DataError("class " + std::to_string(c) +
                      " has a single sample in the batch and no other training sample");
    }
    out.push_back(outside[rng.index(outside.size())]);
  }
  return out;
}

bool AugmentPolicy::is_identity() const { return !needs_geometry() && noise_sigma == 0.0; }

void hflip_image(std::span<double> image, const ImageGeometry& g) {
  for (std::size_t y = 0; y < g.height; ++y) {
    for (std::size_t x = 0; x < g.width / 2; ++x) {
      for (std::size_t c = 0; c < g.channels; ++c) {
        std::swap(image[(y * g.width + x) * g.channels + c],
                  image[(y * g.width + (g.width - 1 - x)) * g.channels + c]);
      }
    }
  }
}

void cutout_image(std::span<double> image, const ImageGeometry& g, std::size_t side,
                  std::size_t top, std::size_t left) {
  if (top + side > g.height || left + side > g.width) throw ArgumentError("cutout outside the image");
  for (std::size_t y = top; y < top + side; ++y) {
    for (std::size_t x = left; x < left + side; ++x) {
      for (std::size_t c = 0; c < g.channels; ++c) image[(y * g.width + x) * g.channels + c] = 0.0;
    }
  }
}

void shift_crop_image(std::span<double> image, const ImageGeometry& g, std::size_t padding,
                      std::size_t dy, std::size_t dx) {
  if (dy > 2 * padding || dx > 2 * padding) throw ArgumentError("crop offset beyond padding");
  const std::vector<double> src(image.begin(), image.end());
  // Output pixel (y, x) reads padded pixel (y + dy, x + dx), i.e. source
  // pixel (y + dy - padding, x + dx - padding), zero outside the image.
  for (std::size_t y = 0; y < g.height; ++y) {
    for (std::size_t x = 0; x < g.width; ++x) {
      const auto sy = static_cast<std::ptrdiff_t>(y + dy) - static_cast<std::ptrdiff_t>(padding);
      const auto sx = static_cast<std::ptrdiff_t>(x + dx) - static_cast<std::ptrdiff_t>(padding);
      const bool inside = sy >= 0 && sx >= 0 && sy < static_cast<std::ptrdiff_t>(g.height) &&
                          sx < static_cast<std::ptrdiff_t>(g.width);
      for (std::size_t c = 0; c < g.channels; ++c) {
        image[(y * g.width + x) * g.channels + c] =
            inside ? src[(static_cast<std::size_t>(sy) * g.width + static_cast<std::size_t>(sx)) *
                             g.channels + c]
                   : 0.0;
      }
    }
  }
}

Tensor augment(const Tensor& originals, RngStream& rng, const AugmentPolicy& policy,
               const std::optional<ImageGeometry>& geometry) {
  if (policy.needs_geometry() && !geometry) {
    throw ConfigError("train.augment", "image augmentation requested for non-image data");
  }
  if (policy.noise_sigma < 0.0) throw ConfigError("train.noise_sigma", "must be nonnegative");
  Tensor out = originals;
  if (policy.is_identity()) return out;
  if (geometry && geometry->pixels() != originals.cols()) {
    throw DimensionError("image geometry does not match row width");
  }
  if (geometry && policy.cutout > std::min(geometry->height, geometry->width)) {
    throw ConfigError("train.cutout", "cutout larger than the image");
  }
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto img = out.row(r);
    if (policy.crop_padding > 0) {
      const std::size_t span = 2 * policy.crop_padding + 1;
      const std::size_t dy = rng.index(span);
      const std::size_t dx = rng.index(span);
      shift_crop_image(img, *geometry, policy.crop_padding, dy, dx);
    }
    if (policy.hflip && rng.uniform() < 0.5) hflip_image(img, *geometry);
    if (policy.cutout > 0) {
      const std::size_t top = rng.index(geometry->height - policy.cutout + 1);
      const std::size_t left = rng.index(geometry->width - policy.cutout + 1);
      cutout_image(img, *geometry, policy.cutout, top, left);
    }
    if (policy.noise_sigma > 0.0) {
      for (auto& v : img) v += policy.noise_sigma * rng.normal();
    }
  }
  return out;
}

DualBatch build_dual_batch(const Dataset& data, std::span<const std::size_t> batch,
                           RngStream& supplement_rng, RngStream& augment_rng,
                           const AugmentPolicy& policy) {
  if (batch.empty()) throw ArgumentError("empty batch");
  DualBatch b;
  b.indices = supplement(batch, data, supplement_rng);
  b.supplemented_count = b.indices.size() - batch.size();
  b.originals = gather_rows(data.features(), b.indices);
  b.augmented = augment(b.originals, augment_rng, policy, data.geometry());
  b.labels.reserve(b.indices.size());
  for (auto i : b.indices) b.labels.push_back(data.label(i));
  return b;
}

}  // namespace synermix
