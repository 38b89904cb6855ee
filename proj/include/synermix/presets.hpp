#pragma once

#include <cstdint>
#include <functional>
#include <iterator>
#include <optional>
#include <vector>

#include "synermix/dataset.hpp"
#include "synermix/gradcheck.hpp"
#include "synermix/trainer.hpp"

namespace synermix {

/// Overlapping 2-D blobs: 3 classes, sigma 1.2, 300 samples per class.
DataSource blobs_preset_source();

/// MLP 64-32, 30 epochs, light input noise, manifold layers {input, layer 1}.
TrainSettings blobs_preset_settings();

struct CompareRow {
  Variant variant = Variant::WO_RA_ER;
  std::uint64_t seed = 0;
  double beta = 0.0;
  double test_acc = 0.0;
  std::optional<double> within_class_variance;
  std::optional<double> separability;
  bool diverged = false;
};

struct VariantMedians {
  Variant variant = Variant::WO_RA_ER;
  double test_acc = 0.0;
  std::optional<double> within_class_variance;
};

struct CompareResult {
  std::vector<CompareRow> rows;
  std::vector<VariantMedians> medians;  // in the order variants were given

  const VariantMedians& median(Variant v) const;
};

struct CompareOptions {
  std::vector<Variant> variants{std::begin(kAllVariants), std::end(kAllVariants)};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  /// When false, beta variants use `base.mix.beta` instead of sweeping.
  bool sweep = true;
};

using CompareProgress = std::function<void(const CompareRow&)>;

/// Trains every (variant, seed) pair; beta variants select beta by
/// sweeping their default grid. Reports per-variant medians.
CompareResult compare_variants(const DataBundle& data, const TrainSettings& base,
                               const CompareOptions& options, const CompareProgress& progress = {});

double median(std::vector<double> values);

}  // namespace synermix

namespace synermix {

struct VariantAudit {
  Variant variant;
  GradCheckResult result;
};

/// Finite-difference audit of every variant's objective on a seeded
/// 2-hidden-layer MLP and a 12-row batch.
std::vector<VariantAudit> gradient_audit(std::uint64_t seed);

}  // namespace synermix
