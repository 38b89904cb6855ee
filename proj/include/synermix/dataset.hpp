#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "synermix/rng.hpp"
#include "synermix/tensor.hpp"

namespace synermix {

struct ImageGeometry {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 1;

  std::size_t pixels() const { return height * width * channels; }
};

/// Labeled samples, one per row. Immutable once built.
class Dataset {
 public:
  Dataset() = default;
  /// Throws DataError if a label is >= classes.
  Dataset(Tensor features, std::vector<std::size_t> labels, std::size_t classes,
          std::optional<ImageGeometry> geometry = std::nullopt);

  std::size_t size() const { return labels_.size(); }
  std::size_t dim() const { return features_.cols(); }
  std::size_t classes() const { return classes_; }
  const Tensor& features() const { return features_; }
  const std::vector<std::size_t>& labels() const { return labels_; }
  std::size_t label(std::size_t i) const { return labels_[i]; }
  const std::optional<ImageGeometry>& geometry() const { return geometry_; }
  /// Sample indices of class c, ascending.
  const std::vector<std::size_t>& members(std::size_t c) const { return class_index_.at(c); }

  Dataset subset(std::span<const std::size_t> indices) const;

 private:
  Tensor features_;
  std::vector<std::size_t> labels_;
  std::size_t classes_ = 0;
  std::optional<ImageGeometry> geometry_;
  std::vector<std::vector<std::size_t>> class_index_;
};

struct Split {
  Dataset train;
  Dataset held_out;
};

/// Per class, round(fraction * class_count) samples (chosen uniformly) go to
/// held_out. Classes keep at least two training samples.
Split stratified_split(const Dataset& data, double fraction, RngStream& rng);

/// Per-feature affine standardisation fitted on one dataset.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;  // 1/std, or 1 for constant features

  static Standardizer fit(const Tensor& x);
  Tensor apply(const Tensor& x) const;
};

struct BlobSpec {
  std::size_t classes = 3;
  std::size_t dim = 2;
  double sigma = 0.5;
  std::size_t per_class = 300;
  std::uint64_t seed = 7;
  /// Class means sit on a circle of this radius in the first two coordinates.
  double radius = 2.0;
};

/// Isotropic Gaussian blobs, raw (unstandardised). Rows are grouped by class.
Dataset make_blobs(const BlobSpec& spec);

/// Decoded IDX file: big-endian magic + dims, unsigned-byte payload.
struct IdxArray {
  std::uint32_t magic = 0;
  std::vector<std::size_t> dims;
  std::vector<std::uint8_t> data;
};

inline constexpr std::uint32_t kIdxImages = 0x00000803;
inline constexpr std::uint32_t kIdxLabels = 0x00000801;

IdxArray read_idx(const std::filesystem::path& path);
IdxArray parse_idx(std::span<const std::uint8_t> bytes);

/// Pixels scaled by 1/255; image geometry attached.
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

/// Header row; feature columns then an integer `label` column. Features are
/// returned raw.
Dataset load_csv(const std::filesystem::path& path);
Dataset parse_csv(const std::string& text);

enum class DataFormat { synthetic, csv, idx };

struct DataSource {
  DataFormat format = DataFormat::synthetic;
  std::string path;         // csv file or idx image file
  std::string labels_path;  // idx label file
  std::string test_path;
  std::string test_labels_path;
  BlobSpec blobs;
  std::size_t test_per_class = 200;
  /// Fraction held out as the test split when no test file is given.
  double test_fraction = 0.2;
};

struct DataBundle {
  Dataset train;
  Dataset test;
};

/// Loads one dataset and normalises it (standardisation for csv/synthetic,
/// /255 for idx).
Dataset load_dataset(const DataSource& source);

/// Train and test splits; standardisation statistics come from train only.
DataBundle load_bundle(const DataSource& source);

}  // namespace synermix
