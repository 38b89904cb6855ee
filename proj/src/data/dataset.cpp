#include "synermix/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "synermix/errors.hpp"

namespace synermix {

Dataset::Dataset(Tensor features, std::vector<std::size_t> labels, std::size_t classes,
                 std::optional<ImageGeometry> geometry)
    : features_(std::move(features)),
      labels_(std::move(labels)),
      classes_(classes),
      geometry_(geometry),
      class_index_(classes) {
  if (features_.rows() != labels_.size()) {
    throw DimensionError("dataset has " + std::to_string(features_.rows()) + " rows but " +
                         std::to_string(labels_.size()) + " labels");
  }
  if (geometry_ && geometry_->pixels() != features_.cols()) {
    throw DimensionError("image geometry does not match feature width");
  }
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] >= classes_) {
      throw DataError("label " + std::to_string(labels_[i]) + " at row " + std::to_string(i) +
                      " exceeds class count " + std::to_string(classes_));
    }
    class_index_[labels_[i]].push_back(i);
  }
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  std::vector<std::size_t> y;
  y.reserve(indices.size());
  for (auto i : indices) y.push_back(labels_.at(i));
  return Dataset(gather_rows(features_, indices), std::move(y), classes_, geometry_);
}

Split stratified_split(const Dataset& data, double fraction, RngStream& rng) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw ArgumentError("split fraction must lie in (0, 1)");
  std::vector<std::size_t> keep, held;
  for (std::size_t c = 0; c < data.classes(); ++c) {
    const auto& members = data.members(c);
    if (members.empty()) continue;
    const std::size_t n = members.size();
    auto take = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
    take = std::min(take, n >= 2 ? n - 2 : std::size_t{0});
    const auto order = rng.permutation(n);
    for (std::size_t i = 0; i < n; ++i) {
      (i < take ? held : keep).push_back(members[order[i]]);
    }
  }
  if (held.empty()) throw DataError("split leaves the held-out set empty");
  std::sort(keep.begin(), keep.end());
  std::sort(held.begin(), held.end());
  return {data.subset(keep), data.subset(held)};
}

Standardizer Standardizer::fit(const Tensor& x) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  Standardizer s{std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)};
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t k = 0; k < d; ++k) s.mean[k] += x(r, k);
  }
  for (auto& m : s.mean) m /= static_cast<double>(n);
  for (std::size_t k = 0; k < d; ++k) {
    double var = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      const double dv = x(r, k) - s.mean[k];
      var += dv * dv;
    }
    var /= static_cast<double>(n);
    s.scale[k] = var > 0.0 ? 1.0 / std::sqrt(var) : 1.0;
  }
  return s;
}

Tensor Standardizer::apply(const Tensor& x) const {
  if (x.cols() != mean.size()) throw DimensionError("standardizer width mismatch");
  Tensor out = x;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t k = 0; k < x.cols(); ++k) out(r, k) = (x(r, k) - mean[k]) * scale[k];
  }
  return out;
}

Dataset make_blobs(const BlobSpec& spec) {
  if (spec.classes == 0 || spec.dim == 0 || spec.per_class == 0) {
    throw ArgumentError("blob spec needs positive classes, dim and per_class");
  }
  if (!(spec.sigma > 0.0)) throw ArgumentError("blob sigma must be positive");
  RngStream rng(spec.seed);
  const std::size_t n = spec.classes * spec.per_class;
  Tensor x = Tensor::matrix(n, spec.dim);
  std::vector<std::size_t> y(n);
  for (std::size_t c = 0; c < spec.classes; ++c) {
    std::vector<double> mean(spec.dim, 0.0);
    if (spec.dim == 1) {
      mean[0] = spec.radius * (static_cast<double>(c) - 0.5 * static_cast<double>(spec.classes - 1));
    } else {
      const double angle = 2.0 * std::numbers::pi * static_cast<double>(c) /
                           static_cast<double>(spec.classes);
      mean[0] = spec.radius * std::cos(angle);
      mean[1] = spec.radius * std::sin(angle);
    }
    for (std::size_t i = 0; i < spec.per_class; ++i) {
      const std::size_t r = c * spec.per_class + i;
      y[r] = c;
      for (std::size_t k = 0; k < spec.dim; ++k) x(r, k) = mean[k] + spec.sigma * rng.normal();
    }
  }
  return Dataset(std::move(x), std::move(y), spec.classes);
}

IdxArray parse_idx(std::span<const std::uint8_t> bytes) {
  auto be32 = [&](std::size_t at) {
    if (at + 4 > bytes.size()) throw ParseError("idx header truncated at byte " + std::to_string(at), 0, at);
    return (std::uint32_t{bytes[at]} << 24) | (std::uint32_t{bytes[at + 1]} << 16) |
           (std::uint32_t{bytes[at + 2]} << 8) | std::uint32_t{bytes[at + 3]};
  };
  IdxArray out;
  out.magic = be32(0);
  if ((out.magic >> 16) != 0) throw ParseError("idx magic must start with two zero bytes", 0, 0);
  if (((out.magic >> 8) & 0xFF) != 0x08) {
    throw ParseError("idx element type must be unsigned byte (0x08)", 0, 2);
  }
  const std::size_t rank = out.magic & 0xFF;
  if (rank == 0) throw ParseError("idx file declares zero dimensions", 0, 3);
  std::size_t count = 1;
  for (std::size_t i = 0; i < rank; ++i) {
    const std::size_t d = be32(4 + 4 * i);
    if (d == 0) throw ParseError("idx dimension " + std::to_string(i) + " is zero", 0, 4 + 4 * i);
    out.dims.push_back(d);
    count *= d;
  }
  const std::size_t header = 4 + 4 * rank;
  if (bytes.size() - header != count) {
    throw ParseError("idx payload has " + std::to_string(bytes.size() - header) +
                         " bytes, header declares " + std::to_string(count),
                     0, header);
  }
  out.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(header), bytes.end());
  return out;
}

IdxArray read_idx(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return parse_idx(bytes);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.line(), e.offset());
  }
}

namespace {

std::size_t check_contiguous(const std::vector<std::size_t>& labels) {
  if (labels.empty()) throw DataError("dataset has no samples");
  const std::set<std::size_t> seen(labels.begin(), labels.end());
  const std::size_t classes = *seen.rbegin() + 1;
  if (seen.size() != classes) {
    for (std::size_t c = 0; c < classes; ++c) {
      if (!seen.count(c)) {
        throw DataError("labels are not contiguous: class " + std::to_string(c) +
                        " is missing below max label " + std::to_string(classes - 1));
      }
    }
  }
  return classes;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) {
    const auto b = field.find_first_not_of(" \t\r");
    const auto e = field.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string() : field.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

Dataset parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> header;
  while (header.empty() && std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") != std::string::npos) header = split_fields(line);
  }
  if (header.empty()) throw ParseError("csv has no header row", lineno);
  if (header.back() != "label") throw ParseError("csv last column must be `label`", lineno);
  if (header.size() < 2) throw ParseError("csv needs at least one feature column", lineno);
  const std::size_t d = header.size() - 1;

  std::vector<double> values;
  std::vector<std::size_t> labels;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw ParseError("line " + std::to_string(lineno) + ": expected " +
                           std::to_string(header.size()) + " fields, found " +
                           std::to_string(fields.size()),
                       lineno);
    }
    for (std::size_t k = 0; k < d; ++k) {
      double v = 0.0;
      const auto& f = fields[k];
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc() || ptr != f.data() + f.size() || !std::isfinite(v)) {
        throw ParseError("line " + std::to_string(lineno) + ": column `" + header[k] +
                             "` is not a finite number: '" + f + "'",
                         lineno);
      }
      values.push_back(v);
    }
    std::size_t label = 0;
    const auto& f = fields.back();
    auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), label);
    if (ec != std::errc() || ptr != f.data() + f.size()) {
      throw ParseError("line " + std::to_string(lineno) + ": label is not a nonnegative integer: '" +
                           f + "'",
                       lineno);
    }
    labels.push_back(label);
  }
  const std::size_t classes = check_contiguous(labels);
  const std::size_t n = labels.size();
  return Dataset(Tensor({n, d}, std::move(values)), std::move(labels), classes);
}

Dataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_csv(ss.str());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.line(), e.offset());
  }
}

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
  const IdxArray img = read_idx(images);
  const IdxArray lab = read_idx(labels);
  if (img.magic != kIdxImages || img.dims.size() != 3) {
    throw ParseError(images.string() + ": expected image magic 0x00000803", 0, 0);
  }
  if (lab.magic != kIdxLabels || lab.dims.size() != 1) {
    throw ParseError(labels.string() + ": expected label magic 0x00000801", 0, 0);
  }
  if (img.dims[0] != lab.dims[0]) {
    throw DataError("idx image count " + std::to_string(img.dims[0]) + " != label count " +
                    std::to_string(lab.dims[0]));
  }
  const ImageGeometry geom{img.dims[1], img.dims[2], 1};
  const std::size_t n = img.dims[0];
  Tensor x = Tensor::matrix(n, geom.pixels());
  for (std::size_t i = 0; i < img.data.size(); ++i) x[i] = static_cast<double>(img.data[i]) / 255.0;
  std::vector<std::size_t> y(lab.data.begin(), lab.data.end());
  const std::size_t classes = check_contiguous(y);
  return Dataset(std::move(x), std::move(y), classes, geom);
}

namespace {

Dataset load_raw(const DataSource& src, bool test) {
  const std::string& path = test ? src.test_path : src.path;
  switch (src.format) {
    case DataFormat::synthetic: {
      BlobSpec spec = src.blobs;
      if (test) {
        spec.per_class = src.test_per_class;
        spec.seed = RngStream(spec.seed).derive(1).next_u64();
      }
      return make_blobs(spec);
    }
    case DataFormat::csv:
      if (path.empty()) throw ConfigError(test ? "data.test_path" : "data.path", "csv path is required");
      return load_csv(path);
    case DataFormat::idx: {
      const std::string& labels = test ? src.test_labels_path : src.labels_path;
      if (path.empty()) throw ConfigError(test ? "data.test_path" : "data.path", "idx image path is required");
      if (labels.empty()) {
        throw ConfigError(test ? "data.test_labels_path" : "data.labels_path", "idx label path is required");
      }
      return load_idx(path, labels);
    }
  }
  throw ArgumentError("unknown data format");
}

Dataset standardized(const Dataset& d, const Standardizer& s) {
  return Dataset(s.apply(d.features()), d.labels(), d.classes(), d.geometry());
}

}  // namespace

Dataset load_dataset(const DataSource& source) {
  Dataset raw = load_raw(source, false);
  if (source.format == DataFormat::idx) return raw;
  return standardized(raw, Standardizer::fit(raw.features()));
}

DataBundle load_bundle(const DataSource& source) {
  Dataset train = load_raw(source, false);
  Dataset test;
  const bool separate_test = source.format == DataFormat::synthetic || !source.test_path.empty();
  if (separate_test) {
    test = load_raw(source, true);
    if (test.dim() != train.dim()) throw DataError("test features have a different width");
    if (test.classes() > train.classes()) throw DataError("test set has classes unseen in training");
    if (test.classes() < train.classes()) {
      test = Dataset(test.features(), test.labels(), train.classes(), test.geometry());
    }
  } else {
    RngStream rng(source.blobs.seed, 0x7E57);
    Split s = stratified_split(train, source.test_fraction, rng);
    train = std::move(s.train);
    test = std::move(s.held_out);
  }
  if (source.format == DataFormat::idx) return {std::move(train), std::move(test)};
  const Standardizer st = Standardizer::fit(train.features());
  return {standardized(train, st), standardized(test, st)};
}

}  // namespace synermix
