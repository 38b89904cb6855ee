#include "synermix/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

#include "synermix/errors.hpp"

namespace synermix {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto comma = s.find(',', start);
    out.push_back(trim(std::string_view(s).substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

// Value parsers throw std::invalid_argument; parse_config rethrows as
// ConfigError with key and line.
double to_double(const std::string& s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw std::invalid_argument("expected a number, got '" + s + "'");
  }
  return v;
}

std::uint64_t to_uint(const std::string& s) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw std::invalid_argument("expected a nonnegative integer, got '" + s + "'");
  }
  return v;
}

std::size_t to_size(const std::string& s) { return static_cast<std::size_t>(to_uint(s)); }

bool to_bool(const std::string& s) {
  if (s == "true") return true;
  if (s == "false") return false;
  throw std::invalid_argument("expected true or false, got '" + s + "'");
}

std::vector<std::size_t> to_size_list(const std::string& s) {
  std::vector<std::size_t> out;
  for (const auto& item : split_list(s)) out.push_back(to_size(item));
  return out;
}

std::vector<double> to_double_list(const std::string& s) {
  std::vector<double> out;
  for (const auto& item : split_list(s)) out.push_back(to_double(item));
  return out;
}

DataFormat to_format(const std::string& s) {
  if (s == "synthetic") return DataFormat::synthetic;
  if (s == "csv") return DataFormat::csv;
  if (s == "idx") return DataFormat::idx;
  throw std::invalid_argument("expected synthetic, csv or idx, got '" + s + "'");
}

Variant to_variant(const std::string& s) {
  if (auto v = parse_variant(s)) return *v;
  throw std::invalid_argument("unknown variant '" + s + "'");
}

std::string str(const std::string& s) { return s; }
std::string ustr(std::uint64_t v) { return std::to_string(v); }
std::string bstr(bool v) { return v ? "true" : "false"; }
std::string vstr(Variant v) { return std::string(variant_name(v)); }

std::string fstr(DataFormat f) {
  switch (f) {
    case DataFormat::csv: return "csv";
    case DataFormat::idx: return "idx";
    case DataFormat::synthetic: break;
  }
  return "synthetic";
}

std::string list_str(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

std::string list_str(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + format_double(v[i]);
  return out;
}

struct Key {
  std::string name;  // section.key
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define SYNERMIX_KEY(NAME, FIELD, PARSE, PRINT)                                  \
  Key {                                                                          \
    NAME, [](ExperimentConfig& c, const std::string& v) { c.FIELD = PARSE(v); },  \
        [](const ExperimentConfig& c) { return PRINT(c.FIELD); }                 \
  }

const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      SYNERMIX_KEY("data.format", data.format, to_format, fstr),
      SYNERMIX_KEY("data.path", data.path, str, str),
      SYNERMIX_KEY("data.labels_path", data.labels_path, str, str),
      SYNERMIX_KEY("data.test_path", data.test_path, str, str),
      SYNERMIX_KEY("data.test_labels_path", data.test_labels_path, str, str),
      SYNERMIX_KEY("data.test_fraction", data.test_fraction, to_double, format_double),
      SYNERMIX_KEY("data.classes", data.blobs.classes, to_size, ustr),
      SYNERMIX_KEY("data.dim", data.blobs.dim, to_size, ustr),
      SYNERMIX_KEY("data.sigma", data.blobs.sigma, to_double, format_double),
      SYNERMIX_KEY("data.radius", data.blobs.radius, to_double, format_double),
      SYNERMIX_KEY("data.per_class", data.blobs.per_class, to_size, ustr),
      SYNERMIX_KEY("data.test_per_class", data.test_per_class, to_size, ustr),
      SYNERMIX_KEY("data.seed", data.blobs.seed, to_uint, ustr),
      SYNERMIX_KEY("model.hidden", train.hidden, to_size_list, list_str),
      SYNERMIX_KEY("mix.variant", train.mix.variant, to_variant, vstr),
      SYNERMIX_KEY("mix.beta", train.mix.beta, to_double, format_double),
      SYNERMIX_KEY("mix.alpha", train.mix.alpha, to_double, format_double),
      SYNERMIX_KEY("mix.p_interp", train.mix.p_interp, to_size, ustr),
      SYNERMIX_KEY("mix.eligible_layers", train.mix.eligible_layers, to_size_list, list_str),
      SYNERMIX_KEY("optim.lr", train.optim.lr, to_double, format_double),
      SYNERMIX_KEY("optim.momentum", train.optim.momentum, to_double, format_double),
      SYNERMIX_KEY("optim.weight_decay", train.optim.weight_decay, to_double, format_double),
      SYNERMIX_KEY("optim.step_size", train.optim.step_size, to_size, ustr),
      SYNERMIX_KEY("optim.gamma", train.optim.gamma, to_double, format_double),
      SYNERMIX_KEY("optim.epochs", train.optim.epochs, to_size, ustr),
      SYNERMIX_KEY("train.batch_size", train.batch_size, to_size, ustr),
      SYNERMIX_KEY("train.last_k", train.last_k, to_size, ustr),
      SYNERMIX_KEY("train.noise_sigma", train.augment.noise_sigma, to_double, format_double),
      SYNERMIX_KEY("train.crop_padding", train.augment.crop_padding, to_size, ustr),
      SYNERMIX_KEY("train.hflip", train.augment.hflip, to_bool, bstr),
      SYNERMIX_KEY("train.cutout", train.augment.cutout, to_size, ustr),
      SYNERMIX_KEY("train.record_timing", train.record_timing, to_bool, bstr),
      SYNERMIX_KEY("run.seed", train.seed, to_uint, ustr),
      SYNERMIX_KEY("run.out", out, str, str),
      SYNERMIX_KEY("run.sweep_grid", sweep_grid, to_double_list, list_str),
  };
  return table;
}

#undef SYNERMIX_KEY

const Key* find_key(const std::string& name) {
  for (const auto& k : keys()) {
    if (k.name == name) return &k;
  }
  return nullptr;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw InvariantError("double formatting failed");
  return std::string(buf, ptr);
}

void ExperimentConfig::validate() const {
  train.validate();
  if (data.format == DataFormat::csv && data.path.empty()) {
    throw ConfigError("data.path", "csv data needs a path");
  }
  if (data.format == DataFormat::idx) {
    if (data.path.empty()) throw ConfigError("data.path", "idx data needs an image file path");
    if (data.labels_path.empty()) {
      throw ConfigError("data.labels_path", "idx data needs a label file path");
    }
  }
  if (data.format == DataFormat::synthetic) {
    if (data.blobs.classes < 2) throw ConfigError("data.classes", "need at least two classes");
    if (data.blobs.dim < 2) throw ConfigError("data.dim", "need at least two dimensions");
    if (!(data.blobs.sigma > 0.0)) throw ConfigError("data.sigma", "must be positive");
    if (data.blobs.per_class < 2) throw ConfigError("data.per_class", "need at least two per class");
    if (data.test_per_class < 2) throw ConfigError("data.test_per_class", "need at least two per class");
  }
  if (!(data.test_fraction > 0.0 && data.test_fraction < 1.0)) {
    throw ConfigError("data.test_fraction", "must lie in (0, 1)");
  }
  if (!(train.augment.noise_sigma >= 0.0)) throw ConfigError("train.noise_sigma", "must be nonnegative");
  for (double b : sweep_grid) {
    if (!(b >= 0.0 && b <= 1.0)) throw ConfigError("run.sweep_grid", "beta values must lie in [0, 1]");
  }
}

ExperimentConfig parse_config(const std::string& text) {
  static const std::vector<std::string> sections = {"data", "model", "mix", "optim", "train", "run"};
  ExperimentConfig cfg;
  std::map<std::string, std::size_t> seen;  // key -> line
  std::string section;
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(line, "unterminated section header", line_no);
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      if (std::find(sections.begin(), sections.end(), section) == sections.end()) {
        throw ConfigError(section, "unknown section", line_no);
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(line, "expected key = value", line_no);
    const std::string name = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (section.empty()) throw ConfigError(name, "key outside of any section", line_no);
    const std::string full = section + "." + name;
    const Key* key = find_key(full);
    if (!key) throw ConfigError(full, "unknown key", line_no);
    if (auto it = seen.find(full); it != seen.end()) {
      throw ConfigError(full, "duplicate key, first set on line " + std::to_string(it->second),
                        line_no);
    }
    seen[full] = line_no;
    try {
      key->set(cfg, value);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(full, e.what(), line_no);
    }
  }
  if (!seen.count("data.format")) throw ConfigError("data.format", "required key missing");
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    const auto it = seen.find(e.key());
    if (it == seen.end() || e.line() != 0) throw;
    std::string what = e.what();
    const std::string prefix = "`" + e.key() + "`: ";
    if (what.rfind(prefix, 0) == 0) what.erase(0, prefix.size());
    throw ConfigError(e.key(), what, it->second);
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("--config", "cannot open " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

std::string serialize_config(const ExperimentConfig& config) {
  std::string out;
  std::string section;
  for (const auto& k : keys()) {
    const auto dot = k.name.find('.');
    const std::string sec = k.name.substr(0, dot);
    if (sec != section) {
      if (!section.empty()) out += "\n";
      out += "[" + sec + "]\n";
      section = sec;
    }
    out += k.name.substr(dot + 1) + " = " + k.get(config) + "\n";
  }
  return out;
}

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
  return serialize_config(a) == serialize_config(b);
}

}  // namespace synermix
