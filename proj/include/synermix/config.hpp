#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "synermix/dataset.hpp"
#include "synermix/trainer.hpp"

namespace synermix {

/// Everything needed to reproduce one experiment.
///
/// Text form is INI-like:
///
///   [data]
///   format = synthetic
///   sigma = 1.2
///   [mix]
///   variant = W_RA_ER_M
///   beta = 0.2
///
/// Sections: data, model, mix, optim, train, run. Lines starting with `#`
/// or `;` are comments. Unknown sections or keys are errors.
struct ExperimentConfig {
  DataSource data;
  TrainSettings train;
  std::string out;                 // run directory
  std::vector<double> sweep_grid;  // empty: the variant's default grid

  void validate() const;
};

/// Throws ConfigError naming the offending key and line. `data.format` is
/// required; everything else has a default.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Every key, in a fixed order. parse_config(serialize_config(c)) == c.
std::string serialize_config(const ExperimentConfig& config);

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b);

std::string format_double(double v);

}  // namespace synermix
