#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include "synermix/config.hpp"
#include "synermix/trainer.hpp"

namespace synermix {

/// One JSON object per line, keys in a fixed order. Absent values and
/// non-finite numbers are written as null.
std::string record_json(const RunRecord& record);
std::string summary_json(const RunSummary& summary);

/// Creates `dir`. An existing non-empty directory is an error unless
/// `force`, in which case its contents are removed first.
void prepare_run_dir(const std::filesystem::path& dir, bool force);

void write_text(const std::filesystem::path& path, const std::string& text);

inline constexpr const char* kConfigSnapshot = "config.ini";
inline constexpr const char* kRecordsFile = "records.jsonl";
inline constexpr const char* kSummaryFile = "summary.json";

/// Appends records to a JSONL file, flushing after each line.
class RecordWriter {
 public:
  explicit RecordWriter(const std::filesystem::path& path);
  void write(const RunRecord& record);
  RecordSink sink();

 private:
  std::ofstream out_;
};

}  // namespace synermix
