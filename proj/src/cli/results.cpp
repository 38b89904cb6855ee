#include "synermix/results.hpp"

#include <cmath>
#include "json.hpp"

#include "synermix/errors.hpp"

namespace synermix {
namespace {

using ojson = nlohmann::ordered_json;

ojson num(double v) { return std::isfinite(v) ? ojson(v) : ojson(nullptr); }
ojson num(const std::optional<double>& v) { return v ? num(*v) : ojson(nullptr); }

}  // namespace

std::string record_json(const RunRecord& r) {
  ojson j;
  j["epoch"] = r.epoch;
  j["loss_intra"] = num(r.loss_intra);
  j["loss_inter"] = num(r.loss_inter);
  j["loss_total"] = num(r.loss_total);
  j["val_acc"] = num(r.val_acc);
  j["test_acc"] = num(r.test_acc);
  j["cohesion"] = num(r.cohesion);
  j["separability"] = num(r.separability);
  j["lr"] = num(r.lr);
  j["wall_ms"] = num(r.wall_ms);
  j["diverged"] = r.diverged;
  return j.dump();
}

std::string summary_json(const RunSummary& s) {
  ojson j;
  j["variant"] = std::string(variant_name(s.variant));
  j["beta"] = num(s.beta);
  j["seed"] = s.seed;
  j["epochs"] = s.epochs;
  j["averaged_epochs"] = s.averaged_epochs;
  j["final_test_acc"] = num(s.final_test_acc);
  j["final_val_acc"] = num(s.final_val_acc);
  j["cohesion"] = num(s.cohesion);
  j["separability"] = num(s.separability);
  return j.dump(2);
}

void prepare_run_dir(const std::filesystem::path& dir, bool force) {
  namespace fs = std::filesystem;
  if (fs::exists(dir)) {
    if (!fs::is_directory(dir)) throw ConfigError("--out", dir.string() + " is not a directory");
    if (!fs::is_empty(dir)) {
      if (!force) {
        throw ConfigError("--out", dir.string() + " already exists; pass --force to overwrite");
      }
      for (const auto& entry : fs::directory_iterator(dir)) fs::remove_all(entry.path());
    }
  }
  fs::create_directories(dir);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed: " + path.string());
}

RecordWriter::RecordWriter(const std::filesystem::path& path)
    : out_(path, std::ios::binary | std::ios::trunc) {
  if (!out_) throw Error("cannot write " + path.string());
}

void RecordWriter::write(const RunRecord& record) {
  out_ << record_json(record) << '\n';
  out_.flush();
}

RecordSink RecordWriter::sink() {
  return [this](const RunRecord& r) { write(r); };
}

}  // namespace synermix
