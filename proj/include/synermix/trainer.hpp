#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "synermix/batch.hpp"
#include "synermix/dataset.hpp"
#include "synermix/mixup.hpp"
#include "synermix/mlp.hpp"
#include "synermix/optim.hpp"
#include "synermix/rng.hpp"

namespace synermix {

struct LossBreakdown {
  std::optional<double> intra;  // absent for variants without the intra term
  double other = 0.0;           // inter loss, or plain CE on augmented rows
  double total = 0.0;
};

/// Per-purpose random streams of one training run. Each consumer owns its
/// stream so variants that skip a branch still see identical batches.
struct TrainStreams {
  RngStream init;
  RngStream sampler;
  RngStream supplement;
  RngStream augment;
  RngStream intra;
  RngStream inter;

  explicit TrainStreams(std::uint64_t seed);
};

/// Loss of `variant` on one dual batch. When `grads` is non-null the
/// gradient of the total is accumulated into it. A branch whose weight in
/// the total is exactly zero contributes no gradient.
LossBreakdown compute_objective(const MlpModel& model, const DualBatch& batch, const MixSpec& spec,
                                RngStream& intra_rng, RngStream& inter_rng, Gradients* grads);

/// One SGD step on the variant's objective. Throws DivergenceError on a
/// non-finite loss (the model is left untouched in that case).
LossBreakdown train_step(MlpModel& model, const DualBatch& batch, const MixSpec& spec,
                         SgdMomentum& optimizer, double lr, TrainStreams& streams);

struct TrainSettings {
  MixSpec mix;
  OptimConfig optim;
  std::vector<std::size_t> hidden{64, 32};
  std::size_t batch_size = 32;
  AugmentPolicy augment;
  std::size_t last_k = 5;
  std::uint64_t seed = 1;
  bool record_timing = false;

  void validate() const;
};

struct RunRecord {
  std::size_t epoch = 0;
  std::optional<double> loss_intra;
  double loss_inter = 0.0;
  double loss_total = 0.0;
  std::optional<double> val_acc;
  double test_acc = 0.0;
  std::optional<double> cohesion;
  std::optional<double> separability;
  double lr = 0.0;
  std::optional<double> wall_ms;
  bool diverged = false;
};

struct RunSummary {
  Variant variant = Variant::WO_RA_ER;
  double beta = 0.0;
  std::uint64_t seed = 0;
  std::size_t epochs = 0;
  std::size_t averaged_epochs = 0;
  double final_test_acc = 0.0;           // mean over the last k epochs
  std::optional<double> final_val_acc;   // same window
  std::optional<double> cohesion;        // final epoch
  std::optional<double> separability;    // final epoch
};

struct ExperimentResult {
  std::vector<RunRecord> records;
  std::optional<RunSummary> summary;  // absent for 0-epoch or diverged runs
  bool diverged = false;
  std::string diagnostic;
  MlpModel model;
};

using RecordSink = std::function<void(const RunRecord&)>;

/// Fraction of rows whose argmax logit equals the label.
double accuracy(const MlpModel& model, const Dataset& data);
/// Activations entering the classifier for every row of `data`.
Tensor feature_matrix(const MlpModel& model, const Dataset& data);

/// Trains a fresh model on `train`, evaluating on `val` (optional) and
/// `test` after every epoch.
ExperimentResult run_experiment(const Dataset& train, const Dataset* val, const Dataset& test,
                                const TrainSettings& settings, const RecordSink& sink = {});

/// Default beta candidates: [0.2, 0.4, 0.5, 0.7] for intra-only variants,
/// [0.05, 0.1, 0.2, 0.4] for combined ones. Empty for variants without beta.
std::vector<double> default_beta_grid(Variant v);

struct SweepResult {
  double best_beta = 0.0;
  std::vector<std::pair<double, double>> val_accuracy;  // (beta, mean val acc over last k)
  ExperimentResult final_run;                           // retrained on all of `train`
};

/// Called once per run to obtain its record sink; `final_run` marks the
/// retraining with the selected beta.
using SweepSinkFactory = std::function<RecordSink(double beta, bool final_run)>;

/// Holds out a stratified 10% of `train`, trains one run per beta, keeps
/// the beta with the best validation accuracy (ties go to the smaller beta)
/// and retrains on the whole of `train`.
SweepResult sweep_beta(const Dataset& train, const Dataset& test, const TrainSettings& base,
                       std::span<const double> grid, const SweepSinkFactory& sinks = {});

}  // namespace synermix
