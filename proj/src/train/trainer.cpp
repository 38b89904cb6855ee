#include "synermix/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "synermix/analysis.hpp"
#include "synermix/errors.hpp"
#include "synermix/loss.hpp"

namespace synermix {

TrainStreams::TrainStreams(std::uint64_t seed)
    : init(RngStream(seed).derive(1)),
      sampler(RngStream(seed).derive(2)),
      supplement(RngStream(seed).derive(3)),
      augment(RngStream(seed).derive(4)),
      intra(RngStream(seed).derive(5)),
      inter(RngStream(seed).derive(6)) {}

LossBreakdown compute_objective(const MlpModel& model, const DualBatch& batch, const MixSpec& spec,
                                RngStream& intra_rng, RngStream& inter_rng, Gradients* grads) {
  const Variant v = spec.variant;
  const double beta = spec.effective_beta();
  auto sink = [&](double weight) { return GradSink{weight != 0.0 ? grads : nullptr, weight}; };

  LossBreakdown out;
  if (uses_intra(v)) {
    const Tensor& source = v == Variant::W_RA_AUG ? batch.augmented : batch.originals;
    out.intra = intra_branch(model, source, batch.labels, spec.p_interp, intra_rng, sink(beta));
  }
  const double other_weight = 1.0 - beta;
  if (!uses_inter(v)) {
    out.other = plain_loss(model, batch.augmented, batch.labels, sink(other_weight));
  } else if (uses_manifold(v)) {
    out.other = inter_loss_manifold(model, batch.augmented, batch.labels, inter_rng, spec.alpha,
                                    spec.eligible_layers, sink(other_weight));
  } else {
    out.other = inter_loss_mixup(model, batch.augmented, batch.labels, inter_rng, spec.alpha,
                                 sink(other_weight));
  }
  out.total = out.intra ? total_loss(beta, *out.intra, out.other) : out.other;
  return out;
}

LossBreakdown train_step(MlpModel& model, const DualBatch& batch, const MixSpec& spec,
                         SgdMomentum& optimizer, double lr, TrainStreams& streams) {
  // Supplemented batches hold every present class at least twice.
  if (uses_intra(spec.variant)) {
    std::vector<std::size_t> counts;
    for (auto y : batch.labels) {
      if (y >= counts.size()) counts.resize(y + 1, 0);
      ++counts[y];
    }
    for (std::size_t c = 0; c < counts.size(); ++c) {
      if (counts[c] == 1) {
        throw InvariantError("class " + std::to_string(c) +
                             " has one sample after supplementation");
      }
    }
  }
  Gradients grads = Gradients::zeros_like(model);
  const LossBreakdown losses =
      compute_objective(model, batch, spec, streams.intra, streams.inter, &grads);
  if (!std::isfinite(losses.total) || (losses.intra && !std::isfinite(*losses.intra))) {
    throw DivergenceError("non-finite loss (total " + std::to_string(losses.total) + ")");
  }
  optimizer.step(model, grads, lr);
  return losses;
}

void TrainSettings::validate() const {
  mix.validate();
  optim.validate();
  if (batch_size == 0) throw ConfigError("train.batch_size", "must be positive");
  if (last_k == 0) throw ConfigError("train.last_k", "must be positive");
  for (auto h : hidden) {
    if (h == 0) throw ConfigError("model.hidden", "layer widths must be positive");
  }
  const std::size_t depth = hidden.size() + 1;
  for (auto k : mix.eligible_layers) {
    if (k >= depth) {
      throw ConfigError("mix.eligible_layers",
                        "layer " + std::to_string(k) + " does not exist below the classifier");
    }
  }
}

double accuracy(const MlpModel& model, const Dataset& data) {
  if (data.size() == 0) throw ArgumentError("accuracy on an empty dataset");
  const ForwardCache cache = forward(model, data.features());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.size(); ++i) hits += argmax(cache.logits.row(i)) == data.label(i);
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

Tensor feature_matrix(const MlpModel& model, const Dataset& data) {
  return forward_until(model, data.features(), model.feature_position()).at(model.feature_position());
}

ExperimentResult run_experiment(const Dataset& train, const Dataset* val, const Dataset& test,
                                const TrainSettings& settings, const RecordSink& sink) {
  settings.validate();
  if (train.size() == 0) throw DataError("empty training set");
  if (train.dim() != test.dim()) throw DataError("train/test feature widths differ");
  using clock = std::chrono::steady_clock;

  TrainStreams streams(settings.seed);
  ExperimentResult result;
  result.model = MlpModel::make(train.dim(), settings.hidden, train.classes(), streams.init);
  SgdMomentum optimizer(result.model, settings.optim);
  MlpModel& model = result.model;

  for (std::size_t epoch = 0; epoch < settings.optim.epochs; ++epoch) {
    const auto started = clock::now();
    RunRecord rec;
    rec.epoch = epoch;
    rec.lr = lr_at(settings.optim, epoch);
    double sum_intra = 0.0, sum_other = 0.0, sum_total = 0.0;
    std::size_t steps = 0;
    bool has_intra = false;
    try {
      for (const auto& b : epoch_batches(train.size(), settings.batch_size, streams.sampler)) {
        const DualBatch dual =
            build_dual_batch(train, b, streams.supplement, streams.augment, settings.augment);
        const LossBreakdown l = train_step(model, dual, settings.mix, optimizer, rec.lr, streams);
        if (l.intra) {
          has_intra = true;
          sum_intra += *l.intra;
        }
        sum_other += l.other;
        sum_total += l.total;
        ++steps;
      }
    } catch (const DivergenceError& e) {
      result.diverged = true;
      result.diagnostic = "epoch " + std::to_string(epoch) + ", step " + std::to_string(steps) +
                          ": " + e.what();
      rec.diverged = true;
      rec.loss_total = std::numeric_limits<double>::quiet_NaN();
      rec.loss_inter = std::numeric_limits<double>::quiet_NaN();
      rec.test_acc = std::numeric_limits<double>::quiet_NaN();
      result.records.push_back(rec);
      if (sink) sink(rec);
      return result;
    }
    const double inv = 1.0 / static_cast<double>(steps);
    if (has_intra) rec.loss_intra = sum_intra * inv;
    rec.loss_inter = sum_other * inv;
    rec.loss_total = sum_total * inv;
    if (val) rec.val_acc = accuracy(model, *val);
    rec.test_acc = accuracy(model, test);
    try {
      const CohesionReport cr = cohesion_report(feature_matrix(model, test), test.labels());
      rec.cohesion = cr.within_class_variance;
      rec.separability = cr.between_within_ratio;
    } catch (const ArgumentError&) {
      // Degenerate feature space (e.g. every ReLU dead); leave metrics empty.
    }
    if (settings.record_timing) {
      rec.wall_ms = std::chrono::duration<double, std::milli>(clock::now() - started).count();
    }
    result.records.push_back(rec);
    if (sink) sink(rec);
  }

  if (result.records.empty()) return result;
  RunSummary s;
  s.variant = settings.mix.variant;
  s.beta = settings.mix.effective_beta();
  s.seed = settings.seed;
  s.epochs = result.records.size();
  s.averaged_epochs = std::min(settings.last_k, result.records.size());
  const auto first = result.records.end() - static_cast<std::ptrdiff_t>(s.averaged_epochs);
  double test_sum = 0.0, val_sum = 0.0;
  for (auto it = first; it != result.records.end(); ++it) {
    test_sum += it->test_acc;
    if (it->val_acc) val_sum += *it->val_acc;
  }
  s.final_test_acc = test_sum / static_cast<double>(s.averaged_epochs);
  if (val) s.final_val_acc = val_sum / static_cast<double>(s.averaged_epochs);
  s.cohesion = result.records.back().cohesion;
  s.separability = result.records.back().separability;
  result.summary = s;
  return result;
}

std::vector<double> default_beta_grid(Variant v) {
  switch (v) {
    case Variant::W_RA:
    case Variant::W_RA_AUG:
      return {0.2, 0.4, 0.5, 0.7};
    case Variant::W_RA_ER_M:
    case Variant::W_RA_ER_MM:
      return {0.05, 0.1, 0.2, 0.4};
    default:
      return {};
  }
}

SweepResult sweep_beta(const Dataset& train, const Dataset& test, const TrainSettings& base,
                       std::span<const double> grid, const SweepSinkFactory& sinks) {
  if (grid.empty()) throw ConfigError("run.sweep_grid", "beta grid is empty");
  for (double b : grid) {
    if (!(b >= 0.0 && b <= 1.0)) {
      throw ConfigError("run.sweep_grid", "beta " + std::to_string(b) + " outside [0, 1]");
    }
  }
  if (!uses_intra(base.mix.variant)) {
    throw ConfigError("mix.variant", std::string(variant_name(base.mix.variant)) +
                                         " has no beta to sweep");
  }
  std::vector<double> betas(grid.begin(), grid.end());
  std::sort(betas.begin(), betas.end());
  betas.erase(std::unique(betas.begin(), betas.end()), betas.end());

  RngStream split_rng = RngStream(base.seed).derive(7);
  const Split split = stratified_split(train, 0.1, split_rng);

  SweepResult out;
  double best_score = -std::numeric_limits<double>::infinity();
  bool have_best = false;
  for (double b : betas) {
    TrainSettings s = base;
    s.mix.beta = b;
    const ExperimentResult r =
        run_experiment(split.train, &split.held_out, test, s, sinks ? sinks(b, false) : RecordSink{});
    const double score = (r.summary && r.summary->final_val_acc) ? *r.summary->final_val_acc
                                                                 : -std::numeric_limits<double>::infinity();
    out.val_accuracy.emplace_back(b, score);
    if (!have_best || score > best_score) {
      best_score = score;
      out.best_beta = b;
      have_best = true;
    }
  }
  TrainSettings final_settings = base;
  final_settings.mix.beta = out.best_beta;
  out.final_run = run_experiment(train, nullptr, test, final_settings,
                                 sinks ? sinks(out.best_beta, true) : RecordSink{});
  return out;
}

}  // namespace synermix
