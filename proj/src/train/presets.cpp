#include "synermix/presets.hpp"

#include <algorithm>

#include "synermix/errors.hpp"

namespace synermix {

DataSource blobs_preset_source() {
  DataSource src;
  src.format = DataFormat::synthetic;
  src.blobs.classes = 3;
  src.blobs.dim = 2;
  src.blobs.sigma = 1.2;
  src.blobs.per_class = 300;
  return src;
}

TrainSettings blobs_preset_settings() {
  TrainSettings s;
  s.hidden = {64, 32};
  s.optim.epochs = 30;
  s.augment.noise_sigma = 0.1;
  s.mix.eligible_layers = {0, 1};
  return s;
}

double median(std::vector<double> values) {
  if (values.empty()) throw ArgumentError("median of nothing");
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  return values.size() % 2 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

const VariantMedians& CompareResult::median(Variant v) const {
  for (const auto& m : medians) {
    if (m.variant == v) return m;
  }
  throw ArgumentError(std::string("variant not compared: ") + std::string(variant_name(v)));
}

CompareResult compare_variants(const DataBundle& data, const TrainSettings& base,
                               const CompareOptions& options, const CompareProgress& progress) {
  if (options.variants.empty() || options.seeds.empty()) {
    throw ArgumentError("compare needs at least one variant and one seed");
  }
  CompareResult out;
  for (Variant v : options.variants) {
    std::vector<double> accs, within;
    for (std::uint64_t seed : options.seeds) {
      TrainSettings s = base;
      s.mix.variant = v;
      s.seed = seed;
      CompareRow row;
      row.variant = v;
      row.seed = seed;
      ExperimentResult run;
      if (uses_intra(v) && options.sweep) {
        const auto grid = default_beta_grid(v);
        SweepResult sw = sweep_beta(data.train, data.test, s, grid);
        run = std::move(sw.final_run);
      } else {
        run = run_experiment(data.train, nullptr, data.test, s);
      }
      row.beta = s.mix.effective_beta();
      if (run.summary) {
        row.beta = run.summary->beta;
        row.test_acc = run.summary->final_test_acc;
        row.within_class_variance = run.summary->cohesion;
        row.separability = run.summary->separability;
        accs.push_back(row.test_acc);
        if (row.within_class_variance) within.push_back(*row.within_class_variance);
      } else {
        row.diverged = run.diverged;
      }
      out.rows.push_back(row);
      if (progress) progress(row);
    }
    VariantMedians m;
    m.variant = v;
    if (!accs.empty()) m.test_acc = median(accs);
    if (!within.empty()) m.within_class_variance = median(within);
    out.medians.push_back(m);
  }
  return out;
}

}  // namespace synermix

namespace synermix {

std::vector<VariantAudit> gradient_audit(std::uint64_t seed) {
  RngStream root(seed);
  RngStream data_rng = root.derive(1);
  const std::size_t n = 12, dim = 4, classes = 3;
  Tensor x = Tensor::matrix(n, dim);
  for (auto& v : x.values()) v = data_rng.normal();
  std::vector<std::size_t> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = i % classes;
  const Dataset data(std::move(x), std::move(y), classes);
  std::vector<std::size_t> rows(n);
  for (std::size_t i = 0; i < n; ++i) rows[i] = i;
  AugmentPolicy policy;
  policy.noise_sigma = 0.2;
  RngStream sup = root.derive(2), aug = root.derive(3);
  const DualBatch batch = build_dual_batch(data, rows, sup, aug, policy);

  std::vector<VariantAudit> out;
  for (Variant v : kAllVariants) {
    RngStream init = root.derive(4);
    const std::vector<std::size_t> hidden{6, 5};
    MlpModel model = MlpModel::make(dim, hidden, classes, init);
    // Nonzero biases keep ReLU kinks away from the probe points.
    for (auto& layer : model.mutable_layers()) {
      for (auto& b : layer.bias.values()) b = 0.1 * init.normal();
    }
    MixSpec spec;
    spec.variant = v;
    spec.beta = 0.3;
    spec.p_interp = 2;
    spec.eligible_layers = {0, 1, 2};
    const RngStream intra0 = root.derive(5), inter0 = root.derive(6);
    auto objective = [&](const MlpModel& m) {
      RngStream a = intra0, b = inter0;
      return compute_objective(m, batch, spec, a, b, nullptr).total;
    };
    Gradients g = Gradients::zeros_like(model);
    RngStream a = intra0, b = inter0;
    compute_objective(model, batch, spec, a, b, &g);
    out.push_back({v, check_gradients(model, objective, g)});
  }
  return out;
}

}  // namespace synermix
