#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "synermix/analysis.hpp"
#include "synermix/config.hpp"
#include "synermix/errors.hpp"
#include "synermix/presets.hpp"
#include "synermix/results.hpp"

namespace fs = std::filesystem;
using namespace synermix;

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string variant;
  std::optional<double> beta;
  bool force = false;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool needs_config) {
  auto* c = cmd->add_option("--config", f.config, "experiment config (INI)");
  if (needs_config) c->required();
  cmd->add_option("--seed", f.seed, "training seed (overrides run.seed)");
  cmd->add_option("--out", f.out, "run directory (overrides run.out)");
  cmd->add_option("--variant", f.variant, "loss variant (overrides mix.variant)");
  cmd->add_option("--beta", f.beta, "intra weight (overrides mix.beta)");
  cmd->add_flag("--force", f.force, "overwrite an existing run directory");
}

ExperimentConfig resolve(const CommonFlags& f) {
  ExperimentConfig cfg = load_config(f.config);
  if (f.seed) cfg.train.seed = *f.seed;
  if (!f.out.empty()) cfg.out = f.out;
  if (!f.variant.empty()) {
    const auto v = parse_variant(f.variant);
    if (!v) throw ConfigError("--variant", "unknown variant '" + f.variant + "'");
    cfg.train.mix.variant = *v;
  }
  if (f.beta) cfg.train.mix.beta = *f.beta;
  cfg.validate();
  if (cfg.out.empty()) throw ConfigError("run.out", "no run directory; set run.out or pass --out");
  return cfg;
}

void print_summary(const RunSummary& s) {
  std::printf("%s beta=%s seed=%llu final_test_acc=%.4f (last %zu epochs)\n",
              std::string(variant_name(s.variant)).c_str(), format_double(s.beta).c_str(),
              static_cast<unsigned long long>(s.seed), s.final_test_acc, s.averaged_epochs);
}

// Writes summary.json and returns the exit code for the run.
int finish_run(const fs::path& dir, const ExperimentResult& r) {
  if (r.diverged) {
    nlohmann::ordered_json j;
    j["diverged"] = true;
    j["diagnostic"] = r.diagnostic;
    write_text(dir / kSummaryFile, j.dump(2) + "\n");
    std::cerr << "error: training diverged: " << r.diagnostic << "\n";
    return 1;
  }
  if (r.summary) {
    write_text(dir / kSummaryFile, summary_json(*r.summary) + "\n");
    print_summary(*r.summary);
  } else {
    write_text(dir / kSummaryFile, "null\n");
    std::printf("no epochs run\n");
  }
  return 0;
}

int cmd_train(const CommonFlags& f) {
  const ExperimentConfig cfg = resolve(f);
  const DataBundle data = load_bundle(cfg.data);
  const fs::path dir = cfg.out;
  prepare_run_dir(dir, f.force);
  write_text(dir / kConfigSnapshot, serialize_config(cfg));
  RecordWriter records(dir / kRecordsFile);
  const ExperimentResult r = run_experiment(data.train, nullptr, data.test, cfg.train, records.sink());
  return finish_run(dir, r);
}

int cmd_sweep(const CommonFlags& f) {
  const ExperimentConfig cfg = resolve(f);
  const DataBundle data = load_bundle(cfg.data);
  std::vector<double> grid = cfg.sweep_grid;
  if (grid.empty()) grid = default_beta_grid(cfg.train.mix.variant);
  const fs::path dir = cfg.out;
  prepare_run_dir(dir, f.force);
  write_text(dir / kConfigSnapshot, serialize_config(cfg));
  fs::create_directories(dir / "sweep");

  std::vector<std::unique_ptr<RecordWriter>> writers;
  auto sinks = [&](double beta, bool final_run) {
    const fs::path p = final_run ? dir / kRecordsFile
                                 : dir / "sweep" / ("beta_" + format_double(beta) + ".jsonl");
    writers.push_back(std::make_unique<RecordWriter>(p));
    return writers.back()->sink();
  };
  const SweepResult r = sweep_beta(data.train, data.test, cfg.train, grid, sinks);

  nlohmann::ordered_json j;
  j["variant"] = std::string(variant_name(cfg.train.mix.variant));
  j["best_beta"] = r.best_beta;
  j["candidates"] = nlohmann::ordered_json::array();
  for (const auto& [beta, acc] : r.val_accuracy) {
    nlohmann::ordered_json row;
    row["beta"] = beta;
    row["val_acc"] = acc;
    j["candidates"].push_back(row);
    std::printf("beta=%s val_acc=%.4f\n", format_double(beta).c_str(), acc);
  }
  write_text(dir / "sweep.json", j.dump(2) + "\n");
  std::printf("best beta %s\n", format_double(r.best_beta).c_str());
  return finish_run(dir, r.final_run);
}

struct ProbFlags {
  std::vector<std::size_t> classes{2, 16, 128};
  std::vector<std::size_t> batch{4, 32, 128};
  std::size_t trials = 100000;
  std::uint64_t seed = 1;
};

int cmd_analyze_prob(const ProbFlags& f) {
  std::vector<std::size_t> ks = f.classes, ns = f.batch;
  if (ks.size() == 1 && ns.size() > 1) ks.resize(ns.size(), ks[0]);
  if (ns.size() == 1 && ks.size() > 1) ns.resize(ks.size(), ns[0]);
  if (ks.size() != ns.size()) throw ArgumentError("--classes and --batch lists differ in length");
  std::printf("classes,batch,sampling,analytic,montecarlo,std_error\n");
  RngStream root(f.seed);
  for (std::size_t i = 0; i < ks.size(); ++i) {
    for (auto sampling : {PairingSampling::equal_counts, PairingSampling::iid_uniform}) {
      const bool equal = sampling == PairingSampling::equal_counts;
      if (equal && ks[i] > 0 && ns[i] % ks[i] != 0) continue;
      PairingModel m;
      m.classes = ks[i];
      m.batch_size = ns[i];
      m.sampling = sampling;
      m.trials = f.trials;
      RngStream rng = root.derive(i * 2 + (equal ? 0 : 1));
      const double exact = intra_pair_fraction_analytic(m);
      const Estimate e = intra_pair_fraction_montecarlo(m, rng);
      std::printf("%zu,%zu,%s,%s,%s,%s\n", ks[i], ns[i], equal ? "equal_counts" : "iid_uniform",
                  format_double(exact).c_str(), format_double(e.estimate).c_str(),
                  format_double(e.std_error).c_str());
    }
  }
  return 0;
}

struct VarianceFlags {
  std::vector<std::size_t> p{1, 2, 3, 5};
  std::size_t trials = 10000;
  std::size_t rows = 8;
  std::size_t dim = 6;
  std::size_t classes = 3;
  std::uint64_t seed = 1;
};

int cmd_grad_variance(const VarianceFlags& f) {
  RngStream root(f.seed);
  RngStream feat_rng = root.derive(1), model_rng = root.derive(2), mc = root.derive(3);
  Tensor feats = Tensor::matrix(f.rows, f.dim);
  for (auto& v : feats.values()) v = 2.0 * feat_rng.normal();
  const std::vector<std::size_t> none;
  const MlpModel m = MlpModel::make(f.dim, none, f.classes, model_rng);
  const auto pts = grad_term_variance(feats, m.classifier(), 0, f.p, f.trials, mc);
  std::printf("p,variance,ratio_to_first\n");
  for (const auto& pt : pts) {
    std::printf("%zu,%s,%s\n", pt.p, format_double(pt.variance).c_str(),
                format_double(pt.variance / pts.front().variance).c_str());
  }
  return 0;
}

int cmd_grad_check(std::uint64_t seed) {
  double worst = 0.0;
  for (const auto& a : gradient_audit(seed)) {
    std::printf("%-12s max_rel_error=%.3e params=%zu worst=%s\n",
                std::string(variant_name(a.variant)).c_str(), a.result.max_rel_error,
                a.result.checked, a.result.worst.c_str());
    worst = std::max(worst, a.result.max_rel_error);
  }
  std::printf("max relative error: %.3e\n", worst);
  return worst < 1e-5 ? 0 : 1;
}

int cmd_compare(const CommonFlags& f, const std::vector<std::uint64_t>& seeds, bool no_sweep) {
  ExperimentConfig cfg;
  if (!f.config.empty()) {
    cfg = load_config(f.config);
  } else {
    cfg.data = blobs_preset_source();
    cfg.train = blobs_preset_settings();
  }
  if (!f.out.empty()) cfg.out = f.out;
  if (f.beta) cfg.train.mix.beta = *f.beta;
  cfg.validate();

  CompareOptions opts;
  opts.seeds = seeds;
  opts.sweep = !no_sweep;
  if (!f.variant.empty()) {
    const auto v = parse_variant(f.variant);
    if (!v) throw ConfigError("--variant", "unknown variant '" + f.variant + "'");
    opts.variants = {*v};
  }
  std::unique_ptr<std::ofstream> csv;
  if (!cfg.out.empty()) {
    prepare_run_dir(cfg.out, f.force);
    write_text(fs::path(cfg.out) / kConfigSnapshot, serialize_config(cfg));
    csv = std::make_unique<std::ofstream>(fs::path(cfg.out) / "compare.csv", std::ios::binary);
    *csv << "variant,seed,beta,test_acc,within_class_variance,separability\n";
  }
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  const DataBundle data = load_bundle(cfg.data);
  const CompareResult r = compare_variants(data, cfg.train, opts, [&](const CompareRow& row) {
    std::fprintf(stderr, "%s seed %llu done\n", std::string(variant_name(row.variant)).c_str(),
                 static_cast<unsigned long long>(row.seed));
    if (csv) {
      *csv << variant_name(row.variant) << ',' << row.seed << ',' << format_double(row.beta) << ','
           << (row.diverged ? std::string() : format_double(row.test_acc)) << ','
           << opt(row.within_class_variance) << ',' << opt(row.separability) << '\n';
    }
  });
  std::printf("variant,median_test_acc,median_within_class_variance\n");
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto& m : r.medians) {
    std::printf("%s,%.4f,%s\n", std::string(variant_name(m.variant)).c_str(), m.test_acc,
                opt(m.within_class_variance).c_str());
    nlohmann::ordered_json row;
    row["variant"] = std::string(variant_name(m.variant));
    row["median_test_acc"] = m.test_acc;
    row["median_within_class_variance"] =
        m.within_class_variance ? nlohmann::ordered_json(*m.within_class_variance) : nullptr;
    j.push_back(row);
  }
  if (!cfg.out.empty()) write_text(fs::path(cfg.out) / kSummaryFile, j.dump(2) + "\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Intra/inter-class mixup training and analysis"};
  app.require_subcommand(1);

  CommonFlags train_flags, sweep_flags, compare_flags;
  auto* train = app.add_subcommand("train", "train one run from a config");
  add_common(train, train_flags, true);

  auto* sweep = app.add_subcommand("sweep", "select beta on a 90/10 split, then retrain");
  add_common(sweep, sweep_flags, true);

  ProbFlags prob;
  auto* analyze = app.add_subcommand("analyze-prob", "intra-class pairing probability table (CSV)");
  analyze->add_option("--classes", prob.classes, "class counts K")->delimiter(',');
  analyze->add_option("--batch", prob.batch, "batch sizes N")->delimiter(',');
  analyze->add_option("--trials", prob.trials, "Monte Carlo trials");
  analyze->add_option("--seed", prob.seed, "RNG seed");

  VarianceFlags var;
  auto* variance = app.add_subcommand("grad-variance", "gradient-term variance against P (CSV)");
  variance->add_option("--p", var.p, "P values, ascending")->delimiter(',');
  variance->add_option("--trials", var.trials, "draws per P");
  variance->add_option("--rows", var.rows, "features in the class");
  variance->add_option("--dim", var.dim, "feature width");
  variance->add_option("--classes", var.classes, "classifier outputs");
  variance->add_option("--seed", var.seed, "RNG seed");

  std::uint64_t check_seed = 1;
  auto* check = app.add_subcommand("grad-check", "finite-difference audit of every variant");
  check->add_option("--seed", check_seed, "RNG seed");

  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  bool no_sweep = false;
  auto* compare = app.add_subcommand("compare", "all variants on the blobs preset, medians over seeds");
  add_common(compare, compare_flags, false);
  compare->add_option("--seeds", seeds, "training seeds")->delimiter(',');
  compare->add_flag("--no-sweep", no_sweep, "use mix.beta instead of sweeping");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*train) return cmd_train(train_flags);
    if (*sweep) return cmd_sweep(sweep_flags);
    if (*analyze) return cmd_analyze_prob(prob);
    if (*variance) return cmd_grad_variance(var);
    if (*check) return cmd_grad_check(check_seed);
    if (*compare) return cmd_compare(compare_flags, seeds, no_sweep);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
