// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "synermix/analysis.hpp"
#include "synermix/batch.hpp"
#include "synermix/errors.hpp"
#include "synermix/mixup.hpp"
#include "synermix/presets.hpp"

using namespace synermix;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int id, const char* name, bool ok, const std::string& detail) {
  std::printf("[%s] %d %s: %s\n", ok ? "PASS" : "FAIL", id, name, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

bool same_params(const MlpModel& a, const MlpModel& b) {
  for (std::size_t l = 0; l < a.depth(); ++l) {
    if (!(a.layer(l).weight == b.layer(l).weight) || !(a.layer(l).bias == b.layer(l).bias)) return false;
  }
  return true;
}

bool same_grads(const Gradients& a, const Gradients& b) {
  for (std::size_t l = 0; l < a.weight.size(); ++l) {
    if (!(a.weight[l] == b.weight[l]) || !(a.bias[l] == b.bias[l])) return false;
  }
  return true;
}

bool same_run(const ExperimentResult& a, const ExperimentResult& b) {
  if (a.records.size() != b.records.size()) return false;
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    if (a.records[i].loss_inter != b.records[i].loss_inter ||
        a.records[i].loss_total != b.records[i].loss_total ||
        a.records[i].test_acc != b.records[i].test_acc) {
      return false;
    }
  }
  return same_params(a.model, b.model);
}

void gradient_audit_criterion() {
  double worst = 0.0;
  std::string where;
  for (std::uint64_t seed : {1, 2, 3}) {
    for (const auto& a : gradient_audit(seed)) {
      if (a.result.max_rel_error >= worst) {
        worst = a.result.max_rel_error;
        where = std::string(variant_name(a.variant)) + " seed " + std::to_string(seed);
      }
    }
  }
  report(1, "gradient audit", worst < 1e-5,
         fmt("max relative error %.3e (limit 1e-5)", worst) + ", worst at " + where);
}

void reduction_criterion() {
  DataSource src = blobs_preset_source();
  src.blobs.per_class = 60;
  src.test_per_class = 30;
  const DataBundle data = load_bundle(src);
  auto settings = [](Variant v, double beta, std::vector<std::size_t> layers) {
    TrainSettings s = blobs_preset_settings();
    s.optim.epochs = 3;
    s.mix.variant = v;
    s.mix.beta = beta;
    s.mix.eligible_layers = std::move(layers);
    return s;
  };
  auto run = [&](const TrainSettings& s) { return run_experiment(data.train, nullptr, data.test, s); };

  const bool beta_zero_m = same_run(run(settings(Variant::W_RA_ER_M, 0.0, {0})),
                                    run(settings(Variant::W_ER_M, 0.0, {0})));
  const bool beta_zero_mm = same_run(run(settings(Variant::W_RA_ER_MM, 0.0, {0, 1})),
                                     run(settings(Variant::W_ER_MM, 0.0, {0, 1})));
  const bool input_only = same_run(run(settings(Variant::W_ER_MM, 0.0, {0})),
                                   run(settings(Variant::W_ER_M, 0.0, {0})));

  // lambda = 1 with the identity pairing against plain CE, loss and gradients.
  RngStream rng(5);
  MlpModel model = MlpModel::make(data.train.dim(), std::vector<std::size_t>{64, 32}, 3, rng);
  const std::vector<std::size_t> rows{0, 1, 2, 3, 4, 5, 6, 7, 60, 61, 62, 120, 121, 122};
  const Tensor x = gather_rows(data.train.features(), rows);
  std::vector<std::size_t> y;
  for (auto r : rows) y.push_back(data.train.label(r));
  MixPairing identity;
  identity.partner.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) identity.partner[i] = i;
  identity.lambda.assign(rows.size(), 1.0);
  Gradients g_plain = Gradients::zeros_like(model);
  const double plain = plain_loss(model, x, y, {&g_plain, 1.0});
  bool lambda_one = true;
  for (std::size_t pos : {0, 1, 2}) {
    identity.position = pos;
    Gradients g_mix = Gradients::zeros_like(model);
    const double mixed = pos == 0 ? inter_loss_mixup(model, x, y, identity, {&g_mix, 1.0})
                                  : inter_loss_manifold(model, x, y, identity, {&g_mix, 1.0});
    lambda_one = lambda_one && mixed == plain && same_grads(g_mix, g_plain);
  }
  const bool ok = beta_zero_m && beta_zero_mm && input_only && lambda_one;
  std::string detail = std::string("beta=0 combined vs inter-only ") + (beta_zero_m && beta_zero_mm ? "equal" : "DIFFER") +
                       ", input-only manifold vs mixup " + (input_only ? "equal" : "DIFFER") +
                       ", lambda=1 identity vs plain CE " + (lambda_one ? "equal" : "DIFFER");
  report(2, "reduction identities (bitwise)", ok, detail);
}

void supplementation_criterion() {
  // 12 classes of 6 samples.
  const std::size_t classes = 12, per = 6;
  Tensor x = Tensor::matrix(classes * per, 1);
  std::vector<std::size_t> labels(classes * per);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    labels[i] = i % classes;
    x(i, 0) = static_cast<double>(i);
  }
  const Dataset data(x, labels, classes);
  RngStream rng(2024);
  bool ok = true;
  std::size_t violations = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 1 + rng.index(40);
    const auto batch = sample_batch(data, rng, n);
    const auto full = supplement(batch, data, rng);
    std::map<std::size_t, std::size_t> counts;
    for (auto i : full) ++counts[data.label(i)];
    bool good = full.size() >= n && full.size() <= 2 * n &&
                std::equal(batch.begin(), batch.end(), full.begin());
    for (const auto& [c, k] : counts) good = good && k >= 2;
    if (!good) ++violations;
  }
  ok = violations == 0;
  // One sample of every class: exactly doubles.
  std::vector<std::size_t> singletons(classes);
  for (std::size_t c = 0; c < classes; ++c) singletons[c] = c;
  const auto doubled = supplement(singletons, data, rng);
  const bool doubles = doubled.size() == 2 * classes;
  report(3, "supplementation contract", ok && doubles,
         std::to_string(violations) + " violations in 1000 random batches; all-singleton batch of " +
             std::to_string(classes) + " -> " + std::to_string(doubled.size()));
}

void convex_synthesis_criterion() {
  RngStream rng(31);
  double worst_sum = 0.0, worst_excess = 0.0;
  bool negative = false;
  for (int t = 0; t < 10000; ++t) {
    const std::size_t m = 2 + rng.index(9), f = 1 + rng.index(6);
    Tensor feats = Tensor::matrix(m, f);
    for (auto& v : feats.values()) v = 10.0 * rng.normal();
    const auto w = interpolation_weights(rng, m);
    double sum = 0.0;
    for (double v : w) {
      sum += v;
      negative = negative || v < 0.0;
    }
    worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
    const Tensor s = synthesize_class_feature(feats, w);
    for (std::size_t k = 0; k < f; ++k) {
      double lo = feats(0, k), hi = feats(0, k);
      for (std::size_t j = 1; j < m; ++j) {
        lo = std::min(lo, feats(j, k));
        hi = std::max(hi, feats(j, k));
      }
      worst_excess = std::max({worst_excess, lo - s[k], s[k] - hi});
    }
  }
  const bool ok = !negative && worst_sum <= 1e-12 && worst_excess <= 0.0;
  report(4, "convex synthesis", ok,
         fmt("10000 draws, max |sum(w)-1| %.2e (limit 1e-12), max bound excess %.2e (limit 0)",
             worst_sum, worst_excess) +
             (negative ? ", negative weight seen" : ""));
}

void pairing_criterion() {
  bool ok = true;
  std::string detail;
  const std::pair<std::size_t, std::size_t> cases[] = {{2, 4}, {16, 32}, {128, 128}};
  RngStream root(99);
  for (std::size_t i = 0; i < 3; ++i) {
    PairingModel m;
    m.classes = cases[i].first;
    m.batch_size = cases[i].second;
    m.sampling = PairingSampling::equal_counts;
    m.trials = 100000;
    RngStream rng = root.derive(i);
    const Estimate e = intra_pair_fraction_montecarlo(m, rng);
    const double exact = 1.0 / static_cast<double>(m.classes);
    const double z = std::abs(e.estimate - exact) / e.std_error;
    ok = ok && z <= 3.0 && std::abs(intra_pair_fraction_analytic(m) - exact) < 1e-15;
    detail += "(" + std::to_string(m.classes) + "," + std::to_string(m.batch_size) + ") " +
              fmt("%.5f vs %.5f, %.2f SE; ", e.estimate, exact, z);
  }
  PairingModel big;
  big.classes = 128;
  big.batch_size = 128;
  const double p = intra_pair_fraction_analytic(big);
  ok = ok && p < 0.02;
  report(5, "pairing probability", ok, detail + fmt("(128,128) closed form %.4f%% < 2%%", 100.0 * p));
}

void variance_criterion() {
  bool ok = true;
  std::string detail;
  const std::vector<std::size_t> ps{1, 2, 3, 5};
  for (std::uint64_t seed : {1, 2, 3}) {
    RngStream root(seed);
    RngStream fr = root.derive(1), mr = root.derive(2), mc = root.derive(3);
    Tensor feats = Tensor::matrix(8, 6);
    for (auto& v : feats.values()) v = 2.0 * fr.normal();
    const MlpModel model = MlpModel::make(6, std::vector<std::size_t>{}, 3, mr);
    const auto pts = grad_term_variance(feats, model.classifier(), 0, ps, 10000, mc);
    double worst_scaling = 0.0;
    bool monotone = true;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (i > 0) monotone = monotone && pts[i].variance <= pts[i - 1].variance;
      const double expected = pts[0].variance / static_cast<double>(pts[i].p);
      worst_scaling = std::max(worst_scaling, std::abs(pts[i].variance - expected) / expected);
    }
    ok = ok && monotone && pts.back().variance < pts.front().variance && worst_scaling <= 0.2;
    detail += "seed " + std::to_string(seed) + (monotone ? " monotone" : " NOT monotone") +
              fmt(", max 1/P deviation %.1f%%; ", 100.0 * worst_scaling);
  }
  report(6, "P-variance decay", ok, detail);
}

void compare_criteria() {
  const DataBundle data = load_bundle(blobs_preset_source());
  const CompareResult r = compare_variants(data, blobs_preset_settings(), CompareOptions{});
  const auto& base = r.median(Variant::WO_RA_ER);
  const auto& ra = r.median(Variant::W_RA);
  const double base_w = base.within_class_variance.value_or(NAN);
  const double ra_w = ra.within_class_variance.value_or(NAN);
  report(7, "toy cohesion effect", ra_w < base_w,
         fmt("median within-class variance W_RA %.4f vs WO_RA_ER %.4f (need strictly lower)", ra_w, base_w));

  const double combo = r.median(Variant::W_RA_ER_M).test_acc;
  const double best_single = std::max(ra.test_acc, r.median(Variant::W_ER_M).test_acc);
  const bool ok = combo >= base.test_acc && combo >= best_single - 0.005;
  report(8, "toy synergy ordering", ok,
         fmt("median test acc W_RA_ER_M %.4f, WO_RA_ER %.4f, max(W_RA, W_ER_M) %.4f", combo,
             base.test_acc, best_single) + " (need >= baseline and >= max - 0.5pp)");
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int cli(const std::string& args) {
  const std::string cmd = std::string(SYNERMIX_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void reproducibility_criterion() {
  const fs::path root = fs::temp_directory_path() / "synermix_acceptance";
  fs::remove_all(root);
  fs::create_directories(root);
  {
    std::ofstream cfg(root / "preset.ini");
    cfg << "[data]\nformat = synthetic\nsigma = 1.2\n"
           "[mix]\nvariant = W_RA_ER_MM\nbeta = 0.1\neligible_layers = 0,1\n"
           "[optim]\nepochs = 10\n[train]\nnoise_sigma = 0.1\n[run]\nseed = 2\nsweep_grid = 0.05,0.2\n";
  }
  bool ok = cli("train --config " + (root / "preset.ini").string() + " --out " + (root / "t1").string()) == 0 &&
            cli("train --config " + (root / "t1" / "config.ini").string() + " --out " + (root / "t2").string()) == 0 &&
            cli("sweep --config " + (root / "preset.ini").string() + " --out " + (root / "s1").string()) == 0 &&
            cli("sweep --config " + (root / "s1" / "config.ini").string() + " --out " + (root / "s2").string()) == 0;
  std::size_t compared = 0, identical = 0;
  if (ok) {
    for (const auto& [a, b] : {std::pair{root / "t1", root / "t2"}, std::pair{root / "s1", root / "s2"}}) {
      for (const auto& entry : fs::recursive_directory_iterator(a)) {
        if (entry.path().extension() != ".jsonl") continue;
        const fs::path twin = b / fs::relative(entry.path(), a);
        ++compared;
        const std::string left = slurp(entry.path());
        if (!left.empty() && left == slurp(twin)) ++identical;
      }
    }
  }
  ok = ok && compared > 0 && identical == compared;
  report(9, "reproducibility from snapshot", ok,
         std::to_string(identical) + "/" + std::to_string(compared) + " record files byte-identical");
  fs::remove_all(root);
}

}  // namespace

int main() {
  const std::pair<int, void (*)()> criteria[] = {
      {1, gradient_audit_criterion}, {2, reduction_criterion},      {3, supplementation_criterion},
      {4, convex_synthesis_criterion}, {5, pairing_criterion},     {6, variance_criterion},
      {7, compare_criteria},         {9, reproducibility_criterion},
  };
  for (const auto& [id, fn] : criteria) {
    try {
      fn();
    } catch (const std::exception& e) {
      report(id, "criterion", false, std::string("threw: ") + e.what());
    }
  }
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
