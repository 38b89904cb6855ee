#include "synermix/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "synermix/errors.hpp"
#include "synermix/loss.hpp"
#include "synermix/mixup.hpp"

namespace synermix {
namespace {

// Welford accumulator.
struct Running {
  std::size_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++n;
    const double d = x - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (x - mean);
  }
  double variance() const { return n > 1 ? m2 / static_cast<double>(n - 1) : 0.0; }
};

}  // namespace

void PairingModel::validate() const {
  if (classes == 0) throw ArgumentError("pairing model needs K >= 1");
  if (batch_size < 2) throw ArgumentError("pairing model needs N >= 2");
  if (sampling == PairingSampling::equal_counts && batch_size % classes != 0) {
    throw ArgumentError("equal_counts needs K to divide N");
  }
}

double intra_pair_fraction_analytic(const PairingModel& model) {
  model.validate();
  const double k = static_cast<double>(model.classes);
  const double n = static_cast<double>(model.batch_size);
  // P(y_i == y_pi(i)) = sum_j P(pi(i) = j) P(y_i == y_j) with P(pi(i) = j) = 1/N.
  //
  // equal_counts: for each i, exactly N/K of the N candidates j share its
  // class (j = i included), so the fraction is (N/K)/N = sum_c n_c^2/N^2 = 1/K.
  //
  // iid_uniform: j = i matches with certainty, any other j with
  // probability 1/K, giving 1/N + (1 - 1/N)/K = 1/K + (1 - 1/K)/N.
  if (model.sampling == PairingSampling::equal_counts) return 1.0 / k;
  return 1.0 / k + (1.0 - 1.0 / k) / n;
}

Estimate intra_pair_fraction_montecarlo(const PairingModel& model, RngStream& rng) {
  model.validate();
  if (model.trials < 1000) throw ArgumentError("Monte Carlo needs at least 1000 trials");
  const std::size_t n = model.batch_size;
  std::vector<std::size_t> labels(n);
  if (model.sampling == PairingSampling::equal_counts) {
    for (std::size_t i = 0; i < n; ++i) labels[i] = i % model.classes;
  }
  Running acc;
  for (std::size_t t = 0; t < model.trials; ++t) {
    if (model.sampling == PairingSampling::iid_uniform) {
      for (auto& y : labels) y = rng.index(model.classes);
    }
    const auto perm = rng.permutation(n);
    std::size_t same = 0;
    for (std::size_t i = 0; i < n; ++i) same += labels[i] == labels[perm[i]];
    acc.add(static_cast<double>(same) / static_cast<double>(n));
  }
  return {acc.mean, std::sqrt(acc.variance() / static_cast<double>(acc.n))};
}

std::vector<VariancePoint> grad_term_variance(const Tensor& features, const DenseLayer& classifier,
                                              std::size_t target_class,
                                              std::span<const std::size_t> p_values,
                                              std::size_t trials, RngStream& rng) {
  const std::size_t m = features.rows();
  const std::size_t f = features.cols();
  if (m < 2) throw ArgumentError("gradient-term variance needs at least two features");
  if (f != classifier.inputs()) throw DimensionError("feature width does not match classifier");
  if (target_class >= classifier.outputs()) throw ArgumentError("target class out of range");
  if (p_values.empty()) throw ArgumentError("no P values given");
  if (!std::is_sorted(p_values.begin(), p_values.end()) || p_values.front() == 0) {
    throw ArgumentError("P values must be positive and ascending");
  }
  if (trials < 2) throw ArgumentError("variance needs at least two trials");

  const std::size_t classes = classifier.outputs();
  std::vector<VariancePoint> out;
  std::vector<double> term(classes * f);
  Tensor one = Tensor::matrix(1, f);
  for (const std::size_t p_count : p_values) {
    std::vector<Running> coords(classes * f);
    for (std::size_t t = 0; t < trials; ++t) {
      std::fill(term.begin(), term.end(), 0.0);
      for (std::size_t p = 0; p < p_count; ++p) {
        const Tensor fp = synthesize_class_feature(features, interpolation_weights(rng, m));
        std::copy(fp.values().begin(), fp.values().end(), one.row(0).begin());
        const auto probs = softmax(affine(classifier, one).row(0));
        for (std::size_t i = 0; i < classes; ++i) {
          const double coeff = probs[i] - (i == target_class ? 1.0 : 0.0);
          for (std::size_t k = 0; k < f; ++k) term[i * f + k] += coeff * fp[k];
        }
      }
      for (std::size_t j = 0; j < term.size(); ++j) {
        coords[j].add(term[j] / static_cast<double>(p_count));
      }
    }
    double mean_var = 0.0;
    for (const auto& c : coords) mean_var += c.variance();
    out.push_back({p_count, mean_var / static_cast<double>(coords.size())});
  }
  return out;
}

CohesionReport cohesion_report(const Tensor& features, std::span<const std::size_t> labels) {
  const std::size_t n = features.rows();
  const std::size_t f = features.cols();
  if (labels.size() != n) throw DimensionError("one label per feature row required");
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < n; ++i) groups[labels[i]].push_back(i);
  if (groups.size() < 2) throw ArgumentError("cohesion report needs at least two classes");
  for (const auto& [c, rows] : groups) {
    if (rows.size() < 2) {
      throw ArgumentError("class " + std::to_string(c) + " has fewer than two samples");
    }
  }

  std::vector<double> grand(f, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < f; ++k) grand[k] += features(i, k);
  }
  for (auto& g : grand) g /= static_cast<double>(n);

  CohesionReport rep;
  rep.centroids = Tensor::matrix(groups.size(), f);
  double within_trace = 0.0;
  double between_trace = 0.0;
  double per_class_sum = 0.0;
  std::size_t ci = 0;
  for (const auto& [c, rows] : groups) {
    rep.classes.push_back(c);
    auto mu = rep.centroids.row(ci++);
    for (auto i : rows) {
      for (std::size_t k = 0; k < f; ++k) mu[k] += features(i, k);
    }
    for (auto& v : mu) v /= static_cast<double>(rows.size());
    double class_ss = 0.0;
    for (auto i : rows) {
      for (std::size_t k = 0; k < f; ++k) {
        const double d = features(i, k) - mu[k];
        class_ss += d * d;
      }
    }
    within_trace += class_ss;
    per_class_sum += class_ss / static_cast<double>(rows.size());
    for (std::size_t k = 0; k < f; ++k) {
      const double d = mu[k] - grand[k];
      between_trace += static_cast<double>(rows.size()) * d * d;
    }
  }
  if (!(within_trace > 0.0)) {
    throw ArgumentError("within-class scatter is zero; separability ratio undefined");
  }
  rep.within_class_variance = per_class_sum / static_cast<double>(groups.size());
  rep.between_within_ratio = between_trace / within_trace;
  return rep;
}

}  // namespace synermix
