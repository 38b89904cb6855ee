#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "synermix/mlp.hpp"
#include "synermix/rng.hpp"
#include "synermix/tensor.hpp"

namespace synermix {

/// How batch labels are generated before the shuffle.
///   equal_counts  every class appears exactly N/K times
///   iid_uniform   each label drawn independently and uniformly from K classes
enum class PairingSampling { equal_counts, iid_uniform };

struct PairingModel {
  std::size_t classes = 1;
  std::size_t batch_size = 2;
  PairingSampling sampling = PairingSampling::equal_counts;
  std::size_t trials = 100000;

  void validate() const;
};

/// Expected fraction of pairs (i, pi(i)) that share a class under a uniform
/// permutation pi, fixed points included.
double intra_pair_fraction_analytic(const PairingModel& model);

struct Estimate {
  double estimate = 0.0;
  double std_error = 0.0;
};

Estimate intra_pair_fraction_montecarlo(const PairingModel& model, RngStream& rng);

struct VariancePoint {
  std::size_t p = 1;
  double variance = 0.0;  // mean over coordinates of the per-coordinate variance
};

/// Monte Carlo variance of (1/P) sum_p (softmax(z_p) - onehot(c)) (x) f_p, where
/// f_p is a fresh random convex combination of the rows of `features` and
/// z_p the classifier logits for it. One entry per P value.
std::vector<VariancePoint> grad_term_variance(const Tensor& features, const DenseLayer& classifier,
                                              std::size_t target_class,
                                              std::span<const std::size_t> p_values,
                                              std::size_t trials, RngStream& rng);

struct CohesionReport {
  /// Mean over classes of the mean squared distance to the class centroid.
  double within_class_variance = 0.0;
  /// trace(between-class scatter) / trace(within-class scatter).
  double between_within_ratio = 0.0;
  std::vector<std::size_t> classes;
  Tensor centroids;  // one row per entry of `classes`
};

/// Throws ArgumentError for fewer than two classes, a class with fewer than
/// two samples, or zero within-class scatter.
CohesionReport cohesion_report(const Tensor& features, std::span<const std::size_t> labels);

}  // namespace synermix
