#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "synermix/mlp.hpp"
#include "synermix/rng.hpp"
#include "synermix/tensor.hpp"

namespace synermix {

/// Training objectives compared by the laboratory.
///   WO_RA_ER   plain CE on augmented rows
///   W_ER_M     MixUp on augmented rows
///   W_ER_MM    Manifold MixUp on augmented rows
///   W_RA       beta * intra(originals) + (1 - beta) * CE(augmented)
///   W_RA_AUG   beta * intra(augmented) + (1 - beta) * CE(augmented)
///   W_RA_ER_M  beta * intra(originals) + (1 - beta) * MixUp
///   W_RA_ER_MM beta * intra(originals) + (1 - beta) * Manifold MixUp
enum class Variant { WO_RA_ER, W_ER_M, W_ER_MM, W_RA, W_RA_AUG, W_RA_ER_M, W_RA_ER_MM };

inline constexpr Variant kAllVariants[] = {Variant::WO_RA_ER, Variant::W_ER_M,
                                           Variant::W_ER_MM,  Variant::W_RA,
                                           Variant::W_RA_AUG, Variant::W_RA_ER_M,
                                           Variant::W_RA_ER_MM};

std::string_view variant_name(Variant v);
/// Accepts the enum spelling (`W_RA_ER_M`) or the dashed form (`w-RA&ER(M)`).
std::optional<Variant> parse_variant(std::string_view name);

bool uses_intra(Variant v);
bool uses_inter(Variant v);
bool uses_manifold(Variant v);

/// Activation position 0 stands for the network input.
inline constexpr std::size_t kInputLayer = 0;

struct MixSpec {
  Variant variant = Variant::WO_RA_ER;
  double beta = 0.0;
  double alpha = 1.0;
  std::size_t p_interp = 1;
  std::vector<std::size_t> eligible_layers{kInputLayer};

  /// Throws ConfigError naming the offending field.
  void validate() const;
  /// Weight actually applied to the intra term (0 for variants without it).
  double effective_beta() const;
};

/// omega_j = r_j / sum_i r_i with r_j ~ U(0,1).
std::vector<double> interpolation_weights(RngStream& rng, std::size_t n);
/// Same normalisation applied to caller-supplied raw draws.
std::vector<double> normalize_weights(std::span<const double> raw);

/// sum_j omega_j * features[j]
Tensor synthesize_class_feature(const Tensor& features, std::span<const double> weights);

/// Mean CE of the classifier over synthesized features. Each map entry holds
/// the [P x f] synthesized rows for that class; the mean runs over all C*P rows.
double intra_loss(const std::map<std::size_t, Tensor>& per_class_synth,
                  const DenseLayer& classifier);

/// lambda * a + (1 - lambda) * b
Tensor mix(const Tensor& a, const Tensor& b, double lambda);

struct MixedTarget {
  std::size_t y_a = 0;
  std::size_t y_b = 0;
  double lambda = 1.0;

  std::vector<double> soft(std::size_t classes) const;
};

/// Pairing of a batch with its shuffled copy: row i mixes with row
/// partner[i] using lambda[i], at activation `position`.
struct MixPairing {
  std::vector<std::size_t> partner;
  std::vector<double> lambda;
  std::size_t position = kInputLayer;
};

/// Draws one mixing position uniformly from `eligible` (no draw when there
/// is only one), then the shuffle, then one Beta(alpha, alpha) per pair.
MixPairing draw_pairing(RngStream& rng, std::size_t n, double alpha,
                        std::span<const std::size_t> eligible);

/// Gradient sink for the branch losses below. When `grads` is non-null the
/// branch adds weight * d(loss)/d(params) into it.
struct GradSink {
  Gradients* grads = nullptr;
  double weight = 1.0;
};

/// Mixed-target CE with inputs mixed before the first layer.
double inter_loss_mixup(const MlpModel& model, const Tensor& batch,
                        std::span<const std::size_t> labels, const MixPairing& pairing,
                        GradSink sink = {});
double inter_loss_mixup(const MlpModel& model, const Tensor& batch,
                        std::span<const std::size_t> labels, RngStream& rng, double alpha,
                        GradSink sink = {});

/// Mixed-target CE with activations mixed at pairing.position.
double inter_loss_manifold(const MlpModel& model, const Tensor& batch,
                           std::span<const std::size_t> labels, const MixPairing& pairing,
                           GradSink sink = {});
double inter_loss_manifold(const MlpModel& model, const Tensor& batch,
                           std::span<const std::size_t> labels, RngStream& rng, double alpha,
                           std::span<const std::size_t> eligible, GradSink sink = {});

/// Plain mean CE of the model on `batch`.
double plain_loss(const MlpModel& model, const Tensor& batch,
                  std::span<const std::size_t> labels, GradSink sink = {});

/// Draws for one evaluation of the intra branch: per class (ascending), P
/// weight vectors over that class's rows in batch order.
struct IntraDraws {
  std::map<std::size_t, std::vector<std::size_t>> members;
  std::map<std::size_t, std::vector<std::vector<double>>> weights;
};

IntraDraws draw_intra(RngStream& rng, std::span<const std::size_t> labels, std::size_t p_interp);

/// Intra-class mixup branch: features of `batch` are synthesized per class
/// and scored by the classifier. Throws InvariantError if a class has fewer
/// than two rows.
double intra_branch(const MlpModel& model, const Tensor& batch,
                    std::span<const std::size_t> labels, const IntraDraws& draws,
                    GradSink sink = {});
double intra_branch(const MlpModel& model, const Tensor& batch,
                    std::span<const std::size_t> labels, std::size_t p_interp, RngStream& rng,
                    GradSink sink = {});

/// beta * l_intra + (1 - beta) * l_other
double total_loss(double beta, double l_intra, double l_other);

}  // namespace synermix
