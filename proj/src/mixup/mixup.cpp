#include "synermix/mixup.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "synermix/errors.hpp"
#include "synermix/loss.hpp"

namespace synermix {
namespace {

struct VariantNames {
  Variant variant;
  std::string_view id;
  std::string_view label;
};

constexpr VariantNames kNames[] = {
    {Variant::WO_RA_ER, "WO_RA_ER", "wo-RA&ER"},
    {Variant::W_ER_M, "W_ER_M", "w-ER(M)"},
    {Variant::W_ER_MM, "W_ER_MM", "w-ER(MM)"},
    {Variant::W_RA, "W_RA", "w-RA"},
    {Variant::W_RA_AUG, "W_RA_AUG", "w-RA(aug)"},
    {Variant::W_RA_ER_M, "W_RA_ER_M", "w-RA&ER(M)"},
    {Variant::W_RA_ER_MM, "W_RA_ER_MM", "w-RA&ER(MM)"},
};

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::toupper(static_cast<unsigned char>(x)) ==
                  std::toupper(static_cast<unsigned char>(y));
         });
}

void check_labels(const Tensor& batch, std::span<const std::size_t> labels) {
  if (labels.empty()) throw ArgumentError("empty batch");
  if (batch.rows() != labels.size()) {
    throw DimensionError("batch has " + std::to_string(batch.rows()) + " rows but " +
                         std::to_string(labels.size()) + " labels");
  }
}

void check_pairing(const MixPairing& pairing, std::size_t n) {
  if (pairing.partner.size() != n || pairing.lambda.size() != n) {
    throw ArgumentError("pairing does not cover the batch");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (pairing.partner[i] >= n) throw ArgumentError("pairing partner out of range");
    if (!(pairing.lambda[i] >= 0.0 && pairing.lambda[i] <= 1.0)) {
      throw ArgumentError("mixing coefficient outside [0, 1]");
    }
  }
}

Tensor mix_rows(const Tensor& h, const MixPairing& pairing) {
  Tensor out = Tensor::matrix(h.rows(), h.cols());
  for (std::size_t i = 0; i < h.rows(); ++i) {
    const double lam = pairing.lambda[i];
    auto a = h.row(i);
    auto b = h.row(pairing.partner[i]);
    auto o = out.row(i);
    for (std::size_t k = 0; k < o.size(); ++k) o[k] = lam * a[k] + (1.0 - lam) * b[k];
  }
  return out;
}

// Two-term form of the soft-target CE: lambda*CE(p, y_a) + (1-lambda)*CE(p, y_b).
double mixed_target_loss(const Tensor& logits, std::span<const std::size_t> labels,
                         const MixPairing& pairing, Tensor* grad_logits, double scale) {
  const std::size_t n = logits.rows();
  const std::size_t classes = logits.cols();
  if (grad_logits) *grad_logits = Tensor::matrix(n, classes);
  const double inv_n = 1.0 / static_cast<double>(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto p = softmax(logits.row(i));
    const MixedTarget t{labels[i], labels[pairing.partner[i]], pairing.lambda[i]};
    total += t.lambda * cross_entropy(p, t.y_a) + (1.0 - t.lambda) * cross_entropy(p, t.y_b);
    if (grad_logits) {
      auto g = grad_logits->row(i);
      for (std::size_t k = 0; k < classes; ++k) {
        const double target = (k == t.y_a ? t.lambda : 0.0) + (k == t.y_b ? 1.0 - t.lambda : 0.0);
        g[k] = scale * inv_n * (p[k] - target);
      }
    }
  }
  return total * inv_n;
}

// Stacks the per-class synthesized rows in class order and scores them.
double score_synthesized(const std::map<std::size_t, Tensor>& per_class,
                         const DenseLayer& classifier, Tensor* stacked_out,
                         Tensor* grad_logits, double scale) {
  if (per_class.empty()) throw ArgumentError("intra loss needs at least one class");
  const std::size_t f = classifier.inputs();
  std::size_t rows = 0;
  for (const auto& [c, t] : per_class) {
    if (c >= classifier.outputs()) throw ArgumentError("class index exceeds classifier width");
    const std::size_t r = t.rank() == 1 ? 1 : t.rows();
    if (t.size() != r * f) throw DimensionError("synthesized feature width mismatch");
    rows += r;
  }
  Tensor stacked = Tensor::matrix(rows, f);
  std::vector<std::size_t> labels;
  labels.reserve(rows);
  std::size_t at = 0;
  for (const auto& [c, t] : per_class) {
    const std::size_t r = t.size() / f;
    std::copy(t.values().begin(), t.values().end(), stacked.row(at).begin());
    labels.insert(labels.end(), r, c);
    at += r;
  }
  const Tensor logits = affine(classifier, stacked);
  const double loss = mean_cross_entropy(logits, labels, grad_logits, scale);
  if (stacked_out) *stacked_out = std::move(stacked);
  return loss;
}

}  // namespace

std::string_view variant_name(Variant v) {
  for (const auto& n : kNames) {
    if (n.variant == v) return n.id;
  }
  return "?";
}

std::optional<Variant> parse_variant(std::string_view name) {
  for (const auto& n : kNames) {
    if (iequals(name, n.id) || name == n.label) return n.variant;
  }
  return std::nullopt;
}

bool uses_intra(Variant v) {
  return v == Variant::W_RA || v == Variant::W_RA_AUG || v == Variant::W_RA_ER_M ||
         v == Variant::W_RA_ER_MM;
}

bool uses_inter(Variant v) {
  return v == Variant::W_ER_M || v == Variant::W_ER_MM || v == Variant::W_RA_ER_M ||
         v == Variant::W_RA_ER_MM;
}

bool uses_manifold(Variant v) { return v == Variant::W_ER_MM || v == Variant::W_RA_ER_MM; }

void MixSpec::validate() const {
  if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("mix.beta", "must lie in [0, 1]");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ConfigError("mix.alpha", "must be positive");
  if (p_interp < 1) throw ConfigError("mix.p_interp", "must be at least 1");
  if (eligible_layers.empty()) {
    throw ConfigError("mix.eligible_layers", "eligible layer set is empty");
  }
}

double MixSpec::effective_beta() const { return uses_intra(variant) ? beta : 0.0; }

std::vector<double> normalize_weights(std::span<const double> raw) {
  if (raw.empty()) throw ArgumentError("interpolation weights need n >= 1");
  double sum = 0.0;
  for (double r : raw) {
    if (!(r >= 0.0)) throw ArgumentError("raw interpolation draws must be nonnegative");
    sum += r;
  }
  if (!(sum > 0.0)) throw ArgumentError("raw interpolation draws sum to zero");
  std::vector<double> w(raw.begin(), raw.end());
  for (auto& v : w) v /= sum;
  return w;
}

std::vector<double> interpolation_weights(RngStream& rng, std::size_t n) {
  if (n == 0) throw ArgumentError("interpolation weights need n >= 1");
  std::vector<double> raw(n);
  for (auto& r : raw) r = rng.uniform();
  return normalize_weights(raw);
}

Tensor synthesize_class_feature(const Tensor& features, std::span<const double> weights) {
  const std::size_t m = features.rows();
  if (weights.size() != m) {
    throw ArgumentError("synthesis got " + std::to_string(m) + " features but " +
                        std::to_string(weights.size()) + " weights");
  }
  if (m < 2) throw ArgumentError("synthesis needs at least two same-class features");
  Tensor out({features.cols()}, 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    auto row = features.row(j);
    for (std::size_t k = 0; k < row.size(); ++k) out[k] += weights[j] * row[k];
  }
  return out;
}

double intra_loss(const std::map<std::size_t, Tensor>& per_class_synth,
                  const DenseLayer& classifier) {
  return score_synthesized(per_class_synth, classifier, nullptr, nullptr, 1.0);
}

Tensor mix(const Tensor& a, const Tensor& b, double lambda) {
  require_same_shape(a, b, "mix");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ArgumentError("mix: lambda outside [0, 1]");
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = lambda * a[i] + (1.0 - lambda) * b[i];
  return out;
}

std::vector<double> MixedTarget::soft(std::size_t classes) const {
  if (y_a >= classes || y_b >= classes) throw ArgumentError("label exceeds class count");
  std::vector<double> t(classes, 0.0);
  t[y_a] += lambda;
  t[y_b] += 1.0 - lambda;
  return t;
}

MixPairing draw_pairing(RngStream& rng, std::size_t n, double alpha,
                        std::span<const std::size_t> eligible) {
  if (n == 0) throw ArgumentError("cannot pair an empty batch");
  if (eligible.empty()) throw ConfigError("mix.eligible_layers", "eligible layer set is empty");
  MixPairing p;
  p.position = eligible[rng.index(eligible.size())];
  p.partner = rng.permutation(n);
  p.lambda.resize(n);
  for (auto& l : p.lambda) l = rng.beta(alpha, alpha);
  return p;
}

double inter_loss_mixup(const MlpModel& model, const Tensor& batch,
                        std::span<const std::size_t> labels, const MixPairing& pairing,
                        GradSink sink) {
  check_labels(batch, labels);
  check_pairing(pairing, labels.size());
  if (pairing.position != kInputLayer) throw ArgumentError("MixUp mixes at the input only");
  const Tensor mixed = mix_rows(batch, pairing);
  const ForwardCache cache = forward(model, mixed);
  Tensor grad_logits;
  const double loss = mixed_target_loss(cache.logits, labels, pairing,
                                        sink.grads ? &grad_logits : nullptr, sink.weight);
  if (sink.grads) backward(model, cache, grad_logits, *sink.grads);
  return loss;
}

double inter_loss_mixup(const MlpModel& model, const Tensor& batch,
                        std::span<const std::size_t> labels, RngStream& rng, double alpha,
                        GradSink sink) {
  check_labels(batch, labels);
  const std::size_t input[] = {kInputLayer};
  return inter_loss_mixup(model, batch, labels, draw_pairing(rng, labels.size(), alpha, input),
                          sink);
}

double inter_loss_manifold(const MlpModel& model, const Tensor& batch,
                           std::span<const std::size_t> labels, const MixPairing& pairing,
                           GradSink sink) {
  check_labels(batch, labels);
  check_pairing(pairing, labels.size());
  const std::size_t k = pairing.position;
  if (k >= model.depth()) throw ArgumentError("mixing position beyond the feature layer");

  const ForwardCache head = forward_until(model, batch, k);
  const Tensor mixed = mix_rows(head.at(k), pairing);
  const ForwardCache tail = forward_from(model, k, mixed);
  Tensor grad_logits;
  const double loss = mixed_target_loss(tail.logits, labels, pairing,
                                        sink.grads ? &grad_logits : nullptr, sink.weight);
  if (sink.grads) {
    const Tensor grad_mixed = backward(model, tail, grad_logits, *sink.grads);
    if (k > kInputLayer) {
      Tensor grad_h = Tensor::matrix(grad_mixed.rows(), grad_mixed.cols());
      for (std::size_t i = 0; i < grad_mixed.rows(); ++i) {
        const double lam = pairing.lambda[i];
        auto g = grad_mixed.row(i);
        auto ga = grad_h.row(i);
        auto gb = grad_h.row(pairing.partner[i]);
        for (std::size_t c = 0; c < g.size(); ++c) {
          ga[c] += lam * g[c];
          gb[c] += (1.0 - lam) * g[c];
        }
      }
      backward_from(model, head, k, std::move(grad_h), *sink.grads);
    }
  }
  return loss;
}

double inter_loss_manifold(const MlpModel& model, const Tensor& batch,
                           std::span<const std::size_t> labels, RngStream& rng, double alpha,
                           std::span<const std::size_t> eligible, GradSink sink) {
  check_labels(batch, labels);
  return inter_loss_manifold(model, batch, labels,
                             draw_pairing(rng, labels.size(), alpha, eligible), sink);
}

double plain_loss(const MlpModel& model, const Tensor& batch,
                  std::span<const std::size_t> labels, GradSink sink) {
  check_labels(batch, labels);
  const ForwardCache cache = forward(model, batch);
  Tensor grad_logits;
  const double loss =
      mean_cross_entropy(cache.logits, labels, sink.grads ? &grad_logits : nullptr, sink.weight);
  if (sink.grads) backward(model, cache, grad_logits, *sink.grads);
  return loss;
}

IntraDraws draw_intra(RngStream& rng, std::span<const std::size_t> labels,
                      std::size_t p_interp) {
  if (p_interp < 1) throw ArgumentError("p_interp must be at least 1");
  IntraDraws d;
  for (std::size_t i = 0; i < labels.size(); ++i) d.members[labels[i]].push_back(i);
  for (const auto& [c, rows] : d.members) {
    auto& ws = d.weights[c];
    for (std::size_t p = 0; p < p_interp; ++p) ws.push_back(interpolation_weights(rng, rows.size()));
  }
  return d;
}

double intra_branch(const MlpModel& model, const Tensor& batch,
                    std::span<const std::size_t> labels, const IntraDraws& draws,
                    GradSink sink) {
  check_labels(batch, labels);
  if (draws.members.empty()) throw ArgumentError("intra branch needs at least one class");
  const std::size_t fpos = model.feature_position();
  const ForwardCache cache = forward_until(model, batch, fpos);
  const Tensor& feats = cache.at(fpos);

  std::map<std::size_t, Tensor> synth;
  for (const auto& [c, rows] : draws.members) {
    if (rows.size() < 2) {
      throw InvariantError("class " + std::to_string(c) + " reached synthesis with " +
                           std::to_string(rows.size()) + " sample(s); batch was not supplemented");
    }
    const auto& ws = draws.weights.at(c);
    const Tensor members = gather_rows(feats, rows);
    Tensor block = Tensor::matrix(ws.size(), feats.cols());
    for (std::size_t p = 0; p < ws.size(); ++p) {
      const Tensor f = synthesize_class_feature(members, ws[p]);
      std::copy(f.values().begin(), f.values().end(), block.row(p).begin());
    }
    synth.emplace(c, std::move(block));
  }

  Tensor stacked;
  Tensor grad_logits;
  const double loss = score_synthesized(synth, model.classifier(), &stacked,
                                        sink.grads ? &grad_logits : nullptr, sink.weight);
  if (!sink.grads) return loss;

  Gradients& g = *sink.grads;
  const std::size_t last = model.depth() - 1;
  const DenseLayer& cls = model.classifier();
  const std::size_t f = cls.inputs();
  Tensor grad_feats = Tensor::matrix(feats.rows(), f);
  std::size_t row = 0;
  for (const auto& [c, rows] : draws.members) {
    for (const auto& w : draws.weights.at(c)) {
      auto gl = grad_logits.row(row);
      auto s = stacked.row(row);
      std::vector<double> grad_s(f, 0.0);
      for (std::size_t o = 0; o < cls.outputs(); ++o) {
        g.bias[last][o] += gl[o];
        auto wr = cls.weight.row(o);
        double* gw = &g.weight[last](o, 0);
        for (std::size_t k = 0; k < f; ++k) {
          gw[k] += gl[o] * s[k];
          grad_s[k] += gl[o] * wr[k];
        }
      }
      for (std::size_t j = 0; j < rows.size(); ++j) {
        auto gf = grad_feats.row(rows[j]);
        for (std::size_t k = 0; k < f; ++k) gf[k] += w[j] * grad_s[k];
      }
      ++row;
    }
  }
  backward_from(model, cache, fpos, std::move(grad_feats), g);
  return loss;
}

double intra_branch(const MlpModel& model, const Tensor& batch,
                    std::span<const std::size_t> labels, std::size_t p_interp, RngStream& rng,
                    GradSink sink) {
  return intra_branch(model, batch, labels, draw_intra(rng, labels, p_interp), sink);
}

double total_loss(double beta, double l_intra, double l_other) {
  if (!(beta >= 0.0 && beta <= 1.0)) throw ArgumentError("beta outside [0, 1]");
  return beta * l_intra + (1.0 - beta) * l_other;
}

}  // namespace synermix
