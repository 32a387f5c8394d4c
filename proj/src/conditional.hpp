#pragma once

// Unnormalized full conditional of one token, shared by the sampler, the
// soft-count pass and CVB0.

#include <cstddef>
#include <algorithm>
#include <limits>
#include <span>

#include "cgsp/corpus.hpp"
#include "cgsp/model.hpp"
#include "cgsp/sampler.hpp"

namespace cgsp::detail {

inline constexpr TopicId kNoTopic = std::numeric_limits<TopicId>::max();

/// Fills `out` (length K) with the unnormalized conditional of a token of
/// word `v` in document `d` and returns the total mass. `exclude` names the
/// topic the token currently holds when the counts still include it; the
/// ¬i decrement is then applied locally without touching the counts.
/// Pass kNoTopic if the token was already removed.
template <class DocCounts, class WordCounts, class TopicCounts>
double conditional(const DocCounts& n_dk, const WordCounts& n_kv, const TopicCounts& n_k,
                   const Hyperparams& hyper, const SamplingMode& mode, const Document& doc,
                   std::size_t d, WordId v, TopicId exclude, std::span<double> out) {
  const std::size_t K = out.size();
  const auto& alpha = hyper.alpha();
  double total = 0.0;
  if (mode.is_predict()) {
    const auto phi_v = mode.phi_word_major->row(v);
    for (std::size_t k = 0; k < K; ++k) {
      const double ndk = static_cast<double>(n_dk(d, k)) - (k == exclude ? 1.0 : 0.0);
      const double p = phi_v[k] * (ndk + alpha[k]);
      out[k] = p;
      total += p;
    }
    return total;
  }
  const double beta_v = hyper.beta(v);
  const double beta_sum = hyper.beta_sum();
  if (mode.is_labeled()) {
    std::fill(out.begin(), out.end(), 0.0);
    for (LabelId k : doc.labels) {
      const double sub = (k == exclude) ? 1.0 : 0.0;
      const double ndk = static_cast<double>(n_dk(d, k)) - sub;
      const double nkv = static_cast<double>(n_kv(k, v)) - sub;
      const double nk = static_cast<double>(n_k[k]) - sub;
      const double p = (nkv + beta_v) / (nk + beta_sum) * (ndk + alpha[k]);
      out[k] = p;
      total += p;
    }
    return total;
  }
  for (std::size_t k = 0; k < K; ++k) {
    const double sub = (k == exclude) ? 1.0 : 0.0;
    const double ndk = static_cast<double>(n_dk(d, k)) - sub;
    const double nkv = static_cast<double>(n_kv(k, v)) - sub;
    const double nk = static_cast<double>(n_k[k]) - sub;
    const double p = (nkv + beta_v) / (nk + beta_sum) * (ndk + alpha[k]);
    out[k] = p;
    total += p;
  }
  return total;
}

/// Throws NumericError unless `total` is a usable normalizer.
void check_mass(double total, std::size_t d, std::size_t j);

/// Throws ConstraintError when a labeled-mode document has no labels.
void check_labels(const SamplingMode& mode, const Document& doc, std::size_t d);

/// Index of the topic selected by `u` in [0, total) over cumulative mass.
inline TopicId pick(std::span<const double> weights, double u) {
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (weights[k] <= 0.0) continue;
    acc += weights[k];
    last_positive = k;
    if (u < acc) return static_cast<TopicId>(k);
  }
  return static_cast<TopicId>(last_positive);
}

}  // namespace cgsp::detail
