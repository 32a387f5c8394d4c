#pragma once

// Brute-force reference computations for tiny instances. Everything here
// enumerates assignment vectors explicitly and is meant for tests and the
// oracle-check command, not for realistic corpora.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "cgsp/corpus.hpp"
#include "cgsp/model.hpp"
#include "cgsp/rng.hpp"
#include "cgsp/sampler.hpp"

namespace cgsp::oracle {

inline constexpr std::size_t kDefaultCap = std::size_t{1} << 22;

/// Exact p(z_d | w_d, phi, alpha) over all K^N assignment vectors of one
/// document. Assignment i is the base-K expansion of i, token 0 least
/// significant.
struct EnumerablePosterior {
  std::size_t num_topics = 0;
  std::vector<WordId> tokens;
  std::vector<double> log_weights;
  std::vector<double> probs;

  std::size_t size() const noexcept { return probs.size(); }
  std::vector<TopicId> assignment(std::size_t i) const;
};

/// Throws SizeError when K^N exceeds `cap`.
EnumerablePosterior exact_posterior(const Document& doc, const RealMatrix& phi,
                                    const std::vector<double>& alpha,
                                    std::size_t cap = kDefaultCap);

/// N x K matrix of p(z_j = k | w_d, phi, alpha).
RealMatrix posterior_marginals(const EnumerablePosterior& post);

/// sum_z p(z) (n_dk(z) + alpha_k) / (N_d + sum alpha)
std::vector<double> theta_bar(const EnumerablePosterior& post, const std::vector<double>& alpha);

/// Index of an assignment drawn from the exact posterior.
std::size_t sample_posterior(const EnumerablePosterior& post, Rng& rng);

/// One-site fixed-phi conditional of position j given the other entries of z.
std::vector<double> token_transition(const std::vector<WordId>& tokens,
                                     const std::vector<TopicId>& z, const RealMatrix& phi,
                                     const std::vector<double>& alpha, std::size_t j);

/// S exact posterior draws; from each, L independent one-site Gibbs updates
/// at every position. nullopt for L averages the one-site conditionals
/// directly (the L -> infinity limit).
std::vector<double> theta_finite_L(const EnumerablePosterior& post,
                                   const std::vector<double>& alpha, std::size_t S,
                                   std::optional<std::size_t> L, std::uint64_t seed);

/// Exact collapsed posterior p(z | w, alpha, beta) over every assignment of
/// every token in a (tiny) corpus; phi and theta integrated out. Tokens are
/// flattened in document order. Labeled mode gives zero mass to topics
/// outside a document's label set.
struct CorpusPosterior {
  std::size_t num_topics = 0;
  std::size_t num_tokens = 0;
  std::vector<double> probs;

  std::vector<TopicId> assignment(std::size_t i) const;
};

CorpusPosterior exact_collapsed_posterior(const Corpus& corpus, const Hyperparams& hyper,
                                          const SamplingMode& mode = SamplingMode::train(),
                                          std::size_t cap = kDefaultCap);

/// num_tokens x K marginals of a corpus posterior.
RealMatrix posterior_marginals(const CorpusPosterior& post);

/// Exact fixed-phi marginals for every token of a corpus, flattened in
/// document order (documents are independent given phi).
RealMatrix fixed_phi_marginals(const Corpus& corpus, const RealMatrix& phi,
                               const std::vector<double>& alpha, std::size_t cap = kDefaultCap);

/// The phi^p denominator approximation around one state, for a single (k, v).
///
///   middle = E[(n_kv(z) + beta_v) / (n_k(z) + sum beta)]
///   b      = E[(n_kv(z) + beta_v) / (n_k(i) + sum beta)]
///
/// with the expectation over the posterior restricted to the state and its
/// single-site perturbations. analytic_lower/analytic_upper scale b by
/// (n_k + B)/(n_k + B + 1) and (n_k + B)/(n_k + B - 1), B = sum beta; lower
/// and upper use the largest and smallest change of n_k that actually has
/// positive mass, so they coincide with middle when no perturbation moves n_k.
struct BoundCheck {
  double lower = 0.0;
  double middle = 0.0;
  double upper = 0.0;
  double analytic_lower = 0.0;
  double analytic_upper = 0.0;
  double fixed_denominator = 0.0;  // b

  bool holds() const noexcept {
    return analytic_lower <= lower && lower <= middle && middle <= upper && upper <= analytic_upper;
  }
};

/// Throws DomainError when n_k = 0.
BoundCheck phi_p_bound_check(const SamplerState& state, const Corpus& corpus,
                             const Hyperparams& hyper, TopicId k, WordId v,
                             const SamplingMode& mode = SamplingMode::train());

/// Bound checks for every (k, v) with n_k > 0, row-major over (k, v).
struct BoundTable {
  std::size_t num_topics = 0;
  std::size_t vocab_size = 0;
  std::vector<std::optional<BoundCheck>> cells;

  std::size_t violations() const;
  /// Mean of (analytic_upper - analytic_lower) / middle over populated cells.
  double mean_relative_width() const;
  /// sum_k |a - b| / K with a = middle and b the fixed-denominator value,
  /// summed over words.
  double mean_topic_gap() const;
};

BoundTable phi_p_bound_table(const SamplerState& state, const Corpus& corpus,
                             const Hyperparams& hyper,
                             const SamplingMode& mode = SamplingMode::train());

/// How the approximation behaves as the corpus grows: prefixes of the corpus
/// are trained separately and their bound tables summarized.
struct GapPoint {
  std::size_t documents = 0;
  double mean_topic_count = 0.0;
  double mean_relative_width = 0.0;
  double mean_topic_gap = 0.0;
  std::size_t violations = 0;
};

std::vector<GapPoint> approximation_gap_curve(const Corpus& corpus, const Hyperparams& hyper,
                                              const std::vector<std::size_t>& subset_sizes,
                                              std::size_t iters, std::uint64_t seed);

/// sum_d sum_k |n_dk - m_dk| / D
double hard_soft_divergence(const SamplerState& state, const Corpus& corpus,
                            const Hyperparams& hyper, const SamplingMode& mode);

/// Upper tail of the chi-square distribution.
double chi_square_pvalue(double statistic, double dof);

/// Pearson goodness-of-fit p-value of observed counts against expected
/// probabilities; cells with zero expected probability must have zero counts.
double goodness_of_fit_pvalue(const std::vector<std::size_t>& observed,
                              const std::vector<double>& expected_probs);

/// One-sided sign test: P(X >= successes) for X ~ Binomial(trials, 1/2).
double sign_test_pvalue(std::size_t successes, std::size_t trials);

}  // namespace cgsp::oracle
