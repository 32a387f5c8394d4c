#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cgsp/corpus.hpp"
#include "cgsp/model.hpp"
#include "cgsp/sampler.hpp"

namespace cgsp {

enum class EstimatorKind { theta_standard, theta_p, phi_standard, phi_p };

const char* to_string(EstimatorKind kind);

/// CGS_p kinds read the corpus tokens; standard kinds need only the counts.
constexpr bool requires_tokens(EstimatorKind kind) {
  return kind == EstimatorKind::theta_p || kind == EstimatorKind::phi_p;
}

/// (count_k + prior_k) / sum_k'(count_k' + prior_k'), written into `out`.
/// Every estimator in the toolkit funnels through this so that identical
/// counts give bitwise-identical rows regardless of where they came from.
void smoothed_row(std::span<const double> counts, std::span<const double> prior,
                  std::span<double> out);

/// theta_dk = (n_dk + alpha_k) / (N_d + sum alpha)
RealMatrix theta_standard(const CountMatrices& counts, const Hyperparams& hyper);

/// phi_kv = (n_kv + beta_v) / (n_k + sum beta)
RealMatrix phi_standard(const CountMatrices& counts, const Hyperparams& hyper);

/// Same formulas over real-valued (soft) counts.
RealMatrix theta_from_counts(const RealMatrix& doc_topic, const Hyperparams& hyper);
RealMatrix phi_from_counts(const RealMatrix& topic_word, const Hyperparams& hyper);

struct SoftCountOptions {
  /// Worker threads; documents are split into contiguous blocks and partial
  /// topic-word sums are merged in block order.
  std::size_t threads = 1;
  /// Reuse the distribution of an earlier token with the same word type and
  /// the same current topic in the same document (the decremented counts are
  /// then identical).
  bool memoize = true;
};

/// Accumulates each token's normalized transition distribution, computed
/// against the state's counts with that token removed. The state is not
/// modified.
SoftCounts soft_counts(const SamplerState& state, const Corpus& corpus, const Hyperparams& hyper,
                       const SamplingMode& mode, const SoftCountOptions& options = {});

/// theta^p from one or more states: ((1/S) sum_i m_dk^(i) + alpha_k) normalized per row.
RealMatrix theta_p(std::span<const SamplerState> states, const Corpus& corpus,
                   const Hyperparams& hyper, const SamplingMode& mode,
                   const SoftCountOptions& options = {});

/// phi^p from a single training state: (m_kv + beta_v) normalized per row.
RealMatrix phi_p(const SamplerState& state, const Corpus& corpus, const Hyperparams& hyper,
                 const SamplingMode& mode = SamplingMode::train(),
                 const SoftCountOptions& options = {});

/// Where training-time theta^p gets its topic-word term.
enum class TrainingPhi {
  phi_standard,  // plug in phi_standard of the same state (default)
  phi_p,         // plug in phi_p of the same state
  collapsed,     // use the collapsed training conditional directly
};

/// theta^p for training documents from a single training state.
RealMatrix theta_p_training(const SamplerState& state, const Corpus& corpus,
                            const Hyperparams& hyper, TrainingPhi source = TrainingPhi::phi_standard,
                            const SamplingMode& train_mode = SamplingMode::train(),
                            const SoftCountOptions& options = {});

/// Mean of theta_standard over states (equivalently, the per-word Monte
/// Carlo estimate with averaged hard counts).
RealMatrix theta_naive_mc(std::span<const SamplerState> states, const Hyperparams& hyper);

/// Settings in which topic indices are anchored, so estimates from different
/// samples or chains may be averaged.
enum class AnchoredTopics { labeled, fixed_phi };

/// Element-wise mean of equally shaped matrices.
RealMatrix average_estimates(std::span<const RealMatrix> estimates, AnchoredTopics anchor);

/// Both soft-count estimators from a single pass (recovery
/// of theta^p and phi^p from one training state).
struct CgspEstimates {
  RealMatrix theta;
  RealMatrix phi;
};
CgspEstimates cgsp_estimates(const SamplerState& state, const Corpus& corpus,
                             const Hyperparams& hyper, const SamplingMode& mode,
                             const SoftCountOptions& options = {});

}  // namespace cgsp
