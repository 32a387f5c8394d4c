#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "cgsp/corpus.hpp"
#include "cgsp/model.hpp"
#include "cgsp/sampler.hpp"

namespace cgsp {

/// Per-token variational distributions gamma plus their running sums.
/// gamma is stored token-major: token t of the flattened corpus occupies
/// gamma[t*K, (t+1)*K).
struct VariationalState {
  std::size_t num_topics = 0;
  std::vector<double> gamma;
  std::vector<std::size_t> doc_offsets;  // D+1 entries into the token index
  SoftCounts soft;
  std::uint64_t iteration = 0;

  std::span<double> token(std::size_t t) { return {gamma.data() + t * num_topics, num_topics}; }
  std::span<const double> token(std::size_t t) const {
    return {gamma.data() + t * num_topics, num_topics};
  }

  friend bool operator==(const VariationalState&, const VariationalState&) = default;
};

struct Cvb0Options {
  /// Exact recomputation of the soft counts every this many sweeps (0 = never).
  std::size_t recompute_every = 50;
  /// Visit documents in a seeded random order instead of corpus order.
  bool shuffle_documents = false;
  std::uint64_t order_seed = 0;
};

/// Either a seed for Dirichlet(1) draws per token, or explicit gamma values
/// laid out as in VariationalState::gamma.
using Cvb0Init = std::variant<std::uint64_t, std::vector<double>>;

/// Builds the state for the given initialization; soft counts are the exact sums.
VariationalState cvb0_initialize(const Corpus& corpus, std::size_t K, const SamplingMode& mode,
                                 const Cvb0Init& init);

/// Exact sums of gamma.
SoftCounts cvb0_recompute_soft_counts(const VariationalState& state, const Corpus& corpus);

/// One in-place CVB0 pass over every token.
void cvb0_sweep(VariationalState& state, const Corpus& corpus, const Hyperparams& hyper,
                const SamplingMode& mode, const Cvb0Options& options = {});

VariationalState cvb0_run(const Corpus& corpus, const Hyperparams& hyper, const SamplingMode& mode,
                          std::size_t iters, const Cvb0Init& init, const Cvb0Options& options = {});

/// Standard smoothed estimators applied to the soft counts.
ParamEstimate cvb0_estimates(const VariationalState& state, const Hyperparams& hyper);

}  // namespace cgsp
