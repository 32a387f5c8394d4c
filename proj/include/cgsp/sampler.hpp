#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "cgsp/corpus.hpp"
#include "cgsp/model.hpp"
#include "cgsp/rng.hpp"

namespace cgsp {

enum class SamplingVariant : std::uint8_t {
  train,          // collapsed phi
  predict,        // fixed phi
  labeled_train,  // collapsed phi, topics restricted to the document's labels
};

/// Which conditional the sampler (and the soft-count pass) uses.
struct SamplingMode {
  SamplingVariant variant = SamplingVariant::train;
  std::shared_ptr<const RealMatrix> fixed_phi;       // K x V, predict only
  std::shared_ptr<const RealMatrix> phi_word_major;  // V x K copy of fixed_phi

  static SamplingMode train() { return {}; }
  static SamplingMode labeled() { return {SamplingVariant::labeled_train, nullptr, nullptr}; }
  /// Throws ArgumentError unless every row of `phi` sums to 1 within 1e-9.
  static SamplingMode predict(RealMatrix phi);

  bool is_predict() const noexcept { return variant == SamplingVariant::predict; }
  bool is_labeled() const noexcept { return variant == SamplingVariant::labeled_train; }

  /// Checks phi shape against K x V.
  void validate(std::size_t K, std::size_t V) const;
};

struct ChainSchedule {
  std::size_t burn_in = 50;
  std::size_t lag = 5;
  std::size_t samples = 1;
  std::size_t chains = 1;
  std::size_t total_train_iters = 200;
  std::uint64_t seed = 0;

  void validate() const;

  /// Sweep counts after which snapshots are retained. An unsupervised
  /// training chain with a single sample keeps its state after
  /// total_train_iters sweeps; every other chain keeps burn_in + s*lag.
  std::vector<std::size_t> snapshot_iterations(SamplingVariant variant) const;

  /// One training chain of 200 sweeps, one retained state.
  static ChainSchedule unsupervised_training(std::uint64_t seed = 0);
  /// One retained state after exactly `sweeps` sweeps, any variant.
  static ChainSchedule fixed_budget(std::size_t sweeps, std::uint64_t seed = 0);
  /// Burn-in 50, lag 5, `samples` retained states per chain.
  static ChainSchedule averaged(std::size_t samples, std::size_t chains = 1, std::uint64_t seed = 0);
};

/// Removes token (d, j) from the counts, leaving z[d][j] untouched.
void remove_token(SamplerState& state, const Corpus& corpus, std::size_t d, std::size_t j);
/// Assigns token (d, j) to topic k and adds it to the counts.
void add_token(SamplerState& state, const Corpus& corpus, std::size_t d, std::size_t j, TopicId k);

/// Normalized full conditional of token (d, j). The token must already have
/// been removed from the counts (see remove_token).
std::vector<double> gibbs_transition(const SamplerState& state, const Corpus& corpus,
                                     const Hyperparams& hyper, const SamplingMode& mode,
                                     std::size_t d, std::size_t j);

/// The same conditional assembled from the smoothing, document and word
/// buckets used by sweep_sparse. Train mode only; token must be removed.
std::vector<double> sparse_transition(const SamplerState& state, const Corpus& corpus,
                                      const Hyperparams& hyper, std::size_t d, std::size_t j);

/// Uniform random topic per token (uniform over the document's labels in
/// labeled mode).
SamplerState initialize_state(const Corpus& corpus, std::size_t K, const SamplingMode& mode,
                              Rng& rng, std::uint64_t seed = 0);

/// Resamples every token once, documents in order, positions in order.
void sweep(SamplerState& state, const Corpus& corpus, const Hyperparams& hyper,
           const SamplingMode& mode, Rng& rng);

/// Train-mode sweep whose per-token cost scales with the nonzeros of
/// n_dk[d] and n_kv[:, v] instead of K.
void sweep_sparse(SamplerState& state, const Corpus& corpus, const Hyperparams& hyper,
                  const SamplingMode& mode, Rng& rng);

struct ChainOptions {
  bool sparse = false;
  /// Called after every sweep with the 1-based sweep count.
  std::function<void(const SamplerState&, std::size_t)> on_sweep;
};

/// Runs one chain and returns its retained snapshots.
std::vector<SamplerState> run_chain(const Corpus& corpus, const Hyperparams& hyper,
                                    const SamplingMode& mode, const ChainSchedule& schedule,
                                    std::size_t chain_index, const ChainOptions& options = {});

/// Runs schedule.chains chains on up to `threads` workers; result[c] holds chain c.
std::vector<std::vector<SamplerState>> run_chains(const Corpus& corpus, const Hyperparams& hyper,
                                                  const SamplingMode& mode,
                                                  const ChainSchedule& schedule,
                                                  std::size_t threads = 1, bool sparse = false);

}  // namespace cgsp
