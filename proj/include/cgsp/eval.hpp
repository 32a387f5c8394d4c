#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "cgsp/corpus.hpp"
#include "cgsp/cvb0.hpp"
#include "cgsp/model.hpp"
#include "cgsp/sampler.hpp"

namespace cgsp {

// --- likelihood -------------------------------------------------------------

/// sum_d sum_i log sum_k phi[k][w_di] * theta[d][k]. Throws NumericError if a
/// token has zero mixture probability.
double log_likelihood(const Corpus& docs, const RealMatrix& theta, const RealMatrix& phi);

/// exp(-ll / tokens)
double perplexity(double log_likelihood, std::size_t tokens);

enum class ThetaKind { standard, p };

const char* to_string(ThetaKind kind);
ThetaKind theta_kind_from_string(const std::string& name);

struct PerplexityReport {
  std::string phi_kind;  // "phi" or "phi_p"
  ThetaKind theta_kind = ThetaKind::standard;
  double log_likelihood = 0.0;
  std::size_t token_count = 0;
  double perplexity = 0.0;
  std::size_t samples_averaged = 0;
  double split_fraction = 0.5;
  ChainSchedule schedule;
};

/// Held-out theta estimates from one set of fixed-phi chains on the observed
/// halves; both estimators read the same snapshots.
struct HeldoutTheta {
  RealMatrix standard;
  RealMatrix p;
  std::size_t samples = 0;
};

HeldoutTheta estimate_heldout_theta(const Corpus& observed, const RealMatrix& phi,
                                    const Hyperparams& hyper, const ChainSchedule& schedule,
                                    std::size_t threads = 1);

/// Schedule for a given number of averaged samples: a single sample after
/// `single_sweeps` sweeps, otherwise burn-in 50 and lag 5.
ChainSchedule heldout_schedule(std::size_t samples, std::uint64_t seed,
                               std::size_t single_sweeps = 200);

PerplexityReport heldout_perplexity(const HeldoutSplit& split, const RealMatrix& phi,
                                    const Hyperparams& hyper, const ChainSchedule& schedule,
                                    ThetaKind kind, double split_fraction = 0.5,
                                    std::size_t threads = 1);

/// phi/phi_p x theta/theta_p, rows ordered (phi, theta), (phi, theta_p),
/// (phi_p, theta), (phi_p, theta_p). Chains are shared per phi.
std::vector<PerplexityReport> perplexity_grid(const HeldoutSplit& split, const RealMatrix& phi,
                                              const RealMatrix& phi_p, const Hyperparams& hyper,
                                              const ChainSchedule& schedule,
                                              double split_fraction = 0.5, std::size_t threads = 1);

// --- multi-label metrics ----------------------------------------------------

struct LabelScore {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct F1Report {
  double micro_f = 0.0;
  double macro_f = 0.0;
  double example_f = 0.0;
  std::vector<LabelScore> per_label;
};

using LabelSets = std::vector<std::vector<LabelId>>;

/// Conventions: precision or recall with a zero denominator is 0, and F1 is
/// 0 when both are 0. Labels that occur in neither predictions nor gold are
/// left out of the macro average. A document with empty predicted and gold
/// sets scores 1. Micro-F is 1 when nothing is predicted and nothing is gold.
F1Report f1_metrics(const LabelSets& predicted, const LabelSets& gold, std::size_t K);

// --- word association -------------------------------------------------------

struct AssociationScore {
  WordId word = 0;
  double score = 0.0;
  std::size_t rank = 0;  // 1-based
};

/// score(w2) = sum_k phi[k][w2] phi[k][cue] / sum_k phi[k][cue] for every word.
/// Throws DomainError when the cue has no mass.
std::vector<double> association_scores(const RealMatrix& phi, WordId cue);

/// Candidates sorted by descending score, ties by ascending word id.
std::vector<AssociationScore> word_association(const RealMatrix& phi, WordId cue,
                                               const std::vector<WordId>& candidates);

/// 1-based rank of each target among all vocabulary words except the cue.
std::vector<std::size_t> association_ranks(const RealMatrix& phi, WordId cue,
                                           const std::vector<WordId>& targets);

// --- convergence traces -----------------------------------------------------

enum class Algorithm { cgs, cgs_p, cvb0 };

const char* to_string(Algorithm a);
Algorithm algorithm_from_string(const std::string& name);

struct TracePoint {
  std::size_t iteration = 0;
  double log_likelihood = 0.0;
  double sweep_seconds = 0.0;      // cumulative inference time
  double estimator_seconds = 0.0;  // this iteration's estimate recovery
  double wall_clock = 0.0;         // sweep_seconds plus this recovery
};

struct TraceOptions {
  /// Record every this many iterations (the final iteration is always recorded).
  std::size_t every = 1;
  bool sparse = false;
  Cvb0Options cvb0;
};

/// Trains for `iters` sweeps, recovering the algorithm's estimators (standard
/// for cgs, theta^p/phi^p for cgs_p, soft-count smoothing for cvb0) and the
/// training log-likelihood at each recorded iteration. cgs and cgs_p with the
/// same seed run the identical chain.
std::vector<TracePoint> convergence_trace(const Corpus& corpus, const Hyperparams& hyper,
                                          Algorithm algorithm, std::size_t iters,
                                          std::uint64_t seed, const TraceOptions& options = {});

struct OverheadReport {
  std::size_t num_topics = 0;
  std::size_t tokens = 0;
  double sweep_seconds = 0.0;     // median of one dense sweep
  double recovery_seconds = 0.0;  // median of one theta^p + phi^p recovery
  double ratio = 0.0;
};

/// Times dense sweeps against the soft-count recovery on the same state
/// after `burn_in` sweeps; medians over `repeats` measurements.
OverheadReport measure_overhead(const Corpus& corpus, const Hyperparams& hyper,
                                std::size_t burn_in, std::size_t repeats, std::uint64_t seed);

}  // namespace cgsp
