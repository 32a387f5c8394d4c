#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "cgsp/corpus.hpp"
#include "cgsp/eval.hpp"
#include "cgsp/model.hpp"
#include "cgsp/sampler.hpp"

namespace cgsp {

enum class PriorPhase { train, predict };

/// train: alpha_k = 50/K. predict: alpha_k = 50 f_k / sum f + 30/K (only the
/// floor term when every frequency is zero).
std::vector<double> build_priors(std::span<const std::size_t> label_freqs, std::size_t K,
                                 PriorPhase phase);

struct PriorLdaConfig {
  double beta = 0.1;
  ChainSchedule train_schedule = ChainSchedule::averaged(1, 1, 0);
  ChainSchedule predict_schedule = ChainSchedule::averaged(1, 1, 0);
  /// Labels seen in fewer training documents are dropped (0 keeps all).
  std::size_t label_min_count = 0;
  double ridge = 1.0;
  std::size_t threads = 1;

  /// One chain, one sample in both phases.
  static PriorLdaConfig preset_1x1(std::uint64_t seed = 0);
  /// Five chains of thirty samples each in both phases.
  static PriorLdaConfig preset_5x30(std::uint64_t seed = 0);
};

enum class CardinalityFeatures {
  normalized_tf,  // term frequencies divided by document length
  raw_counts,
};

/// Linear model from term features to the number of labels of a document.
struct CardinalityPredictor {
  std::vector<double> weights;  // one per vocabulary word
  double intercept = 0.0;
  double fallback = 1.0;  // mean training cardinality, used for empty documents
  std::size_t num_labels = 1;
  CardinalityFeatures features = CardinalityFeatures::normalized_tf;

  double predict_raw(const Document& doc) const;
  /// Rounded to the nearest integer and clamped to [1, K].
  std::size_t predict(const Document& doc) const;
};

/// Ridge regression with an unpenalized intercept, solved by conjugate
/// gradients to a residual of 1e-8. Throws TrainingError when no document
/// has labels.
CardinalityPredictor train_cardinality(const Corpus& corpus, double lambda = 1.0,
                                       CardinalityFeatures features = CardinalityFeatures::normalized_tf);

struct PriorLdaModel {
  RealMatrix phi;    // K x V, averaged over every training snapshot
  RealMatrix phi_p;  // same snapshots, soft-count estimator
  std::vector<std::size_t> label_frequencies;
  std::vector<std::string> label_space;
  std::size_t skipped_documents = 0;  // training docs without any label
};

/// Label-constrained training: one topic per label, alpha = 50/K.
PriorLdaModel train_prior_lda(const Corpus& train, const PriorLdaConfig& config);

struct LabelPrediction {
  std::vector<double> scores;      // theta row
  std::vector<LabelId> ranking;    // all labels, best first
  std::vector<LabelId> selected;   // top predicted-cardinality labels
};

/// Labels ordered by descending score; ties go to the lower label id.
std::vector<LabelId> rank_labels(std::span<const double> scores);

/// Fixed-phi prediction chains with the frequency-based alpha, theta from
/// the chosen estimator pooled over all snapshots, then ranking and a cut at
/// the predicted cardinality.
std::vector<LabelPrediction> predict_labels(const Corpus& test, const RealMatrix& phi,
                                            std::span<const std::size_t> label_freqs,
                                            const PriorLdaConfig& config, ThetaKind kind,
                                            const CardinalityPredictor& predictor);

/// Re-expresses a corpus's labels in another label space by name; labels
/// missing from that space are dropped.
Corpus remap_labels(Corpus corpus, const std::vector<std::string>& label_space);

/// Gold label sets of a corpus, in the shape f1_metrics expects.
LabelSets gold_labels(const Corpus& corpus);
LabelSets selected_labels(const std::vector<LabelPrediction>& predictions);

}  // namespace cgsp
