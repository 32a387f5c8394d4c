#pragma once

// Corpora drawn from the LDA generative process, used by tests, the
// acceptance suite and `cgsp generate`.

#include <cstddef>
#include <cstdint>

#include "cgsp/corpus.hpp"
#include "cgsp/matrix.hpp"

namespace cgsp {

struct SyntheticSpec {
  std::size_t num_docs = 500;
  std::size_t vocab_size = 200;
  std::size_t num_topics = 10;
  /// Document lengths are uniform on [min_length, max_length].
  std::size_t min_length = 50;
  std::size_t max_length = 150;
  double alpha = 0.1;
  double beta = 0.01;
  std::uint64_t seed = 0;
};

struct SyntheticCorpus {
  Corpus corpus;
  RealMatrix theta;  // ground truth, D x K
  RealMatrix phi;    // ground truth, K x V
};

/// Vocabulary terms are "w0", "w1", ...
SyntheticCorpus generate_lda(const SyntheticSpec& spec);

struct LabeledSyntheticSpec {
  SyntheticSpec base;
  /// Each document carries between 1 and max_labels labels; label k is
  /// picked with probability proportional to 1/(k+1) (a skewed frequency
  /// profile, as in real tagging data).
  std::size_t max_labels = 3;
};

/// One topic per label; each document's tokens come only from its labels'
/// topics. Labels are named "L0", "L1", ...
SyntheticCorpus generate_labeled(const LabeledSyntheticSpec& spec);

}  // namespace cgsp
