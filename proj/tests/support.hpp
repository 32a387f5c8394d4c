#pragma once

#include <string>
#include <vector>

#include "cgsp/corpus.hpp"

namespace cgsp::testing {

inline Corpus make_corpus(const std::vector<std::vector<WordId>>& docs, std::size_t V,
                          const std::vector<std::vector<LabelId>>& labels = {},
                          std::size_t num_labels = 0) {
  Corpus c;
  std::vector<std::string> terms;
  for (std::size_t v = 0; v < V; ++v) terms.push_back("t" + std::to_string(v));
  c.vocabulary = Vocabulary(terms);
  for (std::size_t d = 0; d < docs.size(); ++d) {
    Document doc;
    doc.tokens = docs[d];
    if (d < labels.size()) doc.labels = labels[d];
    c.documents.push_back(doc);
  }
  if (num_labels > 0) {
    c.label_frequencies.assign(num_labels, 0);
    for (std::size_t k = 0; k < num_labels; ++k) c.label_space.push_back("L" + std::to_string(k));
    for (const auto& doc : c.documents) {
      for (LabelId k : doc.labels) ++c.label_frequencies[k];
    }
  }
  return c;
}

}  // namespace cgsp::testing

#include <functional>

#include "cgsp/model.hpp"
#include "cgsp/oracle.hpp"

namespace cgsp::testing {

/// Runs `step` for `burn_in` sweeps, then tallies each token's topic after
/// every `lag`-th sweep until `draws` tallies are collected, and returns one
/// goodness-of-fit p-value per token against the rows of `exact` (tokens
/// flattened in document order).
inline std::vector<double> marginal_pvalues(SamplerState& state,
                                            const std::function<void(SamplerState&)>& step,
                                            const RealMatrix& exact, std::size_t burn_in,
                                            std::size_t draws, std::size_t lag = 1) {
  const std::size_t K = exact.cols();
  for (std::size_t i = 0; i < burn_in; ++i) step(state);
  std::vector<std::vector<std::size_t>> tally(exact.rows(), std::vector<std::size_t>(K, 0));
  for (std::size_t i = 0; i < draws; ++i) {
    for (std::size_t l = 0; l < lag; ++l) step(state);
    std::size_t t = 0;
    for (const auto& zd : state.z) {
      for (TopicId k : zd) ++tally[t++][k];
    }
  }
  std::vector<double> p;
  for (std::size_t t = 0; t < exact.rows(); ++t) {
    const auto row = exact.row(t);
    p.push_back(oracle::goodness_of_fit_pvalue(tally[t], {row.begin(), row.end()}));
  }
  return p;
}

// Direct evaluation of the train-mode conditional from fresh tallies of z
// with token (d, j) left out.
inline std::vector<double> reference_train(const Corpus& c, const Assignments& z, std::size_t K,
                                           const Hyperparams& h, std::size_t d, std::size_t j) {
  const WordId w = c.documents[d].tokens[j];
  std::vector<double> ndk(K, 0), nkw(K, 0), nk(K, 0);
  for (std::size_t e = 0; e < c.num_docs(); ++e) {
    for (std::size_t i = 0; i < c.documents[e].tokens.size(); ++i) {
      if (e == d && i == j) continue;
      const TopicId k = z[e][i];
      nk[k] += 1;
      if (c.documents[e].tokens[i] == w) nkw[k] += 1;
      if (e == d) ndk[k] += 1;
    }
  }
  std::vector<double> p(K);
  long double total = 0;
  for (std::size_t k = 0; k < K; ++k) {
    p[k] = (nkw[k] + h.beta(w)) / (nk[k] + h.beta_sum()) * (ndk[k] + h.alpha(k));
    total += p[k];
  }
  for (double& x : p) x = static_cast<double>(x / total);
  return p;
}

}  // namespace cgsp::testing
