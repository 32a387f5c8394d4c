#include "cgsp/synthetic.hpp"

#include <algorithm>
#include <span>
#include <string>

#include "cgsp/errors.hpp"
#include "cgsp/rng.hpp"

namespace cgsp {

namespace {

void dirichlet(Rng& rng, double concentration, std::span<double> out) {
  double sum = 0.0;
  for (double& x : out) sum += (x = rng.gamma(concentration));
  if (!(sum > 0.0)) {
    // Every component underflowed; fall back to a point mass.
    std::fill(out.begin(), out.end(), 0.0);
    out[rng.below(out.size())] = 1.0;
    return;
  }
  for (double& x : out) x /= sum;
}

std::size_t categorical(Rng& rng, std::span<const double> p) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    acc += p[i];
    if (u < acc) return i;
  }
  return p.size() - 1;
}

void check(const SyntheticSpec& s) {
  if (s.num_docs == 0 || s.vocab_size == 0 || s.num_topics == 0) {
    throw ArgumentError("synthetic corpus needs D, V and K >= 1");
  }
  if (s.min_length == 0 || s.min_length > s.max_length) {
    throw ArgumentError("synthetic document lengths need 1 <= min_length <= max_length");
  }
  if (!(s.alpha > 0.0) || !(s.beta > 0.0)) throw ArgumentError("alpha and beta must be positive");
}

Vocabulary numbered_vocabulary(std::size_t V) {
  std::vector<std::string> terms(V);
  for (std::size_t v = 0; v < V; ++v) terms[v] = "w" + std::to_string(v);
  return Vocabulary(std::move(terms));
}

RealMatrix draw_phi(Rng& rng, const SyntheticSpec& s) {
  RealMatrix phi(s.num_topics, s.vocab_size);
  for (std::size_t k = 0; k < s.num_topics; ++k) dirichlet(rng, s.beta, phi.row(k));
  return phi;
}

std::size_t draw_length(Rng& rng, const SyntheticSpec& s) {
  return s.min_length + rng.below(s.max_length - s.min_length + 1);
}

}  // namespace

SyntheticCorpus generate_lda(const SyntheticSpec& spec) {
  check(spec);
  Rng rng(spec.seed);
  SyntheticCorpus out;
  out.corpus.vocabulary = numbered_vocabulary(spec.vocab_size);
  out.phi = draw_phi(rng, spec);
  out.theta = RealMatrix(spec.num_docs, spec.num_topics);
  out.corpus.documents.resize(spec.num_docs);
  for (std::size_t d = 0; d < spec.num_docs; ++d) {
    auto theta = out.theta.row(d);
    dirichlet(rng, spec.alpha, theta);
    auto& tokens = out.corpus.documents[d].tokens;
    tokens.resize(draw_length(rng, spec));
    for (WordId& w : tokens) {
      const std::size_t k = categorical(rng, theta);
      w = static_cast<WordId>(categorical(rng, out.phi.row(k)));
    }
  }
  return out;
}

SyntheticCorpus generate_labeled(const LabeledSyntheticSpec& spec) {
  const SyntheticSpec& s = spec.base;
  check(s);
  if (spec.max_labels == 0 || spec.max_labels > s.num_topics) {
    throw ArgumentError("max_labels must lie in [1, K]");
  }
  Rng rng(s.seed);
  SyntheticCorpus out;
  Corpus& c = out.corpus;
  c.vocabulary = numbered_vocabulary(s.vocab_size);
  for (std::size_t k = 0; k < s.num_topics; ++k) c.label_space.push_back("L" + std::to_string(k));
  c.label_frequencies.assign(s.num_topics, 0);
  out.phi = draw_phi(rng, s);
  out.theta = RealMatrix(s.num_docs, s.num_topics);

  std::vector<double> popularity(s.num_topics);
  for (std::size_t k = 0; k < s.num_topics; ++k) popularity[k] = 1.0 / static_cast<double>(k + 1);

  c.documents.resize(s.num_docs);
  for (std::size_t d = 0; d < s.num_docs; ++d) {
    Document& doc = c.documents[d];
    const std::size_t count = 1 + rng.below(spec.max_labels);
    std::vector<double> weights = popularity;
    while (doc.labels.size() < count) {
      double total = 0.0;
      for (double w : weights) total += w;
      for (double& w : weights) w /= total;
      const std::size_t k = categorical(rng, weights);
      doc.labels.push_back(static_cast<LabelId>(k));
      weights[k] = 0.0;
    }
    std::sort(doc.labels.begin(), doc.labels.end());
    for (LabelId k : doc.labels) ++c.label_frequencies[k];

    std::vector<double> mix(doc.labels.size());
    dirichlet(rng, 1.0, mix);
    for (std::size_t i = 0; i < doc.labels.size(); ++i) out.theta(d, doc.labels[i]) = mix[i];
    doc.tokens.resize(draw_length(rng, s));
    for (WordId& w : doc.tokens) {
      const LabelId k = doc.labels[categorical(rng, mix)];
      w = static_cast<WordId>(categorical(rng, out.phi.row(k)));
    }
  }
  return out;
}

}  // namespace cgsp
