#include "cgsp/cvb0.hpp"

#include <cmath>
#include <numeric>

#include "cgsp/errors.hpp"
#include "cgsp/estimators.hpp"
#include "cgsp/rng.hpp"
#include "conditional.hpp"

namespace cgsp {

namespace {

std::vector<std::size_t> offsets_of(const Corpus& corpus) {
  std::vector<std::size_t> off(corpus.num_docs() + 1, 0);
  for (std::size_t d = 0; d < corpus.num_docs(); ++d) {
    off[d + 1] = off[d] + corpus.documents[d].tokens.size();
  }
  return off;
}

void check_shape(const VariationalState& state, const Corpus& corpus) {
  if (state.doc_offsets.size() != corpus.num_docs() + 1 ||
      state.doc_offsets.back() != corpus.total_tokens() ||
      state.gamma.size() != corpus.total_tokens() * state.num_topics) {
    throw ArgumentError("variational state does not match the corpus");
  }
}

}  // namespace

VariationalState cvb0_initialize(const Corpus& corpus, std::size_t K, const SamplingMode& mode,
                                 const Cvb0Init& init) {
  if (K == 0) throw ArgumentError("K must be at least 1");
  mode.validate(K, corpus.vocab_size());
  VariationalState s;
  s.num_topics = K;
  s.doc_offsets = offsets_of(corpus);
  const std::size_t N = s.doc_offsets.back();

  if (const auto* explicit_gamma = std::get_if<std::vector<double>>(&init)) {
    if (explicit_gamma->size() != N * K) {
      throw ArgumentError("explicit gamma has " + std::to_string(explicit_gamma->size()) +
                          " entries, expected " + std::to_string(N * K));
    }
    s.gamma = *explicit_gamma;
    for (std::size_t t = 0; t < N; ++t) {
      double sum = 0.0;
      for (double x : s.token(t)) {
        if (!(x >= 0.0) || !std::isfinite(x)) throw ArgumentError("explicit gamma has an invalid entry");
        sum += x;
      }
      if (std::abs(sum - 1.0) > 1e-9) {
        throw ArgumentError("explicit gamma for token " + std::to_string(t) + " sums to " +
                            std::to_string(sum));
      }
    }
  } else {
    Rng rng(std::get<std::uint64_t>(init));
    s.gamma.assign(N * K, 0.0);
    for (std::size_t d = 0; d < corpus.num_docs(); ++d) {
      const Document& doc = corpus.documents[d];
      detail::check_labels(mode, doc, d);
      for (std::size_t t = s.doc_offsets[d]; t < s.doc_offsets[d + 1]; ++t) {
        auto g = s.token(t);
        double sum = 0.0;
        if (mode.is_labeled()) {
          for (LabelId k : doc.labels) sum += (g[k] = rng.exponential());
        } else {
          for (double& x : g) sum += (x = rng.exponential());
        }
        for (double& x : g) x /= sum;
      }
    }
  }
  s.soft = cvb0_recompute_soft_counts(s, corpus);
  return s;
}

SoftCounts cvb0_recompute_soft_counts(const VariationalState& state, const Corpus& corpus) {
  check_shape(state, corpus);
  const std::size_t K = state.num_topics;
  SoftCounts soft{RealMatrix(corpus.num_docs(), K), RealMatrix(K, corpus.vocab_size()),
                  std::vector<double>(K, 0.0)};
  for (std::size_t d = 0; d < corpus.num_docs(); ++d) {
    const auto& tokens = corpus.documents[d].tokens;
    for (std::size_t j = 0; j < tokens.size(); ++j) {
      const auto g = state.token(state.doc_offsets[d] + j);
      for (std::size_t k = 0; k < K; ++k) {
        soft.m_dk(d, k) += g[k];
        soft.m_kv(k, tokens[j]) += g[k];
        soft.m_k[k] += g[k];
      }
    }
  }
  return soft;
}

void cvb0_sweep(VariationalState& state, const Corpus& corpus, const Hyperparams& hyper,
                const SamplingMode& mode, const Cvb0Options& options) {
  check_shape(state, corpus);
  const std::size_t K = state.num_topics;
  if (hyper.num_topics() != K) throw ArgumentError("alpha length does not match K");
  if (hyper.vocab_size() != corpus.vocab_size()) {
    throw VocabularyMismatchError("beta length does not match the corpus vocabulary");
  }
  mode.validate(K, corpus.vocab_size());

  std::vector<std::size_t> order(corpus.num_docs());
  std::iota(order.begin(), order.end(), 0);
  if (options.shuffle_documents) {
    Rng rng(options.order_seed);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  }

  SoftCounts& c = state.soft;
  std::vector<double> p(K);
  for (std::size_t d : order) {
    const Document& doc = corpus.documents[d];
    detail::check_labels(mode, doc, d);
    for (std::size_t j = 0; j < doc.tokens.size(); ++j) {
      const WordId v = doc.tokens[j];
      auto g = state.token(state.doc_offsets[d] + j);
      for (std::size_t k = 0; k < K; ++k) {
        c.m_dk(d, k) -= g[k];
        c.m_kv(k, v) -= g[k];
        c.m_k[k] -= g[k];
      }
      const double total = detail::conditional(c.m_dk, c.m_kv, c.m_k, hyper, mode, doc, d, v,
                                               detail::kNoTopic, std::span(p));
      detail::check_mass(total, d, j);
      for (std::size_t k = 0; k < K; ++k) {
        g[k] = p[k] / total;
        c.m_dk(d, k) += g[k];
        c.m_kv(k, v) += g[k];
        c.m_k[k] += g[k];
      }
    }
  }
  ++state.iteration;
  if (options.recompute_every != 0 && state.iteration % options.recompute_every == 0) {
    state.soft = cvb0_recompute_soft_counts(state, corpus);
  }
}

VariationalState cvb0_run(const Corpus& corpus, const Hyperparams& hyper, const SamplingMode& mode,
                          std::size_t iters, const Cvb0Init& init, const Cvb0Options& options) {
  if (iters == 0) throw ArgumentError("cvb0_run needs at least one iteration");
  VariationalState state = cvb0_initialize(corpus, hyper.num_topics(), mode, init);
  for (std::size_t i = 0; i < iters; ++i) cvb0_sweep(state, corpus, hyper, mode, options);
  return state;
}

ParamEstimate cvb0_estimates(const VariationalState& state, const Hyperparams& hyper) {
  ParamEstimate out;
  out.theta = theta_from_counts(state.soft.m_dk, hyper);
  out.phi = phi_from_counts(state.soft.m_kv, hyper);
  out.meta.kind = EstimatorFamily::cvb0;
  return out;
}

}  // namespace cgsp
