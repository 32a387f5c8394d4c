#include "cgsp/estimators.hpp"

#include <algorithm>
#include <thread>
#include <unordered_map>

#include "cgsp/errors.hpp"
#include "conditional.hpp"

namespace cgsp {

const char* to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::theta_standard: return "theta_standard";
    case EstimatorKind::theta_p: return "theta_p";
    case EstimatorKind::phi_standard: return "phi_standard";
    case EstimatorKind::phi_p: return "phi_p";
  }
  return "?";
}

void smoothed_row(std::span<const double> counts, std::span<const double> prior,
                  std::span<double> out) {
  double total = 0.0;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    out[k] = counts[k] + prior[k];
    total += out[k];
  }
  for (double& x : out) x /= total;
}

namespace {

template <class Counts>
RealMatrix smooth_rows(const Counts& counts, const std::vector<double>& prior) {
  if (counts.cols() != prior.size()) {
    throw ArgumentError("count columns (" + std::to_string(counts.cols()) +
                        ") do not match prior length (" + std::to_string(prior.size()) + ")");
  }
  RealMatrix out(counts.rows(), counts.cols());
  std::vector<double> row(counts.cols());
  for (std::size_t r = 0; r < counts.rows(); ++r) {
    for (std::size_t c = 0; c < counts.cols(); ++c) row[c] = static_cast<double>(counts(r, c));
    smoothed_row(row, prior, out.row(r));
  }
  return out;
}

// Which parts of the soft counts a caller needs; prediction only reads m_dk.
struct Accumulate {
  bool topic_word = true;
};

struct Partial {
  RealMatrix m_kv;
  std::vector<double> m_k;
};

void accumulate_docs(const SamplerState& state, const Corpus& corpus, const Hyperparams& hyper,
                     const SamplingMode& mode, bool memoize, std::size_t first, std::size_t last,
                     RealMatrix& m_dk, Partial* topic_word) {
  const std::size_t K = state.num_topics();
  const auto& c = state.counts;
  std::vector<double> p(K);
  std::vector<double> memo;  // cached normalized rows, K doubles each
  std::unordered_map<std::uint64_t, std::size_t> seen;
  for (std::size_t d = first; d < last; ++d) {
    const Document& doc = corpus.documents[d];
    detail::check_labels(mode, doc, d);
    memo.clear();
    seen.clear();
    auto mdk = m_dk.row(d);
    for (std::size_t j = 0; j < doc.tokens.size(); ++j) {
      const WordId v = doc.tokens[j];
      const TopicId z = state.z[d][j];
      const double* probs = nullptr;
      const std::uint64_t key = (static_cast<std::uint64_t>(v) << 32) | z;
      if (memoize) {
        if (auto it = seen.find(key); it != seen.end()) probs = memo.data() + it->second;
      }
      if (probs == nullptr) {
        const double total =
            detail::conditional(c.n_dk, c.n_kv, c.n_k, hyper, mode, doc, d, v, z, std::span(p));
        detail::check_mass(total, d, j);
        for (double& x : p) x /= total;
        if (memoize) {
          seen.emplace(key, memo.size());
          memo.insert(memo.end(), p.begin(), p.end());
          probs = memo.data() + memo.size() - K;
        } else {
          probs = p.data();
        }
      }
      for (std::size_t k = 0; k < K; ++k) mdk[k] += probs[k];
      if (topic_word != nullptr) {
        for (std::size_t k = 0; k < K; ++k) {
          topic_word->m_kv(k, v) += probs[k];
          topic_word->m_k[k] += probs[k];
        }
      }
    }
  }
}

void check_state(const SamplerState& state, const Corpus& corpus, const Hyperparams& hyper,
                 const SamplingMode& mode) {
  const std::size_t K = state.num_topics();
  if (state.z.size() != corpus.num_docs() || state.counts.num_docs() != corpus.num_docs()) {
    throw ArgumentError("sampler state does not match the corpus document count");
  }
  if (hyper.num_topics() != K) throw ArgumentError("alpha length does not match K");
  if (hyper.vocab_size() != corpus.vocab_size() || state.counts.vocab_size() != corpus.vocab_size()) {
    throw VocabularyMismatchError("state, corpus and beta disagree on the vocabulary size");
  }
  mode.validate(K, corpus.vocab_size());
}

SoftCounts compute_soft_counts(const SamplerState& state, const Corpus& corpus,
                               const Hyperparams& hyper, const SamplingMode& mode,
                               const SoftCountOptions& options, Accumulate what) {
  check_state(state, corpus, hyper, mode);
  const std::size_t D = corpus.num_docs();
  const std::size_t K = state.num_topics();
  const std::size_t V = corpus.vocab_size();
  SoftCounts out;
  out.m_dk = RealMatrix(D, K);
  if (what.topic_word) {
    out.m_kv = RealMatrix(K, V);
    out.m_k.assign(K, 0.0);
  }
  const std::size_t workers = std::clamp<std::size_t>(options.threads, 1, std::max<std::size_t>(D, 1));
  if (workers == 1) {
    Partial tw;
    if (what.topic_word) tw = {RealMatrix(K, V), std::vector<double>(K, 0.0)};
    accumulate_docs(state, corpus, hyper, mode, options.memoize, 0, D, out.m_dk,
                    what.topic_word ? &tw : nullptr);
    if (what.topic_word) {
      out.m_kv = std::move(tw.m_kv);
      out.m_k = std::move(tw.m_k);
    }
    return out;
  }

  std::vector<Partial> partials(workers);
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t first = D * w / workers;
      const std::size_t last = D * (w + 1) / workers;
      pool.emplace_back([&, w, first, last] {
        try {
          Partial* tw = nullptr;
          if (what.topic_word) {
            partials[w] = {RealMatrix(K, V), std::vector<double>(K, 0.0)};
            tw = &partials[w];
          }
          accumulate_docs(state, corpus, hyper, mode, options.memoize, first, last, out.m_dk, tw);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  if (what.topic_word) {
    for (const Partial& part : partials) {
      for (std::size_t i = 0; i < out.m_kv.size(); ++i) out.m_kv.data()[i] += part.m_kv.data()[i];
      for (std::size_t k = 0; k < K; ++k) out.m_k[k] += part.m_k[k];
    }
  }
  return out;
}

}  // namespace

RealMatrix theta_standard(const CountMatrices& counts, const Hyperparams& hyper) {
  return smooth_rows(counts.n_dk, hyper.alpha());
}

RealMatrix phi_standard(const CountMatrices& counts, const Hyperparams& hyper) {
  return smooth_rows(counts.n_kv, hyper.beta());
}

RealMatrix theta_from_counts(const RealMatrix& doc_topic, const Hyperparams& hyper) {
  return smooth_rows(doc_topic, hyper.alpha());
}

RealMatrix phi_from_counts(const RealMatrix& topic_word, const Hyperparams& hyper) {
  return smooth_rows(topic_word, hyper.beta());
}

SoftCounts soft_counts(const SamplerState& state, const Corpus& corpus, const Hyperparams& hyper,
                       const SamplingMode& mode, const SoftCountOptions& options) {
  return compute_soft_counts(state, corpus, hyper, mode, options, {});
}

RealMatrix theta_p(std::span<const SamplerState> states, const Corpus& corpus,
                   const Hyperparams& hyper, const SamplingMode& mode,
                   const SoftCountOptions& options) {
  if (states.empty()) throw ArgumentError("theta_p needs at least one state");
  RealMatrix sum;
  for (const SamplerState& s : states) {
    SoftCounts soft = compute_soft_counts(s, corpus, hyper, mode, options, {.topic_word = false});
    if (sum.empty()) {
      sum = std::move(soft.m_dk);
    } else {
      if (sum.rows() != soft.m_dk.rows() || sum.cols() != soft.m_dk.cols()) {
        throw ArgumentError("theta_p: states have different shapes");
      }
      for (std::size_t i = 0; i < sum.size(); ++i) sum.data()[i] += soft.m_dk.data()[i];
    }
  }
  if (states.size() > 1) {
    const double S = static_cast<double>(states.size());
    for (double& x : sum.storage()) x /= S;
  }
  return theta_from_counts(sum, hyper);
}

RealMatrix phi_p(const SamplerState& state, const Corpus& corpus, const Hyperparams& hyper,
                 const SamplingMode& mode, const SoftCountOptions& options) {
  if (mode.is_predict()) throw ArgumentError("phi_p needs a training-mode conditional");
  const SoftCounts soft = soft_counts(state, corpus, hyper, mode, options);
  return phi_from_counts(soft.m_kv, hyper);
}

RealMatrix theta_p_training(const SamplerState& state, const Corpus& corpus,
                            const Hyperparams& hyper, TrainingPhi source,
                            const SamplingMode& train_mode, const SoftCountOptions& options) {
  if (train_mode.is_predict()) throw ArgumentError("theta_p_training needs a training-mode state");
  if (source == TrainingPhi::collapsed) {
    const SoftCounts soft =
        compute_soft_counts(state, corpus, hyper, train_mode, options, {.topic_word = false});
    return theta_from_counts(soft.m_dk, hyper);
  }
  RealMatrix phi = source == TrainingPhi::phi_p ? phi_p(state, corpus, hyper, train_mode, options)
                                                : phi_standard(state.counts, hyper);
  const SamplingMode fixed = SamplingMode::predict(std::move(phi));
  const SamplerState one[] = {state};
  return theta_p(one, corpus, hyper, fixed, options);
}

RealMatrix theta_naive_mc(std::span<const SamplerState> states, const Hyperparams& hyper) {
  if (states.empty()) throw ArgumentError("theta_naive_mc needs at least one state");
  std::vector<RealMatrix> thetas;
  thetas.reserve(states.size());
  for (const SamplerState& s : states) thetas.push_back(theta_standard(s.counts, hyper));
  return average_estimates(thetas, AnchoredTopics::fixed_phi);
}

RealMatrix average_estimates(std::span<const RealMatrix> estimates, AnchoredTopics) {
  if (estimates.empty()) throw ArgumentError("nothing to average");
  RealMatrix out = estimates.front();
  for (std::size_t i = 1; i < estimates.size(); ++i) {
    const RealMatrix& m = estimates[i];
    if (m.rows() != out.rows() || m.cols() != out.cols()) {
      throw ArgumentError("cannot average matrices of different shapes");
    }
    for (std::size_t t = 0; t < out.size(); ++t) out.data()[t] += m.data()[t];
  }
  if (estimates.size() > 1) {
    const double S = static_cast<double>(estimates.size());
    for (double& x : out.storage()) x /= S;
  }
  return out;
}

CgspEstimates cgsp_estimates(const SamplerState& state, const Corpus& corpus,
                             const Hyperparams& hyper, const SamplingMode& mode,
                             const SoftCountOptions& options) {
  if (mode.is_predict()) throw ArgumentError("cgsp_estimates needs a training-mode conditional");
  const SoftCounts soft = soft_counts(state, corpus, hyper, mode, options);
  return {theta_from_counts(soft.m_dk, hyper), phi_from_counts(soft.m_kv, hyper)};
}

}  // namespace cgsp
