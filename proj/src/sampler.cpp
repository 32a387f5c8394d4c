#include "cgsp/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "cgsp/errors.hpp"
#include "conditional.hpp"

namespace cgsp {

namespace detail {

void check_mass(double total, std::size_t d, std::size_t j) {
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw NumericError("degenerate conditional for token (" + std::to_string(d) + ", " +
                       std::to_string(j) + "): unnormalized mass is " + std::to_string(total));
  }
}

void check_labels(const SamplingMode& mode, const Document& doc, std::size_t d) {
  if (mode.is_labeled() && doc.labels.empty() && !doc.tokens.empty()) {
    throw ConstraintError("labeled mode: document " + std::to_string(d) + " has no labels");
  }
}

}  // namespace detail

SamplingMode SamplingMode::predict(RealMatrix phi) {
  for (std::size_t k = 0; k < phi.rows(); ++k) {
    double s = 0.0;
    for (double x : phi.row(k)) {
      if (!(x >= 0.0) || !std::isfinite(x)) throw ArgumentError("fixed phi has an invalid entry");
      s += x;
    }
    if (std::abs(s - 1.0) > 1e-9) {
      throw ArgumentError("fixed phi row " + std::to_string(k) + " sums to " + std::to_string(s));
    }
  }
  RealMatrix by_word(phi.cols(), phi.rows());
  for (std::size_t k = 0; k < phi.rows(); ++k) {
    for (std::size_t v = 0; v < phi.cols(); ++v) by_word(v, k) = phi(k, v);
  }
  SamplingMode m;
  m.variant = SamplingVariant::predict;
  m.fixed_phi = std::make_shared<const RealMatrix>(std::move(phi));
  m.phi_word_major = std::make_shared<const RealMatrix>(std::move(by_word));
  return m;
}

void SamplingMode::validate(std::size_t K, std::size_t V) const {
  if (!is_predict()) return;
  if (!fixed_phi || !phi_word_major) throw ArgumentError("predict mode requires a fixed phi");
  if (fixed_phi->rows() != K) {
    throw ArgumentError("fixed phi has " + std::to_string(fixed_phi->rows()) + " topics, expected " +
                        std::to_string(K));
  }
  if (fixed_phi->cols() != V) {
    throw VocabularyMismatchError("fixed phi covers " + std::to_string(fixed_phi->cols()) +
                                  " word types, corpus vocabulary has " + std::to_string(V));
  }
}

void ChainSchedule::validate() const {
  if (lag < 1) throw ArgumentError("lag must be >= 1");
  if (samples < 1) throw ArgumentError("samples must be >= 1");
  if (chains < 1) throw ArgumentError("chains must be >= 1");
}

std::vector<std::size_t> ChainSchedule::snapshot_iterations(SamplingVariant variant) const {
  validate();
  if (variant == SamplingVariant::train && samples == 1) return {total_train_iters};
  std::vector<std::size_t> its;
  for (std::size_t s = 1; s <= samples; ++s) its.push_back(burn_in + s * lag);
  return its;
}

ChainSchedule ChainSchedule::unsupervised_training(std::uint64_t seed) {
  ChainSchedule s;
  s.samples = 1;
  s.total_train_iters = 200;
  s.seed = seed;
  return s;
}

ChainSchedule ChainSchedule::fixed_budget(std::size_t sweeps, std::uint64_t seed) {
  if (sweeps == 0) throw ArgumentError("a fixed budget needs at least one sweep");
  ChainSchedule s;
  s.burn_in = 0;
  s.lag = sweeps;
  s.samples = 1;
  s.total_train_iters = sweeps;
  s.seed = seed;
  return s;
}

ChainSchedule ChainSchedule::averaged(std::size_t samples, std::size_t chains, std::uint64_t seed) {
  ChainSchedule s;
  s.burn_in = 50;
  s.lag = 5;
  s.samples = samples;
  s.chains = chains;
  s.seed = seed;
  return s;
}

void remove_token(SamplerState& state, const Corpus& corpus, std::size_t d, std::size_t j) {
  const TopicId k = state.z[d][j];
  const WordId v = corpus.documents[d].tokens[j];
  --state.counts.n_dk(d, k);
  --state.counts.n_kv(k, v);
  --state.counts.n_k[k];
}

void add_token(SamplerState& state, const Corpus& corpus, std::size_t d, std::size_t j, TopicId k) {
  const WordId v = corpus.documents[d].tokens[j];
  state.z[d][j] = k;
  ++state.counts.n_dk(d, k);
  ++state.counts.n_kv(k, v);
  ++state.counts.n_k[k];
}

std::vector<double> gibbs_transition(const SamplerState& state, const Corpus& corpus,
                                     const Hyperparams& hyper, const SamplingMode& mode,
                                     std::size_t d, std::size_t j) {
  const std::size_t K = state.num_topics();
  const auto& doc = corpus.documents.at(d);
  detail::check_labels(mode, doc, d);
  std::vector<double> p(K);
  const double total = detail::conditional(state.counts.n_dk, state.counts.n_kv, state.counts.n_k,
                                           hyper, mode, doc, d, doc.tokens.at(j), detail::kNoTopic,
                                           p);
  detail::check_mass(total, d, j);
  for (double& x : p) x /= total;
  return p;
}

namespace {

/// Bookkeeping for the bucket-decomposed train-mode conditional
///   (n_kv + b_v)(n_dk + a_k)/(n_k + B)
///     = b_v a_k/(n_k + B)             smoothing bucket, all k
///     + b_v n_dk/(n_k + B)            document bucket, k with n_dk > 0
///     + (a_k + n_dk) n_kv/(n_k + B)   word bucket, k with n_kv > 0
class BucketSampler {
 public:
  BucketSampler(SamplerState& state, const Corpus& corpus, const Hyperparams& hyper)
      : state_(state), hyper_(hyper), K_(state.num_topics()),
        V_(corpus.vocab_size()), coef_(K_), word_topics_(V_), word_pos_(K_, V_, -1),
        doc_pos_(K_, -1), scratch_(K_) {
    const auto& c = state_.counts;
    for (std::size_t k = 0; k < K_; ++k) coef_[k] = 1.0 / (static_cast<double>(c.n_k[k]) + hyper_.beta_sum());
    for (std::size_t k = 0; k < K_; ++k) {
      for (std::size_t v = 0; v < V_; ++v) {
        if (c.n_kv(k, v) > 0) insert(word_topics_[v], word_pos_(k, v), static_cast<TopicId>(k));
      }
    }
  }

  void begin_document(std::size_t d) {
    d_ = d;
    for (TopicId k : doc_topics_) doc_pos_[k] = -1;
    doc_topics_.clear();
    smooth_sum_ = 0.0;
    doc_sum_ = 0.0;
    for (std::size_t k = 0; k < K_; ++k) {
      smooth_sum_ += hyper_.alpha(k) * coef_[k];
      const auto ndk = state_.counts.n_dk(d, k);
      if (ndk > 0) {
        doc_pos_[k] = static_cast<std::int32_t>(doc_topics_.size());
        doc_topics_.push_back(static_cast<TopicId>(k));
        doc_sum_ += static_cast<double>(ndk) * coef_[k];
      }
    }
  }

  /// Applies a +1/-1 change of token (d_, v) in topic k to counts and buckets.
  void change(TopicId k, WordId v, int delta) {
    auto& c = state_.counts;
    smooth_sum_ -= hyper_.alpha(k) * coef_[k];
    doc_sum_ -= static_cast<double>(c.n_dk(d_, k)) * coef_[k];
    c.n_dk(d_, k) += delta;
    c.n_kv(k, v) += delta;
    c.n_k[k] += delta;
    coef_[k] = 1.0 / (static_cast<double>(c.n_k[k]) + hyper_.beta_sum());
    smooth_sum_ += hyper_.alpha(k) * coef_[k];
    doc_sum_ += static_cast<double>(c.n_dk(d_, k)) * coef_[k];

    if (delta < 0) {
      if (c.n_dk(d_, k) == 0) erase(doc_topics_, doc_pos_[k], doc_pos_);
      if (c.n_kv(k, v) == 0) erase_word(v, k);
    } else {
      if (c.n_dk(d_, k) == 1) insert(doc_topics_, doc_pos_[k], k);
      if (c.n_kv(k, v) == 1) insert(word_topics_[v], word_pos_(k, v), k);
    }
  }

  /// Bucket masses for word v at the current (decremented) counts.
  struct Masses {
    double smooth, doc, word;
    double total() const { return word + doc + smooth; }
  };

  Masses masses(WordId v) {
    const auto& c = state_.counts;
    const double beta_v = hyper_.beta(v);
    double q = 0.0;
    for (TopicId k : word_topics_[v]) {
      const double w = (hyper_.alpha(k) + c.n_dk(d_, k)) * c.n_kv(k, v) * coef_[k];
      scratch_[k] = w;
      q += w;
    }
    return {beta_v * smooth_sum_, beta_v * doc_sum_, q};
  }

  TopicId draw(WordId v, const Masses& m, double u) {
    const auto& c = state_.counts;
    const double beta_v = hyper_.beta(v);
    if (u < m.word) {
      double acc = 0.0;
      for (TopicId k : word_topics_[v]) {
        acc += scratch_[k];
        if (u < acc) return k;
      }
      return word_topics_[v].back();
    }
    u -= m.word;
    if (u < m.doc && !doc_topics_.empty()) {
      double acc = 0.0;
      for (TopicId k : doc_topics_) {
        acc += beta_v * c.n_dk(d_, k) * coef_[k];
        if (u < acc) return k;
      }
      return doc_topics_.back();
    }
    u -= m.doc;
    double acc = 0.0;
    for (std::size_t k = 0; k < K_; ++k) {
      acc += beta_v * hyper_.alpha(k) * coef_[k];
      if (u < acc) return static_cast<TopicId>(k);
    }
    return static_cast<TopicId>(K_ - 1);
  }

  /// Per-topic sum of the three bucket terms (for testing the decomposition).
  std::vector<double> per_topic(WordId v) const {
    const auto& c = state_.counts;
    const double beta_v = hyper_.beta(v);
    std::vector<double> p(K_);
    for (std::size_t k = 0; k < K_; ++k) p[k] = beta_v * hyper_.alpha(k) * coef_[k];
    for (TopicId k : doc_topics_) p[k] += beta_v * c.n_dk(d_, k) * coef_[k];
    for (TopicId k : word_topics_[v]) {
      p[k] += (hyper_.alpha(k) + c.n_dk(d_, k)) * c.n_kv(k, v) * coef_[k];
    }
    return p;
  }

 private:
  static void insert(std::vector<TopicId>& list, std::int32_t& pos, TopicId k) {
    pos = static_cast<std::int32_t>(list.size());
    list.push_back(k);
  }

  static void erase(std::vector<TopicId>& list, std::int32_t& pos, std::vector<std::int32_t>& index) {
    const TopicId moved = list.back();
    list[static_cast<std::size_t>(pos)] = moved;
    index[moved] = pos;
    list.pop_back();
    pos = -1;
  }

  void erase_word(WordId v, TopicId k) {
    auto& list = word_topics_[v];
    const std::int32_t pos = word_pos_(k, v);
    const TopicId moved = list.back();
    list[static_cast<std::size_t>(pos)] = moved;
    word_pos_(moved, v) = pos;
    list.pop_back();
    word_pos_(k, v) = -1;
  }

  SamplerState& state_;
  const Hyperparams& hyper_;
  std::size_t K_;
  std::size_t V_;
  std::vector<double> coef_;
  std::vector<std::vector<TopicId>> word_topics_;
  Matrix<std::int32_t> word_pos_;
  std::vector<TopicId> doc_topics_;
  std::vector<std::int32_t> doc_pos_;
  std::vector<double> scratch_;
  std::size_t d_ = 0;
  double smooth_sum_ = 0.0;
  double doc_sum_ = 0.0;
};

}  // namespace

std::vector<double> sparse_transition(const SamplerState& state, const Corpus& corpus,
                                      const Hyperparams& hyper, std::size_t d, std::size_t j) {
  SamplerState copy = state;
  BucketSampler buckets(copy, corpus, hyper);
  buckets.begin_document(d);
  auto p = buckets.per_topic(corpus.documents.at(d).tokens.at(j));
  double total = 0.0;
  for (double x : p) total += x;
  detail::check_mass(total, d, j);
  for (double& x : p) x /= total;
  return p;
}

SamplerState initialize_state(const Corpus& corpus, std::size_t K, const SamplingMode& mode,
                              Rng& rng, std::uint64_t seed) {
  if (K == 0) throw ArgumentError("K must be >= 1");
  mode.validate(K, corpus.vocab_size());
  Assignments z(corpus.num_docs());
  for (std::size_t d = 0; d < corpus.num_docs(); ++d) {
    const auto& doc = corpus.documents[d];
    detail::check_labels(mode, doc, d);
    z[d].resize(doc.tokens.size());
    for (auto& k : z[d]) {
      if (mode.is_labeled()) {
        k = doc.labels[rng.below(doc.labels.size())];
        if (k >= K) throw RangeError("label id exceeds K");
      } else {
        k = static_cast<TopicId>(rng.below(K));
      }
    }
  }
  return make_state(std::move(z), corpus, K, seed, 0);
}

void sweep(SamplerState& state, const Corpus& corpus, const Hyperparams& hyper,
           const SamplingMode& mode, Rng& rng) {
  const std::size_t K = state.num_topics();
  std::vector<double> p(K);
  auto& c = state.counts;
  for (std::size_t d = 0; d < corpus.num_docs(); ++d) {
    const auto& doc = corpus.documents[d];
    detail::check_labels(mode, doc, d);
    for (std::size_t j = 0; j < doc.tokens.size(); ++j) {
      remove_token(state, corpus, d, j);
      const double total = detail::conditional(c.n_dk, c.n_kv, c.n_k, hyper, mode, doc, d,
                                               doc.tokens[j], detail::kNoTopic, p);
      detail::check_mass(total, d, j);
      const TopicId k = detail::pick(p, rng.uniform() * total);
      add_token(state, corpus, d, j, k);
    }
  }
  ++state.iteration;
}

void sweep_sparse(SamplerState& state, const Corpus& corpus, const Hyperparams& hyper,
                  const SamplingMode& mode, Rng& rng) {
  if (mode.variant != SamplingVariant::train) {
    throw ArgumentError("sweep_sparse supports train mode only");
  }
  BucketSampler buckets(state, corpus, hyper);
  for (std::size_t d = 0; d < corpus.num_docs(); ++d) {
    const auto& doc = corpus.documents[d];
    if (doc.tokens.empty()) continue;
    buckets.begin_document(d);
    for (std::size_t j = 0; j < doc.tokens.size(); ++j) {
      const WordId v = doc.tokens[j];
      buckets.change(state.z[d][j], v, -1);
      const auto m = buckets.masses(v);
      const double total = m.total();
      detail::check_mass(total, d, j);
      const TopicId k = buckets.draw(v, m, rng.uniform() * total);
      state.z[d][j] = k;
      buckets.change(k, v, +1);
    }
  }
  ++state.iteration;
}

std::vector<SamplerState> run_chain(const Corpus& corpus, const Hyperparams& hyper,
                                    const SamplingMode& mode, const ChainSchedule& schedule,
                                    std::size_t chain_index, const ChainOptions& options) {
  const std::size_t K = hyper.num_topics();
  if (hyper.vocab_size() != corpus.vocab_size()) {
    throw VocabularyMismatchError("beta has " + std::to_string(hyper.vocab_size()) +
                                  " entries, corpus vocabulary has " +
                                  std::to_string(corpus.vocab_size()));
  }
  const auto wanted = schedule.snapshot_iterations(mode.variant);
  const std::uint64_t seed = chain_seed(schedule.seed, chain_index);
  Rng rng(seed);
  SamplerState state = initialize_state(corpus, K, mode, rng, seed);

  std::vector<SamplerState> snapshots;
  snapshots.reserve(wanted.size());
  std::size_t next = 0;
  for (std::size_t it = 1; next < wanted.size(); ++it) {
    if (options.sparse) {
      sweep_sparse(state, corpus, hyper, mode, rng);
    } else {
      sweep(state, corpus, hyper, mode, rng);
    }
    if (options.on_sweep) options.on_sweep(state, it);
    if (it == wanted[next]) {
      snapshots.push_back(state);
      ++next;
    }
  }
  return snapshots;
}

std::vector<std::vector<SamplerState>> run_chains(const Corpus& corpus, const Hyperparams& hyper,
                                                  const SamplingMode& mode,
                                                  const ChainSchedule& schedule,
                                                  std::size_t threads, bool sparse) {
  schedule.validate();
  std::vector<std::vector<SamplerState>> out(schedule.chains);
  ChainOptions options;
  options.sparse = sparse;
  threads = std::clamp<std::size_t>(threads, 1, schedule.chains);
  if (threads == 1) {
    for (std::size_t c = 0; c < schedule.chains; ++c) {
      out[c] = run_chain(corpus, hyper, mode, schedule, c, options);
    }
    return out;
  }
  std::vector<std::exception_ptr> errors(threads);
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < threads; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t c = w; c < schedule.chains; c += threads) {
            out[c] = run_chain(corpus, hyper, mode, schedule, c, options);
          }
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

}  // namespace cgsp
