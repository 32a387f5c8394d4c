#include "cgsp/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/distributions/binomial.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "cgsp/errors.hpp"
#include "cgsp/estimators.hpp"

namespace cgsp::oracle {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::size_t enumeration_size(std::size_t K, std::size_t N, std::size_t cap) {
  std::size_t total = 1;
  for (std::size_t i = 0; i < N; ++i) {
    if (total > cap / K) {
      throw SizeError("enumeration of " + std::to_string(K) + "^" + std::to_string(N) +
                      " assignments exceeds the cap of " + std::to_string(cap));
    }
    total *= K;
  }
  if (total > cap) throw SizeError("enumeration exceeds the cap of " + std::to_string(cap));
  return total;
}

std::vector<TopicId> decode(std::size_t i, std::size_t K, std::size_t N) {
  std::vector<TopicId> z(N);
  for (std::size_t j = 0; j < N; ++j) {
    z[j] = static_cast<TopicId>(i % K);
    i /= K;
  }
  return z;
}

// Normalizes log weights into probabilities with a single max shift.
std::vector<double> normalize_logs(const std::vector<double>& logs) {
  const double top = *std::max_element(logs.begin(), logs.end());
  if (!std::isfinite(top)) throw NumericError("every enumerated assignment has zero probability");
  std::vector<double> p(logs.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logs.size(); ++i) {
    p[i] = std::exp(logs[i] - top);
    total += p[i];
  }
  for (double& x : p) x /= total;
  return p;
}

double draw(const std::vector<double>& weights, double total, Rng& rng) {
  const double u = rng.uniform() * total;
  double acc = 0.0;
  std::size_t last = 0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (weights[k] <= 0.0) continue;
    acc += weights[k];
    last = k;
    if (u < acc) return static_cast<double>(k);
  }
  return static_cast<double>(last);
}

bool allowed(const SamplingMode& mode, const Document& doc, TopicId k) {
  return !mode.is_labeled() || doc.has_label(k);
}

}  // namespace

std::vector<TopicId> EnumerablePosterior::assignment(std::size_t i) const {
  return decode(i, num_topics, tokens.size());
}

EnumerablePosterior exact_posterior(const Document& doc, const RealMatrix& phi,
                                    const std::vector<double>& alpha, std::size_t cap) {
  const std::size_t K = phi.rows();
  if (K == 0 || alpha.size() != K) throw ArgumentError("phi and alpha disagree on K");
  for (WordId v : doc.tokens) {
    if (v >= phi.cols()) throw VocabularyMismatchError("token outside the phi vocabulary");
  }
  const std::size_t N = doc.tokens.size();
  const std::size_t total = enumeration_size(K, N, cap);

  EnumerablePosterior post;
  post.num_topics = K;
  post.tokens = doc.tokens;
  post.log_weights.resize(total);

  const double alpha_sum = std::accumulate(alpha.begin(), alpha.end(), 0.0);
  double log_alpha_norm = std::lgamma(alpha_sum) - std::lgamma(static_cast<double>(N) + alpha_sum);
  for (double a : alpha) log_alpha_norm -= std::lgamma(a);

  std::vector<std::size_t> n(K);
  for (std::size_t i = 0; i < total; ++i) {
    const auto z = decode(i, K, N);
    std::fill(n.begin(), n.end(), 0);
    double lw = log_alpha_norm;
    for (std::size_t j = 0; j < N; ++j) {
      const double p = phi(z[j], doc.tokens[j]);
      lw += p > 0.0 ? std::log(p) : kNegInf;
      ++n[z[j]];
    }
    for (std::size_t k = 0; k < K; ++k) lw += std::lgamma(static_cast<double>(n[k]) + alpha[k]);
    post.log_weights[i] = lw;
  }
  post.probs = normalize_logs(post.log_weights);
  return post;
}

RealMatrix posterior_marginals(const EnumerablePosterior& post) {
  const std::size_t N = post.tokens.size();
  RealMatrix m(N, post.num_topics);
  for (std::size_t i = 0; i < post.size(); ++i) {
    const auto z = post.assignment(i);
    for (std::size_t j = 0; j < N; ++j) m(j, z[j]) += post.probs[i];
  }
  return m;
}

std::vector<double> theta_bar(const EnumerablePosterior& post, const std::vector<double>& alpha) {
  const std::size_t K = post.num_topics;
  const std::size_t N = post.tokens.size();
  const double denom = static_cast<double>(N) + std::accumulate(alpha.begin(), alpha.end(), 0.0);
  std::vector<double> out(K, 0.0);
  std::vector<double> n(K);
  for (std::size_t i = 0; i < post.size(); ++i) {
    const auto z = post.assignment(i);
    std::fill(n.begin(), n.end(), 0.0);
    for (TopicId k : z) n[k] += 1.0;
    for (std::size_t k = 0; k < K; ++k) out[k] += post.probs[i] * (n[k] + alpha[k]) / denom;
  }
  return out;
}

std::size_t sample_posterior(const EnumerablePosterior& post, Rng& rng) {
  return static_cast<std::size_t>(draw(post.probs, 1.0, rng));
}

std::vector<double> token_transition(const std::vector<WordId>& tokens,
                                     const std::vector<TopicId>& z, const RealMatrix& phi,
                                     const std::vector<double>& alpha, std::size_t j) {
  const std::size_t K = phi.rows();
  std::vector<double> n(K, 0.0);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i != j) n[z[i]] += 1.0;
  }
  std::vector<double> p(K);
  double total = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    p[k] = phi(k, tokens[j]) * (n[k] + alpha[k]);
    total += p[k];
  }
  if (!(total > 0.0)) throw NumericError("one-site conditional has zero mass");
  for (double& x : p) x /= total;
  return p;
}

std::vector<double> theta_finite_L(const EnumerablePosterior& post,
                                   const std::vector<double>& alpha, std::size_t S,
                                   std::optional<std::size_t> L, std::uint64_t seed) {
  if (S == 0) throw ArgumentError("theta_finite_L needs S >= 1");
  if (L && *L == 0) throw ArgumentError("theta_finite_L needs L >= 1");
  const std::size_t K = post.num_topics;
  const std::size_t N = post.tokens.size();
  Rng rng(seed);
  std::vector<double> acc(K, 0.0);
  std::vector<double> p(K);
  for (std::size_t s = 0; s < S; ++s) {
    const std::size_t idx = sample_posterior(post, rng);
    const auto z = post.assignment(idx);
    for (std::size_t j = 0; j < N; ++j) {
      // p(z_j = k | z_-j) is proportional to the joint weight of the
      // assignment with position j set to k.
      std::size_t stride = 1;
      for (std::size_t i = 0; i < j; ++i) stride *= K;
      const std::size_t base = idx - static_cast<std::size_t>(z[j]) * stride;
      double total = 0.0;
      for (std::size_t k = 0; k < K; ++k) total += (p[k] = post.probs[base + k * stride]);
      if (!(total > 0.0)) throw NumericError("one-site conditional has zero mass");
      if (!L) {
        for (std::size_t k = 0; k < K; ++k) acc[k] += p[k] / total;
      } else {
        const double w = 1.0 / static_cast<double>(*L);
        for (std::size_t l = 0; l < *L; ++l) acc[static_cast<std::size_t>(draw(p, total, rng))] += w;
      }
    }
  }
  const double denom = static_cast<double>(N) + std::accumulate(alpha.begin(), alpha.end(), 0.0);
  std::vector<double> out(K);
  for (std::size_t k = 0; k < K; ++k) {
    out[k] = (acc[k] / static_cast<double>(S) + alpha[k]) / denom;
  }
  return out;
}

std::vector<TopicId> CorpusPosterior::assignment(std::size_t i) const {
  return decode(i, num_topics, num_tokens);
}

CorpusPosterior exact_collapsed_posterior(const Corpus& corpus, const Hyperparams& hyper,
                                          const SamplingMode& mode, std::size_t cap) {
  if (mode.is_predict()) throw ArgumentError("collapsed posterior needs a training mode");
  const std::size_t K = hyper.num_topics();
  const std::size_t V = corpus.vocab_size();
  if (hyper.vocab_size() != V) throw VocabularyMismatchError("beta length does not match corpus");
  const std::size_t N = corpus.total_tokens();
  const std::size_t D = corpus.num_docs();
  const std::size_t total = enumeration_size(K, N, cap);

  std::vector<std::size_t> doc_of;
  std::vector<WordId> word;
  for (std::size_t d = 0; d < D; ++d) {
    for (WordId v : corpus.documents[d].tokens) {
      doc_of.push_back(d);
      word.push_back(v);
    }
  }

  const auto& alpha = hyper.alpha();
  const auto& beta = hyper.beta();
  std::vector<double> logs(total);
  std::vector<double> ndk(D * K), nkv(K * V), nk(K);
  for (std::size_t i = 0; i < total; ++i) {
    const auto z = decode(i, K, N);
    bool ok = true;
    for (std::size_t t = 0; t < N && ok; ++t) ok = allowed(mode, corpus.documents[doc_of[t]], z[t]);
    if (!ok) {
      logs[i] = kNegInf;
      continue;
    }
    std::fill(ndk.begin(), ndk.end(), 0.0);
    std::fill(nkv.begin(), nkv.end(), 0.0);
    std::fill(nk.begin(), nk.end(), 0.0);
    for (std::size_t t = 0; t < N; ++t) {
      ndk[doc_of[t] * K + z[t]] += 1.0;
      nkv[z[t] * V + word[t]] += 1.0;
      nk[z[t]] += 1.0;
    }
    // Terms that do not depend on z are dropped.
    double lw = 0.0;
    for (std::size_t d = 0; d < D; ++d) {
      const Document& doc = corpus.documents[d];
      for (std::size_t k = 0; k < K; ++k) {
        if (!allowed(mode, doc, static_cast<TopicId>(k))) continue;
        lw += std::lgamma(ndk[d * K + k] + alpha[k]);
      }
      if (mode.is_labeled()) {
        double label_alpha = 0.0;
        for (LabelId k : doc.labels) label_alpha += alpha[k];
        lw -= std::lgamma(static_cast<double>(doc.tokens.size()) + label_alpha);
      }
    }
    for (std::size_t k = 0; k < K; ++k) {
      for (std::size_t v = 0; v < V; ++v) lw += std::lgamma(nkv[k * V + v] + beta[v]);
      lw -= std::lgamma(nk[k] + hyper.beta_sum());
    }
    logs[i] = lw;
  }
  CorpusPosterior post;
  post.num_topics = K;
  post.num_tokens = N;
  post.probs = normalize_logs(logs);
  return post;
}

RealMatrix posterior_marginals(const CorpusPosterior& post) {
  RealMatrix m(post.num_tokens, post.num_topics);
  for (std::size_t i = 0; i < post.probs.size(); ++i) {
    if (post.probs[i] == 0.0) continue;
    const auto z = post.assignment(i);
    for (std::size_t t = 0; t < post.num_tokens; ++t) m(t, z[t]) += post.probs[i];
  }
  return m;
}

RealMatrix fixed_phi_marginals(const Corpus& corpus, const RealMatrix& phi,
                               const std::vector<double>& alpha, std::size_t cap) {
  RealMatrix out(corpus.total_tokens(), phi.rows());
  std::size_t t = 0;
  for (const Document& doc : corpus.documents) {
    const RealMatrix m = posterior_marginals(exact_posterior(doc, phi, alpha, cap));
    for (std::size_t j = 0; j < m.rows(); ++j, ++t) {
      std::copy(m.row(j).begin(), m.row(j).end(), out.row(t).begin());
    }
  }
  return out;
}

namespace {

// Single-site perturbation of token t to topic k, with its weight relative
// to the unperturbed state.
struct Perturbation {
  std::size_t t;
  TopicId from;
  TopicId to;
  WordId word;
  long double weight;
};

struct Neighbourhood {
  std::vector<Perturbation> moves;
  long double total_weight = 1.0L;  // the unperturbed state has weight 1
};

Neighbourhood neighbourhood(const SamplerState& state, const Corpus& corpus,
                            const Hyperparams& hyper, const SamplingMode& mode) {
  if (mode.is_predict()) throw ArgumentError("bound check needs a training-mode state");
  const std::size_t K = state.num_topics();
  const auto& c = state.counts;
  const auto& alpha = hyper.alpha();
  const long double B = hyper.beta_sum();
  Neighbourhood nb;
  std::vector<long double> T(K);
  std::size_t t = 0;
  for (std::size_t d = 0; d < corpus.num_docs(); ++d) {
    const Document& doc = corpus.documents[d];
    for (std::size_t j = 0; j < doc.tokens.size(); ++j, ++t) {
      const WordId v = doc.tokens[j];
      const TopicId z = state.z[d][j];
      // Collapsed conditional with the token removed; p(z') / p(z) for a
      // single-site change equals T(k') / T(z).
      for (std::size_t k = 0; k < K; ++k) {
        if (!allowed(mode, doc, static_cast<TopicId>(k))) {
          T[k] = 0.0L;
          continue;
        }
        const long double sub = (k == z) ? 1.0L : 0.0L;
        T[k] = (static_cast<long double>(c.n_kv(k, v)) - sub + hyper.beta(v)) /
               (static_cast<long double>(c.n_k[k]) - sub + B) *
               (static_cast<long double>(c.n_dk(d, k)) - sub + alpha[k]);
      }
      for (std::size_t k = 0; k < K; ++k) {
        if (k == z || T[k] == 0.0L) continue;
        const long double w = T[k] / T[z];
        nb.moves.push_back({t, z, static_cast<TopicId>(k), v, w});
        nb.total_weight += w;
      }
    }
  }
  return nb;
}

BoundCheck check_cell(const Neighbourhood& nb, const SamplerState& state, const Hyperparams& hyper,
                      TopicId k, WordId v) {
  const auto& c = state.counts;
  const long double n = static_cast<long double>(c.n_k[k]);
  if (n <= 0.0L) {
    throw DomainError("bound check needs n_k > 0 (topic " + std::to_string(k) + " is empty)");
  }
  const long double B = hyper.beta_sum();
  const long double beta = hyper.beta(v);
  const long double nkv = static_cast<long double>(c.n_kv(k, v));
  const long double base = n + B;

  // Same operation order for the true and fixed-denominator sums so that
  // term-wise inequalities survive rounding.
  long double middle = (nkv + beta) / base;
  long double fixed = (nkv + beta) / base;
  int o_min = 0;
  int o_max = 0;
  long double unaffected = 0.0L;
  for (const Perturbation& m : nb.moves) {
    int o = 0;
    if (m.to == k) o = 1;
    if (m.from == k) o = -1;
    if (o == 0) {
      unaffected += m.weight;
      continue;
    }
    const long double num = nkv + ((m.word == v) ? static_cast<long double>(o) : 0.0L) + beta;
    middle += m.weight * (num / (base + o));
    fixed += m.weight * (num / base);
    o_min = std::min(o_min, o);
    o_max = std::max(o_max, o);
  }
  middle += unaffected * ((nkv + beta) / base);
  fixed += unaffected * ((nkv + beta) / base);
  middle /= nb.total_weight;
  fixed /= nb.total_weight;

  BoundCheck out;
  out.middle = static_cast<double>(middle);
  out.fixed_denominator = static_cast<double>(fixed);
  out.lower = static_cast<double>(fixed * (base / (base + o_max)));
  out.upper = static_cast<double>(fixed * (base / (base + o_min)));
  out.analytic_lower = static_cast<double>(fixed * (base / (base + 1)));
  out.analytic_upper = static_cast<double>(fixed * (base / (base - 1)));
  return out;
}

void check_bound_args(const SamplerState& state, const Corpus& corpus, const Hyperparams& hyper) {
  if (state.z.size() != corpus.num_docs()) throw ArgumentError("state does not match corpus");
  if (hyper.num_topics() != state.num_topics()) throw ArgumentError("alpha length does not match K");
  if (hyper.vocab_size() != corpus.vocab_size() || state.counts.vocab_size() != corpus.vocab_size()) {
    throw VocabularyMismatchError("state, corpus and beta disagree on the vocabulary size");
  }
}

}  // namespace

BoundCheck phi_p_bound_check(const SamplerState& state, const Corpus& corpus,
                             const Hyperparams& hyper, TopicId k, WordId v,
                             const SamplingMode& mode) {
  check_bound_args(state, corpus, hyper);
  if (k >= state.num_topics() || v >= corpus.vocab_size()) throw RangeError("(k, v) out of range");
  if (state.counts.n_k[k] <= 0) {
    throw DomainError("bound check needs n_k > 0 (topic " + std::to_string(k) + " is empty)");
  }
  return check_cell(neighbourhood(state, corpus, hyper, mode), state, hyper, k, v);
}

BoundTable phi_p_bound_table(const SamplerState& state, const Corpus& corpus,
                             const Hyperparams& hyper, const SamplingMode& mode) {
  check_bound_args(state, corpus, hyper);
  const Neighbourhood nb = neighbourhood(state, corpus, hyper, mode);
  BoundTable table;
  table.num_topics = state.num_topics();
  table.vocab_size = corpus.vocab_size();
  table.cells.resize(table.num_topics * table.vocab_size);
  for (std::size_t k = 0; k < table.num_topics; ++k) {
    if (state.counts.n_k[k] <= 0) continue;
    for (std::size_t v = 0; v < table.vocab_size; ++v) {
      table.cells[k * table.vocab_size + v] =
          check_cell(nb, state, hyper, static_cast<TopicId>(k), static_cast<WordId>(v));
    }
  }
  return table;
}

std::size_t BoundTable::violations() const {
  return static_cast<std::size_t>(std::count_if(
      cells.begin(), cells.end(), [](const auto& c) { return c && !c->holds(); }));
}

double BoundTable::mean_relative_width() const {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& c : cells) {
    if (!c) continue;
    sum += (c->analytic_upper - c->analytic_lower) / c->middle;
    ++n;
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

double BoundTable::mean_topic_gap() const {
  double sum = 0.0;
  for (const auto& c : cells) {
    if (c) sum += std::abs(c->middle - c->fixed_denominator);
  }
  return num_topics == 0 ? 0.0 : sum / static_cast<double>(num_topics);
}

std::vector<GapPoint> approximation_gap_curve(const Corpus& corpus, const Hyperparams& hyper,
                                              const std::vector<std::size_t>& subset_sizes,
                                              std::size_t iters, std::uint64_t seed) {
  ChainSchedule schedule = ChainSchedule::unsupervised_training(seed);
  schedule.total_train_iters = iters;
  std::vector<GapPoint> curve;
  for (std::size_t size : subset_sizes) {
    if (size == 0 || size > corpus.num_docs()) throw ArgumentError("subset size out of range");
    const Corpus sub = select_documents(corpus, 0, size);
    const SamplerState state = run_chain(sub, hyper, SamplingMode::train(), schedule, 0).back();
    const BoundTable table = phi_p_bound_table(state, sub, hyper);
    GapPoint point;
    point.documents = size;
    point.mean_topic_count = static_cast<double>(sub.total_tokens()) /
                             static_cast<double>(hyper.num_topics());
    point.mean_relative_width = table.mean_relative_width();
    point.mean_topic_gap = table.mean_topic_gap();
    point.violations = table.violations();
    curve.push_back(point);
  }
  return curve;
}

double hard_soft_divergence(const SamplerState& state, const Corpus& corpus,
                            const Hyperparams& hyper, const SamplingMode& mode) {
  const SoftCounts soft = soft_counts(state, corpus, hyper, mode);
  const std::size_t D = corpus.num_docs();
  if (D == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t d = 0; d < D; ++d) {
    for (std::size_t k = 0; k < state.num_topics(); ++k) {
      sum += std::abs(static_cast<double>(state.counts.n_dk(d, k)) - soft.m_dk(d, k));
    }
  }
  return sum / static_cast<double>(D);
}

double chi_square_pvalue(double statistic, double dof) {
  if (dof <= 0.0) return 1.0;
  if (statistic <= 0.0) return 1.0;
  return boost::math::gamma_q(dof / 2.0, statistic / 2.0);
}

double goodness_of_fit_pvalue(const std::vector<std::size_t>& observed,
                              const std::vector<double>& expected_probs) {
  if (observed.size() != expected_probs.size()) throw ArgumentError("cell count mismatch");
  const double n = static_cast<double>(std::accumulate(observed.begin(), observed.end(), std::size_t{0}));
  double stat = 0.0;
  std::size_t cells = 0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    if (expected_probs[i] <= 0.0) {
      if (observed[i] != 0) return 0.0;
      continue;
    }
    const double e = n * expected_probs[i];
    const double diff = static_cast<double>(observed[i]) - e;
    stat += diff * diff / e;
    ++cells;
  }
  return chi_square_pvalue(stat, static_cast<double>(cells) - 1.0);
}

double sign_test_pvalue(std::size_t successes, std::size_t trials) {
  if (successes > trials) throw ArgumentError("more successes than trials");
  if (successes == 0) return 1.0;
  const boost::math::binomial_distribution<double> dist(static_cast<double>(trials), 0.5);
  return boost::math::cdf(boost::math::complement(dist, static_cast<double>(successes - 1)));
}

}  // namespace cgsp::oracle
