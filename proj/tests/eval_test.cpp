#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "cgsp/errors.hpp"
#include "cgsp/estimators.hpp"
#include "cgsp/eval.hpp"
#include "cgsp/synthetic.hpp"
#include "support.hpp"

using namespace cgsp;
using cgsp::testing::make_corpus;

namespace {

RealMatrix matrix(std::initializer_list<std::initializer_list<double>> rows) {
  RealMatrix m(rows.size(), rows.begin()->size());
  std::size_t r = 0;
  for (const auto& row : rows) {
    std::size_t c = 0;
    for (double x : row) m(r, c++) = x;
    ++r;
  }
  return m;
}

RealMatrix random_stochastic(Rng& rng, std::size_t rows, std::size_t cols) {
  RealMatrix m(rows, cols);
  for (double& x : m.storage()) x = 0.01 + rng.uniform();
  normalize_rows(m);
  return m;
}

SyntheticCorpus small_synthetic(std::uint64_t seed) {
  SyntheticSpec spec;
  spec.num_docs = 40;
  spec.vocab_size = 30;
  spec.num_topics = 3;
  spec.min_length = 10;
  spec.max_length = 30;
  spec.seed = seed;
  return generate_lda(spec);
}

// Set-based F1 written from the definitions, for cross-checking.
F1Report naive_f1(const LabelSets& pred, const LabelSets& gold, std::size_t K) {
  F1Report r;
  double tp = 0, fp = 0, fn = 0, macro = 0, seen = 0, ex = 0;
  for (std::size_t k = 0; k < K; ++k) {
    double a = 0, b = 0, c = 0;
    for (std::size_t d = 0; d < gold.size(); ++d) {
      const bool in_p = std::count(pred[d].begin(), pred[d].end(), k) > 0;
      const bool in_g = std::count(gold[d].begin(), gold[d].end(), k) > 0;
      a += in_p && in_g;
      b += in_p && !in_g;
      c += !in_p && in_g;
    }
    tp += a;
    fp += b;
    fn += c;
    if (a + b + c > 0) {
      macro += 2 * a / (2 * a + b + c);
      seen += 1;
    }
  }
  for (std::size_t d = 0; d < gold.size(); ++d) {
    const std::set<LabelId> p(pred[d].begin(), pred[d].end()), g(gold[d].begin(), gold[d].end());
    if (p.empty() && g.empty()) {
      ex += 1;
      continue;
    }
    double hit = 0;
    for (LabelId k : p) hit += g.count(k);
    ex += 2 * hit / static_cast<double>(p.size() + g.size());
  }
  r.micro_f = tp + fp + fn == 0 ? 1.0 : 2 * tp / (2 * tp + fp + fn);
  r.macro_f = seen == 0 ? 1.0 : macro / seen;
  r.example_f = ex / static_cast<double>(gold.size());
  return r;
}

}  // namespace

TEST(LogLikelihood, SingleToken) {
  const Corpus c = make_corpus({{1}}, 2);
  const RealMatrix phi = matrix({{0.9, 0.1}, {0.2, 0.8}});
  const RealMatrix theta = matrix({{0.3, 0.7}});
  const double p = 0.1 * 0.3 + 0.8 * 0.7;
  const double ll = log_likelihood(c, theta, phi);
  EXPECT_NEAR(ll, std::log(p), 1e-15);
  EXPECT_NEAR(perplexity(ll, 1), 1.0 / p, 1e-12);
}

TEST(LogLikelihood, UniformModelPerplexityIsV) {
  const Corpus c = make_corpus({{0, 3, 3}, {1, 4}}, 5);
  const RealMatrix phi(1, 5, 0.2);
  const RealMatrix theta(2, 1, 1.0);
  EXPECT_NEAR(perplexity(log_likelihood(c, theta, phi), 5), 5.0, 1e-12);
}

TEST(LogLikelihood, DirectSummationAndPermutationInvariance) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t K = 1 + rng.below(5), V = 2 + rng.below(6), D = 1 + rng.below(5);
    std::vector<std::vector<WordId>> docs(D);
    for (auto& d : docs) {
      for (std::size_t j = 0, n = rng.below(10); j < n; ++j) d.push_back(static_cast<WordId>(rng.below(V)));
    }
    const RealMatrix phi = random_stochastic(rng, K, V);
    const RealMatrix theta = random_stochastic(rng, D, K);
    double ref = 0.0;
    for (std::size_t d = 0; d < D; ++d) {
      for (WordId v : docs[d]) {
        double p = 0.0;
        for (std::size_t k = 0; k < K; ++k) p += phi(k, v) * theta(d, k);
        ref += std::log(p);
      }
    }
    const double ll = log_likelihood(make_corpus(docs, V), theta, phi);
    EXPECT_NEAR(ll, ref, 1e-12 * std::max(1.0, std::abs(ref)));

    // Reverse documents (with their theta rows) and tokens.
    auto rdocs = docs;
    std::reverse(rdocs.begin(), rdocs.end());
    for (auto& d : rdocs) std::reverse(d.begin(), d.end());
    RealMatrix rtheta(D, K);
    for (std::size_t d = 0; d < D; ++d) {
      for (std::size_t k = 0; k < K; ++k) rtheta(d, k) = theta(D - 1 - d, k);
    }
    EXPECT_NEAR(log_likelihood(make_corpus(rdocs, V), rtheta, phi), ll,
                1e-12 * std::max(1.0, std::abs(ll)));
  }
}

TEST(LogLikelihood, Errors) {
  const Corpus c = make_corpus({{1}}, 2);
  EXPECT_THROW(log_likelihood(c, matrix({{1.0, 0.0}}), matrix({{1.0, 0.0}, {0.0, 1.0}})),
               NumericError);
  EXPECT_THROW(log_likelihood(c, matrix({{1.0}}), matrix({{0.5, 0.5}, {0.5, 0.5}})), ArgumentError);
  EXPECT_THROW(log_likelihood(c, matrix({{1.0}}), matrix({{1.0}})), VocabularyMismatchError);
  EXPECT_THROW(perplexity(-1.0, 0), ArgumentError);
}

TEST(HeldoutPerplexity, DeterministicAndWellFormed) {
  const auto g = small_synthetic(1);
  const HeldoutSplit split = split_heldout(g.corpus, 0.5);
  const Hyperparams h = Hyperparams::symmetric(3, 0.1, 30, 0.01);
  const ChainSchedule s = heldout_schedule(1, 9, 40);
  const auto a = heldout_perplexity(split, g.phi, h, s, ThetaKind::p);
  const auto b = heldout_perplexity(split, g.phi, h, s, ThetaKind::p);
  EXPECT_EQ(a.log_likelihood, b.log_likelihood);
  EXPECT_EQ(a.token_count, split.heldout.total_tokens());
  EXPECT_DOUBLE_EQ(a.perplexity, std::exp(-a.log_likelihood / static_cast<double>(a.token_count)));
  EXPECT_EQ(a.samples_averaged, 1u);
  EXPECT_EQ(a.phi_kind, "phi");
  EXPECT_LT(a.perplexity, 30.0);  // better than the uniform model
}

TEST(HeldoutPerplexity, ScheduleDefaults) {
  const ChainSchedule one = heldout_schedule(1, 0);
  EXPECT_EQ(one.snapshot_iterations(SamplingVariant::predict), (std::vector<std::size_t>{200}));
  const ChainSchedule many = heldout_schedule(3, 0);
  EXPECT_EQ(many.snapshot_iterations(SamplingVariant::predict),
            (std::vector<std::size_t>{55, 60, 65}));
  EXPECT_THROW(heldout_schedule(0, 0), ArgumentError);
}

TEST(HeldoutPerplexity, GridHasFourRowsInOrder) {
  const auto g = small_synthetic(2);
  const HeldoutSplit split = split_heldout(g.corpus, 0.5);
  const Hyperparams h = Hyperparams::symmetric(3, 0.1, 30, 0.01);
  const SamplerState s = run_chain(g.corpus, h, SamplingMode::train(), ChainSchedule::fixed_budget(30, 2), 0)[0];
  const auto grid = perplexity_grid(split, phi_standard(s.counts, h), phi_p(s, g.corpus, h), h,
                                    heldout_schedule(2, 2));
  ASSERT_EQ(grid.size(), 4u);
  EXPECT_EQ(grid[0].phi_kind, "phi");
  EXPECT_EQ(grid[0].theta_kind, ThetaKind::standard);
  EXPECT_EQ(grid[1].theta_kind, ThetaKind::p);
  EXPECT_EQ(grid[2].phi_kind, "phi_p");
  EXPECT_EQ(grid[3].theta_kind, ThetaKind::p);
  for (const auto& r : grid) EXPECT_EQ(r.samples_averaged, 2u);
}

TEST(HeldoutPerplexity, ThetaKindNames) {
  EXPECT_EQ(theta_kind_from_string(to_string(ThetaKind::p)), ThetaKind::p);
  EXPECT_EQ(theta_kind_from_string(to_string(ThetaKind::standard)), ThetaKind::standard);
  EXPECT_THROW(theta_kind_from_string("phi"), ConfigError);
}

TEST(F1, PerfectPredictions) {
  const LabelSets gold{{0, 2}, {1}, {}};
  const F1Report r = f1_metrics(gold, gold, 3);
  EXPECT_EQ(r.micro_f, 1.0);
  EXPECT_EQ(r.macro_f, 1.0);
  EXPECT_EQ(r.example_f, 1.0);
}

TEST(F1, HandExample) {
  const F1Report r = f1_metrics({{0}, {0}}, {{0}, {1}}, 2);
  EXPECT_DOUBLE_EQ(r.micro_f, 0.5);
  EXPECT_DOUBLE_EQ(r.macro_f, 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(r.example_f, 0.5);
  EXPECT_EQ(r.per_label[0].tp, 1u);
  EXPECT_EQ(r.per_label[0].fp, 1u);
  EXPECT_EQ(r.per_label[1].fn, 1u);
  EXPECT_DOUBLE_EQ(r.per_label[0].f1, 2.0 / 3.0);
}

TEST(F1, Conventions) {
  const F1Report empty = f1_metrics({{}}, {{}}, 3);
  EXPECT_EQ(empty.example_f, 1.0);
  EXPECT_EQ(empty.micro_f, 1.0);
  EXPECT_EQ(empty.macro_f, 1.0);
  const F1Report miss = f1_metrics({{}}, {{1}}, 3);
  EXPECT_EQ(miss.example_f, 0.0);
  EXPECT_EQ(miss.per_label[1].precision, 0.0);
  EXPECT_EQ(miss.per_label[1].f1, 0.0);
  EXPECT_EQ(miss.macro_f, 0.0);  // labels 0 and 2 never appear
  EXPECT_THROW(f1_metrics({{}}, {}, 1), ArgumentError);
  EXPECT_THROW(f1_metrics({{5}}, {{0}}, 2), RangeError);
}

TEST(F1, AgreesWithNaiveImplementation) {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t K = 1 + rng.below(6), D = 1 + rng.below(10);
    LabelSets pred(D), gold(D);
    for (std::size_t d = 0; d < D; ++d) {
      for (LabelId k = 0; k < K; ++k) {
        if (rng.uniform() < 0.3) pred[d].push_back(k);
        if (rng.uniform() < 0.3) gold[d].push_back(k);
      }
    }
    const F1Report a = f1_metrics(pred, gold, K), b = naive_f1(pred, gold, K);
    EXPECT_NEAR(a.micro_f, b.micro_f, 1e-12);
    EXPECT_NEAR(a.macro_f, b.macro_f, 1e-12);
    EXPECT_NEAR(a.example_f, b.example_f, 1e-12);
    for (const auto& s : a.per_label) {
      EXPECT_GE(s.precision, 0.0);
      EXPECT_LE(s.precision, 1.0);
      EXPECT_GE(s.recall, 0.0);
      EXPECT_LE(s.recall, 1.0);
    }
  }
}

TEST(WordAssociation, SingleTopicFollowsPhi) {
  const RealMatrix phi = matrix({{0.1, 0.5, 0.15, 0.25}});
  const auto r = word_association(phi, 0, {1, 2, 3});
  EXPECT_EQ(r[0].word, 1u);
  EXPECT_EQ(r[1].word, 3u);
  EXPECT_EQ(r[2].word, 2u);
  EXPECT_DOUBLE_EQ(r[0].score, 0.5);
  EXPECT_EQ(r[2].rank, 3u);
}

TEST(WordAssociation, DeterministicTopics) {
  const RealMatrix phi = matrix({{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}});
  const auto s = association_scores(phi, 1);
  EXPECT_EQ(s, (std::vector<double>{0.0, 1.0, 0.0}));
}

TEST(WordAssociation, HandExample) {
  const RealMatrix phi = matrix({{0.9, 0.1}, {0.2, 0.8}});
  const auto s = association_scores(phi, 0);
  EXPECT_NEAR(s[1], 0.1 * 0.9 / 1.1 + 0.8 * 0.2 / 1.1, 1e-15);
  EXPECT_NEAR(s[1], 0.2273, 1e-4);
}

TEST(WordAssociation, TopicPermutationInvariance) {
  Rng rng(8);
  const RealMatrix phi = random_stochastic(rng, 5, 12);
  RealMatrix perm(5, 12);
  const std::vector<std::size_t> order{3, 0, 4, 1, 2};
  for (std::size_t k = 0; k < 5; ++k) {
    for (std::size_t v = 0; v < 12; ++v) perm(k, v) = phi(order[k], v);
  }
  const auto a = association_scores(phi, 4), b = association_scores(perm, 4);
  for (std::size_t v = 0; v < 12; ++v) EXPECT_NEAR(a[v], b[v], 1e-15);
  EXPECT_EQ(association_ranks(phi, 4, {0, 5, 11}), association_ranks(perm, 4, {0, 5, 11}));
}

TEST(WordAssociation, RanksExcludeCue) {
  const RealMatrix phi = matrix({{0.4, 0.3, 0.2, 0.1}});
  EXPECT_EQ(association_ranks(phi, 0, {1, 2, 3}), (std::vector<std::size_t>{1, 2, 3}));
  const RealMatrix tied = matrix({{0.25, 0.25, 0.25, 0.25}});
  EXPECT_EQ(association_ranks(tied, 1, {0, 2, 3}), (std::vector<std::size_t>{1, 2, 3}));
  const RealMatrix dead = matrix({{0.5, 0.5, 0.0}});
  EXPECT_THROW(association_scores(dead, 2), DomainError);
}

TEST(Trace, Cvb0IsDeterministic) {
  const auto g = small_synthetic(3);
  const Hyperparams h = Hyperparams::symmetric(3, 0.1, 30, 0.01);
  const auto a = convergence_trace(g.corpus, h, Algorithm::cvb0, 12, 5);
  const auto b = convergence_trace(g.corpus, h, Algorithm::cvb0, 12, 5);
  ASSERT_EQ(a.size(), 12u);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].log_likelihood, b[i].log_likelihood);
}

TEST(Trace, RecordingCadenceAndTiming) {
  const auto g = small_synthetic(4);
  const Hyperparams h = Hyperparams::symmetric(3, 0.1, 30, 0.01);
  TraceOptions opt;
  opt.every = 4;
  const auto t = convergence_trace(g.corpus, h, Algorithm::cgs_p, 10, 1, opt);
  ASSERT_EQ(t.size(), 3u);
  EXPECT_EQ(t[0].iteration, 4u);
  EXPECT_EQ(t[2].iteration, 10u);
  for (std::size_t i = 1; i < t.size(); ++i) EXPECT_GE(t[i].sweep_seconds, t[i - 1].sweep_seconds);
  for (const auto& p : t) EXPECT_DOUBLE_EQ(p.wall_clock, p.sweep_seconds + p.estimator_seconds);
  EXPECT_THROW(convergence_trace(g.corpus, h, Algorithm::cgs, 0, 1), ArgumentError);
}

TEST(Trace, CgsAndCgsPShareTheChain) {
  const auto g = small_synthetic(5);
  const Hyperparams h = Hyperparams::symmetric(3, 0.1, 30, 0.01);
  const auto a = convergence_trace(g.corpus, h, Algorithm::cgs, 30, 2);
  const auto b = convergence_trace(g.corpus, h, Algorithm::cgs_p, 30, 2);
  // Reconstruct the chain and compare both estimators at the final state.
  const SamplerState s = run_chain(g.corpus, h, SamplingMode::train(), ChainSchedule::fixed_budget(30, 2), 0)[0];
  EXPECT_EQ(a.back().log_likelihood,
            log_likelihood(g.corpus, theta_standard(s.counts, h), phi_standard(s.counts, h)));
  const CgspEstimates e = cgsp_estimates(s, g.corpus, h, SamplingMode::train());
  EXPECT_EQ(b.back().log_likelihood, log_likelihood(g.corpus, e.theta, e.phi));
}

TEST(Trace, AlgorithmNames) {
  for (auto a : {Algorithm::cgs, Algorithm::cgs_p, Algorithm::cvb0}) {
    EXPECT_EQ(algorithm_from_string(to_string(a)), a);
  }
  EXPECT_THROW(algorithm_from_string("vb"), ConfigError);
}

TEST(Overhead, ReportsPositiveTimes) {
  const auto g = small_synthetic(6);
  const OverheadReport r = measure_overhead(g.corpus, Hyperparams::symmetric(3, 0.1, 30, 0.01), 5, 5, 1);
  EXPECT_EQ(r.num_topics, 3u);
  EXPECT_EQ(r.tokens, g.corpus.total_tokens());
  EXPECT_GT(r.sweep_seconds, 0.0);
  EXPECT_GT(r.recovery_seconds, 0.0);
}
