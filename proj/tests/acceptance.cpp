// Acceptance suite: one PASS/FAIL line per criterion. With arguments, runs
// only the listed criterion numbers. Exit status is nonzero if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "cgsp/cvb0.hpp"
#include "cgsp/estimators.hpp"
#include "cgsp/eval.hpp"
#include "cgsp/oracle.hpp"
#include "cgsp/priorlda.hpp"
#include "cgsp/sampler.hpp"
#include "cgsp/synthetic.hpp"
#include "support.hpp"

using namespace cgsp;
using cgsp::testing::make_corpus;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

RealMatrix matrix_from(std::size_t rows, std::size_t cols, const std::vector<double>& values) {
  RealMatrix m(rows, cols);
  std::copy(values.begin(), values.end(), m.storage().begin());
  return m;
}

double max_abs_diff(const RealMatrix& a, const RealMatrix& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(a.storage()[i] - b.storage()[i]));
  }
  return worst;
}

double squared_error(std::span<const double> a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < b.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return s;
}

RealMatrix random_stochastic(std::size_t rows, std::size_t cols, Rng& rng) {
  RealMatrix m(rows, cols);
  for (double& x : m.storage()) x = rng.gamma(0.7) + 1e-3;
  normalize_rows(m);
  return m;
}

struct FixedPhiFixture {
  std::string name;
  std::vector<WordId> tokens;
  RealMatrix phi;
  std::vector<double> alpha;
};

std::vector<FixedPhiFixture> fixed_phi_fixtures() {
  std::vector<FixedPhiFixture> fx;
  fx.push_back({"N2K2V2", {0, 1}, matrix_from(2, 2, {0.8, 0.2, 0.3, 0.7}), {0.5, 0.5}});
  fx.push_back({"N4K2V3",
                {0, 2, 1, 2},
                matrix_from(2, 3, {0.6, 0.3, 0.1, 0.1, 0.2, 0.7}),
                {0.3, 0.9}});
  fx.push_back({"N5K3V3",
                {0, 1, 2, 1, 0},
                matrix_from(3, 3, {0.7, 0.2, 0.1, 0.1, 0.8, 0.1, 0.3, 0.3, 0.4}),
                {0.1, 0.1, 0.1}});
  fx.push_back({"N6K3V4",
                {3, 0, 1, 3, 2, 2},
                matrix_from(3, 4, {0.4, 0.3, 0.2, 0.1, 0.1, 0.1, 0.4, 0.4, 0.25, 0.25, 0.25, 0.25}),
                {0.5, 1.0, 0.2}});
  fx.push_back({"N8K3V4",
                {0, 1, 2, 3, 0, 1, 2, 3},
                matrix_from(3, 4, {0.5, 0.3, 0.1, 0.1, 0.1, 0.5, 0.3, 0.1, 0.1, 0.1, 0.3, 0.5}),
                {0.2, 0.2, 0.2}});
  return fx;
}

// --- 1 ----------------------------------------------------------------------

Outcome criterion_oracle_theta() {
  const std::size_t S = 10000;
  bool pass = true;
  std::string detail;
  for (const auto& f : fixed_phi_fixtures()) {
    const auto t0 = std::chrono::steady_clock::now();
    const Corpus c = make_corpus({f.tokens}, f.phi.cols());
    const Hyperparams h(f.alpha, std::vector<double>(f.phi.cols(), 1.0));
    const SamplingMode mode = SamplingMode::predict(f.phi);
    const auto post = oracle::exact_posterior(c.documents[0], f.phi, f.alpha);
    const auto bar = oracle::theta_bar(post, f.alpha);
    const RealMatrix exact = matrix_from(1, bar.size(), bar);
    const auto snaps = run_chain(c, h, mode, ChainSchedule::averaged(S, 1, 17), 0);
    const double e_naive = max_abs_diff(theta_naive_mc(snaps, h), exact);
    const double e_p = max_abs_diff(theta_p(snaps, c, h, mode), exact);
    const double secs = seconds_since(t0);
    const bool ok = e_naive <= 1e-2 && e_p <= 1e-2 && secs <= 60.0;
    pass = pass && ok;
    detail += fmt("%s naive=%.4f p=%.4f %.1fs; ", f.name.c_str(), e_naive, e_p, secs);
  }
  return {pass, detail};
}

// --- 2 ----------------------------------------------------------------------

Outcome criterion_single_sample() {
  const auto f = fixed_phi_fixtures()[3];
  const Corpus c = make_corpus({f.tokens}, f.phi.cols());
  const Hyperparams h(f.alpha, std::vector<double>(f.phi.cols(), 1.0));
  const SamplingMode mode = SamplingMode::predict(f.phi);
  const auto bar = oracle::theta_bar(oracle::exact_posterior(c.documents[0], f.phi, f.alpha), f.alpha);
  const std::size_t trials = 200;
  double mse_std = 0.0, mse_p = 0.0;
  std::size_t wins = 0, decided = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    const auto snaps = run_chain(c, h, mode, ChainSchedule::averaged(1, 1, 1000 + t), 0);
    const double es = squared_error(theta_standard(snaps[0].counts, h).row(0), bar);
    const double ep = squared_error(theta_p(snaps, c, h, mode).row(0), bar);
    mse_std += es;
    mse_p += ep;
    if (ep != es) {
      ++decided;
      if (ep < es) ++wins;
    }
  }
  mse_std /= trials;
  mse_p /= trials;
  const double pv = oracle::sign_test_pvalue(wins, decided);
  return {mse_p < mse_std && pv < 0.01,
          fmt("%s trials=%zu MSE(theta_p)=%.5f MSE(theta)=%.5f wins=%zu/%zu sign p=%.3g",
              f.name.c_str(), trials, mse_p, mse_std, wins, decided, pv)};
}

// --- 3 ----------------------------------------------------------------------

Outcome criterion_sampler_marginals() {
  // Pearson's test wants independent draws; tallies are taken every `lag`
  // sweeps so that consecutive draws are nearly uncorrelated.
  const std::size_t seeds = 10, draws = 20000, burn_in = 100, lag = 10;

  struct Cells {
    std::size_t total = 0, good = 0;
    void add(const std::vector<double>& p) {
      total += p.size();
      for (double x : p) good += x > 0.01 ? 1 : 0;
    }
    double fraction() const { return static_cast<double>(good) / static_cast<double>(total); }
  };

  // fixed-phi chains
  Cells predict;
  {
    struct P {
      Corpus c;
      RealMatrix phi;
      std::vector<double> alpha;
    };
    std::vector<P> fx;
    fx.push_back({make_corpus({{0, 1, 0}}, 2), matrix_from(2, 2, {0.7, 0.3, 0.25, 0.75}), {0.5, 0.3}});
    fx.push_back({make_corpus({{0, 1, 2}, {2, 3}}, 4),
                  matrix_from(3, 4, {0.4, 0.3, 0.2, 0.1, 0.1, 0.2, 0.3, 0.4, 0.25, 0.25, 0.25, 0.25}),
                  {0.2, 0.6, 1.0}});
    for (const auto& f : fx) {
      const Hyperparams h(f.alpha, std::vector<double>(f.phi.cols(), 1.0));
      const SamplingMode mode = SamplingMode::predict(f.phi);
      const RealMatrix exact = oracle::fixed_phi_marginals(f.c, f.phi, f.alpha);
      for (std::uint64_t s = 0; s < seeds; ++s) {
        Rng rng(chain_seed(300 + s, 0));
        SamplerState st = initialize_state(f.c, f.phi.rows(), mode, rng, s);
        predict.add(cgsp::testing::marginal_pvalues(
            st, [&](SamplerState& x) { sweep(x, f.c, h, mode, rng); }, exact, burn_in, draws, lag));
      }
    }
  }

  // collapsed chains, dense and sparse
  Cells dense, sparse;
  {
    struct T {
      Corpus c;
      Hyperparams h;
    };
    std::vector<T> fx;
    fx.push_back({make_corpus({{0, 1}, {1, 2, 1}}, 3), Hyperparams::symmetric(2, 0.4, 3, 0.3)});
    fx.push_back({make_corpus({{0, 1, 2}, {2, 2}}, 3),
                  Hyperparams({0.3, 0.5, 0.8}, {0.2, 0.4, 0.6})});
    const SamplingMode mode = SamplingMode::train();
    for (const auto& f : fx) {
      const RealMatrix exact =
          oracle::posterior_marginals(oracle::exact_collapsed_posterior(f.c, f.h, mode));
      for (std::uint64_t s = 0; s < seeds; ++s) {
        for (bool use_sparse : {false, true}) {
          Rng rng(chain_seed(500 + s, use_sparse ? 1 : 0));
          SamplerState st = initialize_state(f.c, f.h.num_topics(), mode, rng, s);
          auto step = [&](SamplerState& x) {
            if (use_sparse) {
              sweep_sparse(x, f.c, f.h, mode, rng);
            } else {
              sweep(x, f.c, f.h, mode, rng);
            }
          };
          (use_sparse ? sparse : dense)
              .add(cgsp::testing::marginal_pvalues(st, step, exact, burn_in, draws, lag));
        }
      }
    }
  }
  const bool pass = predict.fraction() >= 0.95 && dense.fraction() >= 0.95 && sparse.fraction() >= 0.95;
  return {pass, fmt("lag %zu, cells with p>0.01: predict %zu/%zu, sweep %zu/%zu, sweep_sparse %zu/%zu",
                    lag, predict.good, predict.total, dense.good, dense.total, sparse.good, sparse.total)};
}

// --- 4 ----------------------------------------------------------------------

Outcome criterion_bounds() {
  bool pass = true;
  std::string detail;
  struct B {
    Corpus c;
    Hyperparams h;
  };
  std::vector<B> fx;
  fx.push_back({make_corpus({{0, 1, 1}, {2, 0}}, 3), Hyperparams::symmetric(2, 0.5, 3, 0.1)});
  fx.push_back({make_corpus({{0, 1, 2, 3}, {3, 3, 1}, {2}}, 4), Hyperparams::symmetric(3, 0.1, 4, 0.01)});
  fx.push_back({make_corpus({{0, 0, 1, 2, 4}, {4, 3, 2}, {1, 1}, {0, 3}}, 5),
                Hyperparams({0.2, 0.9}, {0.5, 0.1, 0.1, 0.3, 1.0})});
  SyntheticSpec spec;
  spec.num_docs = 20;
  spec.vocab_size = 30;
  spec.num_topics = 4;
  spec.min_length = 10;
  spec.max_length = 20;
  spec.seed = 8;
  fx.push_back({generate_lda(spec).corpus, Hyperparams::symmetric(4, 0.1, 30, 0.01)});

  std::size_t fixture = 0;
  for (const auto& f : fx) {
    const auto snaps = run_chain(f.c, f.h, SamplingMode::train(), ChainSchedule::fixed_budget(30, fixture), 0);
    const auto table = oracle::phi_p_bound_table(snaps[0], f.c, f.h);
    std::size_t cells = 0;
    for (const auto& cell : table.cells) cells += cell ? 1 : 0;
    pass = pass && table.violations() == 0;
    detail += fmt("fixture%zu %zu/%zu ok; ", fixture++, cells - table.violations(), cells);
  }

  SyntheticSpec big;
  big.num_docs = 400;
  big.vocab_size = 100;
  big.num_topics = 5;
  big.min_length = 20;
  big.max_length = 40;
  big.seed = 9;
  const Corpus corpus = generate_lda(big).corpus;
  const auto curve = oracle::approximation_gap_curve(
      corpus, Hyperparams::symmetric(5, 0.1, 100, 0.01), {50, 100, 200, 400}, 100, 9);
  detail += "width";
  for (std::size_t i = 0; i < curve.size(); ++i) {
    pass = pass && curve[i].violations == 0;
    if (i > 0) pass = pass && curve[i].mean_relative_width < curve[i - 1].mean_relative_width;
    detail += fmt(" D%zu=%.4g", curve[i].documents, curve[i].mean_relative_width);
  }
  return {pass, detail};
}

// --- 5 and 6: randomized cases -----------------------------------------------

struct RandomCase {
  Corpus corpus;
  Hyperparams hyper;
  SamplingMode mode;
  SamplerState state;
};

RandomCase random_case(std::uint64_t seed, std::size_t forced_K = 0) {
  Rng rng(splitmix64(seed));
  const std::size_t D = 1 + rng.below(6);
  const std::size_t V = 1 + rng.below(8);
  const std::size_t K = forced_K ? forced_K : 1 + rng.below(5);
  const int variant = static_cast<int>(rng.below(3));
  std::vector<std::vector<WordId>> docs(D);
  std::vector<std::vector<LabelId>> labels(D);
  for (std::size_t d = 0; d < D; ++d) {
    const std::size_t n = rng.below(9);  // empty documents included
    for (std::size_t j = 0; j < n; ++j) docs[d].push_back(static_cast<WordId>(rng.below(V)));
    for (LabelId k = 0; k < K; ++k) {
      if (rng.uniform() < 0.5) labels[d].push_back(k);
    }
    if (labels[d].empty()) labels[d].push_back(static_cast<LabelId>(rng.below(K)));
  }
  RandomCase rc;
  rc.corpus = variant == 2 ? make_corpus(docs, V, labels, K) : make_corpus(docs, V);
  std::vector<double> alpha(K), beta(V);
  for (double& a : alpha) a = 0.01 + 2.0 * rng.uniform();
  for (double& b : beta) b = 0.001 + rng.uniform();
  rc.hyper = Hyperparams(alpha, beta);
  if (variant == 0) {
    rc.mode = SamplingMode::train();
  } else if (variant == 1) {
    rc.mode = SamplingMode::predict(random_stochastic(K, V, rng));
  } else {
    rc.mode = SamplingMode::labeled();
  }
  rc.state = initialize_state(rc.corpus, K, rc.mode, rng, seed);
  const std::size_t warm = rng.below(4);
  for (std::size_t i = 0; i < warm; ++i) sweep(rc.state, rc.corpus, rc.hyper, rc.mode, rng);
  return rc;
}

Outcome criterion_normalization() {
  const std::size_t cases = 1200;
  double worst_row = 0.0, worst_cons = 0.0, worst_cvb0 = 0.0;
  bool negative = false;
  auto rows = [&](const RealMatrix& m) {
    worst_row = std::max(worst_row, max_row_sum_error(m));
    for (double x : m.storage()) negative = negative || !(x >= 0.0);
  };
  for (std::uint64_t s = 0; s < cases; ++s) {
    const RandomCase rc = random_case(s);
    const Corpus& c = rc.corpus;
    const Hyperparams& h = rc.hyper;
    const std::size_t K = h.num_topics();

    rows(theta_standard(rc.state.counts, h));
    rows(theta_p(std::span(&rc.state, 1), c, h, rc.mode));
    rows(theta_naive_mc(std::span(&rc.state, 1), h));
    if (!rc.mode.is_predict()) {
      rows(phi_standard(rc.state.counts, h));
      rows(phi_p(rc.state, c, h, rc.mode));
      const auto both = cgsp_estimates(rc.state, c, h, rc.mode);
      rows(both.theta);
      rows(both.phi);
    }
    if (rc.mode.variant == SamplingVariant::train) {
      for (TrainingPhi src : {TrainingPhi::phi_standard, TrainingPhi::phi_p, TrainingPhi::collapsed}) {
        rows(theta_p_training(rc.state, c, h, src));
      }
    }

    // soft-count conservation
    const SoftCounts sc = soft_counts(rc.state, c, h, rc.mode);
    double total = 0.0;
    for (std::size_t d = 0; d < c.num_docs(); ++d) {
      const auto r = sc.m_dk.row(d);
      const double nd = static_cast<double>(c.documents[d].tokens.size());
      worst_cons = std::max(worst_cons, std::abs(std::accumulate(r.begin(), r.end(), 0.0) - nd));
      total += nd;
    }
    double mk_total = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      const auto r = sc.m_kv.row(k);
      worst_cons = std::max(worst_cons, std::abs(std::accumulate(r.begin(), r.end(), 0.0) - sc.m_k[k]));
      double col = 0.0;
      for (std::size_t d = 0; d < c.num_docs(); ++d) col += sc.m_dk(d, k);
      worst_cons = std::max(worst_cons, std::abs(col - sc.m_k[k]));
      mk_total += sc.m_k[k];
    }
    worst_cons = std::max(worst_cons, std::abs(mk_total - total));
    for (std::size_t v = 0; v < c.vocab_size(); ++v) {
      double expected = 0.0, got = 0.0;
      for (const auto& doc : c.documents) expected += static_cast<double>(std::count(doc.tokens.begin(), doc.tokens.end(), v));
      for (std::size_t k = 0; k < K; ++k) got += sc.m_kv(k, v);
      worst_cons = std::max(worst_cons, std::abs(got - expected));
    }

    // CVB0: every gamma sums to 1, running sums track exact sums
    const VariationalState vs = cvb0_run(c, h, rc.mode, 1 + s % 3, s);
    const std::size_t tokens = vs.doc_offsets.back();
    for (std::size_t t = 0; t < tokens; ++t) {
      const auto g = vs.token(t);
      worst_row = std::max(worst_row, std::abs(std::accumulate(g.begin(), g.end(), 0.0) - 1.0));
    }
    const SoftCounts exact = cvb0_recompute_soft_counts(vs, c);
    worst_cvb0 = std::max(worst_cvb0, max_abs_diff(exact.m_dk, vs.soft.m_dk));
    worst_cvb0 = std::max(worst_cvb0, max_abs_diff(exact.m_kv, vs.soft.m_kv));
    const ParamEstimate est = cvb0_estimates(vs, h);
    rows(est.theta);
    rows(est.phi);
  }
  const bool pass = worst_row <= 1e-9 && worst_cons <= 1e-9 && worst_cvb0 <= 1e-6 && !negative;
  return {pass, fmt("cases=%zu max row error=%.2e max conservation error=%.2e cvb0 drift=%.2e",
                    cases, worst_row, worst_cons, worst_cvb0)};
}

Outcome criterion_reductions() {
  const std::size_t cases = 300;
  double worst = 0.0;
  std::size_t checks = 0;
  auto compare = [&](const RealMatrix& a, const RealMatrix& b) {
    worst = std::max(worst, max_abs_diff(a, b));
    ++checks;
  };
  for (std::uint64_t s = 0; s < cases; ++s) {
    // K = 1
    const RandomCase one = random_case(10000 + s, 1);
    const auto& c = one.corpus;
    const auto& h = one.hyper;
    compare(theta_p(std::span(&one.state, 1), c, h, one.mode), theta_standard(one.state.counts, h));
    if (!one.mode.is_predict()) compare(phi_p(one.state, c, h, one.mode), phi_standard(one.state.counts, h));
    const VariationalState v1 = cvb0_run(c, h, one.mode, 2, s);
    const ParamEstimate e1 = cvb0_estimates(v1, h);
    compare(e1.theta, theta_standard(one.state.counts, h));
    if (!one.mode.is_predict()) compare(e1.phi, phi_standard(one.state.counts, h));

    // one-hot gamma at the sampler's assignment
    const RandomCase rc = random_case(20000 + s);
    const std::size_t K = rc.hyper.num_topics();
    std::vector<double> gamma;
    for (const auto& zd : rc.state.z) {
      for (TopicId k : zd) {
        for (std::size_t j = 0; j < K; ++j) gamma.push_back(j == k ? 1.0 : 0.0);
      }
    }
    const VariationalState hot = cvb0_initialize(rc.corpus, K, rc.mode, gamma);
    const ParamEstimate e2 = cvb0_estimates(hot, rc.hyper);
    compare(e2.theta, theta_standard(rc.state.counts, rc.hyper));
    compare(e2.phi, phi_standard(rc.state.counts, rc.hyper));

    // hard counts fed to the soft-count formulas
    RealMatrix ndk(rc.state.counts.n_dk.rows(), K), nkv(K, rc.corpus.vocab_size());
    for (std::size_t i = 0; i < ndk.size(); ++i) ndk.storage()[i] = rc.state.counts.n_dk.storage()[i];
    for (std::size_t i = 0; i < nkv.size(); ++i) nkv.storage()[i] = rc.state.counts.n_kv.storage()[i];
    compare(theta_from_counts(ndk, rc.hyper), theta_standard(rc.state.counts, rc.hyper));
    compare(phi_from_counts(nkv, rc.hyper), phi_standard(rc.state.counts, rc.hyper));
  }
  return {worst <= 1e-12, fmt("checks=%zu max difference=%.3g (0 means bitwise)", checks, worst)};
}

// --- 7 ----------------------------------------------------------------------

Outcome criterion_perplexity() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t seeds = 20;
  const std::vector<std::size_t> averaged = {1, 10, 50};
  // mean[s][row], rows as in perplexity_grid
  std::vector<std::vector<double>> mean(averaged.size(), std::vector<double>(4, 0.0));
  for (std::uint64_t seed = 0; seed < seeds; ++seed) {
    SyntheticSpec spec;
    spec.seed = 700 + seed;
    const Corpus corpus = generate_lda(spec).corpus;
    const Corpus train = select_documents(corpus, 0, 400);
    const Corpus test = select_documents(corpus, 400, 100);
    const Hyperparams h = Hyperparams::symmetric(10, 0.1, spec.vocab_size, 0.01);
    const auto state = run_chain(train, h, SamplingMode::train(),
                                 ChainSchedule::unsupervised_training(seed), 0, {.sparse = true})[0];
    const RealMatrix phi = phi_standard(state.counts, h);
    const RealMatrix phip = phi_p(state, train, h);
    const HeldoutSplit split = split_heldout(test, 0.5, seed);
    for (std::size_t i = 0; i < averaged.size(); ++i) {
      const auto grid = perplexity_grid(split, phi, phip, h, heldout_schedule(averaged[i], 50 + seed));
      for (std::size_t r = 0; r < 4; ++r) mean[i][r] += grid[r].perplexity / seeds;
    }
  }
  auto gap = [&](std::size_t i, std::size_t phi_row) {
    return std::abs(mean[i][phi_row] - mean[i][phi_row + 1]) / mean[i][phi_row + 1];
  };
  const std::size_t last = averaged.size() - 1;
  const double secs = seconds_since(t0);
  const bool pass = mean[0][3] <= mean[0][0] && gap(last, 0) < 0.01 && gap(last, 2) < 0.01 &&
                    gap(last, 0) < gap(0, 0) && secs <= 600.0;
  std::string detail = fmt("s=1: phi+theta=%.3f phi_p+theta_p=%.3f; gap(phi) ", mean[0][0], mean[0][3]);
  for (std::size_t i = 0; i < averaged.size(); ++i) detail += fmt("s%zu=%.3f%% ", averaged[i], 100 * gap(i, 0));
  detail += "gap(phi_p) ";
  for (std::size_t i = 0; i < averaged.size(); ++i) detail += fmt("s%zu=%.3f%% ", averaged[i], 100 * gap(i, 2));
  detail += fmt("%.0fs", secs);
  return {pass, detail};
}

// --- 8 ----------------------------------------------------------------------

Outcome criterion_traces() {
  SyntheticSpec spec;
  spec.seed = 800;
  const Corpus corpus = generate_lda(spec).corpus;
  const Hyperparams h = Hyperparams::symmetric(10, 0.1, spec.vocab_size, 0.01);

  TraceOptions opts;
  opts.every = 5;
  const auto a = convergence_trace(corpus, h, Algorithm::cvb0, 40, 3, opts);
  const auto b = convergence_trace(corpus, h, Algorithm::cvb0, 40, 3, opts);
  bool same = a.size() == b.size();
  for (std::size_t i = 0; same && i < a.size(); ++i) {
    same = a[i].iteration == b[i].iteration && a[i].log_likelihood == b[i].log_likelihood;
  }
  const auto va = cvb0_run(corpus, h, SamplingMode::train(), 20, std::uint64_t{3});
  const auto vb = cvb0_run(corpus, h, SamplingMode::train(), 20, std::uint64_t{3});
  same = same && va == vb;

  const std::size_t seeds = 5, iters = 300, converged = 150;
  opts.every = 25;
  std::vector<double> diff;  // mean over seeds of cgs_p - cgs, per matched iteration
  std::vector<std::size_t> at;
  for (std::uint64_t s = 0; s < seeds; ++s) {
    spec.seed = 810 + s;
    const Corpus cs = generate_lda(spec).corpus;
    opts.sparse = true;
    const auto cgs = convergence_trace(cs, h, Algorithm::cgs, iters, s, opts);
    const auto cgsp = convergence_trace(cs, h, Algorithm::cgs_p, iters, s, opts);
    std::size_t m = 0;
    for (std::size_t i = 0; i < cgs.size(); ++i) {
      if (cgs[i].iteration < converged) continue;
      if (diff.size() <= m) {
        diff.push_back(0.0);
        at.push_back(cgs[i].iteration);
      }
      diff[m++] += (cgsp[i].log_likelihood - cgs[i].log_likelihood) / seeds;
    }
  }
  bool ahead = !diff.empty();
  std::string detail = fmt("cvb0 deterministic=%s; mean ll(cgs_p)-ll(cgs):", same ? "yes" : "no");
  for (std::size_t i = 0; i < diff.size(); ++i) {
    ahead = ahead && diff[i] >= 0.0;
    detail += fmt(" it%zu=%+.1f", at[i], diff[i]);
  }
  return {same && ahead, detail};
}

// --- 9 ----------------------------------------------------------------------

Outcome criterion_multilabel() {
  const LabelSets gold = {{0, 1}, {1}, {2}, {0, 3}, {}, {1, 2}, {3}, {0}, {2, 3}, {1}};
  const LabelSets pred = {{0}, {1, 2}, {2}, {0, 3}, {}, {1}, {0}, {0, 1}, {3}, {}};
  const F1Report r = f1_metrics(pred, gold, 4);
  // tp/fp/fn per label: 0:(3,1,0) 1:(2,1,2) 2:(1,1,2) 3:(2,0,1)
  const double micro = 2.0 / 3.0;
  const double macro = 23.0 / 35.0;
  const double example = 19.0 / 30.0;
  const bool exact = std::abs(r.micro_f - micro) <= 1e-15 && std::abs(r.macro_f - macro) <= 1e-15 &&
                     std::abs(r.example_f - example) <= 1e-15;

  const std::size_t seeds = 5;
  double base = 0.0, big = 0.0, base_p = 0.0, big_std = 0.0;
  for (std::uint64_t s = 0; s < seeds; ++s) {
    LabeledSyntheticSpec spec;
    spec.base.num_docs = 400;
    spec.base.vocab_size = 200;
    spec.base.num_topics = 10;
    spec.base.min_length = 30;
    spec.base.max_length = 80;
    spec.base.alpha = 0.5;
    spec.base.seed = 900 + s;
    const Corpus corpus = generate_labeled(spec).corpus;
    const Corpus train = select_documents(corpus, 0, 300);
    const CardinalityPredictor card = train_cardinality(train);
    auto micro_f = [&](const PriorLdaConfig& cfg, const PriorLdaModel& m, ThetaKind kind) {
      const Corpus test = remap_labels(select_documents(corpus, 300, 100), m.label_space);
      const auto preds = predict_labels(test, m.phi, m.label_frequencies, cfg, kind, card);
      return f1_metrics(selected_labels(preds), gold_labels(test), m.phi.rows()).micro_f;
    };
    const PriorLdaConfig one = PriorLdaConfig::preset_1x1(s);
    const PriorLdaModel m1 = train_prior_lda(train, one);
    base += micro_f(one, m1, ThetaKind::standard) / seeds;
    base_p += micro_f(one, m1, ThetaKind::p) / seeds;
    const PriorLdaConfig many = PriorLdaConfig::preset_5x30(s);
    const PriorLdaModel m5 = train_prior_lda(train, many);
    big += micro_f(many, m5, ThetaKind::p) / seeds;
    big_std += micro_f(many, m5, ThetaKind::standard) / seeds;
  }
  return {exact && big >= base,
          fmt("toy micro=%.17g macro=%.17g example=%.17g (%s); micro-F 1x1 theta=%.4f 1x1 theta_p=%.4f "
              "5x30 theta=%.4f 5x30 theta_p=%.4f",
              r.micro_f, r.macro_f, r.example_f, exact ? "exact" : "MISMATCH", base, base_p, big_std, big)};
}

// --- 10 ---------------------------------------------------------------------

Outcome criterion_overhead() {
  SyntheticSpec spec;
  spec.seed = 1000;
  const Corpus corpus = generate_lda(spec).corpus;
  bool pass = true;
  std::string detail;
  for (std::size_t K : {10u, 50u}) {
    const auto r = measure_overhead(corpus, Hyperparams::symmetric(K, 0.1, spec.vocab_size, 0.01), 20, 11, 4);
    pass = pass && r.ratio <= 3.0;
    detail += fmt("K=%zu sweep=%.2fms recovery=%.2fms ratio=%.2f; ", K, 1e3 * r.sweep_seconds,
                  1e3 * r.recovery_seconds, r.ratio);
  }
  return {pass, detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"oracle equivalence (theta)", criterion_oracle_theta},
      {"single-sample efficiency", criterion_single_sample},
      {"sampler marginals", criterion_sampler_marginals},
      {"phi_p bounds and width trend", criterion_bounds},
      {"normalization and conservation", criterion_normalization},
      {"K=1 and one-hot reductions", criterion_reductions},
      {"held-out perplexity trend", criterion_perplexity},
      {"convergence traces", criterion_traces},
      {"multi-label pipeline", criterion_multilabel},
      {"estimator overhead", criterion_overhead},
  };
  std::set<std::size_t> only;
  for (int i = 1; i < argc; ++i) only.insert(std::strtoul(argv[i], nullptr, 10));

  std::size_t failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!only.empty() && !only.contains(i + 1)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::printf("%s %2zu %s: %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
                o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  return failed == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}
