#include "cgsp/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "cgsp/errors.hpp"
#include "cgsp/estimators.hpp"

namespace cgsp {

double log_likelihood(const Corpus& docs, const RealMatrix& theta, const RealMatrix& phi) {
  const std::size_t K = phi.rows();
  if (theta.rows() != docs.num_docs() || theta.cols() != K) {
    throw ArgumentError("theta is " + std::to_string(theta.rows()) + "x" +
                        std::to_string(theta.cols()) + ", expected " +
                        std::to_string(docs.num_docs()) + "x" + std::to_string(K));
  }
  double ll = 0.0;
  std::vector<double> terms(K);
  for (std::size_t d = 0; d < docs.num_docs(); ++d) {
    const auto th = theta.row(d);
    for (WordId v : docs.documents[d].tokens) {
      if (v >= phi.cols()) {
        throw VocabularyMismatchError("token id " + std::to_string(v) + " outside phi's " +
                                      std::to_string(phi.cols()) + " columns");
      }
      double top = 0.0;
      for (std::size_t k = 0; k < K; ++k) {
        terms[k] = phi(k, v) * th[k];
        top = std::max(top, terms[k]);
      }
      if (!(top > 0.0)) {
        throw NumericError("zero mixture probability for word " + std::to_string(v) +
                           " in document " + std::to_string(d));
      }
      double scaled = 0.0;
      for (double t : terms) scaled += t / top;
      ll += std::log(top) + std::log(scaled);
    }
  }
  return ll;
}

double perplexity(double log_likelihood, std::size_t tokens) {
  if (tokens == 0) throw ArgumentError("perplexity of zero tokens is undefined");
  return std::exp(-log_likelihood / static_cast<double>(tokens));
}

const char* to_string(ThetaKind kind) {
  return kind == ThetaKind::standard ? "theta" : "theta_p";
}

ThetaKind theta_kind_from_string(const std::string& name) {
  if (name == "theta" || name == "standard" || name == "theta_standard") return ThetaKind::standard;
  if (name == "theta_p" || name == "p") return ThetaKind::p;
  throw ConfigError("unknown theta estimator '" + name + "' (expected theta or theta_p)");
}

HeldoutTheta estimate_heldout_theta(const Corpus& observed, const RealMatrix& phi,
                                    const Hyperparams& hyper, const ChainSchedule& schedule,
                                    std::size_t threads) {
  const SamplingMode mode = SamplingMode::predict(phi);
  auto chains = run_chains(observed, hyper, mode, schedule, threads);
  std::vector<SamplerState> states;
  for (auto& chain : chains) {
    for (auto& s : chain) states.push_back(std::move(s));
  }
  HeldoutTheta out;
  out.samples = states.size();
  out.standard = theta_naive_mc(states, hyper);
  out.p = theta_p(states, observed, hyper, mode, {.threads = threads});
  return out;
}

ChainSchedule heldout_schedule(std::size_t samples, std::uint64_t seed, std::size_t single_sweeps) {
  if (samples == 0) throw ArgumentError("at least one sample is needed");
  if (samples == 1) return ChainSchedule::fixed_budget(single_sweeps, seed);
  return ChainSchedule::averaged(samples, 1, seed);
}

namespace {

PerplexityReport report(const HeldoutSplit& split, const RealMatrix& theta, const RealMatrix& phi,
                        const char* phi_kind, ThetaKind kind, std::size_t samples,
                        double split_fraction, const ChainSchedule& schedule) {
  PerplexityReport r;
  r.phi_kind = phi_kind;
  r.theta_kind = kind;
  r.log_likelihood = log_likelihood(split.heldout, theta, phi);
  r.token_count = split.heldout.total_tokens();
  r.perplexity = perplexity(r.log_likelihood, r.token_count);
  r.samples_averaged = samples;
  r.split_fraction = split_fraction;
  r.schedule = schedule;
  return r;
}

}  // namespace

PerplexityReport heldout_perplexity(const HeldoutSplit& split, const RealMatrix& phi,
                                    const Hyperparams& hyper, const ChainSchedule& schedule,
                                    ThetaKind kind, double split_fraction, std::size_t threads) {
  const HeldoutTheta th = estimate_heldout_theta(split.observed, phi, hyper, schedule, threads);
  return report(split, kind == ThetaKind::standard ? th.standard : th.p, phi, "phi", kind,
                th.samples, split_fraction, schedule);
}

std::vector<PerplexityReport> perplexity_grid(const HeldoutSplit& split, const RealMatrix& phi,
                                              const RealMatrix& phi_p, const Hyperparams& hyper,
                                              const ChainSchedule& schedule, double split_fraction,
                                              std::size_t threads) {
  std::vector<PerplexityReport> rows;
  for (const auto& [matrix, name] : {std::pair{&phi, "phi"}, std::pair{&phi_p, "phi_p"}}) {
    const HeldoutTheta th = estimate_heldout_theta(split.observed, *matrix, hyper, schedule, threads);
    rows.push_back(report(split, th.standard, *matrix, name, ThetaKind::standard, th.samples,
                          split_fraction, schedule));
    rows.push_back(
        report(split, th.p, *matrix, name, ThetaKind::p, th.samples, split_fraction, schedule));
  }
  return rows;
}

namespace {

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

double harmonic(double p, double r) { return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r); }

}  // namespace

F1Report f1_metrics(const LabelSets& predicted, const LabelSets& gold, std::size_t K) {
  if (predicted.size() != gold.size()) {
    throw ArgumentError("predicted and gold label lists differ in length");
  }
  F1Report r;
  r.per_label.resize(K);
  double example_sum = 0.0;
  for (std::size_t d = 0; d < gold.size(); ++d) {
    auto p = predicted[d];
    auto g = gold[d];
    std::sort(p.begin(), p.end());
    p.erase(std::unique(p.begin(), p.end()), p.end());
    std::sort(g.begin(), g.end());
    g.erase(std::unique(g.begin(), g.end()), g.end());
    for (LabelId k : p) {
      if (k >= K) throw RangeError("predicted label " + std::to_string(k) + " >= K");
    }
    for (LabelId k : g) {
      if (k >= K) throw RangeError("gold label " + std::to_string(k) + " >= K");
    }
    std::size_t hits = 0;
    for (LabelId k : p) {
      if (std::binary_search(g.begin(), g.end(), k)) {
        ++r.per_label[k].tp;
        ++hits;
      } else {
        ++r.per_label[k].fp;
      }
    }
    for (LabelId k : g) {
      if (!std::binary_search(p.begin(), p.end(), k)) ++r.per_label[k].fn;
    }
    if (p.empty() && g.empty()) {
      example_sum += 1.0;
    } else {
      example_sum += harmonic(ratio(hits, p.size()), ratio(hits, g.size()));
    }
  }
  r.example_f = gold.empty() ? 0.0 : example_sum / static_cast<double>(gold.size());

  std::size_t tp = 0, fp = 0, fn = 0;
  double macro_sum = 0.0;
  std::size_t macro_labels = 0;
  for (LabelScore& s : r.per_label) {
    s.precision = ratio(s.tp, s.tp + s.fp);
    s.recall = ratio(s.tp, s.tp + s.fn);
    s.f1 = harmonic(s.precision, s.recall);
    tp += s.tp;
    fp += s.fp;
    fn += s.fn;
    if (s.tp + s.fp + s.fn > 0) {
      macro_sum += s.f1;
      ++macro_labels;
    }
  }
  r.macro_f = macro_labels == 0 ? 1.0 : macro_sum / static_cast<double>(macro_labels);
  r.micro_f = tp + fp + fn == 0 ? 1.0 : harmonic(ratio(tp, tp + fp), ratio(tp, tp + fn));
  return r;
}

std::vector<double> association_scores(const RealMatrix& phi, WordId cue) {
  if (cue >= phi.cols()) throw RangeError("cue word " + std::to_string(cue) + " outside phi");
  double norm = 0.0;
  for (std::size_t k = 0; k < phi.rows(); ++k) norm += phi(k, cue);
  if (!(norm > 0.0)) throw DomainError("cue word " + std::to_string(cue) + " has no mass in phi");
  std::vector<double> scores(phi.cols(), 0.0);
  for (std::size_t k = 0; k < phi.rows(); ++k) {
    const double weight = phi(k, cue) / norm;
    const auto row = phi.row(k);
    for (std::size_t v = 0; v < phi.cols(); ++v) scores[v] += row[v] * weight;
  }
  return scores;
}

std::vector<AssociationScore> word_association(const RealMatrix& phi, WordId cue,
                                               const std::vector<WordId>& candidates) {
  const auto scores = association_scores(phi, cue);
  std::vector<AssociationScore> out;
  out.reserve(candidates.size());
  for (WordId w : candidates) {
    if (w >= phi.cols()) throw RangeError("candidate word " + std::to_string(w) + " outside phi");
    out.push_back({w, scores[w], 0});
  }
  std::sort(out.begin(), out.end(), [](const AssociationScore& a, const AssociationScore& b) {
    return a.score != b.score ? a.score > b.score : a.word < b.word;
  });
  for (std::size_t i = 0; i < out.size(); ++i) out[i].rank = i + 1;
  return out;
}

std::vector<std::size_t> association_ranks(const RealMatrix& phi, WordId cue,
                                           const std::vector<WordId>& targets) {
  const auto scores = association_scores(phi, cue);
  std::vector<std::size_t> ranks;
  ranks.reserve(targets.size());
  for (WordId t : targets) {
    if (t >= phi.cols()) throw RangeError("target word " + std::to_string(t) + " outside phi");
    std::size_t rank = 1;
    for (std::size_t w = 0; w < scores.size(); ++w) {
      if (w == cue || w == t) continue;
      if (scores[w] > scores[t] || (scores[w] == scores[t] && w < t)) ++rank;
    }
    ranks.push_back(rank);
  }
  return ranks;
}

const char* to_string(Algorithm a) {
  switch (a) {
    case Algorithm::cgs: return "cgs";
    case Algorithm::cgs_p: return "cgs_p";
    case Algorithm::cvb0: return "cvb0";
  }
  return "?";
}

Algorithm algorithm_from_string(const std::string& name) {
  if (name == "cgs") return Algorithm::cgs;
  if (name == "cgs_p") return Algorithm::cgs_p;
  if (name == "cvb0") return Algorithm::cvb0;
  throw ConfigError("unknown algorithm '" + name + "' (expected cgs, cgs_p or cvb0)");
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

std::vector<TracePoint> convergence_trace(const Corpus& corpus, const Hyperparams& hyper,
                                          Algorithm algorithm, std::size_t iters,
                                          std::uint64_t seed, const TraceOptions& options) {
  if (iters == 0) throw ArgumentError("a trace needs at least one iteration");
  const std::size_t every = std::max<std::size_t>(options.every, 1);
  const std::size_t K = hyper.num_topics();
  const SamplingMode mode = SamplingMode::train();
  std::vector<TracePoint> trace;
  double sweep_total = 0.0;

  auto record = [&](std::size_t it, auto&& estimate) {
    const auto start = Clock::now();
    const ParamEstimate est = estimate();
    TracePoint p;
    p.iteration = it;
    p.estimator_seconds = seconds_since(start);
    p.sweep_seconds = sweep_total;
    p.wall_clock = sweep_total + p.estimator_seconds;
    p.log_likelihood = log_likelihood(corpus, est.theta, est.phi);
    trace.push_back(p);
  };

  if (algorithm == Algorithm::cvb0) {
    VariationalState state = cvb0_initialize(corpus, K, mode, Cvb0Init{seed});
    for (std::size_t it = 1; it <= iters; ++it) {
      const auto start = Clock::now();
      cvb0_sweep(state, corpus, hyper, mode, options.cvb0);
      sweep_total += seconds_since(start);
      if (it % every == 0 || it == iters) record(it, [&] { return cvb0_estimates(state, hyper); });
    }
    return trace;
  }

  if (hyper.vocab_size() != corpus.vocab_size()) {
    throw VocabularyMismatchError("beta length does not match the corpus vocabulary");
  }
  const std::uint64_t s = chain_seed(seed, 0);
  Rng rng(s);
  SamplerState state = initialize_state(corpus, K, mode, rng, s);
  for (std::size_t it = 1; it <= iters; ++it) {
    const auto start = Clock::now();
    if (options.sparse) {
      sweep_sparse(state, corpus, hyper, mode, rng);
    } else {
      sweep(state, corpus, hyper, mode, rng);
    }
    sweep_total += seconds_since(start);
    if (it % every != 0 && it != iters) continue;
    if (algorithm == Algorithm::cgs) {
      record(it, [&] {
        return ParamEstimate{theta_standard(state.counts, hyper), phi_standard(state.counts, hyper), {}};
      });
    } else {
      record(it, [&] {
        CgspEstimates e = cgsp_estimates(state, corpus, hyper, mode);
        return ParamEstimate{std::move(e.theta), std::move(e.phi), {EstimatorFamily::cgs_p, 1, 1}};
      });
    }
  }
  return trace;
}

OverheadReport measure_overhead(const Corpus& corpus, const Hyperparams& hyper,
                                std::size_t burn_in, std::size_t repeats, std::uint64_t seed) {
  if (repeats == 0) throw ArgumentError("at least one timing repeat is needed");
  const SamplingMode mode = SamplingMode::train();
  const std::uint64_t s = chain_seed(seed, 0);
  Rng rng(s);
  SamplerState state = initialize_state(corpus, hyper.num_topics(), mode, rng, s);
  for (std::size_t i = 0; i < burn_in; ++i) sweep(state, corpus, hyper, mode, rng);

  std::vector<double> sweeps, recoveries;
  for (std::size_t r = 0; r < repeats; ++r) {
    auto start = Clock::now();
    sweep(state, corpus, hyper, mode, rng);
    sweeps.push_back(seconds_since(start));
    start = Clock::now();
    cgsp_estimates(state, corpus, hyper, mode);
    recoveries.push_back(seconds_since(start));
  }
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
  };
  OverheadReport out;
  out.num_topics = hyper.num_topics();
  out.tokens = corpus.total_tokens();
  out.sweep_seconds = median(sweeps);
  out.recovery_seconds = median(recoveries);
  out.ratio = out.sweep_seconds > 0.0 ? out.recovery_seconds / out.sweep_seconds : 0.0;
  return out;
}

}  // namespace cgsp
