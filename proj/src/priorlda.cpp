#include "cgsp/priorlda.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "cgsp/errors.hpp"
#include "cgsp/estimators.hpp"

namespace cgsp {

std::vector<double> build_priors(std::span<const std::size_t> label_freqs, std::size_t K,
                                 PriorPhase phase) {
  if (K == 0) throw ArgumentError("K must be at least 1");
  const double Kd = static_cast<double>(K);
  if (phase == PriorPhase::train) return std::vector<double>(K, 50.0 / Kd);
  if (label_freqs.size() != K) {
    throw ArgumentError("label frequency vector has " + std::to_string(label_freqs.size()) +
                        " entries, expected " + std::to_string(K));
  }
  const double total = static_cast<double>(
      std::accumulate(label_freqs.begin(), label_freqs.end(), std::size_t{0}));
  std::vector<double> alpha(K, 30.0 / Kd);
  if (total > 0.0) {
    for (std::size_t k = 0; k < K; ++k) {
      alpha[k] += 50.0 * static_cast<double>(label_freqs[k]) / total;
    }
  }
  return alpha;
}

PriorLdaConfig PriorLdaConfig::preset_1x1(std::uint64_t seed) {
  PriorLdaConfig c;
  c.train_schedule = ChainSchedule::averaged(1, 1, seed);
  c.predict_schedule = ChainSchedule::averaged(1, 1, splitmix64(seed));
  return c;
}

PriorLdaConfig PriorLdaConfig::preset_5x30(std::uint64_t seed) {
  PriorLdaConfig c;
  c.train_schedule = ChainSchedule::averaged(30, 5, seed);
  c.predict_schedule = ChainSchedule::averaged(30, 5, splitmix64(seed));
  return c;
}

namespace {

using SparseRow = std::vector<std::pair<WordId, double>>;

SparseRow features_of(const Document& doc, CardinalityFeatures kind) {
  std::unordered_map<WordId, double> tf;
  for (WordId v : doc.tokens) tf[v] += 1.0;
  SparseRow row(tf.begin(), tf.end());
  std::sort(row.begin(), row.end());
  if (kind == CardinalityFeatures::normalized_tf && !doc.tokens.empty()) {
    const double n = static_cast<double>(doc.tokens.size());
    for (auto& [v, x] : row) x /= n;
  }
  return row;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

double CardinalityPredictor::predict_raw(const Document& doc) const {
  if (doc.tokens.empty()) return fallback;
  double y = intercept;
  for (const auto& [v, x] : features_of(doc, features)) {
    if (v < weights.size()) y += weights[v] * x;
  }
  return y;
}

std::size_t CardinalityPredictor::predict(const Document& doc) const {
  const double y = predict_raw(doc);
  const double rounded = std::isfinite(y) ? std::round(y) : 1.0;
  return static_cast<std::size_t>(
      std::clamp(rounded, 1.0, static_cast<double>(std::max<std::size_t>(num_labels, 1))));
}

CardinalityPredictor train_cardinality(const Corpus& corpus, double lambda,
                                       CardinalityFeatures features) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw ArgumentError("ridge parameter must be a finite nonnegative number");
  }
  std::vector<SparseRow> X;
  std::vector<double> y;
  for (const Document& doc : corpus.documents) {
    if (doc.labels.empty()) continue;
    X.push_back(features_of(doc, features));
    y.push_back(static_cast<double>(doc.labels.size()));
  }
  if (X.empty()) throw TrainingError("cardinality predictor needs at least one labeled document");

  const std::size_t V = corpus.vocab_size();
  const double n = static_cast<double>(X.size());
  std::vector<double> mean_x(V, 0.0);
  for (const auto& row : X) {
    for (const auto& [v, x] : row) mean_x[v] += x;
  }
  for (double& m : mean_x) m /= n;
  const double mean_y = std::accumulate(y.begin(), y.end(), 0.0) / n;

  // Centered normal equations (Xc^T Xc + lambda I) w = Xc^T yc, applied
  // matrix-free.
  auto apply = [&](const std::vector<double>& w) {
    const double shift = dot(mean_x, w);
    std::vector<double> out(V, 0.0);
    double u_sum = 0.0;
    for (const auto& row : X) {
      double u = -shift;
      for (const auto& [v, x] : row) u += x * w[v];
      for (const auto& [v, x] : row) out[v] += u * x;
      u_sum += u;
    }
    for (std::size_t v = 0; v < V; ++v) out[v] += -u_sum * mean_x[v] + lambda * w[v];
    return out;
  };
  std::vector<double> b(V, 0.0);
  double yc_sum = 0.0;
  for (std::size_t i = 0; i < X.size(); ++i) {
    const double yc = y[i] - mean_y;
    for (const auto& [v, x] : X[i]) b[v] += yc * x;
    yc_sum += yc;
  }
  for (std::size_t v = 0; v < V; ++v) b[v] -= yc_sum * mean_x[v];

  std::vector<double> w(V, 0.0);
  std::vector<double> r = b;
  std::vector<double> p = r;
  double rr = dot(r, r);
  const double tol = 1e-8;
  for (std::size_t it = 0; it < 10 * V + 100 && std::sqrt(rr) > tol; ++it) {
    const std::vector<double> Ap = apply(p);
    const double pAp = dot(p, Ap);
    if (!(pAp > 0.0)) break;
    const double step = rr / pAp;
    for (std::size_t v = 0; v < V; ++v) {
      w[v] += step * p[v];
      r[v] -= step * Ap[v];
    }
    const double rr_next = dot(r, r);
    const double beta = rr_next / rr;
    rr = rr_next;
    for (std::size_t v = 0; v < V; ++v) p[v] = r[v] + beta * p[v];
  }

  CardinalityPredictor out;
  out.intercept = mean_y - dot(mean_x, w);
  out.weights = std::move(w);
  out.fallback = mean_y;
  out.num_labels = std::max<std::size_t>(corpus.num_labels(), 1);
  out.features = features;
  return out;
}

PriorLdaModel train_prior_lda(const Corpus& train, const PriorLdaConfig& config) {
  if (!train.has_labels()) throw TrainingError("Prior-LDA training needs a labeled corpus");
  Corpus corpus = config.label_min_count > 0 ? filter_labels(train, config.label_min_count) : train;
  if (corpus.num_labels() == 0) throw TrainingError("no label survives the frequency filter");

  PriorLdaModel model;
  Corpus kept;
  kept.vocabulary = corpus.vocabulary;
  kept.label_space = corpus.label_space;
  kept.label_frequencies.assign(corpus.num_labels(), 0);
  for (Document& doc : corpus.documents) {
    if (doc.labels.empty()) {
      ++model.skipped_documents;
      continue;
    }
    for (LabelId k : doc.labels) ++kept.label_frequencies[k];
    kept.documents.push_back(std::move(doc));
  }
  if (kept.documents.empty()) throw TrainingError("no training document has a label");

  const std::size_t K = kept.num_labels();
  const std::size_t V = kept.vocab_size();
  const Hyperparams hyper(build_priors(kept.label_frequencies, K, PriorPhase::train),
                          std::vector<double>(V, config.beta));
  const SamplingMode mode = SamplingMode::labeled();
  const auto chains = run_chains(kept, hyper, mode, config.train_schedule, config.threads);

  std::vector<RealMatrix> phis, phi_ps;
  for (const auto& chain : chains) {
    for (const SamplerState& s : chain) {
      phis.push_back(phi_standard(s.counts, hyper));
      phi_ps.push_back(phi_p(s, kept, hyper, mode, {.threads = config.threads}));
    }
  }
  model.phi = average_estimates(phis, AnchoredTopics::labeled);
  model.phi_p = average_estimates(phi_ps, AnchoredTopics::labeled);
  model.label_frequencies = kept.label_frequencies;
  model.label_space = kept.label_space;
  return model;
}

std::vector<LabelId> rank_labels(std::span<const double> scores) {
  std::vector<LabelId> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](LabelId a, LabelId b) { return scores[a] > scores[b]; });
  return order;
}

std::vector<LabelPrediction> predict_labels(const Corpus& test, const RealMatrix& phi,
                                            std::span<const std::size_t> label_freqs,
                                            const PriorLdaConfig& config, ThetaKind kind,
                                            const CardinalityPredictor& predictor) {
  const std::size_t K = phi.rows();
  const Hyperparams hyper(build_priors(label_freqs, K, PriorPhase::predict),
                          std::vector<double>(phi.cols(), config.beta));
  const HeldoutTheta theta =
      estimate_heldout_theta(test, phi, hyper, config.predict_schedule, config.threads);
  const RealMatrix& chosen = kind == ThetaKind::standard ? theta.standard : theta.p;

  std::vector<LabelPrediction> out(test.num_docs());
  for (std::size_t d = 0; d < test.num_docs(); ++d) {
    LabelPrediction& p = out[d];
    const auto row = chosen.row(d);
    p.scores.assign(row.begin(), row.end());
    p.ranking = rank_labels(p.scores);
    const std::size_t count = std::min(predictor.predict(test.documents[d]), K);
    p.selected.assign(p.ranking.begin(), p.ranking.begin() + static_cast<std::ptrdiff_t>(count));
    std::sort(p.selected.begin(), p.selected.end());
  }
  return out;
}

Corpus remap_labels(Corpus corpus, const std::vector<std::string>& label_space) {
  std::unordered_map<std::string, LabelId> index;
  for (std::size_t k = 0; k < label_space.size(); ++k) {
    index.emplace(label_space[k], static_cast<LabelId>(k));
  }
  std::vector<std::size_t> freqs(label_space.size(), 0);
  for (Document& doc : corpus.documents) {
    std::vector<LabelId> labels;
    for (LabelId old : doc.labels) {
      if (old >= corpus.label_space.size()) continue;
      if (auto it = index.find(corpus.label_space[old]); it != index.end()) {
        labels.push_back(it->second);
      }
    }
    std::sort(labels.begin(), labels.end());
    labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
    for (LabelId k : labels) ++freqs[k];
    doc.labels = std::move(labels);
  }
  corpus.label_space = label_space;
  corpus.label_frequencies = std::move(freqs);
  return corpus;
}

LabelSets gold_labels(const Corpus& corpus) {
  LabelSets out;
  out.reserve(corpus.num_docs());
  for (const Document& doc : corpus.documents) out.push_back(doc.labels);
  return out;
}

LabelSets selected_labels(const std::vector<LabelPrediction>& predictions) {
  LabelSets out;
  out.reserve(predictions.size());
  for (const LabelPrediction& p : predictions) out.push_back(p.selected);
  return out;
}

}  // namespace cgsp
