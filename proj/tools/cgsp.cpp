// cgsp: command-line driver for training, estimator recovery and evaluation.
//
// Every option can also be set in a flat `key = value` file passed with
// --config; flags on the command line win. Each run writes its resolved
// configuration to <out>/config.ini next to its checkpoints and reports.
//
// Exit codes: 0 ok, 2 configuration/argument error, 3 data error,
// 4 numeric error (including failed oracle checks).

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cgsp/corpus.hpp"
#include "cgsp/cvb0.hpp"
#include "cgsp/errors.hpp"
#include "cgsp/estimators.hpp"
#include "cgsp/eval.hpp"
#include "cgsp/model.hpp"
#include "cgsp/oracle.hpp"
#include "cgsp/priorlda.hpp"
#include "cgsp/sampler.hpp"
#include "cgsp/synthetic.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace cgsp;

namespace {

constexpr int kReportVersion = 1;

struct Options {
  // inputs
  std::string corpus, docword, vocab, text, labels;
  std::string test_corpus, test_docword, test_text, test_labels;
  std::size_t test_docs = 0;
  bool lowercase = false;
  std::string stopwords;
  std::size_t min_count = 1;

  // model and chains
  std::size_t topics = 10;
  double alpha = 0.1;
  double beta = 0.01;
  bool beta_given = false;
  std::string algorithm = "cgs_p";
  std::size_t iters = 200;
  bool sparse = false;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::size_t recompute_every = 50;
  bool shuffle = false;

  std::string out = "run";
  std::string checkpoint;

  // estimate
  std::vector<std::string> estimators = {"theta", "theta_p", "phi", "phi_p"};
  std::string theta_source = "phi_standard";

  // perplexity
  std::vector<std::size_t> averaged = {1};
  double split = 0.5;
  std::size_t heldout_sweeps = 200;

  // multilabel
  std::string preset = "1x1";
  std::string theta = "both";
  std::size_t label_min_count = 0;
  double ridge = 1.0;

  // word-assoc
  std::string cue;
  std::string candidates;

  // trace
  std::vector<std::string> trace_algorithms = {"cgs", "cgs_p", "cvb0"};
  std::size_t every = 10;

  // oracle-check
  std::size_t oracle_samples = 2000;

  // generate
  std::size_t gen_docs = 500;
  std::size_t gen_vocab = 200;
  std::size_t gen_topics = 10;
  std::size_t gen_min_length = 50;
  std::size_t gen_max_length = 150;
  double gen_alpha = 0.1;
  double gen_beta = 0.01;
  bool gen_labeled = false;
  std::size_t gen_max_labels = 3;

  std::size_t workers() const {
    return threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : threads;
  }
};

void add_options(CLI::App& app, Options& o) {
  app.add_option("--corpus", o.corpus, "corpus prefix written by `generate` or save_corpus");
  app.add_option("--docword", o.docword, "UCI docword file");
  app.add_option("--vocab", o.vocab, "vocabulary file for --docword / --test-docword");
  app.add_option("--text", o.text, "plain text, one document per line");
  app.add_option("--labels", o.labels, "label file: docId label...");
  app.add_option("--test-corpus", o.test_corpus);
  app.add_option("--test-docword", o.test_docword);
  app.add_option("--test-text", o.test_text);
  app.add_option("--test-labels", o.test_labels);
  app.add_option("--test-docs", o.test_docs, "hold out this many trailing documents when no test input is given")
      ->capture_default_str();
  app.add_flag("--lowercase", o.lowercase)->capture_default_str();
  app.add_option("--stopwords", o.stopwords, "file of terms dropped from plain-text input");
  app.add_option("--min-count", o.min_count)->capture_default_str()->check(CLI::PositiveNumber);

  app.add_option("--topics,-K", o.topics)->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--alpha", o.alpha)->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--beta", o.beta)->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--algorithm", o.algorithm)
      ->capture_default_str()
      ->check(CLI::IsMember({"cgs", "cgs_p", "cvb0"}));
  app.add_option("--iters", o.iters)->capture_default_str()->check(CLI::PositiveNumber);
  app.add_flag("--sparse", o.sparse)->capture_default_str();
  app.add_option("--seed", o.seed)->capture_default_str();
  app.add_option("--threads", o.threads, "worker cap (0 = all cores)")->capture_default_str();
  app.add_option("--recompute-every", o.recompute_every)->capture_default_str();
  app.add_flag("--shuffle", o.shuffle, "cvb0: visit documents in seeded random order")->capture_default_str();

  app.add_option("--out,-o", o.out, "run directory")->capture_default_str();
  app.add_option("--checkpoint", o.checkpoint, "defaults to <out>/state.ckpt");

  app.add_option("--estimators", o.estimators)
      ->capture_default_str()
      ->delimiter(',')
      ->check(CLI::IsMember({"theta", "theta_p", "phi", "phi_p"}));
  app.add_option("--theta-source", o.theta_source, "topic-word term of training theta_p")
      ->capture_default_str()
      ->check(CLI::IsMember({"phi_standard", "phi_p", "collapsed"}));

  app.add_option("--averaged", o.averaged, "samples averaged for held-out theta, e.g. 1,10,50")
      ->capture_default_str()
      ->delimiter(',')
      ->check(CLI::PositiveNumber);
  app.add_option("--split", o.split, "observed fraction of each test document")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  app.add_option("--heldout-sweeps", o.heldout_sweeps, "fixed-phi sweeps before the single held-out sample")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);

  app.add_option("--preset", o.preset)->capture_default_str()->check(CLI::IsMember({"1x1", "5x30"}));
  app.add_option("--theta", o.theta)->capture_default_str()->check(CLI::IsMember({"theta", "theta_p", "both"}));
  app.add_option("--label-min-count", o.label_min_count)->capture_default_str();
  app.add_option("--ridge", o.ridge)->capture_default_str()->check(CLI::NonNegativeNumber);

  app.add_option("--cue", o.cue, "cue word (term)");
  app.add_option("--candidates", o.candidates, "file with one candidate term per line");

  app.add_option("--trace-algorithms", o.trace_algorithms)
      ->capture_default_str()
      ->delimiter(',')
      ->check(CLI::IsMember({"cgs", "cgs_p", "cvb0"}));
  app.add_option("--every", o.every)->capture_default_str()->check(CLI::PositiveNumber);

  app.add_option("--oracle-samples", o.oracle_samples)->capture_default_str()->check(CLI::PositiveNumber);

  app.add_option("--gen-docs", o.gen_docs)->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--gen-vocab", o.gen_vocab)->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--gen-topics", o.gen_topics)->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--gen-min-length", o.gen_min_length)->capture_default_str();
  app.add_option("--gen-max-length", o.gen_max_length)->capture_default_str();
  app.add_option("--gen-alpha", o.gen_alpha)->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--gen-beta", o.gen_beta)->capture_default_str()->check(CLI::PositiveNumber);
  app.add_flag("--gen-labeled", o.gen_labeled)->capture_default_str();
  app.add_option("--gen-max-labels", o.gen_max_labels)->capture_default_str()->check(CLI::PositiveNumber);
}

// --- inputs -----------------------------------------------------------------

struct Input {
  Corpus corpus;
  bool from_text = false;
};

Input load_input(const Options& o, const std::string& prefix, const std::string& docword,
                 const std::string& text, const std::string& labels, const char* what) {
  const int given = !prefix.empty() + !docword.empty() + !text.empty();
  if (given != 1) {
    throw ConfigError(std::string("give exactly one of corpus, docword or text for the ") + what +
                      " input");
  }
  Input in;
  if (!prefix.empty()) {
    in.corpus = load_corpus(prefix);
  } else if (!docword.empty()) {
    if (o.vocab.empty()) throw ConfigError("docword input needs vocab");
    in.corpus = load_sparse_bow(docword, o.vocab);
  } else {
    PlaintextOptions opts{o.lowercase, {}, o.min_count};
    if (!o.stopwords.empty()) {
      std::istringstream words(read_file(o.stopwords));
      for (std::string w; words >> w;) opts.stopwords.push_back(w);
    }
    in.corpus = load_plaintext(text, opts);
    in.from_text = true;
  }
  if (!labels.empty()) in.corpus = load_labels(labels, std::move(in.corpus));
  in.corpus.validate();
  return in;
}

bool separate_test(const Options& o) {
  return !o.test_corpus.empty() || !o.test_docword.empty() || !o.test_text.empty();
}

// The training portion: every document, minus the trailing test-docs ones
// when those double as the test set.
Corpus load_training(const Options& o) {
  Corpus all = load_input(o, o.corpus, o.docword, o.text, o.labels, "training").corpus;
  if (separate_test(o) || o.test_docs == 0) return all;
  if (o.test_docs >= all.num_docs()) throw ConfigError("test-docs must be smaller than the number of documents");
  return select_documents(all, 0, all.num_docs() - o.test_docs);
}

// Plain-text test documents carry their own vocabulary and are mapped onto
// the training one by term; unknown terms are dropped. Other formats must
// share the training vocabulary exactly.
Corpus align_vocabulary(const Input& in, const Vocabulary& vocab, std::size_t& dropped) {
  if (in.corpus.vocabulary == vocab) return in.corpus;
  if (!in.from_text) throw VocabularyMismatchError("test corpus vocabulary differs from the training vocabulary");
  Corpus out = in.corpus;
  for (auto& doc : out.documents) {
    std::vector<WordId> kept;
    for (WordId w : doc.tokens) {
      if (auto v = vocab.find(in.corpus.vocabulary.term(w))) {
        kept.push_back(*v);
      } else {
        ++dropped;
      }
    }
    doc.tokens = std::move(kept);
  }
  out.vocabulary = vocab;
  return out;
}

struct TrainTest {
  Corpus train;
  Corpus test;
  std::size_t dropped = 0;
};

TrainTest load_train_test(const Options& o) {
  TrainTest tt;
  if (separate_test(o)) {
    tt.train = load_training(o);
    const Input in = load_input(o, o.test_corpus, o.test_docword, o.test_text, o.test_labels, "test");
    tt.test = align_vocabulary(in, tt.train.vocabulary, tt.dropped);
  } else {
    if (o.test_docs == 0) throw ConfigError("no test input: set test-corpus, test-docword, test-text or test-docs");
    const Corpus all = load_input(o, o.corpus, o.docword, o.text, o.labels, "training").corpus;
    if (o.test_docs >= all.num_docs()) throw ConfigError("test-docs must be smaller than the number of documents");
    const std::size_t n = all.num_docs() - o.test_docs;
    tt.train = select_documents(all, 0, n);
    tt.test = select_documents(all, n, o.test_docs);
  }
  if (tt.train.total_tokens() == 0) throw EmptyCorpusError("training corpus has no tokens");
  return tt;
}

fs::path checkpoint_path(const Options& o) {
  return o.checkpoint.empty() ? fs::path(o.out) / "state.ckpt" : fs::path(o.checkpoint);
}

void check_matches(const SamplerState& s, const Corpus& c) {
  bool ok = s.counts.vocab_size() == c.vocab_size() && s.z.size() == c.num_docs();
  for (std::size_t d = 0; ok && d < c.num_docs(); ++d) ok = s.z[d].size() == c.documents[d].tokens.size();
  if (!ok || !counts_consistent(s, c)) {
    throw VocabularyMismatchError("checkpoint does not match the training corpus");
  }
}

void check_matches(const VariationalState& s, const Corpus& c) {
  bool ok = s.doc_offsets.size() == c.num_docs() + 1 && s.soft.m_kv.cols() == c.vocab_size();
  for (std::size_t d = 0; ok && d < c.num_docs(); ++d) {
    ok = s.doc_offsets[d + 1] - s.doc_offsets[d] == c.documents[d].tokens.size();
  }
  if (!ok) throw VocabularyMismatchError("checkpoint does not match the training corpus");
}

// --- outputs ----------------------------------------------------------------

json report_header(const char* command) {
  json j;
  j["schema"] = std::string("cgsp.") + command;
  j["schema_version"] = kReportVersion;
  return j;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path.string());
  f << j.dump(2) << '\n';
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path.string());
  f << text;
}

std::string schedule_line(const ChainSchedule& s) {
  return "burn_in=" + std::to_string(s.burn_in) + " lag=" + std::to_string(s.lag) +
         " samples=" + std::to_string(s.samples) + " chains=" + std::to_string(s.chains);
}

ParamEstimate make_estimate(RealMatrix theta, RealMatrix phi, EstimatorFamily kind) {
  ParamEstimate e;
  e.theta = std::move(theta);
  e.phi = std::move(phi);
  e.meta.kind = kind;
  return e;
}

Hyperparams unsupervised_hyper(const Options& o, std::size_t K, std::size_t V) {
  return Hyperparams::symmetric(K, o.alpha, V, o.beta);
}

// --- commands ---------------------------------------------------------------

int cmd_train(const Options& o) {
  const Corpus c = load_training(o);
  if (c.total_tokens() == 0) throw EmptyCorpusError("training corpus has no tokens");
  const Hyperparams h = unsupervised_hyper(o, o.topics, c.vocab_size());
  const fs::path out(o.out);
  json r = report_header("train");
  r["algorithm"] = o.algorithm;
  r["topics"] = o.topics;
  r["documents"] = c.num_docs();
  r["tokens"] = c.total_tokens();
  r["iters"] = o.iters;
  r["seed"] = o.seed;

  if (o.algorithm == "cvb0") {
    Cvb0Options opt;
    opt.recompute_every = o.recompute_every;
    opt.shuffle_documents = o.shuffle;
    opt.order_seed = o.seed;
    const VariationalState vs = cvb0_run(c, h, SamplingMode::train(), o.iters, o.seed, opt);
    save_checkpoint(vs, out / "cvb0.ckpt");
    const ParamEstimate est = cvb0_estimates(vs, h);
    save_checkpoint(est, out / "estimate_cvb0.ckpt");
    write_csv(est.phi, out / "phi.csv");
    write_csv(est.theta, out / "theta.csv");
    r["log_likelihood"] = log_likelihood(c, est.theta, est.phi);
    write_json(out / "train.json", r);
    return 0;
  }

  ChainSchedule schedule = ChainSchedule::unsupervised_training(o.seed);
  schedule.total_train_iters = o.iters;
  const auto chains = run_chains(c, h, SamplingMode::train(), schedule, o.workers(), o.sparse);
  const SamplerState& state = chains[0].back();
  save_checkpoint(state, out / "state.ckpt");

  SoftCountOptions sc;
  sc.threads = o.workers();
  ParamEstimate standard = make_estimate(theta_standard(state.counts, h), phi_standard(state.counts, h),
                                         EstimatorFamily::standard);
  ParamEstimate cgsp = make_estimate(theta_p_training(state, c, h, TrainingPhi::phi_standard, SamplingMode::train(), sc),
                                     phi_p(state, c, h, SamplingMode::train(), sc), EstimatorFamily::cgs_p);
  save_checkpoint(standard, out / "estimate_standard.ckpt");
  save_checkpoint(cgsp, out / "estimate_cgsp.ckpt");
  write_csv(standard.phi, out / "phi.csv");
  write_csv(cgsp.phi, out / "phi_p.csv");

  r["sparse"] = o.sparse;
  r["counts_consistent"] = counts_consistent(state, c);
  r["log_likelihood"] = {{"standard", log_likelihood(c, standard.theta, standard.phi)},
                         {"cgs_p", log_likelihood(c, cgsp.theta, cgsp.phi)}};
  write_json(out / "train.json", r);
  return 0;
}

int cmd_estimate(const Options& o) {
  const Corpus c = load_training(o);
  const fs::path out(o.out);
  const fs::path ckpt = checkpoint_path(o);
  json r = report_header("estimate");
  r["checkpoint"] = ckpt.string();
  json rows = json::object();

  if (checkpoint_kind(ckpt) == CheckpointKind::variational_state) {
    const VariationalState vs = load_variational_state(ckpt);
    check_matches(vs, c);
    const ParamEstimate est = cvb0_estimates(vs, unsupervised_hyper(o, vs.num_topics, c.vocab_size()));
    write_csv(est.theta, out / "theta_cvb0.csv");
    write_csv(est.phi, out / "phi_cvb0.csv");
    rows["theta_cvb0"] = max_row_sum_error(est.theta);
    rows["phi_cvb0"] = max_row_sum_error(est.phi);
    r["family"] = "cvb0";
    r["max_row_sum_error"] = rows;
    write_json(out / "estimate.json", r);
    return 0;
  }
  if (checkpoint_kind(ckpt) != CheckpointKind::sampler_state) {
    throw ConfigError(ckpt.string() + " holds estimates, not a sampler or cvb0 state");
  }

  const SamplerState state = load_sampler_state(ckpt);
  check_matches(state, c);
  const Hyperparams h = unsupervised_hyper(o, state.num_topics(), c.vocab_size());
  SoftCountOptions sc;
  sc.threads = o.workers();
  TrainingPhi source = TrainingPhi::phi_standard;
  if (o.theta_source == "phi_p") source = TrainingPhi::phi_p;
  if (o.theta_source == "collapsed") source = TrainingPhi::collapsed;

  for (const std::string& name : o.estimators) {
    RealMatrix m;
    if (name == "theta") m = theta_standard(state.counts, h);
    if (name == "theta_p") m = theta_p_training(state, c, h, source, SamplingMode::train(), sc);
    if (name == "phi") m = phi_standard(state.counts, h);
    if (name == "phi_p") m = phi_p(state, c, h, SamplingMode::train(), sc);
    write_csv(m, out / (name + ".csv"));
    rows[name] = max_row_sum_error(m);
  }
  r["family"] = "sampler";
  r["theta_source"] = o.theta_source;
  r["max_row_sum_error"] = rows;
  write_json(out / "estimate.json", r);
  return 0;
}

json report_row(const PerplexityReport& p) {
  return {{"samples_averaged", p.samples_averaged},
          {"phi", p.phi_kind},
          {"theta", to_string(p.theta_kind)},
          {"log_likelihood", p.log_likelihood},
          {"tokens", p.token_count},
          {"perplexity", p.perplexity},
          {"schedule", schedule_line(p.schedule)}};
}

int cmd_perplexity(const Options& o) {
  TrainTest tt = load_train_test(o);
  const fs::path out(o.out);
  const fs::path ckpt = checkpoint_path(o);
  const HeldoutSplit split = split_heldout(tt.test, o.split);
  json r = report_header("perplexity");
  r["checkpoint"] = ckpt.string();
  r["test_documents"] = tt.test.num_docs();
  r["dropped_unknown_tokens"] = tt.dropped;
  r["split_fraction"] = o.split;
  json rows = json::array();

  if (checkpoint_kind(ckpt) == CheckpointKind::variational_state) {
    const VariationalState vs = load_variational_state(ckpt);
    check_matches(vs, tt.train);
    const Hyperparams h = unsupervised_hyper(o, vs.num_topics, tt.train.vocab_size());
    const RealMatrix phi = cvb0_estimates(vs, h).phi;
    for (std::size_t s : o.averaged) {
      const ChainSchedule schedule = heldout_schedule(s, o.seed, o.heldout_sweeps);
      for (ThetaKind kind : {ThetaKind::standard, ThetaKind::p}) {
        PerplexityReport p = heldout_perplexity(split, phi, h, schedule, kind, o.split, o.workers());
        p.phi_kind = "phi_cvb0";
        rows.push_back(report_row(p));
      }
    }
  } else {
    const SamplerState state = load_sampler_state(ckpt);
    check_matches(state, tt.train);
    const Hyperparams h = unsupervised_hyper(o, state.num_topics(), tt.train.vocab_size());
    SoftCountOptions sc;
    sc.threads = o.workers();
    const RealMatrix phi = phi_standard(state.counts, h);
    const RealMatrix phip = phi_p(state, tt.train, h, SamplingMode::train(), sc);
    for (std::size_t s : o.averaged) {
      for (const auto& p : perplexity_grid(split, phi, phip, h, heldout_schedule(s, o.seed, o.heldout_sweeps), o.split, o.workers())) {
        rows.push_back(report_row(p));
      }
    }
  }
  r["rows"] = rows;
  write_json(out / "perplexity.json", r);
  for (const auto& row : rows) {
    std::printf("s=%-3zu %-8s %-8s perplexity %.4f\n", row["samples_averaged"].get<std::size_t>(),
                row["phi"].get<std::string>().c_str(), row["theta"].get<std::string>().c_str(),
                row["perplexity"].get<double>());
  }
  return 0;
}

json label_scores(const F1Report& f, const std::vector<std::string>& names) {
  json per = json::array();
  for (std::size_t k = 0; k < f.per_label.size(); ++k) {
    const auto& s = f.per_label[k];
    per.push_back({{"label", names[k]}, {"tp", s.tp}, {"fp", s.fp}, {"fn", s.fn},
                   {"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}});
  }
  return per;
}

int cmd_multilabel(const Options& o) {
  TrainTest tt = load_train_test(o);
  if (!tt.train.has_labels()) throw ConfigError("multilabel needs training labels");
  const fs::path out(o.out);
  PriorLdaConfig config = o.preset == "5x30" ? PriorLdaConfig::preset_5x30(o.seed) : PriorLdaConfig::preset_1x1(o.seed);
  if (o.beta_given) config.beta = o.beta;
  config.label_min_count = o.label_min_count;
  config.ridge = o.ridge;
  config.threads = o.workers();

  const PriorLdaModel model = train_prior_lda(tt.train, config);
  if (model.skipped_documents > 0) {
    std::fprintf(stderr, "cgsp: warning: %zu training documents without labels were skipped\n",
                 model.skipped_documents);
  }
  Corpus train = remap_labels(tt.train, model.label_space);
  const CardinalityPredictor card = train_cardinality(train, o.ridge);
  const Corpus test = remap_labels(tt.test, model.label_space);
  const std::size_t K = model.label_space.size();

  json r = report_header("multilabel");
  r["preset"] = o.preset;
  r["beta"] = config.beta;
  r["labels"] = K;
  r["train_documents"] = tt.train.num_docs();
  r["skipped_unlabeled"] = model.skipped_documents;
  r["test_documents"] = test.num_docs();
  r["dropped_unknown_tokens"] = tt.dropped;
  json results = json::array();
  std::vector<ThetaKind> kinds;
  if (o.theta != "theta_p") kinds.push_back(ThetaKind::standard);
  if (o.theta != "theta") kinds.push_back(ThetaKind::p);
  for (ThetaKind kind : kinds) {
    const auto preds = predict_labels(test, model.phi, model.label_frequencies, config, kind, card);
    const F1Report f = f1_metrics(selected_labels(preds), gold_labels(test), K);
    results.push_back({{"theta", to_string(kind)},
                       {"micro_f", f.micro_f},
                       {"macro_f", f.macro_f},
                       {"example_f", f.example_f},
                       {"per_label", label_scores(f, model.label_space)}});
    std::string lines;
    for (std::size_t d = 0; d < preds.size(); ++d) {
      lines += std::to_string(d + 1);
      for (LabelId k : preds[d].selected) lines += ' ' + model.label_space[k];
      lines += '\n';
    }
    write_text(out / (std::string("predictions_") + to_string(kind) + ".txt"), lines);
    std::printf("%-8s micro-F %.4f macro-F %.4f example-F %.4f\n", to_string(kind), f.micro_f, f.macro_f,
                f.example_f);
  }
  r["results"] = results;
  write_csv(model.phi, out / "phi.csv");
  write_json(out / "multilabel.json", r);
  return 0;
}

int cmd_word_assoc(const Options& o) {
  const Corpus c = load_training(o);
  if (o.cue.empty()) throw ConfigError("word-assoc needs a cue");
  const auto cue = c.vocabulary.find(o.cue);
  if (!cue) throw ConfigError("cue '" + o.cue + "' is not in the vocabulary");
  const fs::path ckpt = checkpoint_path(o);
  const SamplerState state = load_sampler_state(ckpt);
  check_matches(state, c);
  const Hyperparams h = unsupervised_hyper(o, state.num_topics(), c.vocab_size());
  SoftCountOptions sc;
  sc.threads = o.workers();
  const RealMatrix phi = phi_standard(state.counts, h);
  const RealMatrix phip = phi_p(state, c, h, SamplingMode::train(), sc);

  std::vector<WordId> targets;
  std::vector<std::string> unknown;
  if (o.candidates.empty()) {
    for (WordId v = 0; v < c.vocab_size(); ++v) {
      if (v != *cue) targets.push_back(v);
    }
  } else {
    std::ifstream f(o.candidates);
    if (!f) throw IoError("cannot read " + o.candidates);
    std::string term;
    while (f >> term) {
      const auto v = c.vocabulary.find(term);
      if (!v) {
        unknown.push_back(term);
      } else if (*v != *cue) {
        targets.push_back(*v);
      }
    }
  }
  const auto rank_phi = association_ranks(phi, *cue, targets);
  const auto rank_phip = association_ranks(phip, *cue, targets);
  const auto score_phi = association_scores(phi, *cue);
  const auto score_phip = association_scores(phip, *cue);

  json rows = json::array();
  std::vector<double> diffs;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double diff = static_cast<double>(rank_phi[i]) - static_cast<double>(rank_phip[i]);
    diffs.push_back(diff);
    rows.push_back({{"word", c.vocabulary.term(targets[i])},
                    {"score_phi", score_phi[targets[i]]},
                    {"score_phi_p", score_phip[targets[i]]},
                    {"rank_phi", rank_phi[i]},
                    {"rank_phi_p", rank_phip[i]},
                    {"rank_difference", diff}});
  }
  double median = 0.0;
  if (!diffs.empty()) {
    std::sort(diffs.begin(), diffs.end());
    const std::size_t n = diffs.size();
    median = n % 2 ? diffs[n / 2] : 0.5 * (diffs[n / 2 - 1] + diffs[n / 2]);
  }
  json r = report_header("word_assoc");
  r["cue"] = o.cue;
  r["median_rank_difference"] = median;
  r["unknown_candidates"] = unknown;
  r["candidates"] = rows;
  write_json(fs::path(o.out) / "word_assoc.json", r);
  std::printf("%zu candidates, median rank(phi) - rank(phi_p) = %g\n", targets.size(), median);
  return 0;
}

int cmd_trace(const Options& o) {
  const Corpus c = load_training(o);
  if (c.total_tokens() == 0) throw EmptyCorpusError("training corpus has no tokens");
  const Hyperparams h = unsupervised_hyper(o, o.topics, c.vocab_size());
  TraceOptions opt;
  opt.every = o.every;
  opt.sparse = o.sparse;
  opt.cvb0.recompute_every = o.recompute_every;
  opt.cvb0.shuffle_documents = o.shuffle;
  opt.cvb0.order_seed = o.seed;
  json r = report_header("trace");
  r["topics"] = o.topics;
  r["iters"] = o.iters;
  r["seed"] = o.seed;
  json traces = json::object();
  std::string csv = "algorithm,iteration,log_likelihood,sweep_seconds,estimator_seconds,wall_clock\n";
  for (const std::string& name : o.trace_algorithms) {
    const Algorithm a = algorithm_from_string(name);
    json points = json::array();
    for (const TracePoint& p : convergence_trace(c, h, a, o.iters, o.seed, opt)) {
      points.push_back({{"iteration", p.iteration},
                        {"log_likelihood", p.log_likelihood},
                        {"sweep_seconds", p.sweep_seconds},
                        {"estimator_seconds", p.estimator_seconds},
                        {"wall_clock", p.wall_clock}});
      char line[256];
      std::snprintf(line, sizeof line, "%s,%zu,%.17g,%.9g,%.9g,%.9g\n", name.c_str(), p.iteration,
                    p.log_likelihood, p.sweep_seconds, p.estimator_seconds, p.wall_clock);
      csv += line;
    }
    traces[name] = points;
  }
  r["traces"] = traces;
  write_json(fs::path(o.out) / "trace.json", r);
  write_text(fs::path(o.out) / "trace.csv", csv);
  return 0;
}

int cmd_oracle_check(const Options& o) {
  const Corpus c = load_training(o);
  if (c.total_tokens() == 0) throw EmptyCorpusError("training corpus has no tokens");
  const Hyperparams h = unsupervised_hyper(o, o.topics, c.vocab_size());
  const SamplerState state =
      run_chain(c, h, SamplingMode::train(), ChainSchedule::fixed_budget(o.iters, o.seed), 0)[0];
  const oracle::BoundTable table = oracle::phi_p_bound_table(state, c, h);

  json cells = json::array();
  for (std::size_t i = 0; i < table.cells.size(); ++i) {
    if (!table.cells[i]) continue;
    const auto& b = *table.cells[i];
    cells.push_back({{"topic", i / table.vocab_size},
                     {"word", c.vocabulary.term(static_cast<WordId>(i % table.vocab_size))},
                     {"analytic_lower", b.analytic_lower},
                     {"lower", b.lower},
                     {"middle", b.middle},
                     {"upper", b.upper},
                     {"analytic_upper", b.analytic_upper},
                     {"holds", b.holds()}});
  }

  // theta_p and the naive estimate against the exact theta_bar, with phi
  // fixed at the trained state's standard estimate
  const RealMatrix phi = phi_standard(state.counts, h);
  const SamplingMode mode = SamplingMode::predict(phi);
  const auto snaps = run_chain(c, h, mode, ChainSchedule::averaged(o.oracle_samples, 1, o.seed), 0);
  const RealMatrix tp = theta_p(snaps, c, h, mode);
  const RealMatrix tn = theta_naive_mc(snaps, h);
  double err_p = 0.0, err_naive = 0.0;
  for (std::size_t d = 0; d < c.num_docs(); ++d) {
    const auto bar = oracle::theta_bar(oracle::exact_posterior(c.documents[d], phi, h.alpha()), h.alpha());
    for (std::size_t k = 0; k < bar.size(); ++k) {
      err_p = std::max(err_p, std::abs(tp(d, k) - bar[k]));
      err_naive = std::max(err_naive, std::abs(tn(d, k) - bar[k]));
    }
  }

  json r = report_header("oracle_check");
  r["topics"] = o.topics;
  r["iters"] = o.iters;
  r["seed"] = o.seed;
  r["bound_cells"] = cells.size();
  r["violations"] = table.violations();
  r["mean_relative_width"] = table.mean_relative_width();
  r["theta_samples"] = o.oracle_samples;
  r["theta_p_max_abs_error"] = err_p;
  r["theta_naive_max_abs_error"] = err_naive;
  r["bounds"] = cells;
  write_json(fs::path(o.out) / "oracle_check.json", r);
  std::printf("%zu bound cells, %zu violations; theta_p error %.4g, naive error %.4g (S=%zu)\n", cells.size(),
              table.violations(), err_p, err_naive, o.oracle_samples);
  return table.violations() == 0 ? 0 : 4;
}

int cmd_generate(const Options& o) {
  SyntheticSpec spec;
  spec.num_docs = o.gen_docs;
  spec.vocab_size = o.gen_vocab;
  spec.num_topics = o.gen_topics;
  spec.min_length = o.gen_min_length;
  spec.max_length = o.gen_max_length;
  spec.alpha = o.gen_alpha;
  spec.beta = o.gen_beta;
  spec.seed = o.seed;
  SyntheticCorpus g;
  if (o.gen_labeled) {
    g = generate_labeled({spec, o.gen_max_labels});
  } else {
    g = generate_lda(spec);
  }
  const fs::path out(o.out);
  save_corpus(g.corpus, out / "corpus");
  write_csv(g.theta, out / "true_theta.csv");
  write_csv(g.phi, out / "true_phi.csv");
  json r = report_header("generate");
  r["documents"] = g.corpus.num_docs();
  r["vocabulary"] = g.corpus.vocab_size();
  r["topics"] = spec.num_topics;
  r["tokens"] = g.corpus.total_tokens();
  r["labeled"] = o.gen_labeled;
  r["corpus_prefix"] = (out / "corpus").string();
  write_json(out / "generate.json", r);
  return 0;
}

int exit_code(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ArgumentError*>(&e)) return 2;
  if (dynamic_cast<const DataError*>(&e) || dynamic_cast<const RangeError*>(&e)) return 3;
  if (dynamic_cast<const NumericError*>(&e) || dynamic_cast<const DomainError*>(&e) ||
      dynamic_cast<const SizeError*>(&e) || dynamic_cast<const TrainingError*>(&e) ||
      dynamic_cast<const ConstraintError*>(&e)) {
    return 4;
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Topic models with soft-count (CGS_p) estimators"};
  app.set_config("--config", "", "flat key = value file; command-line flags override it");
  app.require_subcommand(1);
  Options o;
  add_options(app, o);

  struct Command {
    const char* name;
    const char* help;
    int (*run)(const Options&);
  };
  const std::vector<Command> commands = {
      {"train", "train by CGS or CVB0 and write the state and both phi estimates", cmd_train},
      {"estimate", "recover estimators from a training checkpoint", cmd_estimate},
      {"perplexity", "held-out perplexity for phi/phi_p x theta/theta_p", cmd_perplexity},
      {"multilabel", "Prior-LDA training, label prediction and F1", cmd_multilabel},
      {"word-assoc", "rank candidates by association with a cue under phi and phi_p", cmd_word_assoc},
      {"trace", "training log-likelihood traces for cgs, cgs_p and cvb0", cmd_trace},
      {"oracle-check", "exact-enumeration checks on a tiny corpus", cmd_oracle_check},
      {"generate", "write a synthetic corpus drawn from LDA", cmd_generate},
  };
  for (const auto& c : commands) app.add_subcommand(c.name, c.help)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  o.beta_given = app.get_option("--beta")->count() > 0;

  try {
    for (const auto& c : commands) {
      if (!app.got_subcommand(c.name)) continue;
      fs::create_directories(o.out);
      write_text(fs::path(o.out) / "config.ini", "# cgsp " + std::string(c.name) + "\n" + app.config_to_str(true, false));
      return c.run(o);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "cgsp: %s\n", e.what());
    return exit_code(e);
  }
  return 2;
}
