#include "cgsp/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "cgsp/cvb0.hpp"
#include "cgsp/errors.hpp"

namespace cgsp {

using nlohmann::json;

Hyperparams::Hyperparams(std::vector<double> alpha, std::vector<double> beta)
    : alpha_(std::move(alpha)), beta_(std::move(beta)) {
  for (double a : alpha_) {
    if (!(a > 0.0) || !std::isfinite(a)) throw ArgumentError("alpha entries must be positive");
  }
  for (double b : beta_) {
    if (!(b > 0.0) || !std::isfinite(b)) throw ArgumentError("beta entries must be positive");
  }
  alpha_sum_ = std::accumulate(alpha_.begin(), alpha_.end(), 0.0);
  beta_sum_ = std::accumulate(beta_.begin(), beta_.end(), 0.0);
}

Hyperparams Hyperparams::symmetric(std::size_t K, double alpha, std::size_t V, double beta) {
  return Hyperparams(std::vector<double>(K, alpha), std::vector<double>(V, beta));
}

Hyperparams Hyperparams::with_alpha(std::vector<double> alpha) const {
  return Hyperparams(std::move(alpha), beta_);
}

const char* to_string(EstimatorFamily kind) {
  switch (kind) {
    case EstimatorFamily::standard: return "standard";
    case EstimatorFamily::cgs_p: return "cgs_p";
    case EstimatorFamily::cvb0: return "cvb0";
  }
  return "unknown";
}

EstimatorFamily estimator_family_from_string(const std::string& name) {
  if (name == "standard") return EstimatorFamily::standard;
  if (name == "cgs_p") return EstimatorFamily::cgs_p;
  if (name == "cvb0") return EstimatorFamily::cvb0;
  throw FormatError("unknown estimator kind '" + name + "'");
}

CountMatrices rebuild_counts(const Assignments& z, const Corpus& corpus, std::size_t K) {
  if (z.size() != corpus.documents.size()) {
    throw RangeError("assignment table has " + std::to_string(z.size()) + " documents, corpus has " +
                     std::to_string(corpus.documents.size()));
  }
  const std::size_t D = corpus.documents.size();
  const std::size_t V = corpus.vocab_size();
  CountMatrices c{CountMatrix(D, K), CountMatrix(K, V), std::vector<std::int64_t>(K, 0),
                  std::vector<std::int64_t>(D, 0)};
  for (std::size_t d = 0; d < D; ++d) {
    const auto& tokens = corpus.documents[d].tokens;
    if (z[d].size() != tokens.size()) {
      throw RangeError("assignments of document " + std::to_string(d) + " do not align with tokens");
    }
    for (std::size_t j = 0; j < tokens.size(); ++j) {
      const TopicId k = z[d][j];
      if (k >= K) {
        throw RangeError("topic id " + std::to_string(k) + " >= K=" + std::to_string(K));
      }
      ++c.n_dk(d, k);
      ++c.n_kv(k, tokens[j]);
      ++c.n_k[k];
    }
    c.n_d[d] = static_cast<std::int64_t>(tokens.size());
  }
  return c;
}

SamplerState make_state(Assignments z, const Corpus& corpus, std::size_t K, std::uint64_t rng_seed,
                        std::uint64_t iteration) {
  SamplerState s;
  s.counts = rebuild_counts(z, corpus, K);
  s.z = std::move(z);
  s.rng_seed = rng_seed;
  s.iteration = iteration;
  return s;
}

bool counts_consistent(const SamplerState& state, const Corpus& corpus) {
  try {
    return rebuild_counts(state.z, corpus, state.num_topics()) == state.counts;
  } catch (const RangeError&) {
    return false;
  }
}

double max_row_sum_error(const RealMatrix& m) {
  double worst = 0.0;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double s = 0.0;
    for (double x : m.row(r)) s += x;
    worst = std::max(worst, std::abs(s - 1.0));
  }
  return worst;
}

void normalize_rows(RealMatrix& m) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    double s = 0.0;
    for (double x : row) s += x;
    for (double& x : row) x /= s;
  }
}

// --------------------------------------------------------------------------
// Binary container
// --------------------------------------------------------------------------

namespace {

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path) : path_(path), out_(path, std::ios::binary) {
    if (!out_) throw IoError("cannot open '" + path.string() + "' for writing");
  }

  void header(const json& meta) {
    out_.write(kCheckpointMagic, sizeof kCheckpointMagic);
    out_.put(static_cast<char>(kCheckpointVersion));
    const std::string blob = meta.dump();
    u64(blob.size());
    out_.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  }

  void u64(std::uint64_t x) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(x >> (8 * i));
    out_.write(reinterpret_cast<const char*>(b), 8);
  }

  template <class T>
  void array(const T* data, std::size_t n) {
    u64(n);
    for (std::size_t i = 0; i < n; ++i) scalar(data[i]);
  }
  template <class T>
  void array(const std::vector<T>& v) { array(v.data(), v.size()); }

  void finish() {
    out_.flush();
    if (!out_) throw IoError("write failed for '" + path_.string() + "'");
  }

 private:
  void scalar(std::uint32_t x) { le(x); }
  void scalar(std::int32_t x) { le(static_cast<std::uint32_t>(x)); }
  void scalar(std::int64_t x) { le(static_cast<std::uint64_t>(x)); }
  void scalar(std::uint64_t x) { le(x); }
  void scalar(double x) { le(std::bit_cast<std::uint64_t>(x)); }

  template <class U>
  void le(U x) {
    unsigned char b[sizeof(U)];
    for (std::size_t i = 0; i < sizeof(U); ++i) b[i] = static_cast<unsigned char>(x >> (8 * i));
    out_.write(reinterpret_cast<const char*>(b), sizeof(U));
  }

  std::filesystem::path path_;
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : path_(path.string()) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read '" + path_ + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    buf_ = ss.str();
  }

  json header() {
    if (buf_.size() < 9 || std::memcmp(buf_.data(), kCheckpointMagic, 8) != 0) {
      throw FormatError(path_ + ": not a checkpoint (bad magic bytes)");
    }
    const auto version = static_cast<std::uint8_t>(buf_[8]);
    if (version != kCheckpointVersion) {
      throw IncompatibleVersionError(path_ + ": checkpoint version " + std::to_string(version) +
                                     " is not supported (expected " +
                                     std::to_string(kCheckpointVersion) + ")");
    }
    pos_ = 9;
    const std::uint64_t n = u64();
    need(n);
    json meta;
    try {
      meta = json::parse(buf_.substr(pos_, n));
    } catch (const json::exception& e) {
      throw FormatError(path_ + ": corrupt metadata: " + e.what());
    }
    pos_ += n;
    return meta;
  }

  std::uint64_t u64() { return le<std::uint64_t>(); }

  template <class T>
  std::vector<T> array(std::size_t expected) {
    const std::uint64_t n = u64();
    if (n != expected) {
      throw FormatError(path_ + ": array length " + std::to_string(n) + " does not match metadata (" +
                        std::to_string(expected) + ")");
    }
    need(n * sizeof(T));
    std::vector<T> out(n);
    for (auto& x : out) x = scalar<T>();
    return out;
  }

  void expect_end() const {
    if (pos_ != buf_.size()) throw FormatError(path_ + ": trailing bytes after checkpoint payload");
  }

 private:
  void need(std::uint64_t n) const {
    if (n > buf_.size() - pos_) throw FormatError(path_ + ": truncated checkpoint");
  }

  template <class U>
  U le() {
    need(sizeof(U));
    U x = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      x |= static_cast<U>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(U);
    return x;
  }

  template <class T>
  T scalar() {
    if constexpr (std::is_same_v<T, double>) {
      return std::bit_cast<double>(le<std::uint64_t>());
    } else if constexpr (std::is_same_v<T, std::int32_t>) {
      return static_cast<std::int32_t>(le<std::uint32_t>());
    } else if constexpr (std::is_same_v<T, std::int64_t>) {
      return static_cast<std::int64_t>(le<std::uint64_t>());
    } else {
      return le<T>();
    }
  }

  std::string path_;
  std::string buf_;
  std::size_t pos_ = 0;
};

template <class T>
Matrix<T> to_matrix(std::vector<T> data, std::size_t rows, std::size_t cols) {
  Matrix<T> m(rows, cols);
  m.storage() = std::move(data);
  return m;
}

CheckpointKind kind_from_meta(const json& meta, const std::string& path) {
  const std::string kind = meta.value("kind", "");
  if (kind == "sampler_state") return CheckpointKind::sampler_state;
  if (kind == "param_estimate") return CheckpointKind::param_estimate;
  if (kind == "variational_state") return CheckpointKind::variational_state;
  throw FormatError(path + ": unknown checkpoint kind '" + kind + "'");
}

json open_as(Reader& r, CheckpointKind expected, const std::filesystem::path& path) {
  json meta = r.header();
  if (kind_from_meta(meta, path.string()) != expected) {
    throw FormatError(path.string() + ": checkpoint holds a '" + meta.value("kind", "") +
                      "', not the requested kind");
  }
  return meta;
}

}  // namespace

CheckpointKind checkpoint_kind(const std::filesystem::path& path) {
  Reader r(path);
  return kind_from_meta(r.header(), path.string());
}

void save_checkpoint(const SamplerState& state, const std::filesystem::path& path) {
  const std::size_t D = state.counts.num_docs();
  const std::size_t K = state.counts.num_topics();
  const std::size_t V = state.counts.vocab_size();
  std::vector<std::uint32_t> lengths;
  std::vector<std::uint32_t> flat;
  for (const auto& zd : state.z) {
    lengths.push_back(static_cast<std::uint32_t>(zd.size()));
    flat.insert(flat.end(), zd.begin(), zd.end());
  }
  Writer w(path);
  w.header(json{{"kind", "sampler_state"},
                {"D", D},
                {"K", K},
                {"V", V},
                {"tokens", flat.size()},
                {"rng_seed", state.rng_seed},
                {"iteration", state.iteration}});
  w.array(lengths);
  w.array(flat);
  w.array(state.counts.n_dk.storage());
  w.array(state.counts.n_kv.storage());
  w.array(state.counts.n_k);
  w.array(state.counts.n_d);
  w.finish();
}

SamplerState load_sampler_state(const std::filesystem::path& path) {
  Reader r(path);
  const json meta = open_as(r, CheckpointKind::sampler_state, path);
  const std::size_t D = meta.at("D"), K = meta.at("K"), V = meta.at("V"), N = meta.at("tokens");
  SamplerState s;
  s.rng_seed = meta.at("rng_seed");
  s.iteration = meta.at("iteration");
  const auto lengths = r.array<std::uint32_t>(D);
  const auto flat = r.array<std::uint32_t>(N);
  std::size_t pos = 0;
  for (auto len : lengths) {
    if (pos + len > flat.size()) throw FormatError(path.string() + ": inconsistent document lengths");
    s.z.emplace_back(flat.begin() + static_cast<std::ptrdiff_t>(pos),
                     flat.begin() + static_cast<std::ptrdiff_t>(pos + len));
    pos += len;
  }
  s.counts.n_dk = to_matrix(r.array<std::int32_t>(D * K), D, K);
  s.counts.n_kv = to_matrix(r.array<std::int32_t>(K * V), K, V);
  s.counts.n_k = r.array<std::int64_t>(K);
  s.counts.n_d = r.array<std::int64_t>(D);
  r.expect_end();
  return s;
}

void save_checkpoint(const ParamEstimate& e, const std::filesystem::path& path) {
  Writer w(path);
  w.header(json{{"kind", "param_estimate"},
                {"theta_rows", e.theta.rows()},
                {"theta_cols", e.theta.cols()},
                {"phi_rows", e.phi.rows()},
                {"phi_cols", e.phi.cols()},
                {"estimator", to_string(e.meta.kind)},
                {"chains", e.meta.chains},
                {"samples_per_chain", e.meta.samples_per_chain}});
  w.array(e.theta.storage());
  w.array(e.phi.storage());
  w.finish();
}

ParamEstimate load_param_estimate(const std::filesystem::path& path) {
  Reader r(path);
  const json meta = open_as(r, CheckpointKind::param_estimate, path);
  ParamEstimate e;
  const std::size_t tr = meta.at("theta_rows"), tc = meta.at("theta_cols");
  const std::size_t pr = meta.at("phi_rows"), pc = meta.at("phi_cols");
  e.theta = to_matrix(r.array<double>(tr * tc), tr, tc);
  e.phi = to_matrix(r.array<double>(pr * pc), pr, pc);
  e.meta.kind = estimator_family_from_string(meta.at("estimator"));
  e.meta.chains = meta.at("chains");
  e.meta.samples_per_chain = meta.at("samples_per_chain");
  r.expect_end();
  return e;
}

void save_checkpoint(const VariationalState& s, const std::filesystem::path& path) {
  const std::size_t D = s.soft.m_dk.rows();
  const std::size_t K = s.num_topics;
  const std::size_t V = s.soft.m_kv.cols();
  std::vector<std::uint64_t> offsets(s.doc_offsets.begin(), s.doc_offsets.end());
  Writer w(path);
  w.header(json{{"kind", "variational_state"},
                {"D", D},
                {"K", K},
                {"V", V},
                {"tokens", s.gamma.size() / std::max<std::size_t>(K, 1)},
                {"iteration", s.iteration}});
  w.array(offsets);
  w.array(s.gamma);
  w.array(s.soft.m_dk.storage());
  w.array(s.soft.m_kv.storage());
  w.array(s.soft.m_k);
  w.finish();
}

VariationalState load_variational_state(const std::filesystem::path& path) {
  Reader r(path);
  const json meta = open_as(r, CheckpointKind::variational_state, path);
  const std::size_t D = meta.at("D"), K = meta.at("K"), V = meta.at("V"), N = meta.at("tokens");
  VariationalState s;
  s.num_topics = K;
  s.iteration = meta.at("iteration");
  const auto offsets = r.array<std::uint64_t>(D + 1);
  s.doc_offsets.assign(offsets.begin(), offsets.end());
  s.gamma = r.array<double>(N * K);
  s.soft.m_dk = to_matrix(r.array<double>(D * K), D, K);
  s.soft.m_kv = to_matrix(r.array<double>(K * V), K, V);
  s.soft.m_k = r.array<double>(K);
  r.expect_end();
  return s;
}

namespace {

template <class T>
void write_csv_impl(const Matrix<T>& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (c) out << ',';
      out << m(r, c);
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace

void write_csv(const RealMatrix& m, const std::filesystem::path& path) { write_csv_impl(m, path); }
void write_csv(const CountMatrix& m, const std::filesystem::path& path) { write_csv_impl(m, path); }

}  // namespace cgsp
