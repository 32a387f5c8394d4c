#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cgsp/corpus.hpp"
#include "cgsp/matrix.hpp"

namespace cgsp {

/// Dirichlet priors: alpha on each theta_d (length K), beta on each phi_k
/// (length V). The sums are cached because every conditional uses them.
class Hyperparams {
 public:
  Hyperparams() = default;
  Hyperparams(std::vector<double> alpha, std::vector<double> beta);

  static Hyperparams symmetric(std::size_t K, double alpha, std::size_t V, double beta);

  const std::vector<double>& alpha() const noexcept { return alpha_; }
  const std::vector<double>& beta() const noexcept { return beta_; }
  double alpha(std::size_t k) const { return alpha_[k]; }
  double beta(std::size_t v) const { return beta_[v]; }
  double alpha_sum() const noexcept { return alpha_sum_; }
  double beta_sum() const noexcept { return beta_sum_; }
  std::size_t num_topics() const noexcept { return alpha_.size(); }
  std::size_t vocab_size() const noexcept { return beta_.size(); }

  /// Same beta, different alpha (Prior-LDA switches alpha between phases).
  Hyperparams with_alpha(std::vector<double> alpha) const;

 private:
  std::vector<double> alpha_;
  std::vector<double> beta_;
  double alpha_sum_ = 0.0;
  double beta_sum_ = 0.0;
};

/// Hard-assignment tallies. n_kv is topic-major: row k holds topic k's word counts.
struct CountMatrices {
  CountMatrix n_dk;
  CountMatrix n_kv;
  std::vector<std::int64_t> n_k;
  std::vector<std::int64_t> n_d;

  std::size_t num_docs() const noexcept { return n_dk.rows(); }
  std::size_t num_topics() const noexcept { return n_kv.rows(); }
  std::size_t vocab_size() const noexcept { return n_kv.cols(); }

  friend bool operator==(const CountMatrices&, const CountMatrices&) = default;
};

using Assignments = std::vector<std::vector<TopicId>>;

struct SamplerState {
  Assignments z;
  CountMatrices counts;
  std::uint64_t rng_seed = 0;
  std::uint64_t iteration = 0;

  std::size_t num_topics() const noexcept { return counts.num_topics(); }

  friend bool operator==(const SamplerState&, const SamplerState&) = default;
};

/// Sums of per-token probability vectors.
struct SoftCounts {
  RealMatrix m_dk;
  RealMatrix m_kv;
  std::vector<double> m_k;

  friend bool operator==(const SoftCounts&, const SoftCounts&) = default;
};

enum class EstimatorFamily : std::uint8_t { standard = 0, cgs_p = 1, cvb0 = 2 };

const char* to_string(EstimatorFamily kind);
EstimatorFamily estimator_family_from_string(const std::string& name);

struct EstimateMeta {
  EstimatorFamily kind = EstimatorFamily::standard;
  std::uint32_t chains = 1;
  std::uint32_t samples_per_chain = 1;

  friend bool operator==(const EstimateMeta&, const EstimateMeta&) = default;
};

/// Row-stochastic theta (D x K) and phi (K x V). Either may be empty.
struct ParamEstimate {
  RealMatrix theta;
  RealMatrix phi;
  EstimateMeta meta;

  friend bool operator==(const ParamEstimate&, const ParamEstimate&) = default;
};

/// Tally of z over the corpus tokens. Throws RangeError for a topic id >= K.
CountMatrices rebuild_counts(const Assignments& z, const Corpus& corpus, std::size_t K);

/// Builds a full state (counts included) from assignments.
SamplerState make_state(Assignments z, const Corpus& corpus, std::size_t K,
                        std::uint64_t rng_seed = 0, std::uint64_t iteration = 0);

/// True when the stored counts equal a fresh tally of z.
bool counts_consistent(const SamplerState& state, const Corpus& corpus);

/// Maximum absolute deviation of each row sum from 1 (0 for an empty matrix).
double max_row_sum_error(const RealMatrix& m);

/// Renormalizes every row in place so it sums to 1.
void normalize_rows(RealMatrix& m);

// ---------------------------------------------------------------------------
// Checkpoint container
//
//   magic "CGSPCKPT" (8 bytes) | version (1 byte) | u64 LE metadata length |
//   metadata (UTF-8 JSON) | arrays, each: u64 LE element count + payload
//
// Integer payloads are little-endian u32/i32/i64; reals are IEEE-754 binary64
// bit patterns in little-endian order, so every value round-trips exactly.
// ---------------------------------------------------------------------------

inline constexpr char kCheckpointMagic[8] = {'C', 'G', 'S', 'P', 'C', 'K', 'P', 'T'};
inline constexpr std::uint8_t kCheckpointVersion = 1;

enum class CheckpointKind { sampler_state, param_estimate, variational_state };

struct VariationalState;  // cvb0.hpp

CheckpointKind checkpoint_kind(const std::filesystem::path& path);

void save_checkpoint(const SamplerState& state, const std::filesystem::path& path);
void save_checkpoint(const ParamEstimate& estimate, const std::filesystem::path& path);
void save_checkpoint(const VariationalState& state, const std::filesystem::path& path);

SamplerState load_sampler_state(const std::filesystem::path& path);
ParamEstimate load_param_estimate(const std::filesystem::path& path);
VariationalState load_variational_state(const std::filesystem::path& path);

/// Writes one matrix as CSV (no header), full round-trip precision.
void write_csv(const RealMatrix& m, const std::filesystem::path& path);
void write_csv(const CountMatrix& m, const std::filesystem::path& path);

}  // namespace cgsp
