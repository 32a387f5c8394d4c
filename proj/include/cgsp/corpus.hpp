#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace cgsp {

using WordId = std::uint32_t;
using TopicId = std::uint32_t;
using LabelId = std::uint32_t;

/// Dense 0-based term table. Ids are assigned in insertion order.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> terms);

  /// Returns the id of `term`, adding it if it is new.
  WordId add(std::string_view term);
  std::optional<WordId> find(std::string_view term) const;

  const std::string& term(WordId id) const { return terms_.at(id); }
  const std::vector<std::string>& terms() const noexcept { return terms_; }
  std::size_t size() const noexcept { return terms_.size(); }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.terms_ == b.terms_; }

 private:
  std::vector<std::string> terms_;
  std::unordered_map<std::string, WordId> index_;
};

struct Document {
  std::vector<WordId> tokens;
  std::vector<LabelId> labels;  // sorted, unique

  std::size_t size() const noexcept { return tokens.size(); }
  bool has_label(LabelId k) const;

  friend bool operator==(const Document&, const Document&) = default;
};

struct Corpus {
  std::vector<Document> documents;
  Vocabulary vocabulary;
  std::vector<std::string> label_space;
  std::vector<std::size_t> label_frequencies;

  std::size_t num_docs() const noexcept { return documents.size(); }
  std::size_t vocab_size() const noexcept { return vocabulary.size(); }
  std::size_t num_labels() const noexcept { return label_space.size(); }
  bool has_labels() const noexcept { return !label_space.empty(); }
  std::size_t total_tokens() const;

  /// Checks token ids against V and label ids against the label space.
  void validate() const;
};

struct PlaintextOptions {
  bool lowercase = false;
  std::vector<std::string> stopwords;
  std::size_t min_count = 1;
};

/// One document per line, whitespace-delimited tokens. Blank lines are kept
/// as empty documents; a final newline does not start a new document.
Corpus load_plaintext(const std::filesystem::path& path, const PlaintextOptions& options = {});
Corpus parse_plaintext(std::string_view text, const PlaintextOptions& options = {},
                       const std::string& source = "<memory>");

/// UCI-style "docId wordId count" triples (1-based). An optional three-line
/// UCI header (D, W, NNZ) is accepted. Tokens within a document are emitted
/// in ascending word id order.
Corpus load_sparse_bow(const std::filesystem::path& docword_path,
                       const std::filesystem::path& vocab_path);
Corpus parse_sparse_bow(std::string_view docword, std::string_view vocab,
                        const std::string& source = "<memory>");
void save_sparse_bow(const Corpus& corpus, const std::filesystem::path& docword_path,
                     const std::filesystem::path& vocab_path);
std::string format_sparse_bow(const Corpus& corpus);

/// "docId label1 label2 ..." lines. Builds the label space from the union of
/// observed labels in first-seen order and recomputes label frequencies.
Corpus load_labels(const std::filesystem::path& path, Corpus corpus);
Corpus parse_labels(std::string_view text, Corpus corpus, const std::string& source = "<memory>");

/// Drops labels seen in fewer than `min_count` documents and re-indexes the rest.
Corpus filter_labels(Corpus corpus, std::size_t min_count);

/// Lossless on-disk corpus: <prefix>.vocab, <prefix>.docs (token ids per
/// line), <prefix>.labelspace and <prefix>.labels.
void save_corpus(const Corpus& corpus, const std::filesystem::path& prefix);
Corpus load_corpus(const std::filesystem::path& prefix);

struct HeldoutSplit {
  Corpus observed;
  Corpus heldout;
};

/// Positional split: the first ceil(fraction * N_d) tokens of each document
/// are observed, the rest held out. With `shuffle`, tokens are first permuted
/// per document using `seed`.
HeldoutSplit split_heldout(const Corpus& corpus, double fraction = 0.5, std::uint64_t seed = 0,
                           bool shuffle = false);

/// Selects a subset of documents (vocabulary and label space are shared).
Corpus select_documents(const Corpus& corpus, std::size_t first, std::size_t count);

std::string read_file(const std::filesystem::path& path);

}  // namespace cgsp
