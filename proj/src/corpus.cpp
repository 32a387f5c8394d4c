#include "cgsp/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "cgsp/errors.hpp"
#include "cgsp/rng.hpp"

namespace cgsp {

namespace {

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  return lines;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) fields.push_back(line.substr(i, j - i));
    i = j;
  }
  return fields;
}

bool is_blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(),
                     [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; });
}

std::uint64_t parse_uint(std::string_view field, const std::string& source, std::size_t line,
                         const char* what) {
  std::uint64_t value = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size()) {
    throw FormatError(source, line,
                      std::string("expected non-negative integer ") + what + ", got '" +
                          std::string(field) + "'");
  }
  return value;
}

void recompute_label_frequencies(Corpus& corpus) {
  corpus.label_frequencies.assign(corpus.label_space.size(), 0);
  for (const auto& doc : corpus.documents) {
    for (LabelId k : doc.labels) ++corpus.label_frequencies.at(k);
  }
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << content;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace

Vocabulary::Vocabulary(std::vector<std::string> terms) {
  for (auto& t : terms) {
    if (index_.count(t) != 0) throw FormatError("duplicate vocabulary term '" + t + "'");
    add(t);
  }
}

WordId Vocabulary::add(std::string_view term) {
  std::string key(term);
  auto it = index_.find(key);
  if (it != index_.end()) return it->second;
  const auto id = static_cast<WordId>(terms_.size());
  terms_.push_back(key);
  index_.emplace(std::move(key), id);
  return id;
}

std::optional<WordId> Vocabulary::find(std::string_view term) const {
  auto it = index_.find(std::string(term));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

bool Document::has_label(LabelId k) const {
  return std::binary_search(labels.begin(), labels.end(), k);
}

std::size_t Corpus::total_tokens() const {
  std::size_t n = 0;
  for (const auto& d : documents) n += d.tokens.size();
  return n;
}

void Corpus::validate() const {
  const std::size_t V = vocab_size();
  const std::size_t L = num_labels();
  for (std::size_t d = 0; d < documents.size(); ++d) {
    for (WordId w : documents[d].tokens) {
      if (w >= V) throw RangeError("document " + std::to_string(d) + " has token id " +
                                   std::to_string(w) + " >= V=" + std::to_string(V));
    }
    for (LabelId k : documents[d].labels) {
      if (k >= L) throw RangeError("document " + std::to_string(d) + " has label id " +
                                   std::to_string(k) + " outside the label space");
    }
  }
  if (!label_frequencies.empty() && label_frequencies.size() != L) {
    throw RangeError("label frequency table does not match the label space");
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Corpus parse_plaintext(std::string_view text, const PlaintextOptions& options,
                       const std::string& source) {
  if (options.min_count < 1) throw ArgumentError("min_count must be >= 1");
  std::unordered_set<std::string> stop;
  for (const auto& s : options.stopwords) {
    std::string w = s;
    if (options.lowercase) {
      std::transform(w.begin(), w.end(), w.begin(),
                     [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    }
    stop.insert(std::move(w));
  }

  std::vector<std::vector<std::string>> raw;
  std::unordered_map<std::string, std::size_t> counts;
  for (std::string_view line : split_lines(text)) {
    auto& doc = raw.emplace_back();
    for (std::string_view field : split_fields(line)) {
      std::string w(field);
      if (options.lowercase) {
        std::transform(w.begin(), w.end(), w.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
      }
      if (stop.count(w) != 0) continue;
      ++counts[w];
      doc.push_back(std::move(w));
    }
  }

  // Filtering is corpus-global and happens before id assignment.
  Corpus corpus;
  corpus.documents.reserve(raw.size());
  for (const auto& words : raw) {
    Document doc;
    for (const auto& w : words) {
      if (counts[w] < options.min_count) continue;
      doc.tokens.push_back(corpus.vocabulary.add(w));
    }
    corpus.documents.push_back(std::move(doc));
  }
  if (corpus.total_tokens() == 0) {
    throw EmptyCorpusError(source + ": corpus is empty after filtering");
  }
  return corpus;
}

Corpus load_plaintext(const std::filesystem::path& path, const PlaintextOptions& options) {
  return parse_plaintext(read_file(path), options, path.string());
}

Corpus parse_sparse_bow(std::string_view docword, std::string_view vocab,
                        const std::string& source) {
  Corpus corpus;
  {
    std::vector<std::string> terms;
    for (std::string_view line : split_lines(vocab)) {
      auto fields = split_fields(line);
      if (fields.empty()) continue;
      terms.emplace_back(fields.front());
    }
    corpus.vocabulary = Vocabulary(std::move(terms));
  }
  const std::uint64_t V = corpus.vocabulary.size();

  const auto lines = split_lines(docword);
  std::size_t first = 0;
  std::uint64_t header_docs = 0;
  // Optional UCI header: three single-integer lines (D, W, NNZ).
  {
    std::size_t i = 0;
    while (i < lines.size() && is_blank(lines[i])) ++i;
    if (i < lines.size() && split_fields(lines[i]).size() == 1) {
      std::uint64_t header[3] = {0, 0, 0};
      for (int h = 0; h < 3; ++h, ++i) {
        if (i >= lines.size()) throw FormatError(source, i + 1, "truncated UCI header");
        auto f = split_fields(lines[i]);
        if (f.size() != 1) throw FormatError(source, i + 1, "malformed UCI header line");
        header[h] = parse_uint(f[0], source, i + 1, "header value");
      }
      if (header[1] != V) {
        throw FormatError(source, 2, "header W=" + std::to_string(header[1]) +
                                         " does not match vocabulary size " + std::to_string(V));
      }
      header_docs = header[0];
      first = i;
    }
  }

  std::map<std::uint64_t, std::map<std::uint64_t, std::uint64_t>> entries;
  std::uint64_t max_doc = header_docs;
  for (std::size_t i = first; i < lines.size(); ++i) {
    if (is_blank(lines[i])) continue;
    const std::size_t lineno = i + 1;
    auto f = split_fields(lines[i]);
    if (f.size() != 3) throw FormatError(source, lineno, "expected 'docId wordId count'");
    const auto doc = parse_uint(f[0], source, lineno, "docId");
    const auto word = parse_uint(f[1], source, lineno, "wordId");
    const auto count = parse_uint(f[2], source, lineno, "count");
    if (doc == 0) throw FormatError(source, lineno, "docId must be >= 1");
    if (header_docs != 0 && doc > header_docs) {
      throw FormatError(source, lineno, "docId " + std::to_string(doc) + " exceeds header D");
    }
    if (word == 0 || word > V) {
      throw FormatError(source, lineno,
                        "wordId " + std::to_string(word) + " out of range [1, " +
                            std::to_string(V) + "]");
    }
    entries[doc][word] += count;
    max_doc = std::max(max_doc, doc);
  }

  corpus.documents.resize(max_doc);
  for (const auto& [doc, words] : entries) {
    auto& tokens = corpus.documents[doc - 1].tokens;
    for (const auto& [word, count] : words) {
      tokens.insert(tokens.end(), count, static_cast<WordId>(word - 1));
    }
  }
  return corpus;
}

Corpus load_sparse_bow(const std::filesystem::path& docword_path,
                       const std::filesystem::path& vocab_path) {
  return parse_sparse_bow(read_file(docword_path), read_file(vocab_path), docword_path.string());
}

std::string format_sparse_bow(const Corpus& corpus) {
  std::ostringstream out;
  for (std::size_t d = 0; d < corpus.documents.size(); ++d) {
    std::map<WordId, std::size_t> counts;
    for (WordId w : corpus.documents[d].tokens) ++counts[w];
    for (const auto& [w, c] : counts) out << d + 1 << ' ' << w + 1 << ' ' << c << '\n';
  }
  return out.str();
}

void save_sparse_bow(const Corpus& corpus, const std::filesystem::path& docword_path,
                     const std::filesystem::path& vocab_path) {
  write_file(docword_path, format_sparse_bow(corpus));
  std::string vocab;
  for (const auto& t : corpus.vocabulary.terms()) vocab += t + '\n';
  write_file(vocab_path, vocab);
}

Corpus parse_labels(std::string_view text, Corpus corpus, const std::string& source) {
  corpus.label_space.clear();
  std::unordered_map<std::string, LabelId> index;
  for (auto& doc : corpus.documents) doc.labels.clear();

  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (is_blank(lines[i])) continue;
    const std::size_t lineno = i + 1;
    auto f = split_fields(lines[i]);
    const auto doc = parse_uint(f[0], source, lineno, "docId");
    if (doc == 0 || doc > corpus.documents.size()) {
      throw FormatError(source, lineno,
                        "docId " + std::to_string(doc) + " out of range [1, " +
                            std::to_string(corpus.documents.size()) + "]");
    }
    auto& labels = corpus.documents[doc - 1].labels;
    for (std::size_t j = 1; j < f.size(); ++j) {
      std::string name(f[j]);
      auto it = index.find(name);
      if (it == index.end()) {
        it = index.emplace(name, static_cast<LabelId>(corpus.label_space.size())).first;
        corpus.label_space.push_back(name);
      }
      labels.push_back(it->second);
    }
  }
  for (auto& doc : corpus.documents) {
    std::sort(doc.labels.begin(), doc.labels.end());
    doc.labels.erase(std::unique(doc.labels.begin(), doc.labels.end()), doc.labels.end());
  }
  recompute_label_frequencies(corpus);
  return corpus;
}

Corpus load_labels(const std::filesystem::path& path, Corpus corpus) {
  return parse_labels(read_file(path), std::move(corpus), path.string());
}

Corpus filter_labels(Corpus corpus, std::size_t min_count) {
  recompute_label_frequencies(corpus);
  std::vector<std::int64_t> remap(corpus.label_space.size(), -1);
  std::vector<std::string> kept;
  for (std::size_t k = 0; k < corpus.label_space.size(); ++k) {
    if (corpus.label_frequencies[k] >= min_count) {
      remap[k] = static_cast<std::int64_t>(kept.size());
      kept.push_back(corpus.label_space[k]);
    }
  }
  for (auto& doc : corpus.documents) {
    std::vector<LabelId> labels;
    for (LabelId k : doc.labels) {
      if (remap[k] >= 0) labels.push_back(static_cast<LabelId>(remap[k]));
    }
    doc.labels = std::move(labels);
  }
  corpus.label_space = std::move(kept);
  recompute_label_frequencies(corpus);
  return corpus;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& prefix) {
  auto with_ext = [&](const char* ext) {
    auto p = prefix;
    p += ext;
    return p;
  };
  std::string vocab;
  for (const auto& t : corpus.vocabulary.terms()) vocab += t + '\n';
  write_file(with_ext(".vocab"), vocab);

  std::ostringstream docs;
  for (const auto& doc : corpus.documents) {
    for (std::size_t j = 0; j < doc.tokens.size(); ++j) {
      if (j) docs << ' ';
      docs << doc.tokens[j];
    }
    docs << '\n';
  }
  write_file(with_ext(".docs"), docs.str());

  std::string space;
  for (const auto& l : corpus.label_space) space += l + '\n';
  write_file(with_ext(".labelspace"), space);

  std::ostringstream labels;
  for (std::size_t d = 0; d < corpus.documents.size(); ++d) {
    if (corpus.documents[d].labels.empty()) continue;
    labels << d + 1;
    for (LabelId k : corpus.documents[d].labels) labels << ' ' << corpus.label_space[k];
    labels << '\n';
  }
  write_file(with_ext(".labels"), labels.str());
}

Corpus load_corpus(const std::filesystem::path& prefix) {
  auto with_ext = [&](const char* ext) {
    auto p = prefix;
    p += ext;
    return p;
  };
  Corpus corpus;
  {
    std::vector<std::string> terms;
    const std::string text = read_file(with_ext(".vocab"));
    for (auto line : split_lines(text)) terms.emplace_back(line);
    corpus.vocabulary = Vocabulary(std::move(terms));
  }
  const auto docs_path = with_ext(".docs");
  const std::string docs_text = read_file(docs_path);
  const auto lines = split_lines(docs_text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    Document doc;
    for (auto f : split_fields(lines[i])) {
      const auto w = parse_uint(f, docs_path.string(), i + 1, "token id");
      if (w >= corpus.vocabulary.size()) {
        throw FormatError(docs_path.string(), i + 1, "token id " + std::to_string(w) + " >= V");
      }
      doc.tokens.push_back(static_cast<WordId>(w));
    }
    corpus.documents.push_back(std::move(doc));
  }

  const auto space_path = with_ext(".labelspace");
  if (std::filesystem::exists(space_path)) {
    std::unordered_map<std::string, LabelId> index;
    const std::string space_text = read_file(space_path);
    for (auto line : split_lines(space_text)) {
      index.emplace(std::string(line), static_cast<LabelId>(corpus.label_space.size()));
      corpus.label_space.emplace_back(line);
    }
    const auto labels_path = with_ext(".labels");
    const std::string text = std::filesystem::exists(labels_path) ? read_file(labels_path) : "";
    const auto label_lines = split_lines(text);
    for (std::size_t i = 0; i < label_lines.size(); ++i) {
      if (is_blank(label_lines[i])) continue;
      auto f = split_fields(label_lines[i]);
      const auto d = parse_uint(f[0], labels_path.string(), i + 1, "docId");
      if (d == 0 || d > corpus.documents.size()) {
        throw FormatError(labels_path.string(), i + 1, "docId out of range");
      }
      for (std::size_t j = 1; j < f.size(); ++j) {
        auto it = index.find(std::string(f[j]));
        if (it == index.end()) {
          throw FormatError(labels_path.string(), i + 1,
                            "label '" + std::string(f[j]) + "' missing from label space");
        }
        corpus.documents[d - 1].labels.push_back(it->second);
      }
      auto& labels = corpus.documents[d - 1].labels;
      std::sort(labels.begin(), labels.end());
      labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
    }
    recompute_label_frequencies(corpus);
  }
  return corpus;
}

HeldoutSplit split_heldout(const Corpus& corpus, double fraction, std::uint64_t seed, bool shuffle) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw ArgumentError("held-out fraction must lie in (0, 1)");
  }
  if (corpus.documents.empty()) throw EmptyCorpusError("cannot split an empty corpus");

  HeldoutSplit split;
  split.observed.vocabulary = corpus.vocabulary;
  split.observed.label_space = corpus.label_space;
  split.observed.label_frequencies = corpus.label_frequencies;
  split.heldout.vocabulary = corpus.vocabulary;
  split.heldout.label_space = corpus.label_space;
  split.heldout.label_frequencies = corpus.label_frequencies;

  Rng rng(seed);
  for (const auto& doc : corpus.documents) {
    std::vector<WordId> tokens = doc.tokens;
    if (shuffle) {
      for (std::size_t i = tokens.size(); i > 1; --i) {
        std::swap(tokens[i - 1], tokens[rng.below(i)]);
      }
    }
    // The epsilon absorbs representation error, e.g. 0.3 * 10 = 3.0000000000000004.
    const double exact = fraction * static_cast<double>(tokens.size());
    const auto cut = std::min<std::size_t>(tokens.size(),
                                           static_cast<std::size_t>(std::ceil(exact - 1e-9)));
    Document observed{{tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(cut)},
                      doc.labels};
    Document heldout{{tokens.begin() + static_cast<std::ptrdiff_t>(cut), tokens.end()},
                     doc.labels};
    split.observed.documents.push_back(std::move(observed));
    split.heldout.documents.push_back(std::move(heldout));
  }
  return split;
}

Corpus select_documents(const Corpus& corpus, std::size_t first, std::size_t count) {
  if (first + count > corpus.documents.size()) throw ArgumentError("document range out of bounds");
  Corpus out;
  out.vocabulary = corpus.vocabulary;
  out.label_space = corpus.label_space;
  out.documents.assign(corpus.documents.begin() + static_cast<std::ptrdiff_t>(first),
                       corpus.documents.begin() + static_cast<std::ptrdiff_t>(first + count));
  recompute_label_frequencies(out);
  return out;
}

}  // namespace cgsp
