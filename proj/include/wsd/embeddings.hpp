#pragma once

// Vocabulary, sense inventory and the two trainable lookup tables.
//
// A table is logically a d x v matrix whose columns are embeddings; columns
// are stored contiguously so a lookup is a span, not a strided gather.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "wsd/errors.hpp"
#include "wsd/numkit.hpp"

namespace wsd {

using WordId = std::uint32_t;
using SenseId = std::uint32_t;

inline constexpr WordId kPadId = 0;
inline constexpr const char* kPadToken = "<pad>";

class Vocabulary {
 public:
  Vocabulary() : tokens_{kPadToken} {}

  /// Adds a token if new; returns its id. The reserved PAD token is never
  /// added as a regular entry.
  WordId add(std::string_view token) {
    if (token == kPadToken) return kPadId;
    if (auto it = index_.find(std::string(token)); it != index_.end()) return it->second;
    const auto id = static_cast<WordId>(tokens_.size());
    tokens_.emplace_back(token);
    index_.emplace(tokens_.back(), id);
    return id;
  }

  /// Unknown tokens map to kPadId.
  WordId id(std::string_view token) const {
    auto it = index_.find(std::string(token));
    return it == index_.end() ? kPadId : it->second;
  }

  bool contains(std::string_view token) const { return index_.count(std::string(token)) != 0; }

  const std::string& token(WordId id) const {
    if (id >= tokens_.size()) throw IndexError("vocabulary id " + std::to_string(id) + " out of range");
    return tokens_[id];
  }

  /// Number of ids including PAD.
  std::size_t size() const noexcept { return tokens_.size(); }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, WordId> index_;
};

struct Lexelt {
  std::string name;              // word.pos, e.g. "cold.a"
  std::vector<SenseId> senses;   // candidate order; ties break on this order

  friend bool operator==(const Lexelt&, const Lexelt&) = default;
};

/// Lexelts and their candidate senses. Sense ids are global column indices
/// into the sense table; every sense belongs to exactly one lexelt.
class SenseInventory {
 public:
  std::size_t add_lexelt(std::string_view name) {
    if (auto found = find_lexelt(name)) return *found;
    lexelts_.push_back({std::string(name), {}});
    lexelt_index_.emplace(std::string(name), lexelts_.size() - 1);
    return lexelts_.size() - 1;
  }

  /// Registers a candidate sense for a lexelt (creating the lexelt if needed).
  SenseId add_sense(std::string_view lexelt, std::string_view sense) {
    const std::size_t li = add_lexelt(lexelt);
    if (auto found = find_sense(li, sense)) return *found;
    const auto id = static_cast<SenseId>(sense_names_.size());
    sense_names_.emplace_back(sense);
    sense_lexelt_.push_back(li);
    lexelts_[li].senses.push_back(id);
    return id;
  }

  std::optional<std::size_t> find_lexelt(std::string_view name) const {
    auto it = lexelt_index_.find(std::string(name));
    if (it == lexelt_index_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<SenseId> find_sense(std::size_t lexelt, std::string_view sense) const {
    for (SenseId s : lexelts_.at(lexelt).senses)
      if (sense_names_[s] == sense) return s;
    return std::nullopt;
  }

  const Lexelt& lexelt(std::size_t index) const { return lexelts_.at(index); }

  const Lexelt& lexelt(std::string_view name) const {
    auto li = find_lexelt(name);
    if (!li) throw KeyError("unknown lexelt '" + std::string(name) + "'");
    return lexelts_[*li];
  }

  std::span<const SenseId> candidates(std::string_view lexelt_name) const {
    return lexelt(lexelt_name).senses;
  }

  std::size_t lexelt_of(SenseId s) const {
    if (s >= sense_lexelt_.size()) throw IndexError("sense id " + std::to_string(s) + " out of range");
    return sense_lexelt_[s];
  }

  const std::string& sense_name(SenseId s) const {
    if (s >= sense_names_.size()) throw IndexError("sense id " + std::to_string(s) + " out of range");
    return sense_names_[s];
  }

  std::size_t lexelt_count() const noexcept { return lexelts_.size(); }
  std::size_t sense_count() const noexcept { return sense_names_.size(); }
  const std::vector<Lexelt>& lexelts() const noexcept { return lexelts_; }
  bool empty() const noexcept { return lexelts_.empty(); }

  friend bool operator==(const SenseInventory& a, const SenseInventory& b) {
    return a.lexelts_ == b.lexelts_ && a.sense_names_ == b.sense_names_;
  }

 private:
  std::vector<Lexelt> lexelts_;
  std::map<std::string, std::size_t, std::less<>> lexelt_index_;
  std::vector<std::string> sense_names_;
  std::vector<std::size_t> sense_lexelt_;
};

enum class TableKind { word, sense };

class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(TableKind kind, std::size_t dim, std::size_t width)
      : kind_(kind), dim_(dim), width_(width), data_(dim * width, 0.0) {}

  TableKind kind() const noexcept { return kind_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t width() const noexcept { return width_; }

  /// Word-table column 0 is the PAD/UNK vector: zero and never trained.
  bool trainable(std::size_t col) const noexcept { return !(kind_ == TableKind::word && col == kPadId); }

  std::span<const double> column(std::size_t col) const {
    check(col);
    return {data_.data() + col * dim_, dim_};
  }
  std::span<double> column(std::size_t col) {
    check(col);
    return {data_.data() + col * dim_, dim_};
  }

  std::span<const double> raw() const noexcept { return data_; }
  std::span<double> raw() noexcept { return data_; }

  /// The logical d x v matrix.
  Matrix as_matrix() const {
    Matrix m(dim_, width_);
    for (std::size_t c = 0; c < width_; ++c)
      for (std::size_t r = 0; r < dim_; ++r) m(r, c) = data_[c * dim_ + r];
    return m;
  }

  friend bool operator==(const EmbeddingTable&, const EmbeddingTable&) = default;

 private:
  void check(std::size_t col) const {
    if (col >= width_) {
      throw IndexError("embedding column " + std::to_string(col) + " out of range (width " +
                       std::to_string(width_) + ")");
    }
  }

  TableKind kind_ = TableKind::word;
  std::size_t dim_ = 0;
  std::size_t width_ = 0;
  std::vector<double> data_;
};

inline constexpr double kInitRange = 0.1;

inline Vector lookup_word(const EmbeddingTable& table, WordId id) {
  const auto col = table.column(id);
  return {col.begin(), col.end()};
}

inline Vector lookup_sense(const EmbeddingTable& table, SenseId id) {
  const auto col = table.column(id);
  return {col.begin(), col.end()};
}

/// Every column i.i.d. uniform in (-0.1, 0.1).
inline EmbeddingTable init_sense_table(const SenseInventory& inv, std::size_t dim, Rng& rng) {
  if (dim == 0) throw ConfigError("sense embedding size must be positive");
  if (inv.sense_count() == 0) throw ConfigError("cannot initialise sense table: empty inventory");
  EmbeddingTable t(TableKind::sense, dim, inv.sense_count());
  for (double& x : t.raw()) x = rng.uniform(-kInitRange, kInitRange);
  return t;
}

/// Word table with every non-PAD column uniform in (-0.1, 0.1).
inline EmbeddingTable init_random_word_table(const Vocabulary& vocab, std::size_t dim, Rng& rng) {
  if (dim == 0) throw ConfigError("word embedding size must be positive");
  EmbeddingTable t(TableKind::word, dim, vocab.size());
  for (std::size_t c = 1; c < vocab.size(); ++c)
    for (double& x : t.column(c)) x = rng.uniform(-kInitRange, kInitRange);
  return t;
}

struct GloveStats {
  std::size_t lines = 0;
  std::size_t found = 0;    // vocabulary tokens initialised from the file
  std::size_t missing = 0;  // vocabulary tokens given the random fallback
};

namespace detail {

inline bool parse_double(std::string_view s, double& out) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

inline std::vector<std::string_view> split_spaces(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

}  // namespace detail

/// Reads GloVe text vectors for the tokens of `vocab`. Tokens absent from
/// the stream fall back to unif(-0.1, 0.1); column 0 stays zero. Every line
/// is validated, including lines for tokens outside the vocabulary.
inline EmbeddingTable read_glove(std::istream& in, const Vocabulary& vocab, std::size_t dim, Rng& rng,
                                 GloveStats* stats = nullptr) {
  if (dim == 0) throw ConfigError("word embedding size must be positive");
  EmbeddingTable t(TableKind::word, dim, vocab.size());
  std::vector<bool> seen(vocab.size(), false);
  GloveStats st;
  std::string line;
  while (std::getline(in, line)) {
    ++st.lines;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = detail::split_spaces(line);
    if (fields.size() < 2) throw ParseError("GloVe line has no vector", st.lines);
    if (fields.size() - 1 != dim) {
      throw FormatError("GloVe vector length " + std::to_string(fields.size() - 1) +
                        " does not match embedding size " + std::to_string(dim) + " (line " +
                        std::to_string(st.lines) + ")");
    }
    const WordId id = vocab.id(fields[0]);
    const bool wanted = id != kPadId && !seen[id];
    double v = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
      if (!detail::parse_double(fields[k + 1], v)) {
        throw ParseError("malformed GloVe value '" + std::string(fields[k + 1]) + "'", st.lines);
      }
      if (wanted) t.column(id)[k] = v;
    }
    if (wanted) {
      seen[id] = true;
      ++st.found;
    }
  }
  for (std::size_t c = 1; c < vocab.size(); ++c) {
    if (seen[c]) continue;
    ++st.missing;
    for (double& x : t.column(c)) x = rng.uniform(-kInitRange, kInitRange);
  }
  if (stats) *stats = st;
  return t;
}

inline EmbeddingTable load_glove(const std::string& path, const Vocabulary& vocab, std::size_t dim, Rng& rng,
                                 GloveStats* stats = nullptr) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open GloVe file '" + path + "'");
  return read_glove(in, vocab, dim, rng, stats);
}

/// Writes every non-PAD column as `token f_1 ... f_d` using the shortest
/// round-trip decimal representation.
inline void write_glove(std::ostream& out, const EmbeddingTable& table, const Vocabulary& vocab) {
  char buf[64];
  for (std::size_t c = 1; c < table.width(); ++c) {
    out << vocab.token(static_cast<WordId>(c));
    for (double x : table.column(c)) {
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
      out << ' ' << std::string_view(buf, static_cast<std::size_t>(ptr - buf));
    }
    out << '\n';
  }
}

}  // namespace wsd
