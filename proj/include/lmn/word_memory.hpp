#pragma once

// Static Word Memory: the frozen word-embedding matrix, tokenization and
// mean-pooled sentence embeddings.

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "lmn/error.hpp"
#include "lmn/types.hpp"

namespace lmn {

namespace detail {

// Decodes one UTF-8 code point starting at text[pos]; advances pos. Invalid
// sequences consume a single byte and yield U+FFFD.
inline char32_t next_code_point(std::string_view text, std::size_t& pos) {
  const auto lead = static_cast<unsigned char>(text[pos]);
  std::size_t extra = 0;
  char32_t cp = 0;
  if (lead < 0x80) {
    ++pos;
    return lead;
  } else if ((lead & 0xE0) == 0xC0) {
    extra = 1;
    cp = lead & 0x1F;
  } else if ((lead & 0xF0) == 0xE0) {
    extra = 2;
    cp = lead & 0x0F;
  } else if ((lead & 0xF8) == 0xF0) {
    extra = 3;
    cp = lead & 0x07;
  } else {
    ++pos;
    return 0xFFFD;
  }
  if (pos + extra >= text.size()) {
    ++pos;
    return 0xFFFD;
  }
  for (std::size_t k = 1; k <= extra; ++k) {
    const auto cont = static_cast<unsigned char>(text[pos + k]);
    if ((cont & 0xC0) != 0x80) {
      ++pos;
      return 0xFFFD;
    }
    cp = (cp << 6) | (cont & 0x3F);
  }
  pos += extra + 1;
  return cp;
}

// Non-ASCII code points count as word characters except punctuation and
// space blocks (Latin-1 punctuation, General Punctuation, CJK punctuation).
inline bool is_word_code_point(char32_t cp) {
  if (cp < 0x80) {
    return (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z') || (cp >= '0' && cp <= '9');
  }
  if (cp == 0xFFFD) return false;
  if (cp >= 0x80 && cp <= 0xBF) return false;
  if (cp == 0xD7 || cp == 0xF7) return false;
  if (cp >= 0x2000 && cp <= 0x206F) return false;
  if (cp >= 0x3000 && cp <= 0x303F) return false;
  if (cp == 0xFEFF) return false;
  return true;
}

}  // namespace detail

/// Splits text into lowercased maximal runs of alphanumeric characters.
/// ASCII letters are lowercased; other letters pass through unchanged.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t start = pos;
    const char32_t cp = detail::next_code_point(text, pos);
    if (detail::is_word_code_point(cp)) {
      if (cp < 0x80) {
        char c = static_cast<char>(cp);
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
        current.push_back(c);
      } else {
        current.append(text.substr(start, pos - start));
      }
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

/// x / ||x||_2, or the zero vector when ||x||_2 == 0.
inline Vector unit_normalize(const Vector& x) {
  const double norm = x.norm();
  if (norm == 0.0) return Vector::Zero(x.size());
  return x / norm;
}

struct SentenceEmbedding {
  Vector vector;
  std::size_t token_count = 0;
};

// The frozen |V| x d embedding matrix. Immutable after construction and safe
// to share between threads.
class StaticWordMemory {
 public:
  StaticWordMemory(std::vector<std::string> vocab, Matrix matrix)
      : vocab_(std::move(vocab)), matrix_(std::move(matrix)) {
    if (matrix_.cols() < 1) throw Error("word memory: embedding dimension must be >= 1");
    if (static_cast<Eigen::Index>(vocab_.size()) != matrix_.rows()) {
      throw DimensionError("word memory: vocab size " + std::to_string(vocab_.size()) +
                           " does not match matrix rows " + std::to_string(matrix_.rows()));
    }
    if (!matrix_.allFinite()) throw Error("word memory: non-finite embedding entry");
    index_.reserve(vocab_.size());
    for (std::size_t k = 0; k < vocab_.size(); ++k) {
      if (!index_.emplace(vocab_[k], k).second) {
        throw Error("word memory: duplicate word '" + vocab_[k] + "'");
      }
    }
  }

  std::size_t size() const noexcept { return vocab_.size(); }
  Eigen::Index dim() const noexcept { return matrix_.cols(); }
  const std::vector<std::string>& vocab() const noexcept { return vocab_; }
  const Matrix& matrix() const noexcept { return matrix_; }

  std::optional<std::size_t> index_of(std::string_view word) const {
    auto it = index_.find(std::string(word));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

 private:
  std::vector<std::string> vocab_;
  Matrix matrix_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Row w_k for the word, or nullopt when out of vocabulary.
inline std::optional<Vector> embed_word(const StaticWordMemory& mem, std::string_view word) {
  auto k = mem.index_of(word);
  if (!k) return std::nullopt;
  return Vector(mem.matrix().row(static_cast<Eigen::Index>(*k)).transpose());
}

/// Mean of the in-vocabulary token embeddings; OOV tokens are skipped and an
/// all-OOV sentence embeds to zero.
inline SentenceEmbedding embed_sentence(const StaticWordMemory& mem, std::string_view text,
                                        bool normalize) {
  SentenceEmbedding out{Vector::Zero(mem.dim()), 0};
  for (const auto& token : tokenize(text)) {
    if (auto k = mem.index_of(token)) {
      out.vector += mem.matrix().row(static_cast<Eigen::Index>(*k)).transpose();
      ++out.token_count;
    }
  }
  if (out.token_count == 0) return out;
  out.vector /= static_cast<double>(out.token_count);
  if (normalize) out.vector = unit_normalize(out.vector);
  return out;
}

// ---------------------------------------------------------------------------
// word2vec text format

namespace detail {

inline std::vector<std::string_view> split_spaces(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t')) ++pos;
    if (pos >= line.size()) break;
    std::size_t end = pos;
    while (end < line.size() && line[end] != ' ' && line[end] != '\t') ++end;
    fields.push_back(line.substr(pos, end - pos));
    pos = end;
  }
  return fields;
}

inline bool parse_double(std::string_view s, double& out) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

inline bool parse_count(std::string_view s, std::uint64_t& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace detail

/// Parses word2vec text: an optional "<count> <dim>" header, then one
/// "<word> <v1> ... <vd>" line per word.
inline StaticWordMemory parse_word2vec_text(std::istream& in, const std::string& source) {
  std::vector<std::string> vocab;
  std::vector<double> values;
  std::optional<std::uint64_t> declared_count;
  std::unordered_map<std::string, std::size_t> seen;
  Eigen::Index dim = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string_view view(line);
    if (line_no == 1 && view.size() >= 3 && view.substr(0, 3) == "\xEF\xBB\xBF") view.remove_prefix(3);
    auto fields = detail::split_spaces(view);
    if (fields.empty()) continue;

    if (line_no == 1 && fields.size() == 2) {
      std::uint64_t count = 0, declared_dim = 0;
      if (detail::parse_count(fields[0], count) && detail::parse_count(fields[1], declared_dim)) {
        if (declared_dim == 0) throw FormatError(source, line_no, "header declares dimension 0");
        declared_count = count;
        dim = static_cast<Eigen::Index>(declared_dim);
        continue;
      }
    }

    if (fields.size() < 2) throw FormatError(source, line_no, "malformed line: word without values");
    const auto n_values = static_cast<Eigen::Index>(fields.size() - 1);
    if (dim == 0) {
      dim = n_values;
    } else if (n_values != dim) {
      throw FormatError(source, line_no,
                        "inconsistent dimension: expected " + std::to_string(dim) +
                            " values, got " + std::to_string(n_values));
    }
    for (std::size_t f = 1; f < fields.size(); ++f) {
      double v = 0.0;
      if (!detail::parse_double(fields[f], v) || !std::isfinite(v)) {
        throw FormatError(source, line_no, "non-numeric coordinate '" + std::string(fields[f]) + "'");
      }
      values.push_back(v);
    }
    if (!seen.emplace(std::string(fields[0]), line_no).second) {
      throw FormatError(source, line_no, "duplicate word '" + std::string(fields[0]) + "'");
    }
    vocab.emplace_back(fields[0]);
  }
  if (vocab.empty()) throw FormatError(source, 0, "no embeddings found");
  if (declared_count && *declared_count != vocab.size()) {
    throw FormatError(source, 1,
                      "header declares " + std::to_string(*declared_count) + " words, file has " +
                          std::to_string(vocab.size()));
  }

  Matrix matrix(static_cast<Eigen::Index>(vocab.size()), dim);
  for (Eigen::Index r = 0; r < matrix.rows(); ++r)
    for (Eigen::Index c = 0; c < dim; ++c) matrix(r, c) = values[static_cast<std::size_t>(r * dim + c)];

  return StaticWordMemory(std::move(vocab), std::move(matrix));
}

inline StaticWordMemory load_word2vec_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open embedding file: " + path.string());
  return parse_word2vec_text(in, path.string());
}

/// Writes the header line and rows using shortest round-trip decimal form,
/// so loading reproduces the matrix bit-exactly.
inline void write_word2vec_text(const StaticWordMemory& mem, std::ostream& out) {
  out << mem.size() << ' ' << mem.dim() << '\n';
  char buf[64];
  for (std::size_t k = 0; k < mem.size(); ++k) {
    out << mem.vocab()[k];
    for (Eigen::Index c = 0; c < mem.dim(); ++c) {
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf,
                                     mem.matrix()(static_cast<Eigen::Index>(k), c));
      (void)ec;
      out << ' ' << std::string_view(buf, static_cast<std::size_t>(ptr - buf));
    }
    out << '\n';
  }
}

}  // namespace lmn
