#pragma once

// Token <-> id mapping and the two tokenizers.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "slab/dist.hpp"
#include "slab/error.hpp"

namespace slab::lm {

inline constexpr TokenId kEos = 0;
inline constexpr TokenId kPad = 1;
inline constexpr std::string_view kEosText = "[EOS]";
inline constexpr std::string_view kPadText = "[PAD]";
inline constexpr std::string_view kUnkText = "[UNK]";

enum class Tokenizer : std::uint8_t { Whitespace = 0, Character = 1 };

inline Tokenizer parse_tokenizer(std::string_view name) {
  if (name == "whitespace") return Tokenizer::Whitespace;
  if (name == "character" || name == "char") return Tokenizer::Character;
  fail(Errc::ConfigError, "unknown tokenizer '" + std::string(name) + "'");
}

inline std::vector<std::string> split_whitespace(std::string_view line) {
  std::vector<std::string> out;
  std::size_t i = 0;
  auto space = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; };
  while (i < line.size()) {
    while (i < line.size() && space(line[i])) ++i;
    const std::size_t start = i;
    while (i < line.size() && !space(line[i])) ++i;
    if (i > start) out.emplace_back(line.substr(start, i - start));
  }
  return out;
}

/// Splits into UTF-8 code points; malformed lead bytes become single-byte tokens.
inline std::vector<std::string> split_characters(std::string_view line) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < line.size()) {
    const auto lead = static_cast<unsigned char>(line[i]);
    std::size_t len = 1;
    if ((lead & 0xE0) == 0xC0) len = 2;
    else if ((lead & 0xF0) == 0xE0) len = 3;
    else if ((lead & 0xF8) == 0xF0) len = 4;
    len = std::min(len, line.size() - i);
    if (line[i] != '\n' && line[i] != '\r') out.emplace_back(line.substr(i, len));
    i += len;
  }
  return out;
}

inline std::vector<std::string> tokenize(std::string_view line, Tokenizer kind) {
  return kind == Tokenizer::Whitespace ? split_whitespace(line) : split_characters(line);
}

/// Bijective token table. EOS and PAD are always ids 0 and 1; when the table
/// was built with a size cap, "[UNK]" is id 2 and absorbs dropped tokens.
class Vocabulary {
 public:
  Vocabulary() : Vocabulary(Tokenizer::Whitespace, false) {}

  Vocabulary(Tokenizer kind, bool with_unk) : kind_(kind) {
    add(std::string(kEosText));
    add(std::string(kPadText));
    if (with_unk) unk_ = add(std::string(kUnkText));
  }

  /// Ids follow first appearance. max_size > 0 keeps only the most frequent
  /// tokens (ties by first appearance) so that the table including reserved
  /// entries has at most max_size ids.
  static Vocabulary build(const std::vector<std::vector<std::string>>& sentences,
                          Tokenizer kind, std::size_t max_size = 0) {
    std::unordered_map<std::string, std::size_t> index;
    std::vector<std::string> order;
    std::vector<std::uint64_t> counts;
    for (const auto& sentence : sentences) {
      for (const auto& tok : sentence) {
        auto [it, inserted] = index.try_emplace(tok, order.size());
        if (inserted) {
          order.push_back(tok);
          counts.push_back(0);
        }
        ++counts[it->second];
      }
    }
    const bool capped = max_size > 0 && order.size() + 2 > max_size;
    Vocabulary vocab(kind, capped);
    std::vector<std::uint8_t> keep(order.size(), 1);
    if (capped) {
      if (max_size < 4) fail(Errc::ConfigError, "vocabulary cap must be at least 4");
      std::vector<std::size_t> by_count(order.size());
      for (std::size_t i = 0; i < by_count.size(); ++i) by_count[i] = i;
      std::stable_sort(by_count.begin(), by_count.end(),
                       [&](std::size_t a, std::size_t b) { return counts[a] > counts[b]; });
      std::fill(keep.begin(), keep.end(), 0);
      for (std::size_t i = 0; i < max_size - 3 && i < by_count.size(); ++i) keep[by_count[i]] = 1;
    }
    for (std::size_t i = 0; i < order.size(); ++i) {
      if (keep[i] && !vocab.contains(order[i])) vocab.add(order[i]);
    }
    return vocab;
  }

  TokenId add(const std::string& token) {
    auto [it, inserted] = ids_.try_emplace(token, static_cast<TokenId>(tokens_.size()));
    if (inserted) tokens_.push_back(token);
    return it->second;
  }

  bool contains(const std::string& token) const { return ids_.contains(token); }
  std::size_t size() const noexcept { return tokens_.size(); }
  Tokenizer tokenizer() const noexcept { return kind_; }
  bool has_unk() const noexcept { return unk_ >= 0; }
  TokenId unk() const noexcept { return unk_; }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  const std::string& token(TokenId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
      fail(Errc::InvalidArgument, "token id " + std::to_string(id) + " outside vocabulary");
    }
    return tokens_[id];
  }

  TokenId id(const std::string& token) const {
    if (auto it = ids_.find(token); it != ids_.end()) return it->second;
    if (has_unk()) return unk_;
    fail(Errc::InvalidArgument, "token '" + token + "' not in vocabulary");
  }

  std::vector<TokenId> encode(const std::vector<std::string>& tokens) const {
    std::vector<TokenId> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(id(t));
    return out;
  }

  std::vector<TokenId> encode(std::string_view line) const { return encode(tokenize(line, kind_)); }

  std::string decode(std::span<const TokenId> ids) const {
    std::string out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (kind_ == Tokenizer::Whitespace && i > 0) out += ' ';
      out += token(ids[i]);
    }
    return out;
  }

  /// Rebuilds a table from its token list (as stored in a model file).
  static Vocabulary from_tokens(Tokenizer kind, std::vector<std::string> tokens) {
    if (tokens.size() < 2 || tokens[kEos] != kEosText || tokens[kPad] != kPadText) {
      fail(Errc::FormatVersionMismatch, "vocabulary lacks reserved tokens");
    }
    Vocabulary vocab(kind, tokens.size() > 2 && tokens[2] == kUnkText);
    for (std::size_t i = vocab.size(); i < tokens.size(); ++i) {
      if (vocab.add(tokens[i]) != static_cast<TokenId>(i)) {
        fail(Errc::FormatVersionMismatch, "duplicate vocabulary entry");
      }
    }
    return vocab;
  }

 private:
  Tokenizer kind_;
  TokenId unk_ = -1;
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> ids_;
};

/// One sentence per line; blank lines are skipped.
inline std::vector<std::vector<std::string>> read_corpus(const std::string& path, Tokenizer kind) {
  std::ifstream in(path);
  if (!in) fail(Errc::IoError, "cannot open corpus " + path);
  std::vector<std::vector<std::string>> sentences;
  std::string line;
  while (std::getline(in, line)) {
    auto toks = tokenize(line, kind);
    if (!toks.empty()) sentences.push_back(std::move(toks));
  }
  if (in.bad()) fail(Errc::IoError, "read error on " + path);
  return sentences;
}

/// Joins consecutive sentences until each chunk has at least min_tokens
/// tokens; a short trailing remainder is dropped.
inline std::vector<std::vector<std::string>> rechunk(
    const std::vector<std::vector<std::string>>& sentences, std::size_t min_tokens) {
  if (min_tokens == 0) return sentences;
  std::vector<std::vector<std::string>> chunks;
  std::vector<std::string> current;
  for (const auto& s : sentences) {
    current.insert(current.end(), s.begin(), s.end());
    if (current.size() >= min_tokens) {
      chunks.push_back(std::move(current));
      current.clear();
    }
  }
  return chunks;
}

}  // namespace slab::lm
