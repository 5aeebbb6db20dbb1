// Copyright 2026 The lldx Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lldx {

using TokenId = std::uint32_t;

/// Decodes UTF-8 into code points; malformed bytes become U+FFFD.
std::u32string decode_utf8(std::string_view text);
std::string encode_utf8(char32_t cp);

/// Character vocabulary. Id 0 is reserved for unknown characters; known
/// characters get ids 1..n in ascending code-point order.
class CharVocab {
 public:
  static constexpr TokenId kUnk = 0;

  CharVocab() = default;
  /// Builds from the given texts only (callers pass training texts).
  static CharVocab build(std::span<const std::string> texts);
  static CharVocab from_symbols(std::span<const std::string> symbols);

  TokenId lookup(char32_t cp) const;
  /// Number of ids including UNK.
  std::size_t size() const { return symbols_.size() + 1; }
  /// Symbols in id order, starting at id 1.
  const std::vector<char32_t>& symbols() const { return symbols_; }

  bool operator==(const CharVocab& other) const { return symbols_ == other.symbols_; }

 private:
  std::vector<char32_t> symbols_;
  std::map<char32_t, TokenId> index_;
};

/// One id per code point; unseen characters map to CharVocab::kUnk.
std::vector<TokenId> tokenize_chars(std::string_view text, const CharVocab& vocab);

struct LexiconEntry {
  std::string surface;
  std::string type;
  bool operator==(const LexiconEntry&) const = default;
};

/// Gazetteer of typed sub-entity surfaces. Entity ids are insertion order.
class EntityLexicon {
 public:
  EntityLexicon();
  EntityLexicon(const EntityLexicon& other);
  EntityLexicon& operator=(const EntityLexicon& other);
  EntityLexicon(EntityLexicon&&) noexcept;
  EntityLexicon& operator=(EntityLexicon&&) noexcept;
  ~EntityLexicon();

  /// Returns the id of the new entry. Duplicate or empty surfaces throw.
  TokenId add(std::string surface, std::string type);

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const LexiconEntry& entry(TokenId id) const { return entries_.at(id); }
  const std::vector<LexiconEntry>& entries() const { return entries_; }
  /// Id of an exact surface, or -1.
  std::int64_t find(std::string_view surface) const;

  struct Match {
    std::size_t begin = 0;  // code-point offsets, end exclusive
    std::size_t end = 0;
    TokenId id = 0;
  };
  /// Greedy left-to-right scan taking the longest entry starting at each
  /// position; matched spans never overlap.
  std::vector<Match> scan(std::string_view text) const;

  bool operator==(const EntityLexicon& other) const { return entries_ == other.entries_; }

 private:
  struct Trie;
  std::vector<LexiconEntry> entries_;
  std::unique_ptr<Trie> trie_;
};

std::vector<TokenId> extract_entities(std::string_view text, const EntityLexicon& lexicon);

/// Plain-text lexicon: one `surface<TAB>type` entry per line.
EntityLexicon parse_lexicon(std::string_view content);
EntityLexicon load_lexicon(const std::string& path);
std::string format_lexicon(const EntityLexicon& lexicon);

}  // namespace lldx
