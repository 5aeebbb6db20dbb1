// Copyright 2026 The lldx Authors
// SPDX-License-Identifier: Apache-2.0

#include "lldx/stream/text.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "lldx/error.hpp"

namespace lldx {

std::u32string decode_utf8(std::string_view text) {
  constexpr char32_t kReplacement = 0xFFFD;
  std::u32string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    const auto b0 = static_cast<unsigned char>(text[i]);
    std::size_t len = 0;
    char32_t cp = 0;
    if (b0 < 0x80) {
      len = 1;
      cp = b0;
    } else if ((b0 & 0xE0) == 0xC0) {
      len = 2;
      cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
      len = 3;
      cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
      len = 4;
      cp = b0 & 0x07;
    } else {
      out.push_back(kReplacement);
      ++i;
      continue;
    }
    if (i + len > text.size()) {
      out.push_back(kReplacement);
      break;
    }
    bool ok = true;
    for (std::size_t k = 1; k < len; ++k) {
      const auto b = static_cast<unsigned char>(text[i + k]);
      if ((b & 0xC0) != 0x80) {
        ok = false;
        break;
      }
      cp = (cp << 6) | (b & 0x3F);
    }
    if (!ok) {
      out.push_back(kReplacement);
      ++i;
      continue;
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

std::string encode_utf8(char32_t cp) {
  std::string s;
  if (cp < 0x80) {
    s.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    s.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    s.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    s.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    s.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    s.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    s.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    s.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    s.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    s.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
  return s;
}

CharVocab CharVocab::build(std::span<const std::string> texts) {
  std::set<char32_t> seen;
  for (const auto& t : texts) {
    for (char32_t cp : decode_utf8(t)) seen.insert(cp);
  }
  CharVocab v;
  for (char32_t cp : seen) {
    v.index_[cp] = static_cast<TokenId>(v.symbols_.size() + 1);
    v.symbols_.push_back(cp);
  }
  return v;
}

CharVocab CharVocab::from_symbols(std::span<const std::string> symbols) {
  CharVocab v;
  for (const auto& s : symbols) {
    const auto cps = decode_utf8(s);
    if (cps.size() != 1) {
      throw ValidationError("character vocabulary entry '" + s +
                            "' is not a single code point");
    }
    if (v.index_.count(cps[0])) {
      throw ValidationError("duplicate character vocabulary entry '" + s + "'");
    }
    v.index_[cps[0]] = static_cast<TokenId>(v.symbols_.size() + 1);
    v.symbols_.push_back(cps[0]);
  }
  return v;
}

TokenId CharVocab::lookup(char32_t cp) const {
  auto it = index_.find(cp);
  return it == index_.end() ? kUnk : it->second;
}

std::vector<TokenId> tokenize_chars(std::string_view text, const CharVocab& vocab) {
  if (text.empty()) throw EmptyInputError("cannot tokenize empty text");
  std::vector<TokenId> ids;
  for (char32_t cp : decode_utf8(text)) ids.push_back(vocab.lookup(cp));
  return ids;
}

struct EntityLexicon::Trie {
  struct Node {
    std::unordered_map<char32_t, std::size_t> next;
    std::int64_t id = -1;
  };
  std::vector<Node> nodes{1};

  void insert(const std::u32string& key, TokenId id) {
    std::size_t n = 0;
    for (char32_t cp : key) {
      auto it = nodes[n].next.find(cp);
      if (it == nodes[n].next.end()) {
        nodes.emplace_back();
        it = nodes[n].next.emplace(cp, nodes.size() - 1).first;
      }
      n = it->second;
    }
    nodes[n].id = id;
  }
};

EntityLexicon::EntityLexicon() : trie_(std::make_unique<Trie>()) {}
EntityLexicon::EntityLexicon(const EntityLexicon& other)
    : entries_(other.entries_), trie_(std::make_unique<Trie>(*other.trie_)) {}
EntityLexicon& EntityLexicon::operator=(const EntityLexicon& other) {
  if (this != &other) {
    entries_ = other.entries_;
    trie_ = std::make_unique<Trie>(*other.trie_);
  }
  return *this;
}
EntityLexicon::EntityLexicon(EntityLexicon&&) noexcept = default;
EntityLexicon& EntityLexicon::operator=(EntityLexicon&&) noexcept = default;
EntityLexicon::~EntityLexicon() = default;

TokenId EntityLexicon::add(std::string surface, std::string type) {
  if (surface.empty()) throw ValidationError("lexicon entry with empty surface");
  if (find(surface) >= 0) throw ValidationError("duplicate lexicon surface '" + surface + "'");
  const auto id = static_cast<TokenId>(entries_.size());
  trie_->insert(decode_utf8(surface), id);
  entries_.push_back({std::move(surface), std::move(type)});
  return id;
}

std::int64_t EntityLexicon::find(std::string_view surface) const {
  std::size_t n = 0;
  for (char32_t cp : decode_utf8(surface)) {
    auto it = trie_->nodes[n].next.find(cp);
    if (it == trie_->nodes[n].next.end()) return -1;
    n = it->second;
  }
  return trie_->nodes[n].id;
}

std::vector<EntityLexicon::Match> EntityLexicon::scan(std::string_view text) const {
  const std::u32string cps = decode_utf8(text);
  std::vector<Match> out;
  std::size_t pos = 0;
  while (pos < cps.size()) {
    std::size_t node = 0;
    std::int64_t best_id = -1;
    std::size_t best_end = pos;
    for (std::size_t k = pos; k < cps.size(); ++k) {
      auto it = trie_->nodes[node].next.find(cps[k]);
      if (it == trie_->nodes[node].next.end()) break;
      node = it->second;
      if (trie_->nodes[node].id >= 0) {
        best_id = trie_->nodes[node].id;
        best_end = k + 1;
      }
    }
    if (best_id >= 0) {
      out.push_back({pos, best_end, static_cast<TokenId>(best_id)});
      pos = best_end;
    } else {
      ++pos;
    }
  }
  return out;
}

std::vector<TokenId> extract_entities(std::string_view text, const EntityLexicon& lexicon) {
  std::vector<TokenId> ids;
  for (const auto& m : lexicon.scan(text)) ids.push_back(m.id);
  return ids;
}

EntityLexicon parse_lexicon(std::string_view content) {
  EntityLexicon lex;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < content.size()) {
    std::size_t end = content.find('\n', start);
    if (end == std::string_view::npos) end = content.size();
    std::string_view line = content.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos || tab == 0) {
      throw ParseError("expected 'surface<TAB>type'", line_no);
    }
    try {
      lex.add(std::string(line.substr(0, tab)), std::string(line.substr(tab + 1)));
    } catch (const ValidationError& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  return lex;
}

EntityLexicon load_lexicon(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open lexicon file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_lexicon(ss.str());
}

std::string format_lexicon(const EntityLexicon& lexicon) {
  std::string out;
  for (const auto& e : lexicon.entries()) out += e.surface + "\t" + e.type + "\n";
  return out;
}

}  // namespace lldx
