#pragma once

#include <array>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "winoforms/error.hpp"

namespace winoforms {

using TokenId = std::uint32_t;

inline constexpr std::string_view kPunctuation = ".,!?;:";

inline bool is_punctuation_token(std::string_view tok) {
  return tok.size() == 1 && kPunctuation.find(tok[0]) != std::string_view::npos;
}

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// Lowercases, splits on whitespace, peels trailing punctuation off each word
// into separate tokens, and splits a leading blank marker "_" from its word.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j == i) break;
    std::string word = to_lower(text.substr(i, j - i));
    i = j;

    if (word.size() > 1 && word.front() == '_') {
      out.emplace_back("_");
      word.erase(0, 1);
    }
    std::vector<std::string> trailing;
    while (word.size() > 1 && kPunctuation.find(word.back()) != std::string::npos) {
      trailing.emplace_back(1, word.back());
      word.pop_back();
    }
    out.push_back(std::move(word));
    out.insert(out.end(), trailing.rbegin(), trailing.rend());
  }
  return out;
}

// Joins tokens with single spaces, attaching punctuation to the preceding word.
inline std::string detokenize(std::span<const std::string> tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty() && !is_punctuation_token(t)) out += ' ';
    out += t;
  }
  return out;
}

// Word-level vocabulary. Ids 0-4 are reserved for the specials, in order.
class Vocabulary {
 public:
  static constexpr TokenId kCls = 0;
  static constexpr TokenId kSep = 1;
  static constexpr TokenId kMask = 2;
  static constexpr TokenId kPad = 3;
  static constexpr TokenId kUnk = 4;
  static constexpr std::size_t kSpecialCount = 5;
  static constexpr std::array<std::string_view, kSpecialCount> kSpecials = {
      "[CLS]", "[SEP]", "[MASK]", "[PAD]", "[UNK]"};

  Vocabulary() : Vocabulary(std::vector<std::string>{}) {}

  // Ids assigned by first occurrence across the corpus.
  static Vocabulary build(std::span<const std::string> corpus) {
    if (corpus.empty()) throw Error("vocabulary: corpus is empty");
    std::vector<std::string> words;
    std::unordered_map<std::string, bool> seen;
    for (const auto& sentence : corpus) {
      for (auto& tok : tokenize(sentence)) {
        if (seen.emplace(tok, true).second) words.push_back(std::move(tok));
      }
    }
    return Vocabulary(std::move(words));
  }

  // Plain (non-special) tokens in id order starting at kSpecialCount.
  explicit Vocabulary(std::vector<std::string> words) {
    for (auto s : kSpecials) push(std::string(s));
    for (auto& w : words) {
      if (ids_.contains(w)) throw Error("vocabulary: duplicate token '" + w + "'");
      push(std::move(w));
    }
  }

  std::size_t size() const noexcept { return tokens_.size(); }

  bool contains(std::string_view token) const {
    auto it = ids_.find(std::string(token));
    return it != ids_.end() && it->second >= kSpecialCount;
  }

  // Plain-text lookup; specials are never produced this way.
  TokenId id(std::string_view token) const {
    auto it = ids_.find(std::string(token));
    if (it == ids_.end() || it->second < kSpecialCount) return kUnk;
    return it->second;
  }

  const std::string& token(TokenId id) const {
    if (id >= tokens_.size()) {
      throw Error("vocabulary: id " + std::to_string(id) + " out of range");
    }
    return tokens_[id];
  }

  std::vector<TokenId> encode_tokens(std::span<const std::string> tokens) const {
    std::vector<TokenId> ids;
    ids.reserve(tokens.size());
    for (const auto& t : tokens) ids.push_back(id(t));
    return ids;
  }

  std::vector<TokenId> encode(std::string_view text) const {
    const auto toks = tokenize(text);
    return encode_tokens(toks);
  }

  std::string decode(std::span<const TokenId> ids) const {
    std::vector<std::string> toks;
    toks.reserve(ids.size());
    for (TokenId i : ids) toks.push_back(token(i));
    return detokenize(toks);
  }

  // One token per line; line number (0-based) is the id.
  void save(const std::filesystem::path& path) const {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw Error("vocabulary: cannot write " + path.string());
    for (const auto& t : tokens_) f << t << '\n';
  }

  static Vocabulary load(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw Error("vocabulary: cannot open " + path.string());
    std::vector<std::string> lines;
    for (std::string line; std::getline(f, line);) lines.push_back(line);
    if (lines.size() < kSpecialCount) throw Error("vocabulary: file lacks special tokens");
    for (std::size_t i = 0; i < kSpecialCount; ++i) {
      if (lines[i] != kSpecials[i]) {
        throw Error("vocabulary: line " + std::to_string(i) + " must be " +
                    std::string(kSpecials[i]));
      }
    }
    return Vocabulary(std::vector<std::string>(lines.begin() + kSpecialCount, lines.end()));
  }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.tokens_ == b.tokens_;
  }

 private:
  void push(std::string tok) {
    ids_.emplace(tok, static_cast<TokenId>(tokens_.size()));
    tokens_.push_back(std::move(tok));
  }

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> ids_;
};

}  // namespace winoforms
