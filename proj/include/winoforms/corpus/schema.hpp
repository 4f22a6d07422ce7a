#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "winoforms/textkit/vocabulary.hpp"

namespace winoforms {

// Half-open token range [begin, end).
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const noexcept { return end - begin; }
  bool empty() const noexcept { return end <= begin; }
  bool overlaps(const Span& o) const noexcept { return begin < o.end && o.begin < end; }
  Span shifted(std::size_t by) const noexcept { return {begin + by, end + by}; }
  friend bool operator==(const Span&, const Span&) = default;
};

struct BinaryGold {
  bool value = false;
  friend bool operator==(const BinaryGold&, const BinaryGold&) = default;
};

struct IndexGold {
  std::size_t value = 0;
  friend bool operator==(const IndexGold&, const IndexGold&) = default;
};

using Gold = std::variant<BinaryGold, IndexGold>;

inline bool is_index(const Gold& g) { return std::holds_alternative<IndexGold>(g); }
inline bool is_binary(const Gold& g) { return std::holds_alternative<BinaryGold>(g); }

// One Winograd-style item. Token positions refer to tokenize(text); for
// fill-in-the-blank items the pronoun span covers the "_" token.
struct SchemaExample {
  std::string id;
  std::string text;
  std::vector<std::string> tokens;
  Span pronoun;
  std::string pronoun_text;
  std::string query;
  std::optional<Span> query_span;
  std::vector<std::string> candidates;
  Gold gold = BinaryGold{};
  bool candidates_supplied = false;
  // Word positions of the query and pronoun in the whitespace-split text, as
  // given by span-indexed sources.
  std::optional<std::size_t> query_word;
  std::optional<std::size_t> pronoun_word;

  friend bool operator==(const SchemaExample&, const SchemaExample&) = default;
};

// First occurrence of needle inside tokens at or after `from`, skipping any
// match that overlaps `avoid`.
inline std::optional<Span> find_tokens(std::span<const std::string> tokens,
                                       std::span<const std::string> needle,
                                       std::optional<Span> avoid = std::nullopt,
                                       std::size_t from = 0) {
  if (needle.empty() || needle.size() > tokens.size()) return std::nullopt;
  for (std::size_t i = from; i + needle.size() <= tokens.size(); ++i) {
    Span s{i, i + needle.size()};
    if (avoid && s.overlaps(*avoid)) continue;
    if (std::equal(needle.begin(), needle.end(), tokens.begin() + static_cast<std::ptrdiff_t>(i))) {
      return s;
    }
  }
  return std::nullopt;
}

inline std::optional<Span> find_phrase(const SchemaExample& ex, std::string_view phrase) {
  const auto needle = tokenize(phrase);
  return find_tokens(ex.tokens, needle, ex.pronoun);
}

inline bool same_phrase(std::string_view a, std::string_view b) {
  return tokenize(a) == tokenize(b);
}

// Position of the query NP within the candidate list.
inline std::optional<std::size_t> query_index(const SchemaExample& ex) {
  for (std::size_t i = 0; i < ex.candidates.size(); ++i) {
    if (same_phrase(ex.candidates[i], ex.query)) return i;
  }
  return std::nullopt;
}

}  // namespace winoforms
