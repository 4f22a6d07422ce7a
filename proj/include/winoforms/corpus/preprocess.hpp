#pragma once

#include <algorithm>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "winoforms/corpus/lexicon.hpp"
#include "winoforms/corpus/schema.hpp"

namespace winoforms {

// Candidate NPs in order of first appearance: every chunk of the rule
// chunker, with the query NP always present (it replaces any chunk its span
// overlaps). Supplied candidates are kept as they are.
inline std::vector<std::string> mine_candidates(const SchemaExample& ex, const AttributeLexicon& lex) {
  std::optional<Span> qspan = ex.query_span;
  if (!qspan) qspan = find_phrase(ex, ex.query);
  if (!qspan) throw Error("mine_candidates: query '" + ex.query + "' not found in sentence");
  if (ex.candidates_supplied) {
    auto out = ex.candidates;
    const bool has_query = std::any_of(out.begin(), out.end(),
                                       [&](const std::string& c) { return same_phrase(c, ex.query); });
    if (!has_query) out.insert(out.begin(), ex.query);
    return out;
  }
  std::vector<std::pair<std::size_t, std::string>> found;
  for (auto& chunk : chunk_noun_phrases(ex.tokens, lex, ex.pronoun)) {
    if (chunk.span.overlaps(*qspan)) continue;
    found.emplace_back(chunk.span.begin, std::move(chunk.text));
  }
  found.emplace_back(qspan->begin, ex.query);
  std::stable_sort(found.begin(), found.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<std::string> out;
  for (auto& [pos, text] : found) {
    const bool dup = std::any_of(out.begin(), out.end(),
                                 [&](const std::string& c) { return same_phrase(c, text); });
    if (!dup) out.push_back(std::move(text));
  }
  return out;
}

struct DedupResult {
  std::vector<SchemaExample> examples;
  std::size_t dropped = 0;
};

namespace detail {

inline std::string group_key(const SchemaExample& ex) {
  std::string key = detokenize(ex.tokens);
  key += "\x1f" + std::to_string(ex.pronoun.begin) + ":" + std::to_string(ex.pronoun.end);
  return key;
}

inline std::size_t first_position(const SchemaExample& ex, const std::string& phrase) {
  auto s = find_phrase(ex, phrase);
  return s ? s->begin : std::numeric_limits<std::size_t>::max();
}

}  // namespace detail

// Collapses binary examples that differ only by query NP into one
// index-labeled example per (sentence, pronoun span). Candidates are the
// union of the group's queries and candidates, in order of first appearance.
// Groups without a true member are dropped and counted. Index-labeled inputs
// pass through (first per group), which makes the operation idempotent.
inline DedupResult dedupe_mc_groups(std::span<const SchemaExample> examples) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<const SchemaExample*>> groups;
  for (const auto& ex : examples) {
    auto key = detail::group_key(ex);
    auto [it, inserted] = groups.try_emplace(key);
    if (inserted) order.push_back(key);
    it->second.push_back(&ex);
  }

  DedupResult result;
  for (const auto& key : order) {
    const auto& members = groups.at(key);
    if (is_index(members.front()->gold)) {
      result.examples.push_back(*members.front());
      continue;
    }
    std::vector<std::pair<std::size_t, std::string>> nps;
    auto add_np = [&](const SchemaExample& ex, const std::string& phrase) {
      const bool dup = std::any_of(nps.begin(), nps.end(),
                                   [&](const auto& p) { return same_phrase(p.second, phrase); });
      if (!dup) nps.emplace_back(detail::first_position(ex, phrase), phrase);
    };
    const SchemaExample* positive = nullptr;
    for (const auto* m : members) {
      if (!is_binary(m->gold)) throw Error("dedupe: group mixes index and binary labels");
      add_np(*m, m->query);
      for (const auto& c : m->candidates) add_np(*m, c);
      if (std::get<BinaryGold>(m->gold).value) {
        if (positive && !same_phrase(positive->query, m->query)) {
          throw Error("dedupe: group '" + m->text + "' has two distinct true-labeled NPs: '" +
                      positive->query + "' and '" + m->query + "'");
        }
        if (!positive) positive = m;
      }
    }
    if (!positive) {
      ++result.dropped;
      continue;
    }
    std::stable_sort(nps.begin(), nps.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    SchemaExample out = *positive;
    out.candidates.clear();
    for (auto& [pos, text] : nps) out.candidates.push_back(text);
    out.gold = IndexGold{*query_index(out)};
    result.examples.push_back(std::move(out));
  }
  return result;
}

// Pointwise instances: an index example with n candidates becomes n binary
// examples, one per candidate as query; a binary example is returned as is.
inline std::vector<SchemaExample> expand_pointwise(const SchemaExample& ex) {
  if (is_binary(ex.gold)) return {ex};
  const auto gold = std::get<IndexGold>(ex.gold).value;
  if (gold >= ex.candidates.size()) throw Error("expand_pointwise: gold index out of range");
  std::vector<SchemaExample> out;
  for (std::size_t i = 0; i < ex.candidates.size(); ++i) {
    SchemaExample inst = ex;
    inst.query = ex.candidates[i];
    inst.query_span = find_phrase(ex, inst.query);
    inst.query_word.reset();
    inst.gold = BinaryGold{i == gold};
    out.push_back(std::move(inst));
  }
  return out;
}

struct OptionSpans {
  Span np;
  Span pronoun;
  friend bool operator==(const OptionSpans&, const OptionSpans&) = default;
};

// NP span = first token-level occurrence of each option; pronoun span = blank.
inline std::vector<OptionSpans> pspan_spans(const SchemaExample& ex) {
  std::vector<OptionSpans> out;
  for (const auto& option : ex.candidates) {
    auto s = find_phrase(ex, option);
    if (!s) throw Error("pspan_spans: option '" + option + "' does not occur in the sentence");
    out.push_back({*s, ex.pronoun});
  }
  return out;
}

}  // namespace winoforms
