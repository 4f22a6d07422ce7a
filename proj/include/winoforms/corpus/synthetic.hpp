#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "winoforms/corpus/lexicon.hpp"
#include "winoforms/corpus/schema.hpp"

namespace winoforms {

struct SyntheticOptions {
  std::size_t train = 500;
  std::size_t val = 200;
  std::size_t test = 200;
  std::uint64_t seed = 1;
  // Two-noun pretraining sentences generated per noun.
  std::size_t pair_sentences_per_noun = 24;
};

struct SyntheticData {
  std::vector<std::string> pretraining;
  std::vector<SchemaExample> train;
  std::vector<SchemaExample> val;
  std::vector<SchemaExample> test;
};

// Builds a fill-in-the-blank example from a finished sentence.
inline SchemaExample make_blank_example(std::string id, std::string sentence,
                                        std::vector<std::string> options, std::size_t gold) {
  SchemaExample ex;
  ex.id = std::move(id);
  ex.text = std::move(sentence);
  ex.tokens = tokenize(ex.text);
  const auto it = std::find(ex.tokens.begin(), ex.tokens.end(), "_");
  if (it == ex.tokens.end()) throw Error("synthetic: sentence has no blank");
  const auto pos = static_cast<std::size_t>(it - ex.tokens.begin());
  ex.pronoun = {pos, pos + 1};
  ex.pronoun_text = "_";
  ex.candidates = std::move(options);
  ex.query = ex.candidates.front();
  ex.query_span = find_phrase(ex, ex.query);
  ex.gold = IndexGold{gold};
  return ex;
}

// Rewrites a fill-in-the-blank example as the two span-indexed binary
// examples a WSC-style file would hold, with the pronoun "it" in the blank.
inline std::vector<SchemaExample> to_wsc_pair(const SchemaExample& ex, long long first_idx) {
  if (!is_index(ex.gold)) throw Error("to_wsc_pair: example needs an index label");
  std::vector<std::string> words;
  {
    std::istringstream in(ex.text);
    for (std::string w; in >> w;) words.push_back(w);
  }
  std::size_t blank_word = words.size();
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (words[i].starts_with('_')) {
      words[i].replace(0, 1, "it");
      blank_word = i;
      break;
    }
  }
  if (blank_word == words.size()) throw Error("to_wsc_pair: no blank word");
  std::string text;
  for (const auto& w : words) text += (text.empty() ? "" : " ") + w;

  std::vector<SchemaExample> out;
  for (std::size_t i = 0; i < ex.candidates.size(); ++i) {
    SchemaExample w;
    w.id = std::to_string(first_idx + static_cast<long long>(i));
    w.text = text;
    w.tokens = tokenize(text);
    w.pronoun = ex.pronoun;
    w.pronoun_text = "it";
    w.pronoun_word = blank_word;
    w.query = ex.candidates[i];
    w.query_span = find_tokens(w.tokens, tokenize(w.query), w.pronoun);
    if (!w.query_span) throw Error("to_wsc_pair: option not in sentence");
    // whitespace word index of the first query token
    std::size_t tok = 0, word = 0;
    for (; word < words.size(); ++word) {
      if (tok >= w.query_span->begin) break;
      tok += tokenize(words[word]).size();
    }
    w.query_word = word;
    w.gold = BinaryGold{i == std::get<IndexGold>(ex.gold).value};
    out.push_back(std::move(w));
  }
  return out;
}

// Pretraining sentences state noun attributes; schemas put two nouns in one
// sentence and end with an attribute held by exactly one of them. Schemas are
// unique by (first noun, second noun, attribute), so splits never share one.
inline SyntheticData generate_synthetic(const AttributeLexicon& lex, const SyntheticOptions& opt) {
  if (lex.nouns.size() < 20) throw Error("synthetic: lexicon needs at least 20 nouns");
  if (lex.verbs.empty() || lex.connectives.empty()) {
    throw Error("synthetic: lexicon needs verbs and connectives");
  }
  std::mt19937_64 rng(opt.seed);
  auto pick = [&](const std::vector<std::string>& v) -> const std::string& {
    return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
  };

  SyntheticData data;
  for (const auto& noun : lex.nouns) {
    for (const auto& a : lex.attributes_of(noun)) {
      data.pretraining.push_back("the " + noun + " is " + a + ".");
      data.pretraining.push_back("the " + noun + " was " + a + ".");
      data.pretraining.push_back("the " + noun + " was very " + a + ".");
      data.pretraining.push_back("everyone knew the " + noun + " was " + a + ".");
      data.pretraining.push_back("a " + noun + " is usually " + a + ".");
    }
  }
  for (const auto& noun : lex.nouns) {
    const auto& attrs = lex.attributes_of(noun);
    if (attrs.empty()) continue;
    for (std::size_t k = 0; k < opt.pair_sentences_per_noun; ++k) {
      const std::string& other = pick(lex.nouns);
      if (other == noun) continue;
      const std::string& a = pick(attrs);
      const std::string& v = pick(lex.verbs);
      const std::string& c = pick(lex.connectives);
      switch (k % 3) {
        case 0:
          data.pretraining.push_back("the " + noun + " " + v + " the " + other + " " + c + " the " +
                                     noun + " was " + a + ".");
          break;
        case 1:
          data.pretraining.push_back("the " + other + " " + v + " the " + noun + " " + c + " the " +
                                     noun + " was " + a + ".");
          break;
        default:
          data.pretraining.push_back("the " + noun + " was " + a + " and the " + other + " was not.");
          break;
      }
    }
  }

  using Key = std::tuple<std::size_t, std::size_t, std::string>;
  std::vector<Key> keys;
  for (std::size_t i = 0; i < lex.nouns.size(); ++i) {
    for (std::size_t j = 0; j < lex.nouns.size(); ++j) {
      if (i == j) continue;
      for (const auto& a : lex.attributes_of(lex.nouns[i])) {
        if (!lex.has_attribute(lex.nouns[j], a)) keys.emplace_back(i, j, a);
      }
      for (const auto& a : lex.attributes_of(lex.nouns[j])) {
        if (!lex.has_attribute(lex.nouns[i], a)) keys.emplace_back(i, j, a);
      }
    }
  }
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  const std::size_t wanted = opt.train + opt.val + opt.test;
  if (keys.size() < wanted) {
    throw Error("synthetic: lexicon supports only " + std::to_string(keys.size()) +
                " distinct schemas, " + std::to_string(wanted) + " requested");
  }
  std::shuffle(keys.begin(), keys.end(), rng);
  keys.resize(wanted);

  std::vector<SchemaExample> all;
  for (std::size_t n = 0; n < keys.size(); ++n) {
    const auto& [i, j, attr] = keys[n];
    const std::string& first = lex.nouns[i];
    const std::string& second = lex.nouns[j];
    const std::string sentence = "the " + first + " " + pick(lex.verbs) + " the " + second + " " +
                                 pick(lex.connectives) + " _ was " + attr + ".";
    const std::size_t gold = lex.has_attribute(first, attr) ? 0 : 1;
    all.push_back(make_blank_example("syn-" + std::to_string(n), sentence,
                                     {"the " + first, "the " + second}, gold));
  }
  auto take = [&](std::size_t from, std::size_t count) {
    return std::vector<SchemaExample>(all.begin() + static_cast<std::ptrdiff_t>(from),
                                      all.begin() + static_cast<std::ptrdiff_t>(from + count));
  };
  data.train = take(0, opt.train);
  data.val = take(opt.train, opt.val);
  data.test = take(opt.train + opt.val, opt.test);
  return data;
}

}  // namespace winoforms
