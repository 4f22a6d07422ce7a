#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "winoforms/corpus/schema.hpp"

namespace winoforms {

enum class PosTag { Other, Determiner, Adjective, Noun };

// Closed part-of-speech lexicon plus the noun -> attribute knowledge that
// decides every synthetic schema.
struct AttributeLexicon {
  std::vector<std::string> nouns;
  std::map<std::string, std::vector<std::string>> attributes;
  std::vector<std::string> names;
  std::vector<std::string> verbs;
  std::vector<std::string> connectives;
  std::vector<std::string> determiners;
  std::vector<std::string> adjectives;

  PosTag tag(const std::string& word) const {
    auto has = [&](const std::vector<std::string>& v) {
      return std::find(v.begin(), v.end(), word) != v.end();
    };
    if (has(determiners)) return PosTag::Determiner;
    if (has(nouns) || has(names)) return PosTag::Noun;
    if (has(adjectives)) return PosTag::Adjective;
    for (const auto& [noun, attrs] : attributes) {
      if (std::find(attrs.begin(), attrs.end(), word) != attrs.end()) return PosTag::Adjective;
    }
    return PosTag::Other;
  }

  const std::vector<std::string>& attributes_of(const std::string& noun) const {
    static const std::vector<std::string> none;
    auto it = attributes.find(noun);
    return it == attributes.end() ? none : it->second;
  }

  bool has_attribute(const std::string& noun, const std::string& attr) const {
    const auto& a = attributes_of(noun);
    return std::find(a.begin(), a.end(), attr) != a.end();
  }

  std::vector<std::string> attribute_words() const {
    std::set<std::string> all;
    for (const auto& [n, attrs] : attributes) all.insert(attrs.begin(), attrs.end());
    return {all.begin(), all.end()};
  }

  // Line-oriented text form: "<kind> <words...>", where kind is one of
  // noun (followed by its attributes), name, verb, connective, det, adj.
  std::string serialize() const {
    std::ostringstream out;
    for (const auto& n : nouns) {
      out << "noun " << n;
      for (const auto& a : attributes_of(n)) out << ' ' << a;
      out << '\n';
    }
    auto emit = [&](const char* kind, const std::vector<std::string>& words) {
      for (const auto& w : words) out << kind << ' ' << w << '\n';
    };
    emit("name", names);
    emit("verb", verbs);
    emit("connective", connectives);
    emit("det", determiners);
    emit("adj", adjectives);
    return out.str();
  }

  static AttributeLexicon parse(std::istream& in) {
    AttributeLexicon lex;
    std::size_t lineno = 0;
    for (std::string line; std::getline(in, line);) {
      ++lineno;
      std::istringstream ls(line);
      std::string kind;
      if (!(ls >> kind) || kind.starts_with('#')) continue;
      std::vector<std::string> words;
      for (std::string w; ls >> w;) words.push_back(w);
      if (words.empty()) throw Error("lexicon: line " + std::to_string(lineno) + " has no words");
      auto joined = [&] {
        std::string s;
        for (const auto& w : words) s += (s.empty() ? "" : " ") + w;
        return s;
      };
      if (kind == "noun") {
        lex.nouns.push_back(words[0]);
        lex.attributes[words[0]] = {words.begin() + 1, words.end()};
      } else if (kind == "name") {
        lex.names.push_back(joined());
      } else if (kind == "verb") {
        lex.verbs.push_back(joined());
      } else if (kind == "connective") {
        lex.connectives.push_back(joined());
      } else if (kind == "det") {
        lex.determiners.push_back(joined());
      } else if (kind == "adj") {
        lex.adjectives.push_back(joined());
      } else {
        throw Error("lexicon: unknown entry kind '" + kind + "' on line " + std::to_string(lineno));
      }
    }
    return lex;
  }

  void save(const std::filesystem::path& path) const {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw Error("lexicon: cannot write " + path.string());
    f << serialize();
  }

  static AttributeLexicon load(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw Error("lexicon: cannot open " + path.string());
    return parse(f);
  }

  static AttributeLexicon builtin() {
    AttributeLexicon lex;
    const std::vector<std::string> attrs = {"big", "small", "heavy", "light",
                                            "hot", "cold",  "wet",   "dry"};
    lex.nouns = {"trophy", "suitcase", "box",    "bag",    "table",  "chair",  "rock",
                 "feather", "stove",   "fridge", "towel",  "sponge", "cup",    "bottle",
                 "ball",   "book",     "lamp",   "desk",   "pillow", "brick",  "kettle",
                 "bucket", "blanket",  "drum",   "crate",  "barrel", "basket", "jar",
                 "plate",  "bowl",     "hammer", "pan",    "sofa",   "piano",  "truck",
                 "boat",   "candle",   "carpet", "shelf",  "coat"};
    for (std::size_t i = 0; i < lex.nouns.size(); ++i) {
      lex.attributes[lex.nouns[i]] = {attrs[i % attrs.size()]};
    }
    lex.names = {"jim", "kevin", "anna", "maria"};
    lex.verbs = {"saw", "hit", "passed", "chased", "followed", "pushed", "watched", "moved"};
    lex.connectives = {"because", "since"};
    lex.determiners = {"the", "a", "an", "this", "that"};
    lex.adjectives = {"red", "old", "new", "upset"};
    return lex;
  }
};

struct NounChunk {
  Span span;
  std::string text;
  friend bool operator==(const NounChunk&, const NounChunk&) = default;
};

// Maximal chunks matching: optional determiner, any adjectives, one or more
// nouns. Tokens inside `blocked` never take part in a chunk.
inline std::vector<NounChunk> chunk_noun_phrases(std::span<const std::string> tokens,
                                                 const AttributeLexicon& lex,
                                                 std::optional<Span> blocked = std::nullopt) {
  auto usable = [&](std::size_t i) { return !(blocked && i >= blocked->begin && i < blocked->end); };
  auto tag_at = [&](std::size_t i) {
    return usable(i) ? lex.tag(tokens[i]) : PosTag::Other;
  };
  std::vector<NounChunk> out;
  std::size_t i = 0;
  while (i < tokens.size()) {
    std::size_t j = i;
    if (tag_at(j) == PosTag::Determiner) ++j;
    while (j < tokens.size() && tag_at(j) == PosTag::Adjective) ++j;
    const std::size_t head = j;
    while (j < tokens.size() && tag_at(j) == PosTag::Noun) ++j;
    if (j > head) {
      std::vector<std::string> words(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                     tokens.begin() + static_cast<std::ptrdiff_t>(j));
      out.push_back({{i, j}, detokenize(words)});
      i = j;
    } else {
      ++i;
    }
  }
  return out;
}

}  // namespace winoforms
