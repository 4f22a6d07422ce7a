#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "winoforms/corpus/schema.hpp"

namespace winoforms {

enum class DatasetFormat { Wsc, WinoGrande };

namespace detail {

inline std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::istringstream in{std::string(text)};
  for (std::string w; in >> w;) words.push_back(w);
  return words;
}

// Token span of the phrase starting at a whitespace word index.
inline Span word_span_to_tokens(std::span<const std::string> words, std::size_t word_index,
                                std::string_view phrase, std::span<const std::string> tokens) {
  if (word_index >= words.size()) {
    throw Error("span index " + std::to_string(word_index) + " outside sentence of " +
                std::to_string(words.size()) + " words");
  }
  std::size_t start = 0;
  for (std::size_t w = 0; w < word_index; ++w) start += tokenize(words[w]).size();
  const auto needle = tokenize(phrase);
  if (needle.empty() || start + needle.size() > tokens.size() ||
      !std::equal(needle.begin(), needle.end(), tokens.begin() + static_cast<std::ptrdiff_t>(start))) {
    throw Error("span text '" + std::string(phrase) + "' does not match the sentence at word " +
                std::to_string(word_index));
  }
  return {start, start + needle.size()};
}

inline std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open " + path.string());
  std::vector<std::string> lines;
  for (std::string line; std::getline(f, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    lines.push_back(std::move(line));
  }
  return lines;
}

inline std::vector<std::string> optional_candidates(const nlohmann::json& j) {
  std::vector<std::string> out;
  if (!j.contains("candidates")) return out;
  for (const auto& c : j.at("candidates")) out.push_back(c.get<std::string>());
  return out;
}

}  // namespace detail

// One SuperGLUE-style WSC record: span1 is the query NP, span2 the pronoun.
inline SchemaExample parse_wsc_line(std::string_view line) {
  try {
    const auto j = nlohmann::json::parse(line);
    SchemaExample ex;
    ex.id = std::to_string(j.at("idx").get<long long>());
    ex.text = j.at("text").get<std::string>();
    ex.tokens = tokenize(ex.text);
    const auto& target = j.at("target");
    const auto words = detail::split_words(ex.text);
    ex.query = target.at("span1_text").get<std::string>();
    ex.query_word = target.at("span1_index").get<std::size_t>();
    ex.query_span = detail::word_span_to_tokens(words, *ex.query_word, ex.query, ex.tokens);
    ex.pronoun_text = target.at("span2_text").get<std::string>();
    ex.pronoun_word = target.at("span2_index").get<std::size_t>();
    ex.pronoun = detail::word_span_to_tokens(words, *ex.pronoun_word, ex.pronoun_text, ex.tokens);
    if (ex.pronoun.overlaps(*ex.query_span)) throw Error("pronoun span overlaps the query span");
    ex.gold = BinaryGold{j.at("label").get<bool>()};
    ex.candidates = detail::optional_candidates(j);
    ex.candidates_supplied = j.contains("candidates");
    return ex;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("wsc: malformed record: ") + e.what());
  }
}

inline std::string to_wsc_line(const SchemaExample& ex) {
  if (!is_binary(ex.gold) || !ex.query_word || !ex.pronoun_word) {
    throw Error("wsc: example " + ex.id + " lacks binary label or word spans");
  }
  nlohmann::ordered_json j;
  j["idx"] = std::stoll(ex.id);
  j["text"] = ex.text;
  j["target"] = {{"span1_index", *ex.query_word},
                 {"span1_text", ex.query},
                 {"span2_index", *ex.pronoun_word},
                 {"span2_text", ex.pronoun_text}};
  j["label"] = std::get<BinaryGold>(ex.gold).value;
  if (ex.candidates_supplied) j["candidates"] = ex.candidates;
  return j.dump();
}

// Fill-in-the-blank record with two options and answer "1" or "2".
inline SchemaExample parse_winogrande_line(std::string_view line) {
  try {
    const auto j = nlohmann::json::parse(line);
    SchemaExample ex;
    if (j.contains("qID")) ex.id = j.at("qID").get<std::string>();
    ex.text = j.at("sentence").get<std::string>();
    const auto blanks = std::count(ex.text.begin(), ex.text.end(), '_');
    if (blanks != 1) {
      throw Error("winogrande: sentence must contain exactly one blank, found " +
                  std::to_string(blanks));
    }
    ex.tokens = tokenize(ex.text);
    const auto it = std::find(ex.tokens.begin(), ex.tokens.end(), "_");
    if (it == ex.tokens.end()) throw Error("winogrande: blank is not a separate word");
    const auto pos = static_cast<std::size_t>(it - ex.tokens.begin());
    ex.pronoun = {pos, pos + 1};
    ex.pronoun_text = "_";
    const std::string answer = j.at("answer").get<std::string>();
    if (answer != "1" && answer != "2") throw Error("winogrande: answer must be \"1\" or \"2\", got \"" + answer + "\"");
    ex.gold = IndexGold{answer == "1" ? 0u : 1u};
    ex.candidates = {j.at("option1").get<std::string>(), j.at("option2").get<std::string>()};
    ex.query = ex.candidates[0];
    ex.query_span = find_phrase(ex, ex.query);
    if (j.contains("candidates")) {
      ex.candidates_supplied = true;
      auto extra = detail::optional_candidates(j);
      for (auto& c : extra) {
        const bool known = std::any_of(ex.candidates.begin(), ex.candidates.end(),
                                       [&](const std::string& k) { return same_phrase(k, c); });
        if (!known) ex.candidates.push_back(std::move(c));
      }
    }
    return ex;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("winogrande: malformed record: ") + e.what());
  }
}

inline std::string to_winogrande_line(const SchemaExample& ex) {
  if (!is_index(ex.gold) || ex.candidates.size() < 2) {
    throw Error("winogrande: example " + ex.id + " lacks an index label or two options");
  }
  const auto gold = std::get<IndexGold>(ex.gold).value;
  if (gold > 1) throw Error("winogrande: answer index must be 0 or 1");
  nlohmann::ordered_json j;
  if (!ex.id.empty()) j["qID"] = ex.id;
  j["sentence"] = ex.text;
  j["option1"] = ex.candidates[0];
  j["option2"] = ex.candidates[1];
  j["answer"] = gold == 0 ? "1" : "2";
  if (ex.candidates_supplied) j["candidates"] = ex.candidates;
  return j.dump();
}

template <class Parse>
std::vector<SchemaExample> load_jsonl(const std::filesystem::path& path, Parse parse) {
  std::vector<SchemaExample> out;
  std::size_t lineno = 0;
  for (const auto& line : detail::read_lines(path)) {
    ++lineno;
    try {
      out.push_back(parse(line));
    } catch (const Error& e) {
      throw Error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

inline std::vector<SchemaExample> load_wsc(const std::filesystem::path& path) {
  return load_jsonl(path, parse_wsc_line);
}

inline std::vector<SchemaExample> load_winogrande(const std::filesystem::path& path) {
  return load_jsonl(path, parse_winogrande_line);
}

inline DatasetFormat detect_format(const std::filesystem::path& path) {
  const auto lines = detail::read_lines(path);
  if (lines.empty()) throw Error("cannot detect format of empty file " + path.string());
  try {
    const auto j = nlohmann::json::parse(lines.front());
    if (j.contains("sentence")) return DatasetFormat::WinoGrande;
    if (j.contains("target")) return DatasetFormat::Wsc;
  } catch (const nlohmann::json::exception&) {
  }
  throw Error("unrecognized dataset layout in " + path.string());
}

inline std::vector<SchemaExample> load_examples(const std::filesystem::path& path, DatasetFormat fmt) {
  return fmt == DatasetFormat::Wsc ? load_wsc(path) : load_winogrande(path);
}

inline void write_jsonl(const std::filesystem::path& path, std::span<const SchemaExample> examples,
                        DatasetFormat fmt) {
  std::ofstream f(path, std::ios::trunc | std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  for (const auto& ex : examples) {
    f << (fmt == DatasetFormat::Wsc ? to_wsc_line(ex) : to_winogrande_line(ex)) << '\n';
  }
}

}  // namespace winoforms
