#pragma once

#include <map>
#include <string>
#include <vector>

#include "winoforms/corpus/lexicon.hpp"
#include "winoforms/corpus/preprocess.hpp"
#include "winoforms/formalizations/formalization.hpp"

namespace winoforms {

enum class SplitRole { Train, Eval };

// Turns loaded examples into bundles for one formalization.
//
// Training: grouped kinds (MC-MLM, MC-Sent, MC-Sent-NoSoftmax) train on one
// index-labeled example per group, mining candidates for span-indexed data.
// The pointwise-trained kinds use binary examples, expanding fill-in-the-blank
// items into one instance per option.
//
// Evaluation: span-indexed data is always judged per original binary example;
// multiple-choice kinds see the union of candidates over the example's group.
// Fill-in-the-blank data is judged by index for multiple-choice kinds and per
// expanded instance for P-Sent and P-Span.
inline std::vector<FormalizedBundle> prepare_split(Kind kind, std::span<const SchemaExample> examples,
                                                   const Vocabulary& vocab, const AttributeLexicon& lex,
                                                   SplitRole role, const BundleOptions& opt = {}) {
  std::vector<FormalizedBundle> out;
  if (examples.empty()) return out;
  const bool index_data = is_index(examples.front().gold);
  for (const auto& ex : examples) {
    if (is_index(ex.gold) != index_data) throw Error("prepare_split: split mixes label types");
  }
  const bool mc = traits(kind).multiple_choice;

  if (index_data) {
    const bool pointwise = role == SplitRole::Train ? !trains_on_groups(kind) : !mc;
    for (const auto& ex : examples) {
      if (pointwise) {
        for (const auto& inst : expand_pointwise(ex)) out.push_back(build_bundle(kind, inst, vocab, opt));
      } else {
        out.push_back(build_bundle(kind, ex, vocab, opt));
      }
    }
    return out;
  }

  // span-indexed binary data
  std::vector<SchemaExample> mined(examples.begin(), examples.end());
  if (mc) {
    for (auto& ex : mined) ex.candidates = mine_candidates(ex, lex);
  }
  if (role == SplitRole::Train && trains_on_groups(kind)) {
    for (const auto& ex : dedupe_mc_groups(mined).examples) out.push_back(build_bundle(kind, ex, vocab, opt));
    return out;
  }
  if (mc && role == SplitRole::Eval) {
    std::map<std::string, std::vector<std::string>> pool;
    for (const auto& ex : mined) {
      auto& list = pool[detail::group_key(ex)];
      for (const auto& c : ex.candidates) {
        if (std::none_of(list.begin(), list.end(), [&](const std::string& k) { return same_phrase(k, c); })) {
          list.push_back(c);
        }
      }
    }
    for (auto& ex : mined) {
      const auto& list = pool.at(detail::group_key(ex));
      std::vector<std::pair<std::size_t, std::string>> ordered;
      for (const auto& c : list) ordered.emplace_back(detail::first_position(ex, c), c);
      std::stable_sort(ordered.begin(), ordered.end(),
                       [](const auto& a, const auto& b) { return a.first < b.first; });
      ex.candidates.clear();
      for (auto& [pos, c] : ordered) ex.candidates.push_back(c);
    }
  }
  for (const auto& ex : mined) out.push_back(build_bundle(kind, ex, vocab, opt));
  return out;
}

// Accuracy of always giving the most frequent gold answer.
inline double majority_baseline(std::span<const FormalizedBundle> bundles) {
  if (bundles.empty()) throw Error("majority_baseline: empty split");
  std::map<std::pair<int, std::size_t>, std::size_t> counts;
  std::size_t best = 0;
  for (const auto& b : bundles) {
    const auto a = gold_answer(b.label);
    best = std::max(best, ++counts[{static_cast<int>(a.type), a.value}]);
  }
  return static_cast<double>(best) / static_cast<double>(bundles.size());
}

}  // namespace winoforms
