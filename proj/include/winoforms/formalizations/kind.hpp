#pragma once

#include <array>
#include <string>
#include <string_view>

#include "winoforms/error.hpp"

namespace winoforms {

enum class Kind { McMlm, McSent, McSentNoSoftmax, McSentNoPairLoss, PSent, PSpan };

// Which encoder outputs feed the head.
enum class Embedding { Mask, Cls, ClsPronounNp };

enum class LossFamily {
  SoftmaxOverOptions,  // cross-entropy of a softmax across options
  SumOfBinary,         // one binary cross-entropy per option, summed
  Binary,              // single binary cross-entropy on the query input
};

enum class LabelType { Index, Binary };

struct KindTraits {
  std::string_view cli_name;
  std::string_view display_name;
  Embedding embedding;
  LossFamily loss;
  bool multiple_choice;
  LabelType label;
};

// Ordered as the ablation ladder, from the MLM multiple-choice setup down to
// pointwise span classification.
inline constexpr std::array<Kind, 6> kAllKinds = {Kind::McMlm,           Kind::McSent,
                                                  Kind::McSentNoSoftmax, Kind::McSentNoPairLoss,
                                                  Kind::PSent,           Kind::PSpan};

constexpr KindTraits traits(Kind k) {
  switch (k) {
    case Kind::McMlm:
      return {"mc-mlm", "MC-MLM", Embedding::Mask, LossFamily::SoftmaxOverOptions, true, LabelType::Index};
    case Kind::McSent:
      return {"mc-sent", "MC-Sent", Embedding::Cls, LossFamily::SoftmaxOverOptions, true, LabelType::Index};
    case Kind::McSentNoSoftmax:
      return {"mc-sent-nosoftmax", "MC-Sent-NoSoftmax", Embedding::Cls, LossFamily::SumOfBinary, true,
              LabelType::Binary};
    case Kind::McSentNoPairLoss:
      return {"mc-sent-nopairloss", "MC-Sent-NoPairLoss", Embedding::Cls, LossFamily::Binary, true,
              LabelType::Binary};
    case Kind::PSent:
      return {"p-sent", "P-Sent", Embedding::Cls, LossFamily::Binary, false, LabelType::Binary};
    case Kind::PSpan:
      return {"p-span", "P-Span", Embedding::ClsPronounNp, LossFamily::Binary, false, LabelType::Binary};
  }
  return {};
}

inline std::string_view to_string(Kind k) { return traits(k).cli_name; }

inline Kind parse_kind(std::string_view name) {
  for (Kind k : kAllKinds) {
    if (traits(k).cli_name == name) return k;
  }
  throw Error("unknown formalization '" + std::string(name) +
              "' (expected mc-mlm | mc-sent | mc-sent-nosoftmax | mc-sent-nopairloss | p-sent | p-span)");
}

// Kinds trained on grouped examples that carry the full candidate list.
constexpr bool trains_on_groups(Kind k) {
  return k == Kind::McMlm || k == Kind::McSent || k == Kind::McSentNoSoftmax;
}

}  // namespace winoforms
