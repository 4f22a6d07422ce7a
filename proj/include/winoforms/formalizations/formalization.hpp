#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "winoforms/corpus/schema.hpp"
#include "winoforms/encoder/encoder.hpp"
#include "winoforms/formalizations/kind.hpp"
#include "winoforms/gradcore/tape.hpp"
#include "winoforms/textkit/vocabulary.hpp"

namespace winoforms {

inline constexpr double kProbabilityFloor = 1e-7;

// One encoder input. Positions are indices into `ids`.
struct OptionInput {
  std::vector<TokenId> ids;
  std::vector<std::size_t> mask_positions;  // MC-MLM
  std::vector<TokenId> mask_targets;        // MC-MLM
  Span pronoun;                             // P-Span
  Span np;                                  // P-Span
  friend bool operator==(const OptionInput&, const OptionInput&) = default;
};

// Inputs for one example under one formalization. Multiple-choice kinds hold
// one input per candidate; P-Sent and P-Span hold the query input only.
struct FormalizedBundle {
  Kind kind = Kind::McSent;
  std::vector<OptionInput> options;
  std::size_t query_index = 0;
  Gold label = BinaryGold{};
  std::string example_id;

  const OptionInput& query() const { return options.at(query_index); }
};

struct BundleOptions {
  // Reject options containing tokens unknown to the vocabulary.
  bool closed_vocabulary = true;
};

namespace detail {

inline std::vector<TokenId> encode_option(const Vocabulary& vocab, const std::string& phrase,
                                          const BundleOptions& opt) {
  const auto toks = tokenize(phrase);
  if (toks.empty()) throw Error("build_bundle: empty option");
  std::vector<TokenId> ids;
  for (const auto& t : toks) {
    if (opt.closed_vocabulary && !vocab.contains(t)) {
      throw Error("build_bundle: option token '" + t + "' is not in the vocabulary");
    }
    ids.push_back(vocab.id(t));
  }
  return ids;
}

inline void append_ids(std::vector<TokenId>& out, const Vocabulary& vocab,
                       std::span<const std::string> tokens) {
  for (const auto& t : tokens) out.push_back(vocab.id(t));
}

}  // namespace detail

// Builds the encoder inputs of `example` for `kind`. For multiple-choice kinds
// the candidate list is used as is (an empty list means the query alone).
inline FormalizedBundle build_bundle(Kind kind, const SchemaExample& example, const Vocabulary& vocab,
                                     const BundleOptions& opt = {}) {
  const auto& toks = example.tokens;
  if (example.pronoun.empty() || example.pronoun.end > toks.size()) {
    throw Error("build_bundle: pronoun span out of range in example " + example.id);
  }
  const std::span<const std::string> prefix(toks.data(), example.pronoun.begin);
  const std::span<const std::string> suffix(toks.data() + example.pronoun.end,
                                            toks.size() - example.pronoun.end);

  FormalizedBundle b;
  b.kind = kind;
  b.label = example.gold;
  b.example_id = example.id;

  std::vector<std::string> options;
  if (traits(kind).multiple_choice) {
    options = example.candidates;
    if (options.empty()) options.push_back(example.query);
    auto q = std::find_if(options.begin(), options.end(),
                          [&](const std::string& c) { return same_phrase(c, example.query); });
    if (q == options.end()) throw Error("build_bundle: query '" + example.query + "' is not a candidate");
    b.query_index = static_cast<std::size_t>(q - options.begin());
  } else {
    options = {example.query};
  }
  if (const auto* g = std::get_if<IndexGold>(&b.label); g && g->value >= options.size()) {
    throw Error("build_bundle: gold index out of range in example " + example.id);
  }

  for (const auto& phrase : options) {
    OptionInput in;
    in.ids.push_back(Vocabulary::kCls);
    switch (kind) {
      case Kind::McMlm: {
        const auto target = detail::encode_option(vocab, phrase, opt);
        detail::append_ids(in.ids, vocab, prefix);
        for (TokenId t : target) {
          in.mask_positions.push_back(in.ids.size());
          in.mask_targets.push_back(t);
          in.ids.push_back(Vocabulary::kMask);
        }
        detail::append_ids(in.ids, vocab, suffix);
        break;
      }
      case Kind::McSent:
      case Kind::McSentNoSoftmax:
      case Kind::McSentNoPairLoss:
      case Kind::PSent: {
        const auto np = detail::encode_option(vocab, phrase, opt);
        detail::append_ids(in.ids, vocab, prefix);
        in.ids.insert(in.ids.end(), np.begin(), np.end());
        in.ids.push_back(Vocabulary::kSep);
        detail::append_ids(in.ids, vocab, suffix);
        break;
      }
      case Kind::PSpan: {
        std::optional<Span> np = example.query_span;
        if (!np) np = find_phrase(example, phrase);
        if (!np) throw Error("build_bundle: P-Span needs a query span in example " + example.id);
        detail::append_ids(in.ids, vocab, toks);
        in.pronoun = example.pronoun.shifted(1);
        in.np = np->shifted(1);
        break;
      }
    }
    in.ids.push_back(Vocabulary::kSep);
    b.options.push_back(std::move(in));
  }
  return b;
}

// Mean of token log-probabilities: the log of their geometric mean.
inline double geometric_logscore(std::span<const double> logprobs) {
  if (logprobs.empty()) throw Error("geometric_logscore: no token log-probabilities");
  double sum = 0.0;
  for (double v : logprobs) sum += v;
  return sum / static_cast<double>(logprobs.size());
}

enum class ScoreSpace { LogScore, Logit, Probability };

struct ScoreVector {
  ScoreSpace space = ScoreSpace::Logit;
  std::vector<double> values;
  std::size_t query_index = 0;
};

inline double sigmoid(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

// Score node shapes: [1, n] for per-option scores; [1, 1] for pointwise.
inline ScoreSpace score_space(Kind kind) {
  switch (kind) {
    case Kind::McMlm: return ScoreSpace::LogScore;
    case Kind::PSpan: return ScoreSpace::Probability;
    default: return ScoreSpace::Logit;
  }
}

// Task head parameters. MC-MLM owns none: it scores with the encoder's tied
// MLM head.
template <std::floating_point T>
struct TaskHead {
  Kind kind = Kind::McSent;
  std::size_t input_width = 0;
  ParameterStore<T> params;

  bool empty() const { return params.size() == 0; }
};

template <std::floating_point T>
TaskHead<T> init_head(Kind kind, const Encoder<T>& encoder, std::uint64_t seed) {
  TaskHead<T> head;
  head.kind = kind;
  const std::size_t d = encoder.config().width;
  if (kind == Kind::McMlm) {
    if (!encoder.has_mlm_head()) throw Error("init_head: encoder checkpoint has no MLM head");
    head.input_width = d;
    return head;
  }
  head.input_width = kind == Kind::PSpan ? 3 * d : d;
  std::seed_seq sseq{seed, std::uint64_t{0x68656164}};
  Generator rng(sseq);
  head.params.add("head.weight", normal_tensor<T>({head.input_width, 1}, kInitStd, rng));
  head.params.add("head.bias", Tensor<T>::matrix(1, 1));
  return head;
}

// Encoder plus task head: the unit that is fine-tuned and checkpointed.
template <std::floating_point T>
struct Model {
  Encoder<T> encoder;
  TaskHead<T> head;

  Model(Encoder<T> enc, Kind kind, std::uint64_t head_seed)
      : encoder(std::move(enc)), head(init_head(kind, encoder, head_seed)) {}

  explicit Model(const Checkpoint& ck) : encoder(ck), head{} {
    const auto it = ck.meta.find("kind");
    if (it == ck.meta.end()) throw Error("model checkpoint: missing kind");
    head = init_head(parse_kind(it->second), encoder, 0);
    for (Parameter<T>* p : head.params.list()) {
      Tensor<T> t = ck.tensor<T>(p->name);
      if (!t.same_shape(p->value)) throw Error("model checkpoint: head shape mismatch");
      p->value = std::move(t);
    }
  }

  Kind kind() const { return head.kind; }

  std::vector<Parameter<T>*> parameters() {
    auto out = encoder.parameters().list();
    for (auto* p : head.params.list()) out.push_back(p);
    return out;
  }

  Checkpoint checkpoint() const {
    Checkpoint ck = encoder.checkpoint();
    ck.meta["kind"] = std::string(to_string(head.kind));
    ck.add(head.params);
    return ck;
  }
};

namespace detail {

template <std::floating_point T>
Var head_logit(Tape<T>& tape, TaskHead<T>& head, Var features) {
  return tape.add(tape.matmul(features, tape.parameter(head.params.at("head.weight"))),
                  tape.parameter(head.params.at("head.bias")));
}

inline void check_positions(const OptionInput& in) {
  for (auto p : in.mask_positions) {
    if (p >= in.ids.size()) throw Error("score: mask position out of range");
  }
  for (const Span* s : {&in.pronoun, &in.np}) {
    if (s->end > in.ids.size()) throw Error("score: span out of range");
  }
}

template <std::floating_point T>
Var mlm_option_logscore(Tape<T>& tape, Model<T>& model, const OptionInput& in, Generator* rng) {
  if (in.mask_positions.empty() || in.mask_positions.size() != in.mask_targets.size()) {
    throw Error("score: MC-MLM option needs matching mask positions and targets");
  }
  Var hidden = model.encoder.encode(tape, in.ids, {}, rng);
  Var logp = tape.log_softmax(model.encoder.mlm_logits(tape, tape.gather_rows(hidden, in.mask_positions)));
  std::vector<Var> picked;
  for (std::size_t i = 0; i < in.mask_targets.size(); ++i) {
    picked.push_back(tape.element(logp, i, in.mask_targets[i]));
  }
  return tape.mean_all(tape.concat_cols(picked));
}

template <std::floating_point T>
Var cls_logit(Tape<T>& tape, Model<T>& model, const OptionInput& in, Generator* rng) {
  Var hidden = model.encoder.encode(tape, in.ids, {}, rng);
  const std::size_t cls[] = {0};
  return head_logit(tape, model.head, tape.gather_rows(hidden, cls));
}

inline std::vector<std::size_t> span_rows(const Span& s) {
  if (s.empty()) throw Error("score: empty span");
  std::vector<std::size_t> rows;
  for (std::size_t i = s.begin; i < s.end; ++i) rows.push_back(i);
  return rows;
}

template <std::floating_point T>
Var pspan_probability(Tape<T>& tape, Model<T>& model, const OptionInput& in, Generator* rng) {
  Var hidden = model.encoder.encode(tape, in.ids, {}, rng);
  const std::size_t cls[] = {0};
  const auto pron = span_rows(in.pronoun);
  const auto np = span_rows(in.np);
  const Var parts[] = {tape.gather_rows(hidden, cls), tape.mean_rows(tape.gather_rows(hidden, pron)),
                       tape.mean_rows(tape.gather_rows(hidden, np))};
  return tape.sigmoid(head_logit(tape, model.head, tape.concat_cols(parts)));
}

}  // namespace detail

// Records the score graph of `bundle`. Multiple-choice kinds give [1, n]
// option scores; P-Sent a [1, 1] logit and P-Span a [1, 1] probability.
// With `query_only`, MC-Sent-NoPairLoss scores just the query input, as it
// does in training. Dropout is active only when rng is set.
template <std::floating_point T>
Var score_graph(Tape<T>& tape, Model<T>& model, const FormalizedBundle& bundle, Generator* rng = nullptr,
                bool query_only = false) {
  if (bundle.kind != model.kind()) throw Error("score: bundle was built for a different formalization");
  if (bundle.options.empty()) throw Error("score: bundle has no inputs");
  for (const auto& in : bundle.options) detail::check_positions(in);
  switch (bundle.kind) {
    case Kind::McMlm: {
      std::vector<Var> s;
      for (const auto& in : bundle.options) s.push_back(detail::mlm_option_logscore(tape, model, in, rng));
      return tape.concat_cols(s);
    }
    case Kind::McSentNoPairLoss:
      if (query_only) return detail::cls_logit(tape, model, bundle.query(), rng);
      [[fallthrough]];
    case Kind::McSent:
    case Kind::McSentNoSoftmax: {
      std::vector<Var> s;
      for (const auto& in : bundle.options) s.push_back(detail::cls_logit(tape, model, in, rng));
      return tape.concat_cols(s);
    }
    case Kind::PSent:
      return detail::cls_logit(tape, model, bundle.query(), rng);
    case Kind::PSpan:
      return detail::pspan_probability(tape, model, bundle.query(), rng);
  }
  throw Error("score: unknown formalization");
}

template <std::floating_point T>
ScoreVector score(Model<T>& model, const FormalizedBundle& bundle) {
  Tape<T> tape;
  Var s = score_graph(tape, model, bundle);
  ScoreVector out;
  out.space = score_space(bundle.kind);
  out.query_index = traits(bundle.kind).multiple_choice ? bundle.query_index : 0;
  for (T v : tape.value(s).data()) out.values.push_back(static_cast<double>(v));
  return out;
}

namespace detail {

// -[y log p + (1 - y) log(1 - p)] with p clamped away from 0 and 1.
template <std::floating_point T>
Var binary_cross_entropy(Tape<T>& tape, Var probability, bool y) {
  Var p = tape.clamp(probability, T(kProbabilityFloor), T(1 - kProbabilityFloor));
  return y ? tape.scale(tape.log(p), T{-1}) : tape.scale(tape.log(tape.scale(p, T{-1}, T{1})), T{-1});
}

inline std::size_t gold_index(const Gold& label, std::size_t n) {
  const auto* g = std::get_if<IndexGold>(&label);
  if (!g) throw Error("loss: this formalization needs an index label");
  if (g->value >= n) {
    throw Error("loss: gold index " + std::to_string(g->value) + " out of range for " + std::to_string(n) +
                " options");
  }
  return g->value;
}

inline bool gold_binary(const Gold& label) {
  const auto* g = std::get_if<BinaryGold>(&label);
  if (!g) throw Error("loss: this formalization needs a binary label");
  return g->value;
}

}  // namespace detail

// Loss graph over a score node from score_graph. For MC-Sent-NoPairLoss the
// scores must be the [1, 1] query logit.
template <std::floating_point T>
Var loss_graph(Tape<T>& tape, Kind kind, Var scores, const Gold& label) {
  const auto& s = tape.value(scores);
  if (s.rows() != 1 || s.cols() == 0) throw Error("loss: scores must be a non-empty row");
  switch (traits(kind).loss) {
    case LossFamily::SoftmaxOverOptions: {
      const auto y = detail::gold_index(label, s.cols());
      return tape.scale(tape.element(tape.log_softmax(scores), 0, y), T{-1});
    }
    case LossFamily::SumOfBinary: {
      const auto y = detail::gold_index(label, s.cols());
      std::vector<Var> terms;
      for (std::size_t i = 0; i < s.cols(); ++i) {
        terms.push_back(detail::binary_cross_entropy(tape, tape.sigmoid(tape.element(scores, 0, i)), i == y));
      }
      return tape.sum_all(tape.concat_cols(terms));
    }
    case LossFamily::Binary: {
      if (s.cols() != 1) throw Error("loss: pointwise formalizations take a single score");
      const bool y = detail::gold_binary(label);
      Var p = kind == Kind::PSpan ? scores : tape.sigmoid(scores);
      return detail::binary_cross_entropy(tape, p, y);
    }
  }
  throw Error("loss: unknown loss family");
}

// Loss value from a ScoreVector. MC-Sent-NoPairLoss uses the query's logit.
inline double loss(Kind kind, const ScoreVector& scores, const Gold& label) {
  if (scores.values.empty()) throw Error("loss: empty score vector");
  Tape<double> tape;
  if (traits(kind).loss == LossFamily::Binary) {
    double v;
    if (scores.space == ScoreSpace::Probability) {
      if (scores.values.size() != 1) throw Error("loss: probability scores hold one value");
      v = scores.values[0];
      if (!(v >= 0.0 && v <= 1.0)) throw Error("loss: probability outside [0, 1]");
      if (kind != Kind::PSpan) v = std::log(std::max(v, 1e-300)) - std::log1p(-std::min(v, 1 - 1e-16));
    } else {
      if (scores.query_index >= scores.values.size()) throw Error("loss: query index out of range");
      v = scores.values[scores.query_index];
      if (kind == Kind::PSpan) v = sigmoid(v);
    }
    Var s = tape.constant(Tensor<double>::matrix(1, 1, v));
    return tape.value(loss_graph(tape, kind, s, label)).item();
  }
  Tensor<double> row = Tensor<double>::matrix(1, scores.values.size());
  std::copy(scores.values.begin(), scores.values.end(), row.data().begin());
  return tape.value(loss_graph(tape, kind, tape.constant(std::move(row)), label)).item();
}

struct Answer {
  LabelType type = LabelType::Binary;
  std::size_t value = 0;  // index, or 0/1
  friend bool operator==(const Answer&, const Answer&) = default;
};

inline std::size_t argmax(std::span<const double> v) {
  if (v.empty()) throw Error("argmax: empty scores");
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

// Decision rule. Multiple-choice kinds pick the highest-scoring option (lowest
// index on ties) and, when a binary answer is wanted, say true iff the query
// wins. Pointwise kinds say true iff the probability exceeds the threshold.
inline Answer predict(Kind kind, const ScoreVector& scores, LabelType want, double threshold = 0.5) {
  if (traits(kind).multiple_choice) {
    const auto best = argmax(scores.values);
    if (want == LabelType::Index) return {LabelType::Index, best};
    return {LabelType::Binary, best == scores.query_index ? 1u : 0u};
  }
  if (want == LabelType::Index) throw Error("predict: pointwise formalizations give binary answers");
  if (scores.values.size() != 1) throw Error("predict: pointwise scores hold one value");
  const double p = scores.space == ScoreSpace::Probability ? scores.values[0] : sigmoid(scores.values[0]);
  return {LabelType::Binary, p > threshold ? 1u : 0u};
}

inline Answer gold_answer(const Gold& g) {
  if (const auto* i = std::get_if<IndexGold>(&g)) return {LabelType::Index, i->value};
  return {LabelType::Binary, std::get<BinaryGold>(g).value ? 1u : 0u};
}

}  // namespace winoforms
