#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "winoforms/encoder/encoder.hpp"
#include "winoforms/gradcore/optimizer.hpp"
#include "winoforms/gradcore/schedule.hpp"

namespace winoforms {

struct PretrainOptions {
  std::uint64_t seed = 1;
  std::size_t epochs = 40;
  std::size_t batch_size = 16;
  double learning_rate = 2e-3;
  double mask_rate = 0.15;
  double warmup_fraction = 0.06;
  AdamWConfig adamw{};
};

struct MaskedSequence {
  std::vector<TokenId> inputs;
  std::vector<std::size_t> positions;
  std::vector<TokenId> targets;
};

// Wraps a sentence as [CLS] ids [SEP].
inline std::vector<TokenId> frame(std::span<const TokenId> ids) {
  std::vector<TokenId> out;
  out.reserve(ids.size() + 2);
  out.push_back(Vocabulary::kCls);
  out.insert(out.end(), ids.begin(), ids.end());
  out.push_back(Vocabulary::kSep);
  return out;
}

// Picks round(rate * n) (at least one) of the n inner positions of a framed
// sequence. Each picked position becomes [MASK] with probability 0.8, a random
// plain token with probability 0.1, and stays unchanged otherwise.
inline MaskedSequence mask_tokens(std::span<const TokenId> framed, double rate,
                                  std::size_t vocab_size, Generator& rng) {
  if (!(rate > 0.0) || rate > 1.0) {
    throw Error("mask_tokens: masking rate must be in (0, 1]; no positions would be supervised");
  }
  if (framed.size() < 3) throw Error("mask_tokens: sequence has no maskable positions");
  const std::size_t inner = framed.size() - 2;
  const std::size_t count = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(rate * static_cast<double>(inner))), 1, inner);
  std::vector<std::size_t> order(inner);
  std::iota(order.begin(), order.end(), std::size_t{1});
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(count);
  std::sort(order.begin(), order.end());

  MaskedSequence out{std::vector<TokenId>(framed.begin(), framed.end()), order, {}};
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<TokenId> plain(static_cast<TokenId>(Vocabulary::kSpecialCount),
                                               static_cast<TokenId>(vocab_size - 1));
  for (auto p : order) {
    out.targets.push_back(framed[p]);
    const double u = coin(rng);
    if (u < 0.8) {
      out.inputs[p] = Vocabulary::kMask;
    } else if (u < 0.9) {
      out.inputs[p] = plain(rng);
    }
  }
  return out;
}

// Mean cross-entropy over the supervised positions.
template <std::floating_point T>
Var masked_lm_loss(Tape<T>& tape, Encoder<T>& encoder, const MaskedSequence& seq,
                   Generator* dropout_rng) {
  if (seq.positions.empty()) throw Error("masked_lm_loss: no supervised positions");
  Var hidden = encoder.encode(tape, seq.inputs, {}, dropout_rng);
  Var logp = tape.log_softmax(encoder.mlm_logits(tape, tape.gather_rows(hidden, seq.positions)));
  std::vector<Var> picked;
  for (std::size_t i = 0; i < seq.targets.size(); ++i) {
    picked.push_back(tape.element(logp, i, seq.targets[i]));
  }
  return tape.scale(tape.mean_all(tape.concat_cols(picked)), T{-1});
}

template <std::floating_point T>
struct PretrainResult {
  Encoder<T> encoder;
  std::vector<double> epoch_losses;
  double final_loss = 0.0;
};

// MLM pretraining over unframed sentences; deterministic given the options.
template <std::floating_point T = float>
PretrainResult<T> pretrain_mlm(const std::vector<std::vector<TokenId>>& corpus,
                               EncoderConfig config, const PretrainOptions& opt) {
  if (corpus.empty()) throw Error("pretrain: corpus is empty");
  if (!(opt.mask_rate > 0.0)) throw Error("pretrain: masking rate 0 leaves the loss undefined");
  if (opt.epochs == 0 || opt.batch_size == 0) throw Error("pretrain: epochs and batch size must be positive");
  std::vector<std::vector<TokenId>> framed;
  for (const auto& s : corpus) {
    if (s.empty()) continue;
    framed.push_back(frame(s));
    if (framed.back().size() > config.max_length) throw Error("pretrain: sentence exceeds max length");
  }
  if (framed.empty()) throw Error("pretrain: corpus has no tokens");

  PretrainResult<T> result{Encoder<T>(config, opt.seed), {}, 0.0};
  Encoder<T>& enc = result.encoder;
  std::seed_seq sseq{opt.seed, std::uint64_t{0x9e3779b97f4a7c15ULL}};
  Generator rng(sseq);
  const std::size_t batches = (framed.size() + opt.batch_size - 1) / opt.batch_size;
  LinearSchedule schedule(opt.learning_rate, batches * opt.epochs, opt.warmup_fraction);
  OptimizerState<T> state(opt.adamw);
  auto params = enc.parameters().list();
  std::vector<std::size_t> order(framed.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  std::uint64_t update = 0;
  for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t begin = b * opt.batch_size;
      const std::size_t end = std::min(framed.size(), begin + opt.batch_size);
      const T inv = T{1} / static_cast<T>(end - begin);
      enc.parameters().zero_grad();
      for (std::size_t i = begin; i < end; ++i) {
        const auto masked = mask_tokens(framed[order[i]], opt.mask_rate, config.vocab_size, rng);
        Tape<T> tape;
        Var loss = masked_lm_loss(tape, enc, masked, &rng);
        total += static_cast<double>(tape.value(loss).item());
        tape.backward(tape.scale(loss, inv));
      }
      optimizer_step<T>(params, state, schedule.for_update(update++));
    }
    result.epoch_losses.push_back(total / static_cast<double>(framed.size()));
  }
  result.final_loss = result.epoch_losses.back();
  return result;
}

// Fraction of (sequence, position) probes whose argmax MLM prediction equals
// the original token. Probes are framed sequences; the probed position is
// replaced by [MASK] before the forward pass.
template <std::floating_point T>
double masked_token_accuracy(Encoder<T>& encoder,
                             const std::vector<std::pair<std::vector<TokenId>, std::size_t>>& probes) {
  if (probes.empty()) throw Error("masked_token_accuracy: no probes");
  std::size_t correct = 0;
  for (const auto& [ids, pos] : probes) {
    std::vector<TokenId> input = ids;
    const TokenId target = input.at(pos);
    input[pos] = Vocabulary::kMask;
    Tape<T> tape;
    const std::size_t row[] = {pos};
    Var logits = encoder.mlm_logits(tape, tape.gather_rows(encoder.encode(tape, input), row));
    const auto& v = tape.value(logits);
    std::size_t best = 0;
    for (std::size_t c = 1; c < v.cols(); ++c)
      if (v(0, c) > v(0, best)) best = c;
    correct += best == target;
  }
  return static_cast<double>(correct) / static_cast<double>(probes.size());
}

}  // namespace winoforms
