#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "winoforms/encoder/config.hpp"
#include "winoforms/gradcore/checkpoint.hpp"
#include "winoforms/gradcore/tape.hpp"
#include "winoforms/textkit/vocabulary.hpp"

namespace winoforms {

using Generator = std::mt19937_64;

inline constexpr double kInitStd = 0.02;

// Post-norm transformer encoder with learned absolute positions and an MLM
// head whose projection is the token embedding matrix itself.
template <std::floating_point T>
class Encoder {
 public:
  using Mask = typename Tape<T>::Mask;

  Encoder(EncoderConfig config, std::uint64_t seed) : config_(config) {
    config_.validate();
    Generator rng(seed);
    const std::size_t d = config_.width, V = config_.vocab_size, L = config_.max_length;
    auto normal = [&](Shape s) { return normal_tensor<T>(std::move(s), kInitStd, rng); };
    auto ones = [](std::size_t n) { return Tensor<T>::matrix(1, n, T{1}); };
    auto zeros = [](std::size_t n) { return Tensor<T>::matrix(1, n); };

    params_.add("embed.tokens", normal({V, d}));
    params_.add("embed.positions", normal({L, d}));
    params_.add("embed.norm.gamma", ones(d));
    params_.add("embed.norm.beta", zeros(d));
    for (std::size_t l = 0; l < config_.layers; ++l) {
      const std::string p = layer_prefix(l);
      for (const char* proj : {"query", "key", "value", "output"}) {
        params_.add(p + "attn." + proj + ".weight", normal({d, d}));
        params_.add(p + "attn." + proj + ".bias", zeros(d));
      }
      params_.add(p + "attn.norm.gamma", ones(d));
      params_.add(p + "attn.norm.beta", zeros(d));
      params_.add(p + "ff.in.weight", normal({d, config_.ff_width}));
      params_.add(p + "ff.in.bias", zeros(config_.ff_width));
      params_.add(p + "ff.out.weight", normal({config_.ff_width, d}));
      params_.add(p + "ff.out.bias", zeros(d));
      params_.add(p + "ff.norm.gamma", ones(d));
      params_.add(p + "ff.norm.beta", zeros(d));
    }
    params_.add("mlm.bias", zeros(V));
  }

  // Restores an encoder from a checkpoint written by checkpoint(). The MLM
  // bias is optional so that checkpoints without a head still load.
  explicit Encoder(const Checkpoint& ck) : Encoder(EncoderConfig::from_map(ck.meta), 0) {
    for (Parameter<T>* p : params_.list()) {
      if (p->name == "mlm.bias" && !ck.contains("mlm.bias")) {
        has_mlm_head_ = false;
        continue;
      }
      Tensor<T> t = ck.tensor<T>(p->name);
      if (!t.same_shape(p->value)) {
        throw Error("encoder: checkpoint shape mismatch for " + p->name);
      }
      p->value = std::move(t);
    }
  }

  const EncoderConfig& config() const noexcept { return config_; }
  ParameterStore<T>& parameters() noexcept { return params_; }
  const ParameterStore<T>& parameters() const noexcept { return params_; }
  bool has_mlm_head() const noexcept { return has_mlm_head_; }

  Checkpoint checkpoint() const {
    Checkpoint ck;
    ck.meta = config_.to_map();
    ck.add(params_);
    return ck;
  }

  // Hidden states [length, width]. `attention` marks real (1) and padding (0)
  // positions; empty means all real. Dropout is applied only when rng is set.
  Var encode(Tape<T>& tape, std::span<const TokenId> ids, const Mask& attention = {},
             Generator* rng = nullptr) {
    const std::size_t n = ids.size();
    if (n == 0) throw Error("encoder: empty input");
    if (n > config_.max_length) {
      throw Error("encoder: input length " + std::to_string(n) + " exceeds max length " +
                  std::to_string(config_.max_length));
    }
    if (!attention.empty() && attention.size() != n) {
      throw Error("encoder: attention mask length mismatch");
    }
    std::vector<std::size_t> tok(ids.begin(), ids.end());
    for (auto t : tok) {
      if (t >= config_.vocab_size) throw Error("encoder: token id out of vocabulary range");
    }
    std::vector<std::size_t> pos(n);
    for (std::size_t i = 0; i < n; ++i) pos[i] = i;

    Var x = tape.add(tape.gather_rows(param(tape, "embed.tokens"), tok),
                     tape.gather_rows(param(tape, "embed.positions"), pos));
    x = norm(tape, x, "embed.norm");
    x = drop(tape, x, rng);

    const std::size_t dh = config_.head_width();
    const T inv_sqrt = T{1} / std::sqrt(static_cast<T>(dh));
    for (std::size_t l = 0; l < config_.layers; ++l) {
      const std::string p = layer_prefix(l);
      Var q = linear(tape, x, p + "attn.query");
      Var k = linear(tape, x, p + "attn.key");
      Var v = linear(tape, x, p + "attn.value");
      std::vector<Var> heads;
      for (std::size_t h = 0; h < config_.heads; ++h) {
        Var qh = tape.slice_cols(q, h * dh, dh);
        Var kh = tape.slice_cols(k, h * dh, dh);
        Var vh = tape.slice_cols(v, h * dh, dh);
        Var probs = tape.softmax(tape.scale(tape.matmul_nt(qh, kh), inv_sqrt), attention);
        heads.push_back(tape.matmul(drop(tape, probs, rng), vh));
      }
      Var attn = linear(tape, tape.concat_cols(heads), p + "attn.output");
      x = norm(tape, tape.add(x, drop(tape, attn, rng)), p + "attn.norm");

      Var ff = linear(tape, tape.gelu(linear(tape, x, p + "ff.in")), p + "ff.out");
      x = norm(tape, tape.add(x, drop(tape, ff, rng)), p + "ff.norm");
    }
    return x;
  }

  // Vocabulary logits [k, V] for k hidden rows: hidden * E^T + bias.
  Var mlm_logits(Tape<T>& tape, Var hidden) {
    if (!has_mlm_head_) throw Error("encoder: no MLM head loaded");
    if (tape.value(hidden).cols() != config_.width) {
      throw Error("encoder: hidden state width does not match model width");
    }
    return tape.add_row(tape.matmul_nt(hidden, param(tape, "embed.tokens")),
                        param(tape, "mlm.bias"));
  }

 private:
  static std::string layer_prefix(std::size_t l) { return "layer" + std::to_string(l) + "."; }

  Var param(Tape<T>& tape, const std::string& name) { return tape.parameter(params_.at(name)); }

  Var linear(Tape<T>& tape, Var x, const std::string& name) {
    return tape.add_row(tape.matmul(x, param(tape, name + ".weight")), param(tape, name + ".bias"));
  }

  Var norm(Tape<T>& tape, Var x, const std::string& name) {
    return tape.layer_norm(x, param(tape, name + ".gamma"), param(tape, name + ".beta"));
  }

  Var drop(Tape<T>& tape, Var x, Generator* rng) {
    if (!rng) return x;
    return tape.dropout(x, config_.dropout, *rng);
  }

  EncoderConfig config_;
  ParameterStore<T> params_;
  bool has_mlm_head_ = true;
};

}  // namespace winoforms
