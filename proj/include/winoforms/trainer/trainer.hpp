#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "winoforms/formalizations/formalization.hpp"
#include "winoforms/gradcore/optimizer.hpp"
#include "winoforms/gradcore/schedule.hpp"

namespace winoforms {

struct TrainConfig {
  double learning_rate = 2e-5;
  std::size_t epochs = 10;
  std::size_t batch_size = 16;
  std::uint64_t seed = 1;
  std::size_t patience = 20;
  double warmup_fraction = 0.06;
  double weight_decay = 0.001;

  void validate() const {
    if (!(learning_rate >= 0.0)) throw Error("train config: learning rate must be non-negative");
    if (epochs == 0) throw Error("train config: epoch limit must be at least 1");
    if (batch_size == 0) throw Error("train config: batch size must be at least 1");
    if (patience == 0) throw Error("train config: patience must be at least 1");
  }
};

struct RunRecord {
  Kind kind = Kind::McSent;
  TrainConfig config;
  std::vector<double> val_curve;
  double best_val_acc = 0.0;
  std::size_t best_epoch = 0;  // 1-based
  std::string checkpoint;
  double wall_seconds = 0.0;
  std::string data_fingerprint;
  std::optional<std::size_t> trial;
  std::optional<std::string> error;
};

inline nlohmann::ordered_json to_json(const RunRecord& r) {
  nlohmann::ordered_json j;
  j["formalization"] = std::string(to_string(r.kind));
  if (r.trial) j["trial"] = *r.trial;
  j["lr"] = r.config.learning_rate;
  j["epochs"] = r.config.epochs;
  j["batch"] = r.config.batch_size;
  j["seed"] = r.config.seed;
  j["val_curve"] = r.val_curve;
  j["best_val_acc"] = r.best_val_acc;
  j["best_epoch"] = r.best_epoch;
  j["ckpt"] = r.checkpoint;
  j["wall_s"] = r.wall_seconds;
  j["data_fp"] = r.data_fingerprint;
  if (r.error) {
    j["error"] = *r.error;
  } else {
    j["error"] = nullptr;
  }
  return j;
}

inline RunRecord record_from_json(const nlohmann::json& j) {
  RunRecord r;
  r.kind = parse_kind(j.at("formalization").get<std::string>());
  if (j.contains("trial")) r.trial = j.at("trial").get<std::size_t>();
  r.config.learning_rate = j.at("lr").get<double>();
  r.config.epochs = j.at("epochs").get<std::size_t>();
  r.config.batch_size = j.at("batch").get<std::size_t>();
  r.config.seed = j.at("seed").get<std::uint64_t>();
  r.val_curve = j.at("val_curve").get<std::vector<double>>();
  r.best_val_acc = j.at("best_val_acc").get<double>();
  r.best_epoch = j.at("best_epoch").get<std::size_t>();
  r.checkpoint = j.value("ckpt", std::string{});
  r.wall_seconds = j.value("wall_s", 0.0);
  r.data_fingerprint = j.value("data_fp", std::string{});
  if (j.contains("error") && !j.at("error").is_null()) r.error = j.at("error").get<std::string>();
  return r;
}

// FNV-1a over every bundle's token ids, positions and label.
inline std::string fingerprint(std::span<const FormalizedBundle> bundles) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& b : bundles) {
    mix(static_cast<std::uint64_t>(b.kind));
    mix(b.query_index);
    const auto a = gold_answer(b.label);
    mix(static_cast<std::uint64_t>(a.type));
    mix(a.value);
    for (const auto& in : b.options) {
      mix(in.ids.size());
      for (auto id : in.ids) mix(id);
      for (auto p : in.mask_positions) mix(p);
      mix(in.pronoun.begin);
      mix(in.pronoun.end);
      mix(in.np.begin);
      mix(in.np.end);
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

template <std::floating_point T>
std::vector<Answer> predict_split(Model<T>& model, std::span<const FormalizedBundle> split) {
  std::vector<Answer> out;
  out.reserve(split.size());
  for (const auto& b : split) out.push_back(predict(model.kind(), score(model, b), gold_answer(b.label).type));
  return out;
}

inline double accuracy(std::span<const Answer> predictions, std::span<const FormalizedBundle> split) {
  if (split.empty()) throw Error("evaluate: empty split");
  if (predictions.size() != split.size()) throw Error("evaluate: prediction count mismatch");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < split.size(); ++i) correct += predictions[i] == gold_answer(split[i].label);
  return static_cast<double>(correct) / static_cast<double>(split.size());
}

template <std::floating_point T>
double evaluate(Model<T>& model, std::span<const FormalizedBundle> split) {
  if (split.empty()) throw Error("evaluate: empty split");
  return accuracy(predict_split(model, split), split);
}

struct TrainData {
  std::vector<FormalizedBundle> train;
  std::vector<FormalizedBundle> val;
};

template <std::floating_point T>
struct FinetuneResult {
  RunRecord record;
  Checkpoint best;
  Checkpoint last;
};

// Fine-tunes every parameter of encoder + head on one kind. Validation runs
// after each epoch; training stops at the epoch limit or after `patience`
// epochs without a strictly better validation accuracy. Deterministic in
// (data, encoder, config).
template <std::floating_point T = float>
FinetuneResult<T> finetune(Kind kind, const TrainData& data, const Checkpoint& encoder_checkpoint,
                           const TrainConfig& config) {
  config.validate();
  if (data.train.empty()) throw Error("finetune: empty training set");
  if (data.val.empty()) throw Error("finetune: empty validation set");
  const auto start = std::chrono::steady_clock::now();

  Model<T> model(Encoder<T>(encoder_checkpoint), kind, config.seed);
  const std::size_t vocab = model.encoder.config().vocab_size;
  for (const auto* split : {&data.train, &data.val}) {
    for (const auto& b : *split) {
      if (b.kind != kind) throw Error("finetune: data was prepared for another formalization");
      for (const auto& in : b.options) {
        for (auto id : in.ids) {
          if (id >= vocab) throw Error("finetune: token id beyond the encoder vocabulary (encoder/vocabulary mismatch)");
        }
      }
    }
  }

  std::seed_seq sseq{config.seed, std::uint64_t{0x7472616e}};
  Generator rng(sseq);
  const std::size_t n = data.train.size();
  const std::size_t batches = (n + config.batch_size - 1) / config.batch_size;
  LinearSchedule schedule(config.learning_rate, batches * config.epochs, config.warmup_fraction);
  AdamWConfig adamw;
  adamw.weight_decay = config.weight_decay;
  OptimizerState<T> state(adamw);
  auto params = model.parameters();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const bool query_only = kind == Kind::McSentNoPairLoss;

  FinetuneResult<T> result;
  RunRecord& rec = result.record;
  rec.kind = kind;
  rec.config = config;
  rec.data_fingerprint = fingerprint(data.train) + fingerprint(data.val);

  std::uint64_t update = 0;
  std::size_t since_best = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t begin = b * config.batch_size;
      const std::size_t end = std::min(n, begin + config.batch_size);
      const T inv = T{1} / static_cast<T>(end - begin);
      for (auto* p : params) p->zero_grad();
      for (std::size_t i = begin; i < end; ++i) {
        const auto& bundle = data.train[order[i]];
        Tape<T> tape;
        Var s = score_graph(tape, model, bundle, &rng, query_only);
        tape.backward(tape.scale(loss_graph(tape, kind, s, bundle.label), inv));
      }
      optimizer_step<T>(params, state, schedule.for_update(update++));
    }
    const double acc = evaluate(model, data.val);
    rec.val_curve.push_back(acc);
    if (epoch == 1 || acc > rec.best_val_acc) {
      rec.best_val_acc = acc;
      rec.best_epoch = epoch;
      result.best = model.checkpoint();
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  result.last = model.checkpoint();
  rec.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace winoforms
