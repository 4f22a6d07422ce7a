#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "winoforms/sweep/stats.hpp"
#include "winoforms/trainer/trainer.hpp"

namespace winoforms {

struct SearchSpace {
  std::vector<double> learning_rates;
  std::vector<std::size_t> epochs;
  std::vector<std::size_t> batch_sizes;

  void validate() const {
    if (learning_rates.empty() || epochs.empty() || batch_sizes.empty()) {
      throw Error("search space: every axis needs at least one value");
    }
  }

  // The grid used with large pretrained encoders.
  static SearchSpace standard() { return {{1e-5, 2e-5, 3e-5}, {10, 20, 40}, {8, 16, 32, 64}}; }

  // Same shape, rescaled for the small encoder trained here: 50x the rates,
  // epoch limits at three eighths.
  static SearchSpace desk() { return {{5e-4, 1e-3, 1.5e-3}, {5, 10, 15}, {8, 16, 32, 64}}; }
};

// One uniform draw per axis plus a fresh 32-bit seed.
inline TrainConfig sample_trial(const SearchSpace& space, std::mt19937_64& rng,
                                const TrainConfig& base = {}) {
  space.validate();
  auto pick = [&](const auto& v) {
    return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
  };
  TrainConfig c = base;
  c.learning_rate = pick(space.learning_rates);
  c.epochs = pick(space.epochs);
  c.batch_size = pick(space.batch_sizes);
  c.seed = rng() & 0xffffffffULL;
  return c;
}

struct SweepOptions {
  std::size_t trials = 60;
  std::size_t workers = 1;
  std::uint64_t master_seed = 1;
  TrainConfig base;                      // patience, warmup and decay for every trial
  std::filesystem::path records;         // JSONL stream; empty = none
  std::filesystem::path checkpoint_dir;  // best checkpoints; empty = none
  std::function<void(const RunRecord&)> on_record;
};

// Runs `trials` fine-tuning trials on a bounded worker pool. Configurations
// are drawn up front from the master seed, so the record set does not depend
// on the worker count. A failed trial yields a record carrying the error.
// Records are returned in trial order; the JSONL stream is in finish order.
template <std::floating_point T = float>
std::vector<RunRecord> run_sweep(Kind kind, const TrainData& data, const Checkpoint& encoder,
                                 const SearchSpace& space, const SweepOptions& opt) {
  if (opt.trials == 0) throw Error("sweep: number of trials must be at least 1");
  space.validate();
  std::mt19937_64 rng(opt.master_seed);
  std::vector<TrainConfig> configs;
  for (std::size_t i = 0; i < opt.trials; ++i) configs.push_back(sample_trial(space, rng, opt.base));

  std::ofstream stream;
  if (!opt.records.empty()) {
    stream.open(opt.records, std::ios::app);
    if (!stream) throw Error("sweep: cannot open " + opt.records.string());
  }
  if (!opt.checkpoint_dir.empty()) std::filesystem::create_directories(opt.checkpoint_dir);

  std::vector<RunRecord> records(opt.trials);
  std::mutex out_mutex;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < opt.trials; i = next++) {
      RunRecord rec;
      try {
        auto result = finetune<T>(kind, data, encoder, configs[i]);
        rec = std::move(result.record);
        if (!opt.checkpoint_dir.empty()) {
          char name[32];
          std::snprintf(name, sizeof name, "trial-%03zu.ckpt", i);
          const auto path = opt.checkpoint_dir / name;
          result.best.save(path);
          rec.checkpoint = path.string();
        }
      } catch (const std::exception& e) {
        rec = RunRecord{};
        rec.kind = kind;
        rec.config = configs[i];
        rec.error = e.what();
      }
      rec.trial = i;
      std::lock_guard lock(out_mutex);
      if (stream.is_open()) {
        stream << to_json(rec).dump() << '\n';
        stream.flush();
      }
      if (opt.on_record) opt.on_record(rec);
      records[i] = std::move(rec);
    }
  };
  const std::size_t n_workers = std::clamp<std::size_t>(opt.workers, 1, opt.trials);
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  }
  return records;
}

inline std::vector<RunRecord> load_records(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open records file " + path.string());
  std::vector<RunRecord> out;
  std::size_t lineno = 0;
  for (std::string line; std::getline(f, line);) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw Error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

// Majority vote over answers listed best model first; when several answers
// share the top count, the one from the highest-ranked model among them wins.
inline Answer combine_votes(std::span<const Answer> ranked_votes) {
  if (ranked_votes.empty()) throw Error("ensemble: no votes");
  std::map<std::pair<int, std::size_t>, std::size_t> counts;
  std::size_t top = 0;
  for (const auto& a : ranked_votes) top = std::max(top, ++counts[{static_cast<int>(a.type), a.value}]);
  for (const auto& a : ranked_votes) {
    if (counts[{static_cast<int>(a.type), a.value}] == top) return a;
  }
  return ranked_votes.front();
}

// The k usable records with the highest best validation accuracy. Among
// equals the lower trial number wins, then the earlier record, so the choice
// does not depend on the order in which parallel trials finished.
inline std::vector<RunRecord> top_records(std::span<const RunRecord> records, std::size_t k) {
  std::vector<RunRecord> usable;
  for (const auto& r : records) {
    if (!r.error && !r.checkpoint.empty()) usable.push_back(r);
  }
  std::stable_sort(usable.begin(), usable.end(), [](const RunRecord& a, const RunRecord& b) {
    return a.trial.value_or(SIZE_MAX) < b.trial.value_or(SIZE_MAX);
  });
  if (k == 0) throw Error("ensemble: k must be at least 1");
  if (usable.size() < k) {
    throw Error("ensemble: need " + std::to_string(k) + " records with checkpoints, have " +
                std::to_string(usable.size()));
  }
  std::stable_sort(usable.begin(), usable.end(),
                   [](const RunRecord& a, const RunRecord& b) { return a.best_val_acc > b.best_val_acc; });
  usable.resize(k);
  return usable;
}

template <std::floating_point T = float>
std::vector<Answer> ensemble_predict(std::span<const RunRecord> records, std::size_t k,
                                     std::span<const FormalizedBundle> test) {
  const auto chosen = top_records(records, k);
  std::vector<std::vector<Answer>> votes;
  for (const auto& r : chosen) {
    Model<T> model(Checkpoint::load(r.checkpoint));
    if (model.kind() != r.kind) throw Error("ensemble: checkpoint " + r.checkpoint + " has another kind");
    votes.push_back(predict_split(model, test));
  }
  std::vector<Answer> out;
  std::vector<Answer> column(votes.size());
  for (std::size_t i = 0; i < test.size(); ++i) {
    for (std::size_t m = 0; m < votes.size(); ++m) column[m] = votes[m][i];
    out.push_back(combine_votes(column));
  }
  return out;
}

}  // namespace winoforms
