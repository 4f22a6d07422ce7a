// Acceptance run: one PASS/FAIL line per criterion, exit status 0 only when
// every criterion passes. Usage: acceptance [--work DIR] [--only N]...

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <iostream>
#include <random>
#include <regex>
#include <set>
#include <sstream>

#include "fixtures.hpp"

namespace fs = std::filesystem;
using namespace winoforms;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

struct Outcome {
  bool pass = true;
  std::string summary;
  std::vector<std::string> notes;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      notes.push_back("failed: " + what);
    }
  }
};

std::string fmt(double v, int precision = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", precision, v);
  return buf;
}

SchemaExample fixed_example(const std::string& text, Span pronoun, std::vector<std::string> candidates,
                            std::size_t gold) {
  SchemaExample ex;
  ex.id = text.substr(0, 8);
  ex.text = text;
  ex.tokens = tokenize(text);
  ex.pronoun = pronoun;
  ex.pronoun_text = ex.tokens[pronoun.begin];
  ex.candidates = std::move(candidates);
  ex.query = ex.candidates[gold];
  ex.query_span = find_phrase(ex, ex.query);
  ex.gold = IndexGold{gold};
  return ex;
}

// ---------------------------------------------------------------------------
// 1. Gradients of every loss through the full encoder against central
// differences.

Outcome gradient_fidelity() {
  Outcome o;
  const auto start = Clock::now();
  const std::vector<SchemaExample> base = {
      fixed_example("jim yelled at kevin because he was so upset.", {5, 6}, {"jim", "kevin"}, 0),
      fixed_example("the trophy did not fit in the suitcase because it was big.", {9, 10},
                    {"the trophy", "the suitcase"}, 0)};
  std::vector<std::string> text;
  for (const auto& ex : base) text.push_back(ex.text);
  const auto vocab = Vocabulary::build(text);
  EncoderConfig cfg;
  cfg.layers = 1;
  cfg.heads = 2;
  cfg.width = 8;
  cfg.ff_width = 8;
  cfg.max_length = 20;
  cfg.vocab_size = vocab.size();

  double worst = 0.0;
  std::size_t checks = 0;
  std::mt19937_64 rng(2024);
  for (Kind kind : kAllKinds) {
    double kind_worst = 0.0;
    for (std::size_t draw = 0; draw < 20; ++draw) {
      SchemaExample ex = base[draw % 2];
      const std::size_t q = (draw / 2) % 2;
      const bool pointwise_label = !trains_on_groups(kind);
      if (pointwise_label) {
        ex.query = ex.candidates[q];
        ex.query_span = find_phrase(ex, ex.query);
        ex.gold = BinaryGold{q == 0};
      } else {
        ex.gold = IndexGold{q};
      }
      const auto bundle = build_bundle(kind, ex, vocab);
      Model<double> model(Encoder<double>(cfg, draw + 1), kind, draw + 7);
      for (auto* p : model.parameters()) {
        const bool is_gain = p->name.ends_with(".gamma");
        for (auto& v : p->value.data()) {
          v = is_gain ? 1.0 + std::normal_distribution<double>(0.0, 0.2)(rng)
                      : std::normal_distribution<double>(0.0, 0.3)(rng);
        }
      }
      const bool query_only = kind == Kind::McSentNoPairLoss;
      auto params = model.parameters();
      const double err = grad_check_parameters(
          params,
          [&](Tape<double>& t) {
            return loss_graph(t, kind, score_graph(t, model, bundle, nullptr, query_only), bundle.label);
          },
          1e-6);
      kind_worst = std::max(kind_worst, err);
      ++checks;
    }
    worst = std::max(worst, kind_worst);
    o.notes.push_back(std::string(to_string(kind)) + ": max rel err " + fmt(kind_worst, 3));
    o.require(kind_worst <= 1e-4, std::string(to_string(kind)) + " gradient error " + fmt(kind_worst));
  }
  const double elapsed = seconds_since(start);
  o.require(elapsed < 120.0, "runtime " + fmt(elapsed) + " s exceeds 2 min");
  o.summary = std::to_string(checks) + " draws, max rel err " + fmt(worst, 3) + " (bound 1e-4), " +
              fmt(elapsed, 3) + " s";
  return o;
}

// ---------------------------------------------------------------------------
// 2. Losses against direct long-double evaluation of their formulas.

long double bce(long double p, bool y) {
  p = std::clamp(p, 1e-7L, 1.0L - 1e-7L);
  return y ? -std::log(p) : -std::log(1.0L - p);
}

long double sig(long double x) { return 1.0L / (1.0L + std::exp(-x)); }

long double softmax_ce(const std::vector<long double>& p_unnormalised, std::size_t y) {
  long double total = 0;
  for (auto p : p_unnormalised) total += p;
  return -std::log(p_unnormalised[y] / total);
}

Outcome loss_oracles() {
  Outcome o;
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> logit(-8.0, 8.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst = 0.0;
  std::size_t cases = 0;
  for (std::size_t c = 0; c < 1000; ++c) {
    const Kind kind = kAllKinds[c % kAllKinds.size()];
    const std::size_t n = traits(kind).multiple_choice && kind != Kind::McSentNoPairLoss ? 2 + c % 3 : 1;
    const std::size_t y = c % n;
    ScoreVector sv;
    sv.space = score_space(kind);
    long double oracle = 0;
    Gold gold = IndexGold{y};
    switch (kind) {
      case Kind::McMlm: {
        std::vector<long double> geo;
        for (std::size_t i = 0; i < n; ++i) {
          const std::size_t k = 1 + (c + i) % 3;
          std::vector<double> lp;
          long double prod = 1;
          for (std::size_t t = 0; t < k; ++t) {
            const double p = 1e-4 + unit(rng) * (1 - 1e-4);
            lp.push_back(std::log(p));
            prod *= p;
          }
          sv.values.push_back(geometric_logscore(lp));
          geo.push_back(std::pow(prod, 1.0L / static_cast<long double>(k)));
        }
        oracle = softmax_ce(geo, y);
        break;
      }
      case Kind::McSent: {
        std::vector<long double> e;
        for (std::size_t i = 0; i < n; ++i) {
          sv.values.push_back(logit(rng));
          e.push_back(std::exp(static_cast<long double>(sv.values.back())));
        }
        oracle = softmax_ce(e, y);
        break;
      }
      case Kind::McSentNoSoftmax: {
        for (std::size_t i = 0; i < n; ++i) {
          sv.values.push_back(logit(rng));
          oracle += bce(sig(sv.values.back()), i == y);
        }
        break;
      }
      case Kind::McSentNoPairLoss:
      case Kind::PSent: {
        const bool label = c % 2 == 0;
        gold = BinaryGold{label};
        sv.values.push_back(logit(rng));
        oracle = bce(sig(sv.values.back()), label);
        break;
      }
      case Kind::PSpan: {
        const bool label = c % 2 == 0;
        gold = BinaryGold{label};
        sv.values.push_back(unit(rng));
        oracle = bce(sv.values.back(), label);
        break;
      }
    }
    const double err = std::abs(loss(kind, sv, gold) - static_cast<double>(oracle));
    worst = std::max(worst, err);
    ++cases;
  }
  o.require(worst <= 1e-7, "random cases max abs err " + fmt(worst));

  const double ln2 = std::log(2.0);
  struct Fixed {
    const char* name;
    double got;
    double want;
  };
  const Fixed fixed[] = {
      {"equal two-way softmax", loss(Kind::McSent, {ScoreSpace::Logit, {0.4, 0.4}, 0}, IndexGold{0}), ln2},
      {"equal two-way MLM", loss(Kind::McMlm, {ScoreSpace::LogScore, {-2.0, -2.0}, 0}, IndexGold{1}), ln2},
      {"logits 1/0", loss(Kind::McSent, {ScoreSpace::Logit, {1.0, 0.0}, 0}, IndexGold{0}),
       static_cast<double>(std::log1p(std::exp(-1.0L)))},
      {"pointwise p=0.5", loss(Kind::PSpan, {ScoreSpace::Probability, {0.5}, 0}, BinaryGold{true}), ln2},
      {"NoSoftmax symmetric", loss(Kind::McSentNoSoftmax, {ScoreSpace::Logit, {0.0, 0.0}, 0}, IndexGold{0}),
       2 * ln2},
  };
  for (const auto& f : fixed) {
    o.require(std::abs(f.got - f.want) <= 1e-7, std::string(f.name) + " = " + fmt(f.got, 10));
    o.notes.push_back(std::string(f.name) + ": " + fmt(f.got, 6));
  }
  o.summary = std::to_string(cases) + " random cases, max abs err " + fmt(worst, 3) + " (bound 1e-7); " +
              std::to_string(std::size(fixed)) + " fixed cases";
  return o;
}

// ---------------------------------------------------------------------------
// 3. (a) NoSoftmax decomposes into NoPairLoss terms; (b) P-Sent and
// MC-Sent-NoPairLoss train identically and differ only in the decision rule.

Outcome structural_identities() {
  Outcome o;
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> logit(-10.0, 10.0);
  double worst = 0.0;
  for (std::size_t c = 0; c < 1000; ++c) {
    const std::size_t n = 1 + c % 5;
    std::vector<double> s(n);
    for (auto& v : s) v = logit(rng);
    const std::size_t y = (c / 5) % n;
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      sum += loss(Kind::McSentNoPairLoss, {ScoreSpace::Logit, s, i}, BinaryGold{i == y});
    }
    worst = std::max(worst, std::abs(loss(Kind::McSentNoSoftmax, {ScoreSpace::Logit, s, 0}, IndexGold{y}) - sum));
  }

  // The same identity on model outputs: a NoSoftmax model and a NoPairLoss
  // model with equal parameters, each option-input scored separately.
  const auto s = winoforms::testing::tiny_setup(24, 8, 8, 8);
  Model<double> nosoftmax(Encoder<double>(s.encoder), Kind::McSentNoSoftmax, 5);
  Model<double> nopair(Encoder<double>(s.encoder), Kind::McSentNoPairLoss, 5);
  for (const auto& ex : s.data.train) {
    const auto grouped = build_bundle(Kind::McSentNoSoftmax, ex, s.vocab);
    Tape<double> t;
    const double whole =
        t.value(loss_graph(t, Kind::McSentNoSoftmax, score_graph(t, nosoftmax, grouped), grouped.label)).item();
    double parts = 0.0;
    for (const auto& inst : expand_pointwise(ex)) {
      const auto b = build_bundle(Kind::McSentNoPairLoss, inst, s.vocab);
      Tape<double> u;
      parts += u.value(loss_graph(u, Kind::McSentNoPairLoss, score_graph(u, nopair, b, nullptr, true), b.label))
                   .item();
    }
    worst = std::max(worst, std::abs(whole - parts));
  }
  o.require(worst <= 1e-7, "decomposition error " + fmt(worst));
  o.notes.push_back("(a) 1000 random + " + std::to_string(s.data.train.size()) +
                    " model cases, max abs err " + fmt(worst, 3));

  // (b)
  const auto t = winoforms::testing::tiny_setup(40, 20, 20, 16);
  TrainConfig cfg;
  cfg.learning_rate = 1e-3;
  cfg.epochs = 3;
  cfg.batch_size = 8;
  cfg.seed = 17;
  const auto psent = finetune(Kind::PSent, winoforms::testing::train_data(t, Kind::PSent), t.encoder, cfg);
  const auto nopl = finetune(Kind::McSentNoPairLoss, winoforms::testing::train_data(t, Kind::McSentNoPairLoss),
                             t.encoder, cfg);
  bool identical = psent.last.entries().size() == nopl.last.entries().size();
  for (std::size_t i = 0; identical && i < psent.last.entries().size(); ++i) {
    const auto& a = psent.last.entries()[i];
    const auto& b = nopl.last.entries()[i];
    identical = a.name == b.name && a.shape == b.shape && a.values == b.values;
  }
  o.require(identical, "trained parameters differ");

  // Judge both on span-indexed pairs so each gives one binary answer per
  // example, then attribute every disagreement to the decision rule.
  std::vector<SchemaExample> pairs;
  for (const auto& ex : t.data.val) {
    for (auto& w : to_wsc_pair(ex, static_cast<long long>(pairs.size()))) pairs.push_back(std::move(w));
  }
  const auto ps_eval = prepare_split(Kind::PSent, pairs, t.vocab, t.lex, SplitRole::Eval);
  const auto np_eval = prepare_split(Kind::McSentNoPairLoss, pairs, t.vocab, t.lex, SplitRole::Eval);
  Model<float> ps_model(psent.last), np_model(nopl.last);
  std::size_t disagreements = 0, unexplained = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto ps_scores = score(ps_model, ps_eval[i]);
    const auto np_scores = score(np_model, np_eval[i]);
    const double query_logit = np_scores.values[np_scores.query_index];
    if (ps_scores.values[0] != query_logit) ++unexplained;
    const auto a = predict(Kind::PSent, ps_scores, LabelType::Binary);
    const auto b = predict(Kind::McSentNoPairLoss, np_scores, LabelType::Binary);
    const bool threshold_rule = sigmoid(query_logit) > 0.5;
    const bool argmax_rule = argmax(np_scores.values) == np_scores.query_index;
    if (a.value != static_cast<std::size_t>(threshold_rule) || b.value != static_cast<std::size_t>(argmax_rule)) {
      ++unexplained;
    }
    if (a != b) {
      ++disagreements;
      if (threshold_rule == argmax_rule) ++unexplained;
    }
  }
  o.require(unexplained == 0, std::to_string(unexplained) + " prediction differences not due to the rules");
  o.notes.push_back(std::string("(b) parameters ") + (identical ? "bit-identical" : "DIFFER") + ", " +
                    std::to_string(disagreements) + "/" + std::to_string(pairs.size()) +
                    " answers differ, all where argmax and threshold rules disagree");
  o.summary = "(a) max err " + fmt(worst, 3) + "; (b) " + (identical ? "bit-identical" : "different") +
              " parameters, " + std::to_string(disagreements) + " rule-explained disagreements";
  return o;
}

// ---------------------------------------------------------------------------
// 4. Invariances of the multiple-choice decision and losses.

Outcome invariance_suite() {
  Outcome o;
  std::mt19937_64 rng(404);
  std::uniform_real_distribution<double> score(-6.0, 6.0);
  std::uniform_real_distribution<double> shift(-50.0, 50.0);
  const std::vector<std::pair<const char*, std::function<double(double)>>> transforms = {
      {"affine", [](double x) { return 3.5 * x - 2.0; }},
      {"exp", [](double x) { return std::exp(x); }},
      {"cube", [](double x) { return x * x * x; }},
      {"atan", [](double x) { return std::atan(x); }},
      {"softplus", [](double x) { return std::log1p(std::exp(x)); }},
  };
  std::size_t shift_changes = 0, transform_changes = 0;
  double worst_loss = 0.0;
  const Kind mc[] = {Kind::McMlm, Kind::McSent, Kind::McSentNoSoftmax, Kind::McSentNoPairLoss};
  for (std::size_t c = 0; c < 500; ++c) {
    const std::size_t n = 2 + c % 4;
    std::vector<double> s(n);
    for (auto& v : s) v = score(rng);
    const std::size_t q = c % n;
    const Kind kind = mc[c % 4];
    const ScoreVector base{score_space(kind), s, q};
    const double k = shift(rng);
    ScoreVector shifted = base;
    for (auto& v : shifted.values) v += k;
    for (auto want : {LabelType::Index, LabelType::Binary}) {
      if (predict(kind, base, want) != predict(kind, shifted, want)) ++shift_changes;
    }
    for (const auto& [name, f] : transforms) {
      ScoreVector mapped = base;
      for (auto& v : mapped.values) v = f(v);
      for (auto want : {LabelType::Index, LabelType::Binary}) {
        if (predict(kind, base, want) != predict(kind, mapped, want)) ++transform_changes;
      }
    }
    for (Kind lk : {Kind::McMlm, Kind::McSent}) {
      const ScoreVector a{score_space(lk), s, q}, b{score_space(lk), shifted.values, q};
      worst_loss = std::max(worst_loss, std::abs(loss(lk, a, IndexGold{q}) - loss(lk, b, IndexGold{q})));
    }
  }
  o.require(shift_changes == 0, std::to_string(shift_changes) + " predictions changed under a shift");
  o.require(transform_changes == 0, std::to_string(transform_changes) + " predictions changed under a transform");
  o.require(worst_loss <= 1e-6, "loss shift error " + fmt(worst_loss));
  o.summary = "500 cases x " + std::to_string(transforms.size()) + " transforms, " +
              std::to_string(shift_changes + transform_changes) + " prediction changes, loss shift err " +
              fmt(worst_loss, 3) + " (bound 1e-6)";
  return o;
}

// ---------------------------------------------------------------------------
// 5. Distribution statistics.

Outcome statistics() {
  Outcome o;
  const double two_point[] = {0, 0, 1, 1};
  const auto a = distribution_stats(two_point);
  o.require(a.std && std::abs(*a.std - 0.5774) <= 1e-4, "std of {0,0,1,1}");
  o.require(a.kurtosis && std::abs(*a.kurtosis + 2.0) <= 1e-9, "kurtosis of {0,0,1,1}");
  const double ladder[] = {1, 2, 3, 4};
  const auto b = distribution_stats(ladder);
  o.require(b.median == 2.5, "median of {1,2,3,4}");
  o.require(b.p75 == 3.25, "p75 of {1,2,3,4}");
  const double constant[] = {0.6, 0.6, 0.6, 0.6};
  o.require(!distribution_stats(constant).kurtosis.has_value(), "kurtosis of a constant list is undefined");

  std::mt19937_64 rng(55);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::size_t violations = 0;
  for (std::size_t c = 0; c < 1000; ++c) {
    std::vector<double> v(4 + c % 60);
    for (auto& x : v) x = u(rng);
    const auto s = distribution_stats(v);
    const double k = u(rng) * 10 - 5, m = 0.05 + u(rng) * 20;
    auto shifted = v, scaled = v;
    for (auto& x : shifted) x += k;
    for (auto& x : scaled) x *= m;
    const auto p = distribution_stats(shifted), q = distribution_stats(scaled);
    const bool ok = std::abs(p.mean - (s.mean + k)) <= 1e-12 && std::abs(p.median - (s.median + k)) <= 1e-12 &&
                    std::abs(p.p75 - (s.p75 + k)) <= 1e-12 && std::abs(p.max - (s.max + k)) <= 1e-12 &&
                    std::abs(*p.std - *s.std) <= 1e-12 && std::abs(*p.kurtosis - *s.kurtosis) <= 1e-9 &&
                    std::abs(*q.std - m * *s.std) <= 1e-12 * std::max(1.0, m) &&
                    std::abs(*q.kurtosis - *s.kurtosis) <= 1e-9;
    violations += !ok;
  }
  o.require(violations == 0, std::to_string(violations) + " equivariance violations");
  o.summary = "std " + fmt(*a.std, 6) + ", kurt " + fmt(*a.kurtosis, 6) + ", median " + fmt(b.median) +
              ", p75 " + fmt(b.p75) + "; 1000 equivariance samples, " + std::to_string(violations) +
              " violations";
  return o;
}

// ---------------------------------------------------------------------------
// 6. Sweep protocol mechanics.

std::string read_file(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

Outcome protocol_mechanics(const fs::path& work) {
  Outcome o;
  const auto s = winoforms::testing::tiny_setup(16, 8, 16, 8);
  const auto data = winoforms::testing::train_data(s, Kind::McSent);
  const SearchSpace space{{5e-4, 1e-3, 2e-3}, {1, 2}, {4, 8, 16}};
  const fs::path dir = work / "protocol";
  fs::remove_all(dir);
  fs::create_directories(dir);

  auto run = [&](std::size_t workers, const std::string& tag) {
    SweepOptions opt;
    opt.trials = 60;
    opt.workers = workers;
    opt.master_seed = 99;
    opt.records = dir / (tag + ".jsonl");
    opt.checkpoint_dir = dir / (tag + ".ckpts");
    return run_sweep(Kind::McSent, data, s.encoder, space, opt);
  };
  const auto one = run(1, "w1");
  const auto four = run(4, "w4");
  const auto lines = load_records(dir / "w4.jsonl");
  o.require(one.size() == 60 && four.size() == 60 && lines.size() == 60,
            "record counts " + std::to_string(one.size()) + "/" + std::to_string(four.size()) + "/" +
                std::to_string(lines.size()));
  std::size_t mismatched = 0, errors = 0;
  for (std::size_t i = 0; i < std::min(one.size(), four.size()); ++i) {
    auto a = to_json(one[i]), b = to_json(four[i]);
    for (auto* j : {&a, &b}) {
      j->erase("wall_s");
      j->erase("ckpt");
    }
    const bool same_ckpt = read_file(one[i].checkpoint) == read_file(four[i].checkpoint);
    mismatched += !(a == b && same_ckpt);
    errors += one[i].error.has_value() + four[i].error.has_value();
  }
  o.require(mismatched == 0, std::to_string(mismatched) + " records differ between 1 and 4 workers");
  o.require(errors == 0, std::to_string(errors) + " trials failed");

  std::size_t ensemble_mismatch = 0;
  for (Kind kind : kAllKinds) {
    TrainConfig cfg;
    cfg.learning_rate = 1e-3;
    cfg.epochs = 2;
    cfg.batch_size = 4;
    auto result = finetune(kind, winoforms::testing::train_data(s, kind), s.encoder, cfg);
    const fs::path ckpt = dir / (std::string(to_string(kind)) + ".ckpt");
    result.best.save(ckpt);
    result.record.checkpoint = ckpt.string();
    std::vector<RunRecord> copies(5, result.record);
    for (std::size_t i = 0; i < copies.size(); ++i) copies[i].trial = i;
    const auto test = prepare_split(kind, s.data.test, s.vocab, s.lex, SplitRole::Eval);
    Model<float> single(Checkpoint::load(ckpt));
    const double single_acc = evaluate(single, test);
    const double ens_acc = accuracy(ensemble_predict(copies, 5, test), test);
    if (single_acc != ens_acc) ++ensemble_mismatch;
    o.notes.push_back(std::string(to_string(kind)) + ": single " + fmt(single_acc) + ", ensemble of 5 copies " +
                      fmt(ens_acc));
  }
  o.require(ensemble_mismatch == 0, std::to_string(ensemble_mismatch) + " kinds with ensemble mismatch");
  o.summary = "60 records per run, 1 vs 4 workers " + std::string(mismatched ? "differ" : "identical") +
              ", five-copy ensemble " + (ensemble_mismatch ? "differs" : "matches") + " on all 6 kinds";
  return o;
}

// ---------------------------------------------------------------------------
// 7. Preprocessing rules.

Outcome preprocessing(const fs::path& work) {
  Outcome o;
  const auto lex = AttributeLexicon::builtin();
  const auto data = generate_synthetic(lex, {120, 20, 20, 3, 4});

  std::vector<SchemaExample> pairs;
  for (const auto& ex : data.train) {
    for (auto& w : to_wsc_pair(ex, static_cast<long long>(pairs.size()))) pairs.push_back(std::move(w));
  }
  // One more group with three candidates and a false-only group.
  const char* text = "the box hit the cup near the lamp because it was heavy.";
  const char* lines[] = {
      R"({"idx":9001,"text":"%s","target":{"span1_index":0,"span1_text":"the box","span2_index":9,"span2_text":"it"},"label":true})",
      R"({"idx":9002,"text":"%s","target":{"span1_index":3,"span1_text":"the cup","span2_index":9,"span2_text":"it"},"label":false})",
      R"({"idx":9003,"text":"%s","target":{"span1_index":6,"span1_text":"the lamp","span2_index":9,"span2_text":"it"},"label":false})",
      R"({"idx":9004,"text":"the cup saw the box because it was cold.","target":{"span1_index":0,"span1_text":"the cup","span2_index":6,"span2_text":"it"},"label":false})",
  };
  for (const char* l : lines) {
    char buf[512];
    std::snprintf(buf, sizeof buf, l, text);
    pairs.push_back(parse_wsc_line(buf));
  }
  std::rotate(pairs.begin(), pairs.end() - 7, pairs.end());  // interleave groups

  std::set<std::string> keys;
  for (const auto& ex : pairs) keys.insert(detokenize(ex.tokens) + "|" + std::to_string(ex.pronoun.begin));
  const auto once = dedupe_mc_groups(pairs);
  const auto twice = dedupe_mc_groups(once.examples);
  std::set<std::string> kept;
  bool one_each = true;
  for (const auto& ex : once.examples) {
    one_each = kept.insert(detokenize(ex.tokens) + "|" + std::to_string(ex.pronoun.begin)).second && one_each;
  }
  o.require(one_each && kept.size() + once.dropped == keys.size(), "dedup does not keep one example per group");
  o.require(once.dropped == 1, "expected exactly one all-false group dropped");
  o.require(twice.examples == once.examples && twice.dropped == 0, "dedup is not idempotent");
  const auto three = std::find_if(once.examples.begin(), once.examples.end(),
                                  [](const SchemaExample& e) { return e.id == "9001"; });
  o.require(three != once.examples.end() &&
                three->candidates == std::vector<std::string>{"the box", "the cup", "the lamp"},
            "three-way group candidates");

  std::size_t bad_expansions = 0;
  for (const auto& ex : data.train) {
    std::size_t trues = 0;
    const auto inst = expand_pointwise(ex);
    for (const auto& i : inst) trues += std::get<BinaryGold>(i.gold).value;
    bad_expansions += trues != 1 || inst.size() != ex.candidates.size();
  }
  o.require(bad_expansions == 0, std::to_string(bad_expansions) + " expansions without exactly one true");

  struct Crafted {
    const char* sentence;
    std::vector<std::string> options;
    std::vector<Span> first;
  };
  const Crafted crafted[] = {
      {"the cup hit the box because _ was near the cup.", {"the cup", "the box"}, {{0, 2}, {3, 5}}},
      {"the box saw the box and the lamp because _ was big.", {"the box", "the lamp"}, {{0, 2}, {6, 8}}},
      {"the lamp and the cup moved because _ hit the lamp and the cup.", {"the cup", "the lamp"}, {{3, 5}, {0, 2}}},
  };
  std::vector<std::string> vocab_text;
  for (const auto& c : crafted) vocab_text.push_back(c.sentence);
  const auto vocab = Vocabulary::build(vocab_text);
  std::size_t span_errors = 0;
  for (const auto& c : crafted) {
    const auto ex = make_blank_example("crafted", c.sentence, c.options, 0);
    const auto spans = pspan_spans(ex);
    for (std::size_t i = 0; i < spans.size(); ++i) span_errors += !(spans[i].np == c.first[i]);
    for (const auto& inst : expand_pointwise(ex)) {
      const auto b = build_bundle(Kind::PSpan, inst, vocab);
      const std::size_t idx = query_index(inst).value();
      span_errors += !(b.options[0].np == c.first[idx].shifted(1)) || !(b.options[0].pronoun == ex.pronoun.shifted(1));
    }
  }
  o.require(span_errors == 0, std::to_string(span_errors) + " P-Span spans off the first-appearance rule");

  std::size_t round_trip_errors = 0;
  const fs::path dir = work / "loaders";
  fs::create_directories(dir);
  for (const auto& ex : pairs) round_trip_errors += to_wsc_line(parse_wsc_line(to_wsc_line(ex))) != to_wsc_line(ex);
  for (const auto& ex : data.train) {
    round_trip_errors += to_winogrande_line(parse_winogrande_line(to_winogrande_line(ex))) != to_winogrande_line(ex);
  }
  for (auto fmt_kind : {DatasetFormat::Wsc, DatasetFormat::WinoGrande}) {
    const auto& src = fmt_kind == DatasetFormat::Wsc ? pairs : data.train;
    write_jsonl(dir / "a.jsonl", src, fmt_kind);
    write_jsonl(dir / "b.jsonl", load_examples(dir / "a.jsonl", fmt_kind), fmt_kind);
    round_trip_errors += read_file(dir / "a.jsonl") != read_file(dir / "b.jsonl");
  }
  o.require(round_trip_errors == 0, std::to_string(round_trip_errors) + " loader round-trip differences");
  o.summary = std::to_string(keys.size()) + " groups -> " + std::to_string(once.examples.size()) + " kept + " +
              std::to_string(once.dropped) + " dropped, idempotent; " + std::to_string(data.train.size()) +
              " expansions with one true; " + std::to_string(std::size(crafted)) +
              " double-occurrence sentences; byte-stable JSONL round trips";
  return o;
}

// ---------------------------------------------------------------------------
// 8. Desk-scale experiment.

Outcome desk_experiment(const fs::path& work) {
  Outcome o;
  const fs::path dir = work / "desk";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto lex = AttributeLexicon::builtin();
  const auto data = generate_synthetic(lex, {});

  std::vector<std::string> texts = data.pretraining;
  for (const auto* split : {&data.train, &data.val, &data.test}) {
    for (const auto& ex : *split) {
      texts.push_back(ex.text);
      for (const auto& c : ex.candidates) texts.push_back(c);
    }
  }
  const auto vocab = Vocabulary::build(texts);
  EncoderConfig cfg;
  cfg.vocab_size = vocab.size();
  std::vector<std::vector<TokenId>> corpus;
  for (const auto& s : data.pretraining) corpus.push_back(vocab.encode(s));
  const auto t0 = Clock::now();
  const auto pre = pretrain_mlm<float>(corpus, cfg, PretrainOptions{});
  const double pretrain_s = seconds_since(t0);
  o.require(pretrain_s < 300.0, "pretraining took " + fmt(pretrain_s) + " s");
  const Checkpoint encoder = pre.encoder.checkpoint();
  encoder.save(dir / "encoder.ckpt");
  vocab.save(dir / "vocab.txt");
  o.notes.push_back("pretraining: " + std::to_string(corpus.size()) + " sentences, " + fmt(pretrain_s, 3) +
                    " s, final MLM loss " + fmt(pre.final_loss, 3));

  std::map<Kind, DistributionStats> stats;
  double slowest = 0.0;
  std::ofstream all(dir / "records.jsonl", std::ios::trunc);
  for (Kind kind : kAllKinds) {
    TrainData td{prepare_split(kind, data.train, vocab, lex, SplitRole::Train),
                 prepare_split(kind, data.val, vocab, lex, SplitRole::Eval)};
    const auto test = prepare_split(kind, data.test, vocab, lex, SplitRole::Eval);
    SweepOptions opt;
    opt.trials = 12;
    opt.workers = 1;
    opt.master_seed = 1;
    opt.records = dir / (std::string(to_string(kind)) + ".jsonl");
    opt.checkpoint_dir = dir / (std::string(to_string(kind)) + ".ckpts");
    fs::remove(opt.records);
    const auto records = run_sweep(kind, td, encoder, SearchSpace::desk(), opt);
    std::vector<double> accs;
    for (const auto& r : records) {
      all << to_json(r).dump() << '\n';
      if (r.error) {
        o.require(false, std::string(to_string(kind)) + " trial error: " + *r.error);
        continue;
      }
      accs.push_back(r.best_val_acc);
      slowest = std::max(slowest, r.wall_seconds);
      o.require(r.wall_seconds < 60.0, std::string(to_string(kind)) + " trial took " + fmt(r.wall_seconds) + " s");
    }
    if (accs.empty()) continue;
    const auto s = distribution_stats(accs);
    stats[kind] = s;
    const double majority = majority_baseline(td.val);
    o.require(s.median > majority, std::string(to_string(kind)) + " median " + fmt(s.median) +
                                       " does not exceed majority " + fmt(majority));
    const double ens = accuracy(ensemble_predict(records, 5, test), test);
    o.notes.push_back(std::string(traits(kind).display_name) + ": median " + fmt(s.median, 3) + " (majority " +
                      fmt(majority, 3) + "), std " + format_number(s.std, 3) + ", p75 " + fmt(s.p75, 3) +
                      ", max " + fmt(s.max, 3) + ", top-5 ensemble test " + fmt(ens, 3));
  }
  all.close();

  const bool have_both = stats.contains(Kind::McMlm) && stats.contains(Kind::PSent);
  o.require(have_both && stats[Kind::McMlm].median > stats[Kind::PSent].median,
            "MC-MLM median does not exceed P-Sent median");

  // Soft observations, reported only.
  if (stats.size() == kAllKinds.size()) {
    const double mlm_std = stats[Kind::McMlm].std.value_or(0.0);
    bool smallest = true;
    for (Kind k : {Kind::McSent, Kind::McSentNoSoftmax, Kind::McSentNoPairLoss}) {
      smallest = smallest && mlm_std <= stats[k].std.value_or(0.0);
    }
    o.notes.push_back(std::string("soft: MC-MLM std ") + (smallest ? "is" : "is not") +
                      " the smallest among MC kinds");
    const bool mc_above = stats[Kind::McSent].median >= stats[Kind::PSent].median &&
                          stats[Kind::McSent].median >= stats[Kind::PSpan].median;
    o.notes.push_back(std::string("soft: MC-Sent median ") + (mc_above ? "is" : "is not") +
                      " at least both pointwise medians");
  }
  const auto groups = group_records(load_records(dir / "records.jsonl"));
  PlotOptions popt;
  popt.majority = 0.5;
  write_text_file(dir / "table.csv", render_table(groups).csv);
  write_text_file(dir / "table.txt", render_table(groups).text);
  write_text_file(dir / "plot.svg", render_plot(groups, popt));
  o.notes.push_back("artifacts in " + dir.string());
  o.summary = "pretrain " + fmt(pretrain_s, 3) + " s; 6 x 12 trials, slowest " + fmt(slowest, 3) +
              " s; MC-MLM median " + fmt(stats[Kind::McMlm].median, 3) + " vs P-Sent " +
              fmt(stats[Kind::PSent].median, 3);
  return o;
}

// ---------------------------------------------------------------------------
// 9. Reporting determinism and annotations.

std::vector<std::string> capture(const std::string& text, const std::string& pattern) {
  std::vector<std::string> out;
  const std::regex re(pattern);
  for (auto it = std::sregex_iterator(text.begin(), text.end(), re); it != std::sregex_iterator(); ++it) {
    out.push_back((*it)[1].str());
  }
  return out;
}

Outcome reporting(const fs::path& work) {
  Outcome o;
  const fs::path dir = work / "reporting";
  fs::remove_all(dir);
  fs::create_directories(dir);
  {
    std::mt19937_64 rng(12);
    std::uniform_int_distribution<int> correct(90, 200);
    std::ofstream f(dir / "records.jsonl");
    for (Kind k : kAllKinds) {
      for (std::size_t t = 0; t < 12; ++t) {
        RunRecord r;
        r.kind = k;
        r.trial = t;
        r.best_val_acc = correct(rng) / 200.0;
        r.val_curve = {r.best_val_acc};
        r.best_epoch = 1;
        f << to_json(r).dump() << '\n';
      }
    }
  }
  std::vector<fs::path> sources = {dir / "records.jsonl"};
  if (fs::exists(work / "desk" / "records.jsonl")) sources.push_back(work / "desk" / "records.jsonl");

  std::size_t mismatches = 0, checked = 0;
  for (const auto& src : sources) {
    auto render = [&](const std::string& tag) {
      const auto groups = group_records(load_records(src));
      PlotOptions popt;
      popt.majority = 0.5;
      popt.human = 0.95;
      const auto table = render_table(groups);
      write_text_file(dir / (tag + ".csv"), table.csv);
      write_text_file(dir / (tag + ".txt"), table.text);
      write_text_file(dir / (tag + ".svg"), render_plot(groups, popt));
      return groups;
    };
    const auto groups = render("first");
    render("second");
    for (const char* ext : {".csv", ".txt", ".svg"}) {
      const bool same = read_file(dir / (std::string("first") + ext)) == read_file(dir / (std::string("second") + ext));
      o.require(same, src.filename().string() + ": " + ext + " output not byte-identical");
    }
    const auto svg = read_file(dir / "first.svg");
    const auto medians = capture(svg, "class=\"median\" data-value=\"([^\"]+)\"");
    const auto labels = capture(svg, "class=\"median-label\"[^>]*>([^<]+)<");
    const auto p75s = capture(svg, "class=\"p75\" data-value=\"([^\"]+)\"");
    const auto csv = read_file(dir / "first.csv");
    o.require(medians.size() == groups.size() && labels.size() == groups.size() && p75s.size() == groups.size(),
              "annotation count");
    for (std::size_t i = 0; i < std::min({groups.size(), medians.size(), labels.size(), p75s.size()}); ++i) {
      const auto s = distribution_stats(groups[i].accuracies);
      const auto m = format_number(s.median, 3), p = format_number(s.p75, 3);
      mismatches += medians[i] != m || labels[i] != m || p75s[i] != p;
      const std::string row = std::string(traits(groups[i].kind).display_name) + "," + std::to_string(s.count) +
                              "," + format_number(s.std, 3) + "," + format_number(s.kurtosis, 3) + "," + m + "," +
                              p + "," + format_number(s.max, 3) + "\n";
      mismatches += csv.find(row) == std::string::npos;
      ++checked;
    }
  }
  o.require(mismatches == 0, std::to_string(mismatches) + " annotations differ from distribution_stats");
  o.summary = std::to_string(sources.size()) + " records files rendered twice, byte-identical; " +
              std::to_string(checked) + " columns with median/p75 matching to 3 decimals";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  fs::path work = fs::temp_directory_path() / "winoforms-acceptance";
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--work" && i + 1 < argc) {
      work = argv[++i];
    } else if (a == "--only" && i + 1 < argc) {
      only.insert(std::atoi(argv[++i]));
    } else {
      std::cerr << "usage: acceptance [--work DIR] [--only N]...\n";
      return 2;
    }
  }
  fs::create_directories(work);

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"gradient fidelity", gradient_fidelity},
      {"loss oracles", loss_oracles},
      {"structural identities", structural_identities},
      {"invariance suite", invariance_suite},
      {"statistics", statistics},
      {"protocol mechanics", [&] { return protocol_mechanics(work); }},
      {"preprocessing", [&] { return preprocessing(work); }},
      {"desk-scale experiment", [&] { return desk_experiment(work); }},
      {"reporting", [&] { return reporting(work); }},
  };
  bool all_pass = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int number = static_cast<int>(i + 1);
    if (!only.empty() && !only.contains(number)) continue;
    Outcome o;
    const auto start = Clock::now();
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.summary = std::string("exception: ") + e.what();
    }
    all_pass = all_pass && o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << number << ". " << criteria[i].first << " - " << o.summary
              << " [" << fmt(seconds_since(start), 3) << " s]\n";
    for (const auto& n : o.notes) std::cout << "        " << n << '\n';
    std::cout.flush();
  }
  return all_pass ? 0 : 1;
}
