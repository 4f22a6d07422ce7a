// Command-line front end: corpus generation, pretraining, fine-tuning,
// sweeps, reports and prediction.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "winoforms/winoforms.hpp"

namespace fs = std::filesystem;
using namespace winoforms;

namespace {

constexpr int kUsageError = 2;

struct Common {
  std::uint64_t seed = 1;
  std::string config;
  std::size_t workers = 1;
  std::string out;
};

void add_common(CLI::App& cmd, Common& c, bool out_required) {
  cmd.add_option("--seed", c.seed, "Random seed")->capture_default_str();
  cmd.add_option("--config", c.config, "Flat key=value file supplying flag defaults");
  cmd.add_option("--workers", c.workers, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  auto* out = cmd.add_option("--out", c.out, "Output path");
  if (out_required) out->required();
}

// Splices key=value lines of every --config file into argv as flags, unless
// the flag is already given on the command line.
std::vector<std::string> expand_config(std::vector<std::string> args) {
  std::vector<std::string> extra;
  for (std::size_t i = 0; i + 1 < args.size(); ++i) {
    if (args[i] != "--config") continue;
    std::ifstream f(args[i + 1]);
    if (!f) throw winoforms::Error("cannot open config file " + args[i + 1]);
    for (const auto& [key, value] : parse_key_values(f)) {
      const std::string flag = "--" + key;
      bool given = false;
      for (const auto& a : args) given = given || a == flag || a.starts_with(flag + "=");
      if (given) continue;
      extra.push_back(flag);
      extra.push_back(value);
    }
  }
  args.insert(args.end(), extra.begin(), extra.end());
  return args;
}

struct DataDir {
  std::vector<SchemaExample> train, val, test;
  AttributeLexicon lexicon;
};

std::vector<SchemaExample> load_split(const fs::path& path) {
  return load_examples(path, detect_format(path));
}

DataDir load_data_dir(const fs::path& dir) {
  DataDir d;
  d.train = load_split(dir / "train.jsonl");
  d.val = load_split(dir / "val.jsonl");
  if (fs::exists(dir / "test.jsonl")) d.test = load_split(dir / "test.jsonl");
  d.lexicon = fs::exists(dir / "lexicon.txt") ? AttributeLexicon::load(dir / "lexicon.txt")
                                               : AttributeLexicon::builtin();
  return d;
}

struct EncoderFiles {
  fs::path checkpoint;
  fs::path vocabulary;
};

// Accepts either an encoder directory or the checkpoint file inside one.
EncoderFiles encoder_files(const fs::path& where) {
  EncoderFiles f;
  f.checkpoint = fs::is_directory(where) ? where / "encoder.ckpt" : where;
  f.vocabulary = f.checkpoint.parent_path() / "vocab.txt";
  if (!fs::exists(f.checkpoint)) throw winoforms::Error("no encoder checkpoint at " + f.checkpoint.string());
  if (!fs::exists(f.vocabulary)) throw winoforms::Error("no vocab.txt next to " + f.checkpoint.string());
  return f;
}

void print_record(const RunRecord& r) { std::cout << to_json(r).dump() << '\n'; }

int run_gen_corpus(const Common& c, const SyntheticOptions& base, const std::string& format,
                   const std::string& lexicon_path) {
  SyntheticOptions opt = base;
  opt.seed = c.seed;
  const auto lex = lexicon_path.empty() ? AttributeLexicon::builtin() : AttributeLexicon::load(lexicon_path);
  const auto data = generate_synthetic(lex, opt);
  const fs::path dir(c.out);
  fs::create_directories(dir);
  {
    std::ofstream f(dir / "pretrain.txt", std::ios::trunc);
    for (const auto& s : data.pretraining) f << s << '\n';
  }
  lex.save(dir / "lexicon.txt");
  auto write = [&](const char* name, const std::vector<SchemaExample>& split) {
    if (format == "wsc") {
      std::vector<SchemaExample> pairs;
      long long idx = 0;
      for (const auto& ex : split) {
        for (auto& w : to_wsc_pair(ex, idx)) pairs.push_back(std::move(w));
        idx += static_cast<long long>(ex.candidates.size());
      }
      write_jsonl(dir / name, pairs, DatasetFormat::Wsc);
    } else {
      write_jsonl(dir / name, split, DatasetFormat::WinoGrande);
    }
  };
  write("train.jsonl", data.train);
  write("val.jsonl", data.val);
  write("test.jsonl", data.test);
  std::cerr << "wrote " << data.pretraining.size() << " pretraining sentences and " << data.train.size() << "/"
            << data.val.size() << "/" << data.test.size() << " schemas to " << dir.string() << '\n';
  return 0;
}

int run_pretrain(const Common& c, const std::string& data_dir, PretrainOptions opt, EncoderConfig cfg) {
  const fs::path dir(data_dir);
  std::vector<std::string> corpus;
  {
    std::ifstream f(dir / "pretrain.txt");
    if (!f) throw winoforms::Error("cannot open " + (dir / "pretrain.txt").string());
    for (std::string line; std::getline(f, line);) {
      if (!line.empty()) corpus.push_back(line);
    }
  }
  // The vocabulary also covers the task splits so that no option is unknown.
  std::vector<std::string> texts = corpus;
  for (const char* split : {"train.jsonl", "val.jsonl", "test.jsonl"}) {
    if (!fs::exists(dir / split)) continue;
    for (const auto& ex : load_split(dir / split)) {
      texts.push_back(ex.text);
      for (const auto& cand : ex.candidates) texts.push_back(cand);
    }
  }
  const auto vocab = Vocabulary::build(texts);
  cfg.vocab_size = vocab.size();
  opt.seed = c.seed;
  std::vector<std::vector<TokenId>> ids;
  for (const auto& s : corpus) ids.push_back(vocab.encode(s));
  const auto result = pretrain_mlm<float>(ids, cfg, opt);

  const fs::path out(c.out);
  fs::create_directories(out);
  result.encoder.checkpoint().save(out / "encoder.ckpt");
  vocab.save(out / "vocab.txt");
  cfg.save(out / "encoder.cfg");
  for (std::size_t e = 0; e < result.epoch_losses.size(); ++e) {
    std::cerr << "epoch " << e + 1 << " mlm loss " << result.epoch_losses[e] << '\n';
  }
  return 0;
}

struct TaskInputs {
  TrainData data;
  std::vector<FormalizedBundle> test;
  Checkpoint encoder;
};

TaskInputs load_task(Kind kind, const std::string& data_dir, const std::string& encoder) {
  const auto files = encoder_files(encoder);
  const auto vocab = Vocabulary::load(files.vocabulary);
  const auto d = load_data_dir(data_dir);
  TaskInputs t;
  t.data.train = prepare_split(kind, d.train, vocab, d.lexicon, SplitRole::Train);
  t.data.val = prepare_split(kind, d.val, vocab, d.lexicon, SplitRole::Eval);
  if (!d.test.empty()) t.test = prepare_split(kind, d.test, vocab, d.lexicon, SplitRole::Eval);
  t.encoder = Checkpoint::load(files.checkpoint);
  return t;
}

int run_finetune(const Common& c, const std::string& kind_name, const std::string& data_dir,
                 const std::string& encoder, TrainConfig cfg) {
  const Kind kind = parse_kind(kind_name);
  auto task = load_task(kind, data_dir, encoder);
  cfg.seed = c.seed;
  auto result = finetune<float>(kind, task.data, task.encoder, cfg);
  result.best.save(c.out);
  result.record.checkpoint = c.out;
  print_record(result.record);
  if (!task.test.empty()) {
    Model<float> model(result.best);
    std::cerr << "test accuracy " << evaluate(model, task.test) << '\n';
  }
  return 0;
}

int run_sweep_cmd(const Common& c, const std::string& kind_name, const std::string& data_dir,
                  const std::string& encoder, std::size_t trials, const std::string& space_name,
                  std::size_t ensemble_k, const TrainConfig& base) {
  const Kind kind = parse_kind(kind_name);
  if (trials == 0) throw winoforms::Error("sweep: --trials must be at least 1");
  SearchSpace space;
  if (space_name == "standard") {
    space = SearchSpace::standard();
  } else if (space_name == "desk") {
    space = SearchSpace::desk();
  } else {
    throw winoforms::Error("unknown search space '" + space_name + "' (expected standard or desk)");
  }
  auto task = load_task(kind, data_dir, encoder);
  SweepOptions opt;
  opt.trials = trials;
  opt.workers = c.workers;
  opt.master_seed = c.seed;
  opt.base = base;
  opt.records = c.out;
  opt.checkpoint_dir = c.out + ".ckpts";
  opt.on_record = [](const RunRecord& r) {
    std::cerr << "trial " << r.trial.value_or(0) << ": ";
    if (r.error) {
      std::cerr << "error " << *r.error << '\n';
    } else {
      std::cerr << "best val " << r.best_val_acc << " (epoch " << r.best_epoch << ", " << r.wall_seconds
                << " s)\n";
    }
  };
  std::ofstream(c.out, std::ios::trunc);
  const auto records = run_sweep<float>(kind, task.data, task.encoder, space, opt);
  std::vector<double> accs;
  for (const auto& r : records) {
    if (!r.error) accs.push_back(r.best_val_acc);
  }
  if (!accs.empty()) {
    const auto s = distribution_stats(accs);
    std::cerr << "median " << s.median << " p75 " << s.p75 << " max " << s.max << '\n';
  }
  if (ensemble_k > 0 && !task.test.empty() && accs.size() >= ensemble_k) {
    const auto preds = ensemble_predict<float>(records, ensemble_k, task.test);
    std::cout << "ensemble test accuracy " << format_number(accuracy(preds, task.test), 4) << '\n';
  }
  return 0;
}

int run_report(const Common& c, const std::vector<std::string>& record_files, const std::string& table,
               const std::string& text, const std::string& plot, std::optional<double> majority,
               std::optional<double> human, const std::vector<std::string>& test_accs, int precision) {
  std::vector<RunRecord> records;
  for (const auto& f : record_files) {
    auto part = load_records(f);
    records.insert(records.end(), part.begin(), part.end());
  }
  const auto groups = group_records(records);
  if (groups.empty()) throw winoforms::Error("report: no successful records");
  TableOptions topt;
  topt.precision = precision;
  for (const auto& entry : test_accs) {
    const auto eq = entry.find('=');
    if (eq == std::string::npos) throw winoforms::Error("--test-acc expects KIND=ACCURACY");
    topt.test_accuracy[parse_kind(entry.substr(0, eq))] = std::stod(entry.substr(eq + 1));
  }
  const auto rendered = render_table(groups, topt);
  std::cout << rendered.text;
  if (!table.empty()) write_text_file(table, rendered.csv);
  if (!text.empty()) write_text_file(text, rendered.text);
  const std::string plot_path = !plot.empty() ? plot : c.out;
  if (!plot_path.empty()) {
    PlotOptions popt;
    popt.majority = majority;
    popt.human = human;
    write_text_file(plot_path, render_plot(groups, popt));
  }
  return 0;
}

int run_predict(const Common& c, const std::string& model_path, const std::string& records_path,
                std::size_t k, const std::string& input, const std::string& encoder,
                const std::string& lexicon_path) {
  const auto files = encoder_files(encoder);
  const auto vocab = Vocabulary::load(files.vocabulary);
  const auto lex = lexicon_path.empty() ? AttributeLexicon::builtin() : AttributeLexicon::load(lexicon_path);
  const auto examples = load_split(input);

  std::vector<RunRecord> records;
  Kind kind;
  if (!records_path.empty()) {
    records = load_records(records_path);
    if (records.empty()) throw winoforms::Error("predict: records file is empty");
    kind = records.front().kind;
  } else if (!model_path.empty()) {
    kind = Model<float>(Checkpoint::load(model_path)).kind();
  } else {
    throw winoforms::Error("predict: give --model or --records");
  }
  const auto bundles = prepare_split(kind, examples, vocab, lex, SplitRole::Eval);
  std::vector<Answer> answers;
  if (!records.empty()) {
    answers = ensemble_predict<float>(records, k, bundles);
  } else {
    Model<float> model(Checkpoint::load(model_path));
    answers = predict_split(model, bundles);
  }
  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!c.out.empty()) {
    file.open(c.out, std::ios::trunc);
    if (!file) throw winoforms::Error("cannot write " + c.out);
    out = &file;
  }
  for (std::size_t i = 0; i < bundles.size(); ++i) {
    nlohmann::ordered_json j;
    j["id"] = bundles[i].example_id;
    if (answers[i].type == LabelType::Index) {
      j["answer"] = answers[i].value;
    } else {
      j["answer"] = answers[i].value == 1;
    }
    j["correct"] = answers[i] == gold_answer(bundles[i].label);
    *out << j.dump() << '\n';
  }
  std::cerr << "accuracy " << accuracy(answers, bundles) << '\n';
  return 0;
}

}  // namespace

int cli_dispatch(int argc, char** argv) {
  CLI::App app{"Winograd-schema formalization experiments on a small transformer encoder", "winoforms"};
  app.require_subcommand(1);
  app.fallthrough(false);

  Common common;
  std::map<CLI::App*, std::function<int()>> actions;

  auto* gen = app.add_subcommand("gen-corpus", "Write the synthetic pretraining corpus and schema splits");
  add_common(*gen, common, true);
  SyntheticOptions syn;
  std::string format = "winogrande", lexicon_path;
  gen->add_option("--train", syn.train)->capture_default_str();
  gen->add_option("--val", syn.val)->capture_default_str();
  gen->add_option("--test", syn.test)->capture_default_str();
  gen->add_option("--format", format, "winogrande | wsc")->check(CLI::IsMember({"winogrande", "wsc"}))->capture_default_str();
  gen->add_option("--lexicon", lexicon_path, "Attribute lexicon file (default: built-in)");
  actions[gen] = [&] { return run_gen_corpus(common, syn, format, lexicon_path); };

  auto* pre = app.add_subcommand("pretrain", "Pretrain the encoder with masked language modelling");
  add_common(*pre, common, true);
  std::string data_dir;
  PretrainOptions popt;
  EncoderConfig ecfg;
  pre->add_option("--data", data_dir, "Corpus directory from gen-corpus")->required();
  pre->add_option("--epochs", popt.epochs)->capture_default_str();
  pre->add_option("--lr", popt.learning_rate)->capture_default_str();
  pre->add_option("--batch", popt.batch_size)->capture_default_str();
  pre->add_option("--mask-rate", popt.mask_rate)->capture_default_str();
  pre->add_option("--layers", ecfg.layers)->capture_default_str();
  pre->add_option("--heads", ecfg.heads)->capture_default_str();
  pre->add_option("--width", ecfg.width)->capture_default_str();
  pre->add_option("--ff-width", ecfg.ff_width)->capture_default_str();
  pre->add_option("--max-length", ecfg.max_length)->capture_default_str();
  pre->add_option("--dropout", ecfg.dropout)->capture_default_str();
  actions[pre] = [&] { return run_pretrain(common, data_dir, popt, ecfg); };

  std::string kind_name, encoder;
  TrainConfig tcfg;
  auto add_task_flags = [&](CLI::App* cmd) {
    cmd->add_option("--formalization", kind_name,
                    "mc-mlm | mc-sent | mc-sent-nosoftmax | mc-sent-nopairloss | p-sent | p-span")
        ->required();
    cmd->add_option("--data", data_dir, "Directory with train/val[/test].jsonl")->required();
    cmd->add_option("--encoder", encoder, "Encoder directory or checkpoint")->required();
    cmd->add_option("--patience", tcfg.patience)->capture_default_str();
    cmd->add_option("--warmup", tcfg.warmup_fraction)->capture_default_str();
    cmd->add_option("--weight-decay", tcfg.weight_decay)->capture_default_str();
  };

  auto* ft = app.add_subcommand("finetune", "Fine-tune one trial and save its best checkpoint");
  add_common(*ft, common, true);
  add_task_flags(ft);
  ft->add_option("--lr", tcfg.learning_rate)->capture_default_str();
  ft->add_option("--epochs", tcfg.epochs)->capture_default_str();
  ft->add_option("--batch", tcfg.batch_size)->capture_default_str();
  actions[ft] = [&] { return run_finetune(common, kind_name, data_dir, encoder, tcfg); };

  auto* sw = app.add_subcommand("sweep", "Random hyperparameter search, one JSONL record per trial");
  add_common(*sw, common, true);
  add_task_flags(sw);
  std::size_t trials = 60, ensemble_k = 5;
  std::string space_name = "standard";
  sw->add_option("--trials", trials)->capture_default_str();
  sw->add_option("--space", space_name, "standard | desk")->capture_default_str();
  sw->add_option("--ensemble", ensemble_k, "Top-k ensemble for test accuracy (0 disables)")->capture_default_str();
  actions[sw] = [&] {
    return run_sweep_cmd(common, kind_name, data_dir, encoder, trials, space_name, ensemble_k, tcfg);
  };

  auto* rep = app.add_subcommand("report", "Statistics table and accuracy plot from sweep records");
  add_common(*rep, common, false);
  std::vector<std::string> record_files, test_accs;
  std::string table, text, plot;
  std::optional<double> majority, human;
  int precision = 3;
  rep->add_option("--records", record_files, "Sweep JSONL files")->required();
  rep->add_option("--table", table, "CSV output");
  rep->add_option("--text", text, "Plain-text table output");
  rep->add_option("--plot", plot, "SVG output (defaults to --out)");
  rep->add_option("--majority", majority, "Majority-class reference line");
  rep->add_option("--human", human, "Human performance reference line");
  rep->add_option("--test-acc", test_accs, "KIND=ACCURACY test column entries");
  rep->add_option("--precision", precision)->capture_default_str();
  actions[rep] = [&] {
    return run_report(common, record_files, table, text, plot, majority, human, test_accs, precision);
  };

  auto* pr = app.add_subcommand("predict", "Predict with one checkpoint or a top-k ensemble");
  add_common(*pr, common, false);
  std::string model_path, records_path, input;
  std::size_t k = 5;
  pr->add_option("--model", model_path, "Fine-tuned checkpoint");
  pr->add_option("--records", records_path, "Sweep records for ensembling");
  pr->add_option("--k", k, "Ensemble size")->capture_default_str();
  pr->add_option("--input", input, "JSONL examples")->required();
  pr->add_option("--encoder", encoder, "Encoder directory (for the vocabulary)")->required();
  pr->add_option("--lexicon", lexicon_path);
  actions[pr] = [&] { return run_predict(common, model_path, records_path, k, input, encoder, lexicon_path); };

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    args = expand_config(std::move(args));
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageError;
  }

  try {
    for (auto* sub : app.get_subcommands()) return actions.at(sub)();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

int main(int argc, char** argv) { return cli_dispatch(argc, argv); }
