#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "winoforms/winoforms.hpp"

namespace winoforms::testing {

// Small synthetic task with an untrained encoder, for tests that exercise
// mechanics rather than learning.
struct TinySetup {
  AttributeLexicon lex;
  SyntheticData data;
  Vocabulary vocab;
  Checkpoint encoder;
};

inline TinySetup tiny_setup(std::size_t train = 16, std::size_t val = 8, std::size_t test = 8,
                            std::size_t width = 8) {
  TinySetup s{AttributeLexicon::builtin(), {}, Vocabulary(), {}};
  s.data = generate_synthetic(s.lex, {train, val, test, 11, 2});
  std::vector<std::string> text = s.data.pretraining;
  for (const auto* split : {&s.data.train, &s.data.val, &s.data.test}) {
    for (const auto& ex : *split) text.push_back(ex.text);
  }
  s.vocab = Vocabulary::build(text);
  EncoderConfig cfg;
  cfg.layers = 1;
  cfg.heads = 2;
  cfg.width = width;
  cfg.ff_width = 2 * width;
  cfg.max_length = 24;
  cfg.dropout = 0.1;
  cfg.vocab_size = s.vocab.size();
  s.encoder = Encoder<float>(cfg, 5).checkpoint();
  return s;
}

inline TrainData train_data(const TinySetup& s, Kind kind) {
  return {prepare_split(kind, s.data.train, s.vocab, s.lex, SplitRole::Train),
          prepare_split(kind, s.data.val, s.vocab, s.lex, SplitRole::Eval)};
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("winoforms-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace winoforms::testing
