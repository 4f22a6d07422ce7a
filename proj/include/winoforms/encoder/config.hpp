#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <type_traits>
#include <sstream>
#include <string>

#include "winoforms/error.hpp"

namespace winoforms {

// Reads a flat "key=value" file. Blank lines and lines starting with '#'
// are skipped; surrounding whitespace is trimmed.
inline std::map<std::string, std::string> parse_key_values(std::istream& in) {
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
  };
  std::map<std::string, std::string> out;
  std::size_t lineno = 0;
  for (std::string line; std::getline(in, line);) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error("config: line " + std::to_string(lineno) + " is not key=value");
    }
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

struct EncoderConfig {
  std::size_t layers = 2;
  std::size_t heads = 2;
  std::size_t width = 64;
  std::size_t ff_width = 128;
  std::size_t max_length = 48;
  double dropout = 0.1;
  std::size_t vocab_size = 0;

  std::size_t head_width() const { return width / heads; }

  void validate() const {
    if (layers == 0 || heads == 0 || width == 0 || ff_width == 0 || max_length < 3) {
      throw Error("encoder config: sizes must be positive (max_length >= 3)");
    }
    if (width % heads != 0) throw Error("encoder config: width must be divisible by heads");
    if (dropout < 0.0 || dropout >= 1.0) throw Error("encoder config: dropout must be in [0, 1)");
    if (vocab_size <= 5) throw Error("encoder config: vocabulary must exceed the special tokens");
  }

  std::map<std::string, std::string> to_map() const {
    std::ostringstream d;
    d.precision(17);
    d << dropout;
    return {{"layers", std::to_string(layers)},         {"heads", std::to_string(heads)},
            {"width", std::to_string(width)},           {"ff_width", std::to_string(ff_width)},
            {"max_length", std::to_string(max_length)}, {"dropout", d.str()},
            {"vocab_size", std::to_string(vocab_size)}};
  }

  static EncoderConfig from_map(const std::map<std::string, std::string>& kv) {
    EncoderConfig c;
    auto get = [&](const char* key, auto& field) {
      auto it = kv.find(key);
      if (it == kv.end()) return;
      try {
        if constexpr (std::is_same_v<std::decay_t<decltype(field)>, double>) {
          field = std::stod(it->second);
        } else {
          field = std::stoull(it->second);
        }
      } catch (const std::exception&) {
        throw Error("encoder config: bad value for " + std::string(key));
      }
    };
    get("layers", c.layers);
    get("heads", c.heads);
    get("width", c.width);
    get("ff_width", c.ff_width);
    get("max_length", c.max_length);
    get("dropout", c.dropout);
    get("vocab_size", c.vocab_size);
    return c;
  }

  void save(const std::filesystem::path& path) const {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw Error("encoder config: cannot write " + path.string());
    for (const auto& [k, v] : to_map()) f << k << '=' << v << '\n';
  }

  static EncoderConfig load(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw Error("encoder config: cannot open " + path.string());
    return from_map(parse_key_values(f));
  }

  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

}  // namespace winoforms
