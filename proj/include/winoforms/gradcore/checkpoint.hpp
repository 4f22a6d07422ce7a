#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "winoforms/gradcore/parameters.hpp"

namespace winoforms {

inline constexpr std::string_view kCheckpointMagic = "winoforms-ckpt-v1";

enum class DType : std::uint8_t { F32, F64 };

template <std::floating_point T>
constexpr DType dtype_of() {
  return sizeof(T) == 4 ? DType::F32 : DType::F64;
}

struct CheckpointEntry {
  std::string name;
  Shape shape;
  DType dtype = DType::F32;
  std::vector<double> values;  // f32 round-trips through double exactly
};

// Named parameter snapshot plus string metadata.
//
// On-disk layout:
//   winoforms-ckpt-v1\n
//   meta <n>\n              followed by n lines "key=value"
//   tensors <m>\n           followed by m records:
//   <name> <f32|f64> <rank> <d0> ... <dr-1>\n<little-endian values>\n
class Checkpoint {
 public:
  std::map<std::string, std::string> meta;

  template <std::floating_point T>
  void add(const ParameterStore<T>& store, const std::string& prefix = "") {
    for (const Parameter<T>* p : store.list()) add_tensor(prefix + p->name, p->value);
  }

  template <std::floating_point T>
  void add_tensor(const std::string& name, const Tensor<T>& t) {
    if (contains(name)) throw Error("checkpoint: duplicate entry " + name);
    CheckpointEntry e{name, t.shape(), dtype_of<T>(), {}};
    e.values.assign(t.data().begin(), t.data().end());
    index_.emplace(name, entries_.size());
    entries_.push_back(std::move(e));
  }

  bool contains(const std::string& name) const { return index_.contains(name); }

  const CheckpointEntry& at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw Error("checkpoint: missing entry " + name);
    return entries_[it->second];
  }

  const std::vector<CheckpointEntry>& entries() const noexcept { return entries_; }

  template <std::floating_point T>
  Tensor<T> tensor(const std::string& name) const {
    const auto& e = at(name);
    std::vector<T> v(e.values.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<T>(e.values[i]);
    return Tensor<T>(e.shape, std::move(v));
  }

  // Overwrites every parameter of the store from entries named prefix+name.
  template <std::floating_point T>
  void restore(ParameterStore<T>& store, const std::string& prefix = "") const {
    for (Parameter<T>* p : store.list()) {
      Tensor<T> t = tensor<T>(prefix + p->name);
      if (!t.same_shape(p->value)) {
        throw Error("checkpoint: shape mismatch for " + p->name + ": stored " +
                    shape_string(t.shape()) + ", model " + shape_string(p->value.shape()));
      }
      p->value = std::move(t);
    }
  }

  std::string serialize() const {
    std::string out(kCheckpointMagic);
    out += '\n';
    out += "meta " + std::to_string(meta.size()) + '\n';
    for (const auto& [k, v] : meta) {
      if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos) {
        throw Error("checkpoint: metadata may not contain newlines or '=' in keys");
      }
      out += k + '=' + v + '\n';
    }
    out += "tensors " + std::to_string(entries_.size()) + '\n';
    for (const auto& e : entries_) {
      out += e.name + (e.dtype == DType::F32 ? " f32 " : " f64 ") +
             std::to_string(e.shape.size());
      for (auto d : e.shape) out += ' ' + std::to_string(d);
      out += '\n';
      for (double v : e.values) {
        if (e.dtype == DType::F32) {
          append_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
        } else {
          append_le(out, std::bit_cast<std::uint64_t>(v));
        }
      }
      out += '\n';
    }
    return out;
  }

  static Checkpoint parse(std::string_view bytes) {
    Checkpoint ck;
    std::size_t pos = 0;
    auto line = [&]() -> std::string_view {
      const auto nl = bytes.find('\n', pos);
      if (nl == std::string_view::npos) throw Error("checkpoint: truncated header");
      auto l = bytes.substr(pos, nl - pos);
      pos = nl + 1;
      return l;
    };
    if (line() != kCheckpointMagic) throw Error("checkpoint: bad magic, expected winoforms-ckpt-v1");
    const std::size_t n_meta = parse_count(line(), "meta");
    for (std::size_t i = 0; i < n_meta; ++i) {
      auto l = line();
      const auto eq = l.find('=');
      if (eq == std::string_view::npos) throw Error("checkpoint: malformed metadata line");
      ck.meta.emplace(std::string(l.substr(0, eq)), std::string(l.substr(eq + 1)));
    }
    const std::size_t n_tensors = parse_count(line(), "tensors");
    for (std::size_t i = 0; i < n_tensors; ++i) {
      std::istringstream hdr{std::string(line())};
      CheckpointEntry e;
      std::string dtype;
      std::size_t rank = 0;
      if (!(hdr >> e.name >> dtype >> rank) || (dtype != "f32" && dtype != "f64")) {
        throw Error("checkpoint: malformed tensor header");
      }
      e.dtype = dtype == "f32" ? DType::F32 : DType::F64;
      e.shape.resize(rank);
      for (auto& d : e.shape) {
        if (!(hdr >> d)) throw Error("checkpoint: malformed tensor shape");
      }
      const std::size_t count = shape_size(e.shape);
      const std::size_t width = e.dtype == DType::F32 ? 4 : 8;
      if (pos + count * width + 1 > bytes.size()) throw Error("checkpoint: truncated tensor data");
      e.values.resize(count);
      for (std::size_t j = 0; j < count; ++j) {
        if (e.dtype == DType::F32) {
          e.values[j] = std::bit_cast<float>(read_le<std::uint32_t>(bytes.data() + pos));
        } else {
          e.values[j] = std::bit_cast<double>(read_le<std::uint64_t>(bytes.data() + pos));
        }
        pos += width;
      }
      if (bytes[pos++] != '\n') throw Error("checkpoint: missing record terminator");
      ck.index_.emplace(e.name, ck.entries_.size());
      ck.entries_.push_back(std::move(e));
    }
    return ck;
  }

  void save(const std::filesystem::path& path) const {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("checkpoint: cannot write " + path.string());
    const auto bytes = serialize();
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw Error("checkpoint: write failed for " + path.string());
  }

  static Checkpoint load(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("checkpoint: cannot open " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse(ss.str());
  }

 private:
  static std::size_t parse_count(std::string_view l, std::string_view key) {
    if (l.substr(0, key.size()) != key || l.size() <= key.size() + 1) {
      throw Error("checkpoint: expected '" + std::string(key) + " <n>'");
    }
    return std::stoull(std::string(l.substr(key.size() + 1)));
  }

  template <class U>
  static void append_le(std::string& out, U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      out += static_cast<char>((v >> (8 * i)) & 0xFFu);
    }
  }

  template <class U>
  static U read_le(const char* p) {
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      v |= static_cast<U>(static_cast<unsigned char>(p[i])) << (8 * i);
    }
    return v;
  }

  std::vector<CheckpointEntry> entries_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace winoforms
