// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dmha/features.hpp"
#include "dmha/tensor.hpp"

namespace dmha {

namespace detail {

inline std::ifstream open_in(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  return f;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot create " + path);
  return f;
}

template <typename T>
inline void put(std::ofstream& f, T v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
inline T get(std::ifstream& f, const std::string& path) {
  T v;
  f.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!f) throw std::runtime_error(path + ": truncated file");
  return v;
}

inline void expect_eof(std::ifstream& f, const std::string& path) {
  f.peek();
  if (!f.eof()) throw std::runtime_error(path + ": trailing bytes after payload");
}

}  // namespace detail

// ---- WAV (16-bit PCM, mono, fixed rate) ----------------------------------

inline Waveform read_wav(const std::string& path, int expected_rate = 16000) {
  auto f = detail::open_in(path);
  char riff[4], wave[4];
  f.read(riff, 4);
  auto total = detail::get<uint32_t>(f, path);
  (void)total;
  f.read(wave, 4);
  if (!f || std::memcmp(riff, "RIFF", 4) != 0 || std::memcmp(wave, "WAVE", 4) != 0)
    throw std::runtime_error(path + ": not a RIFF/WAVE file");
  bool have_fmt = false;
  std::vector<int16_t> samples;
  bool have_data = false;
  while (true) {
    char tag[4];
    f.read(tag, 4);
    if (f.eof()) break;
    if (!f) throw std::runtime_error(path + ": truncated chunk header");
    auto len = detail::get<uint32_t>(f, path);
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      if (len < 16) throw std::runtime_error(path + ": short fmt chunk");
      auto format = detail::get<uint16_t>(f, path);
      auto channels = detail::get<uint16_t>(f, path);
      auto rate = detail::get<uint32_t>(f, path);
      detail::get<uint32_t>(f, path);  // byte rate
      detail::get<uint16_t>(f, path);  // block align
      auto bits = detail::get<uint16_t>(f, path);
      if (format != 1) throw std::runtime_error(path + ": only PCM wav is supported");
      if (channels != 1) throw std::runtime_error(path + ": only mono wav is supported");
      if (bits != 16) throw std::runtime_error(path + ": only 16-bit wav is supported");
      if (int(rate) != expected_rate)
        throw std::runtime_error(path + ": sample rate " + std::to_string(rate) +
                                 " != required " + std::to_string(expected_rate));
      f.seekg(std::streamoff(len) - 16 + (len & 1), std::ios::cur);
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      if (len % 2 != 0) throw std::runtime_error(path + ": odd data chunk size");
      samples.resize(len / 2);
      f.read(reinterpret_cast<char*>(samples.data()), len);
      if (!f) throw std::runtime_error(path + ": truncated data chunk");
      if (len & 1) f.seekg(1, std::ios::cur);
      have_data = true;
    } else {
      f.seekg(std::streamoff(len) + (len & 1), std::ios::cur);
      if (!f) throw std::runtime_error(path + ": truncated chunk");
    }
  }
  if (!have_fmt || !have_data) throw std::runtime_error(path + ": missing fmt or data chunk");
  Waveform out(samples.size());
  for (size_t i = 0; i < samples.size(); ++i) out[i] = float(samples[i]) / 32768.0f;
  return out;
}

inline void write_wav(const std::string& path, const Waveform& w, int sample_rate = 16000) {
  auto f = detail::open_out(path);
  const uint32_t data_len = uint32_t(w.size() * 2);
  f.write("RIFF", 4);
  detail::put<uint32_t>(f, 36 + data_len);
  f.write("WAVE", 4);
  f.write("fmt ", 4);
  detail::put<uint32_t>(f, 16);
  detail::put<uint16_t>(f, 1);
  detail::put<uint16_t>(f, 1);
  detail::put<uint32_t>(f, uint32_t(sample_rate));
  detail::put<uint32_t>(f, uint32_t(sample_rate * 2));
  detail::put<uint16_t>(f, 2);
  detail::put<uint16_t>(f, 16);
  f.write("data", 4);
  detail::put<uint32_t>(f, data_len);
  for (float x : w) {
    const double c = std::max(-1.0, std::min(1.0, double(x)));
    detail::put<int16_t>(f, int16_t(std::lround(c * 32767.0)));
  }
  if (!f) throw std::runtime_error("failed writing " + path);
}

// ---- feature tensors (DMHF) ----------------------------------------------
//
// Layout: "DMHF", u16 version, u32 layers, u32 frames, u32 dim, then
// layers*frames*dim little-endian float32 in [layer][frame][dim] order.

inline void write_features(const std::string& path, const TensorF& t) {
  if (t.rank() != 3) throw std::invalid_argument("write_features: tensor must be rank 3");
  auto f = detail::open_out(path);
  f.write("DMHF", 4);
  detail::put<uint16_t>(f, 1);
  for (int i = 0; i < 3; ++i) detail::put<uint32_t>(f, uint32_t(t.dims[i]));
  f.write(reinterpret_cast<const char*>(t.data.data()), std::streamsize(t.numel() * 4));
  if (!f) throw std::runtime_error("failed writing " + path);
}

inline TensorF::Ptr read_features(const std::string& path) {
  auto f = detail::open_in(path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, "DMHF", 4) != 0)
    throw std::runtime_error(path + ": bad feature file magic");
  const auto version = detail::get<uint16_t>(f, path);
  if (version != 1) throw std::runtime_error(path + ": unsupported feature file version");
  const auto layers = detail::get<uint32_t>(f, path);
  const auto frames = detail::get<uint32_t>(f, path);
  const auto dim = detail::get<uint32_t>(f, path);
  if (layers < 1 || dim < 1 || layers > (1u << 16) || frames > (1u << 24) || dim > (1u << 20))
    throw std::runtime_error(path + ": implausible feature dimensions");
  auto t = TensorF::zeros({int(layers), int(frames), int(dim)});
  f.read(reinterpret_cast<char*>(t->data.data()), std::streamsize(t->numel() * 4));
  if (!f) throw std::runtime_error(path + ": truncated feature payload");
  detail::expect_eof(f, path);
  return t;
}

// ---- checkpoints (DMHC) ----------------------------------------------------
//
// Layout: "DMHC", u16 version, u32 tensor count, per tensor
// {u16 name length, name bytes, u8 rank, u32 dims..., float32 payload},
// then u64 metadata length and that many bytes of UTF-8 JSON.

struct Checkpoint {
  std::vector<std::pair<std::string, TensorF::Ptr>> tensors;
  nlohmann::json metadata;

  TensorF::Ptr tensor(const std::string& name) const {
    for (const auto& [n, t] : tensors)
      if (n == name) return t;
    throw std::runtime_error("checkpoint has no tensor named " + name);
  }
};

inline void write_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  auto f = detail::open_out(path);
  f.write("DMHC", 4);
  detail::put<uint16_t>(f, 1);
  detail::put<uint32_t>(f, uint32_t(ckpt.tensors.size()));
  for (const auto& [name, t] : ckpt.tensors) {
    if (name.empty() || name.size() > 0xFFFF)
      throw std::invalid_argument("checkpoint tensor name length out of range");
    detail::put<uint16_t>(f, uint16_t(name.size()));
    f.write(name.data(), std::streamsize(name.size()));
    detail::put<uint8_t>(f, uint8_t(t->rank()));
    for (int d : t->dims) detail::put<uint32_t>(f, uint32_t(d));
    f.write(reinterpret_cast<const char*>(t->data.data()), std::streamsize(t->numel() * 4));
  }
  const std::string meta = ckpt.metadata.dump();
  detail::put<uint64_t>(f, uint64_t(meta.size()));
  f.write(meta.data(), std::streamsize(meta.size()));
  if (!f) throw std::runtime_error("failed writing " + path);
}

inline Checkpoint read_checkpoint(const std::string& path) {
  auto f = detail::open_in(path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, "DMHC", 4) != 0)
    throw std::runtime_error(path + ": bad checkpoint magic");
  const auto version = detail::get<uint16_t>(f, path);
  if (version != 1) throw std::runtime_error(path + ": unsupported checkpoint version");
  const auto count = detail::get<uint32_t>(f, path);
  if (count > (1u << 20)) throw std::runtime_error(path + ": implausible tensor count");
  Checkpoint ckpt;
  for (uint32_t i = 0; i < count; ++i) {
    const auto name_len = detail::get<uint16_t>(f, path);
    std::string name(name_len, '\0');
    f.read(name.data(), name_len);
    if (!f) throw std::runtime_error(path + ": truncated tensor name");
    const auto rank = detail::get<uint8_t>(f, path);
    if (rank < 1 || rank > 3) throw std::runtime_error(path + ": tensor rank out of range");
    std::vector<int> dims(rank);
    for (auto& d : dims) {
      const auto v = detail::get<uint32_t>(f, path);
      if (v > (1u << 28)) throw std::runtime_error(path + ": implausible tensor dimension");
      d = int(v);
    }
    auto t = TensorF::zeros(dims);
    f.read(reinterpret_cast<char*>(t->data.data()), std::streamsize(t->numel() * 4));
    if (!f) throw std::runtime_error(path + ": truncated tensor payload");
    ckpt.tensors.emplace_back(std::move(name), std::move(t));
  }
  const auto meta_len = detail::get<uint64_t>(f, path);
  if (meta_len > (1ull << 30)) throw std::runtime_error(path + ": implausible metadata length");
  std::string meta(size_t(meta_len), '\0');
  f.read(meta.data(), std::streamsize(meta.size()));
  if (!f) throw std::runtime_error(path + ": truncated metadata");
  detail::expect_eof(f, path);
  try {
    ckpt.metadata = nlohmann::json::parse(meta);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path + ": checkpoint metadata is not valid JSON: " + e.what());
  }
  return ckpt;
}

// ---- dataset manifests ------------------------------------------------------
//
// JSON lines; one utterance per line with id, label, and the paths that
// exist for it. Relative paths resolve against the manifest's directory.

struct ManifestEntry {
  std::string id;
  std::string acoustic_path;  // empty = absent
  std::string text_path;
  std::string wav_path;
  int label = -1;
};

inline std::vector<ManifestEntry> read_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  const auto base = std::filesystem::path(path).parent_path();
  auto resolve = [&](const std::string& p) {
    if (p.empty()) return p;
    std::filesystem::path fp(p);
    return fp.is_absolute() ? fp.string() : (base / fp).string();
  };
  std::vector<ManifestEntry> out;
  std::set<std::string> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": bad JSON: " + e.what());
    }
    const std::string where = path + ":" + std::to_string(lineno);
    if (!j.is_object() || !j.contains("id") || !j.contains("label"))
      throw std::runtime_error(where + ": manifest rows need id and label");
    ManifestEntry e;
    e.id = j.at("id").get<std::string>();
    if (!seen.insert(e.id).second)
      throw std::runtime_error(where + ": duplicate utterance id " + e.id);
    if (j.at("label").is_string())
      e.label = class_index(j.at("label").get<std::string>());
    else if (j.at("label").is_number_integer())
      e.label = j.at("label").get<int>();
    else
      throw std::runtime_error(where + ": label must be a class name or index");
    if (e.label < 0 || e.label >= kNumClasses)
      throw std::runtime_error(where + ": label out of range");
    auto opt_path = [&](const char* key) -> std::string {
      if (!j.contains(key) || j.at(key).is_null()) return "";
      return resolve(j.at(key).get<std::string>());
    };
    e.acoustic_path = opt_path("acoustic_path");
    e.text_path = opt_path("text_path");
    e.wav_path = opt_path("wav_path");
    for (const char* key : {"id", "label", "acoustic_path", "text_path", "wav_path"}) j.erase(key);
    if (!j.empty())
      throw std::runtime_error(where + ": unknown manifest key '" + j.begin().key() + "'");
    if (e.acoustic_path.empty() && e.wav_path.empty())
      throw std::runtime_error(where + ": row needs acoustic_path or wav_path");
    for (const auto& p : {e.acoustic_path, e.text_path, e.wav_path})
      if (!p.empty() && !std::filesystem::exists(p))
        throw std::runtime_error(where + ": referenced file missing: " + p);
    out.push_back(std::move(e));
  }
  if (out.empty()) throw std::runtime_error(path + ": manifest has no rows");
  return out;
}

/// Writes rows with the given paths verbatim (callers pass paths relative to
/// the manifest location when the dataset should be relocatable).
inline void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot create " + path);
  for (const auto& e : entries) {
    nlohmann::json j;
    j["id"] = e.id;
    j["acoustic_path"] = e.acoustic_path.empty() ? nlohmann::json() : nlohmann::json(e.acoustic_path);
    j["text_path"] = e.text_path.empty() ? nlohmann::json() : nlohmann::json(e.text_path);
    j["wav_path"] = e.wav_path.empty() ? nlohmann::json() : nlohmann::json(e.wav_path);
    j["label"] = kClassNames[size_t(e.label)];
    f << j.dump() << "\n";
  }
  if (!f) throw std::runtime_error("failed writing " + path);
}

}  // namespace dmha
