// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dmha/augment.hpp"
#include "dmha/io.hpp"
#include "dmha/model.hpp"
#include "dmha/train.hpp"

namespace dmha {

struct AugmentConfig {
  double apply_prob = 0.5;
  double window_seconds = 5.5;
  std::vector<double> speed_factors = {0.9, 1.0, 1.1};
  double snr_low_db = 5.0;
  double snr_high_db = 20.0;
  std::vector<std::string> rir_wavs;
  std::vector<std::string> noise_wavs;

  /// Policy with wav pools loaded from disk.
  AugmentPolicy load_policy(int sample_rate) const {
    AugmentPolicy p;
    p.apply_prob = apply_prob;
    p.window_seconds = window_seconds;
    p.speed_factors = speed_factors;
    p.snr_low_db = snr_low_db;
    p.snr_high_db = snr_high_db;
    for (const auto& path : rir_wavs) p.rir_pool.push_back(read_wav(path, sample_rate));
    for (const auto& path : noise_wavs) p.noise_pool.push_back(read_wav(path, sample_rate));
    p.validate();
    return p;
  }

  void validate() const {
    AugmentPolicy p;
    p.apply_prob = apply_prob;
    p.window_seconds = window_seconds;
    p.speed_factors = speed_factors;
    p.snr_low_db = snr_low_db;
    p.snr_high_db = snr_high_db;
    p.validate();
  }
};

struct DataConfig {
  int sample_rate = 16000;
  int n_mels = 40;
  SynthSpec synth;

  void validate() const {
    if (sample_rate < 1 || n_mels < 1)
      throw std::invalid_argument("config: sample_rate and n_mels must be positive");
    synth.validate();
  }
};

/// Whole-run configuration. JSON parsing is strict: every key must be known
/// and well-typed, and missing keys keep their defaults. The model's
/// feature_layers and class count are not configurable; they come from the
/// data and the fixed label set.
struct RunConfig {
  uint64_t seed = 42;
  ModelConfig model;
  TrainConfig train;
  AugmentConfig augment;
  DataConfig data;

  void validate() const {
    model.validate();
    train.validate();
    augment.validate();
    data.validate();
  }
};

namespace detail {

inline std::runtime_error cfg_error(const std::string& path, const std::string& what) {
  return std::runtime_error("config: " + path + " " + what);
}

inline double as_num(const nlohmann::json& v, const std::string& path) {
  if (!v.is_number()) throw cfg_error(path, "must be a number");
  return v.get<double>();
}
inline int as_int(const nlohmann::json& v, const std::string& path) {
  if (!v.is_number_integer()) throw cfg_error(path, "must be an integer");
  return v.get<int>();
}
inline uint64_t as_u64(const nlohmann::json& v, const std::string& path) {
  if (!v.is_number_integer() || (v.is_number_integer() && v.get<long long>() < 0))
    throw cfg_error(path, "must be a non-negative integer");
  return v.get<uint64_t>();
}
inline std::string as_str(const nlohmann::json& v, const std::string& path) {
  if (!v.is_string()) throw cfg_error(path, "must be a string");
  return v.get<std::string>();
}
inline std::vector<double> as_num_list(const nlohmann::json& v, const std::string& path) {
  if (!v.is_array()) throw cfg_error(path, "must be an array of numbers");
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) throw cfg_error(path, "must be an array of numbers");
    out.push_back(x.get<double>());
  }
  return out;
}
inline std::vector<std::string> as_str_list(const nlohmann::json& v, const std::string& path) {
  if (!v.is_array()) throw cfg_error(path, "must be an array of strings");
  std::vector<std::string> out;
  for (const auto& x : v) {
    if (!x.is_string()) throw cfg_error(path, "must be an array of strings");
    out.push_back(x.get<std::string>());
  }
  return out;
}

inline void expect_object(const nlohmann::json& v, const std::string& path) {
  if (!v.is_object()) throw cfg_error(path, "must be an object");
}

}  // namespace detail

inline void apply_model_json(ModelConfig& m, const nlohmann::json& j, const std::string& prefix) {
  detail::expect_object(j, prefix);
  for (const auto& [key, v] : j.items()) {
    const std::string path = prefix + "." + key;
    if (key == "variant")
      m.variant = variant_from_string(detail::as_str(v, path));
    else if (key == "heads")
      m.heads = detail::as_int(v, path);
    else if (key == "dim")
      m.dim = detail::as_int(v, path);
    else if (key == "hidden_width")
      m.hidden_width = detail::as_int(v, path);
    else if (key == "hidden_layers")
      m.hidden_layers = detail::as_int(v, path);
    else if (key == "dropout")
      m.dropout = detail::as_num(v, path);
    else
      throw detail::cfg_error(path, "is not a recognized key");
  }
}

inline void apply_train_json(TrainConfig& t, const nlohmann::json& j, const std::string& prefix) {
  detail::expect_object(j, prefix);
  for (const auto& [key, v] : j.items()) {
    const std::string path = prefix + "." + key;
    if (key == "batch_size")
      t.batch_size = detail::as_int(v, path);
    else if (key == "max_epochs")
      t.max_epochs = detail::as_int(v, path);
    else if (key == "initial_lr")
      t.initial_lr = detail::as_num(v, path);
    else if (key == "lr_decay")
      t.lr_decay = detail::as_num(v, path);
    else if (key == "decay_patience")
      t.decay_patience = detail::as_int(v, path);
    else if (key == "early_stop_patience")
      t.early_stop_patience = detail::as_int(v, path);
    else if (key == "loss")
      t.loss = loss_from_string(detail::as_str(v, path));
    else if (key == "gamma")
      t.gamma = detail::as_num(v, path);
    else if (key == "weight_decay")
      t.weight_decay = detail::as_num(v, path);
    else
      throw detail::cfg_error(path, "is not a recognized key");
  }
}

inline void apply_augment_json(AugmentConfig& a, const nlohmann::json& j,
                               const std::string& prefix) {
  detail::expect_object(j, prefix);
  for (const auto& [key, v] : j.items()) {
    const std::string path = prefix + "." + key;
    if (key == "apply_prob")
      a.apply_prob = detail::as_num(v, path);
    else if (key == "window_seconds")
      a.window_seconds = detail::as_num(v, path);
    else if (key == "speed_factors")
      a.speed_factors = detail::as_num_list(v, path);
    else if (key == "snr_db") {
      auto range = detail::as_num_list(v, path);
      if (range.size() != 2) throw detail::cfg_error(path, "must be [low, high]");
      a.snr_low_db = range[0];
      a.snr_high_db = range[1];
    } else if (key == "rir_wavs")
      a.rir_wavs = detail::as_str_list(v, path);
    else if (key == "noise_wavs")
      a.noise_wavs = detail::as_str_list(v, path);
    else
      throw detail::cfg_error(path, "is not a recognized key");
  }
}

inline void apply_synth_json(SynthSpec& s, const nlohmann::json& j, const std::string& prefix) {
  detail::expect_object(j, prefix);
  for (const auto& [key, v] : j.items()) {
    const std::string path = prefix + "." + key;
    if (key == "per_class")
      s.per_class = detail::as_int(v, path);
    else if (key == "layers")
      s.layers = detail::as_int(v, path);
    else if (key == "t_acoustic")
      s.t_acoustic = detail::as_int(v, path);
    else if (key == "t_text")
      s.t_text = detail::as_int(v, path);
    else if (key == "dim")
      s.dim = detail::as_int(v, path);
    else if (key == "sigma")
      s.sigma = detail::as_num(v, path);
    else if (key == "class_profile")
      s.class_profile = detail::as_num_list(v, path);
    else
      throw detail::cfg_error(path, "is not a recognized key");
  }
}

inline void apply_data_json(DataConfig& d, const nlohmann::json& j, const std::string& prefix) {
  detail::expect_object(j, prefix);
  for (const auto& [key, v] : j.items()) {
    const std::string path = prefix + "." + key;
    if (key == "sample_rate")
      d.sample_rate = detail::as_int(v, path);
    else if (key == "n_mels")
      d.n_mels = detail::as_int(v, path);
    else if (key == "synth")
      apply_synth_json(d.synth, v, path);
    else
      throw detail::cfg_error(path, "is not a recognized key");
  }
}

inline RunConfig config_from_json(const nlohmann::json& j) {
  RunConfig c;
  detail::expect_object(j, "top level");
  for (const auto& [key, v] : j.items()) {
    if (key == "seed")
      c.seed = detail::as_u64(v, key);
    else if (key == "model")
      apply_model_json(c.model, v, key);
    else if (key == "train")
      apply_train_json(c.train, v, key);
    else if (key == "augment")
      apply_augment_json(c.augment, v, key);
    else if (key == "data")
      apply_data_json(c.data, v, key);
    else
      throw detail::cfg_error(key, "is not a recognized key");
  }
  c.train.seed = c.seed;
  c.validate();
  return c;
}

inline nlohmann::json model_to_json(const ModelConfig& m) {
  return {{"variant", to_string(m.variant)}, {"heads", m.heads},
          {"dim", m.dim},                    {"hidden_width", m.hidden_width},
          {"hidden_layers", m.hidden_layers}, {"dropout", m.dropout}};
}

inline nlohmann::json config_to_json(const RunConfig& c) {
  return {
      {"seed", c.seed},
      {"model", model_to_json(c.model)},
      {"train",
       {{"batch_size", c.train.batch_size},
        {"max_epochs", c.train.max_epochs},
        {"initial_lr", c.train.initial_lr},
        {"lr_decay", c.train.lr_decay},
        {"decay_patience", c.train.decay_patience},
        {"early_stop_patience", c.train.early_stop_patience},
        {"loss", to_string(c.train.loss)},
        {"gamma", c.train.gamma},
        {"weight_decay", c.train.weight_decay}}},
      {"augment",
       {{"apply_prob", c.augment.apply_prob},
        {"window_seconds", c.augment.window_seconds},
        {"speed_factors", c.augment.speed_factors},
        {"snr_db", {c.augment.snr_low_db, c.augment.snr_high_db}},
        {"rir_wavs", c.augment.rir_wavs},
        {"noise_wavs", c.augment.noise_wavs}}},
      {"data",
       {{"sample_rate", c.data.sample_rate},
        {"n_mels", c.data.n_mels},
        {"synth",
         {{"per_class", c.data.synth.per_class},
          {"layers", c.data.synth.layers},
          {"t_acoustic", c.data.synth.t_acoustic},
          {"t_text", c.data.synth.t_text},
          {"dim", c.data.synth.dim},
          {"sigma", c.data.synth.sigma},
          {"class_profile", c.data.synth.class_profile}}}}},
  };
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("config " + path + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

/// Rebuilds a model configuration from checkpoint metadata.
inline ModelConfig model_from_json(const nlohmann::json& j, int feature_layers) {
  ModelConfig m;
  apply_model_json(m, j, "model");
  m.feature_layers = feature_layers;
  m.validate();
  return m;
}

}  // namespace dmha
