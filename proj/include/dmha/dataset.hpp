// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "dmha/augment.hpp"
#include "dmha/features.hpp"
#include "dmha/io.hpp"
#include "dmha/train.hpp"

namespace dmha {

struct LoadedDataset {
  std::vector<FeatureRecord> records;
  int layers = 0;
  int dim = 0;
  std::array<int, kNumClasses> class_counts{};
};

/// Loads feature-backed manifest rows into records. Every row must carry an
/// acoustic tensor; text tensors must be single-layer. Layer count and
/// feature dimension have to agree across the whole set.
inline LoadedDataset load_feature_records(const std::string& manifest_path) {
  LoadedDataset ds;
  for (const auto& e : read_manifest(manifest_path)) {
    if (e.acoustic_path.empty())
      throw std::runtime_error("record " + e.id +
                               ": feature loading needs acoustic_path (extract features first)");
    FeatureRecord rec;
    rec.id = e.id;
    rec.label = e.label;
    rec.acoustic = read_features(e.acoustic_path);
    const int dim = rec.acoustic->dims[2];
    if (e.text_path.empty()) {
      rec.text = TensorF::zeros({0, dim});
    } else {
      auto t = read_features(e.text_path);
      if (t->dims[0] != 1)
        throw std::runtime_error("record " + e.id + ": text features must be single-layer");
      rec.text = TensorF::make({t->dims[1], t->dims[2]}, std::move(t->data));
    }
    validate_record(rec);
    if (ds.records.empty()) {
      ds.layers = rec.acoustic->dims[0];
      ds.dim = dim;
    } else if (rec.acoustic->dims[0] != ds.layers || dim != ds.dim) {
      throw std::runtime_error("record " + e.id + ": layer count or dim differs from the rest");
    }
    ds.class_counts[size_t(rec.label)]++;
    ds.records.push_back(std::move(rec));
  }
  return ds;
}

struct WavDataset {
  std::vector<Waveform> waves;
  std::vector<std::string> ids;
  std::vector<int> labels;
  std::array<int, kNumClasses> class_counts{};
  WaveStats stats;  // over the raw corpus
};

inline WavDataset load_wav_dataset(const std::string& manifest_path, int sample_rate) {
  WavDataset ds;
  for (const auto& e : read_manifest(manifest_path)) {
    if (e.wav_path.empty())
      throw std::runtime_error("record " + e.id + ": waveform loading needs wav_path");
    ds.waves.push_back(read_wav(e.wav_path, sample_rate));
    ds.ids.push_back(e.id);
    ds.labels.push_back(e.label);
    ds.class_counts[size_t(e.label)]++;
  }
  ds.stats = corpus_stats(ds.waves);
  return ds;
}

/// Provider over waveforms: normalize with the given corpus stats, augment
/// per (epoch, utterance) when training, then extract log-mel features.
inline RecordProvider wav_provider(std::shared_ptr<WavDataset> ds, AugmentPolicy policy,
                                   WaveStats stats, int n_mels, int sample_rate, uint64_t seed,
                                   bool training) {
  RecordProvider p;
  p.count = int(ds->waves.size());
  p.class_counts = ds->class_counts;
  auto shared_policy = std::make_shared<AugmentPolicy>(std::move(policy));
  p.get = [ds, shared_policy, stats, n_mels, sample_rate, seed, training](int i, int epoch) {
    Waveform w = normalize_waveform(ds->waves[size_t(i)], stats);
    if (training) {
      auto rng =
          RngStream(seed).derive("augment").derive(uint64_t(epoch)).derive(ds->ids[size_t(i)]);
      w = augment(w, *shared_policy, sample_rate, rng, true);
    }
    auto mel = mel_features(w, n_mels, sample_rate);
    FeatureRecord rec;
    rec.id = ds->ids[size_t(i)];
    rec.label = ds->labels[size_t(i)];
    rec.acoustic = TensorF::make({1, mel->dims[0], mel->dims[1]}, std::move(mel->data));
    rec.text = TensorF::zeros({0, n_mels});
    return rec;
  };
  return p;
}

}  // namespace dmha
