// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

#include "dmha/fft.hpp"
#include "dmha/rng.hpp"
#include "dmha/tensor.hpp"

namespace dmha {

constexpr int kNumClasses = 8;
constexpr std::array<const char*, kNumClasses> kClassNames = {
    "anger", "happiness", "sadness", "fear", "surprise", "contempt", "disgust", "neutral"};

inline int class_index(std::string_view name) {
  for (int k = 0; k < kNumClasses; ++k)
    if (name == kClassNames[k]) return k;
  throw std::invalid_argument("unknown class name: " + std::string(name));
}

/// One utterance worth of model input. The acoustic stack keeps every
/// extractor layer [layers x T1 x D]; the text side is a single layer
/// [T2 x D] and may have zero rows when no transcript exists.
template <typename T>
struct FeatureRecordT {
  std::string id;
  TensorPtrT<T> acoustic;
  TensorPtrT<T> text;
  int label = -1;
};

using FeatureRecord = FeatureRecordT<float>;

template <typename T>
inline void validate_record(const FeatureRecordT<T>& rec) {
  if (!rec.acoustic || rec.acoustic->rank() != 3)
    throw std::invalid_argument("record " + rec.id + ": acoustic must be rank 3");
  if (rec.acoustic->dims[0] < 1 || rec.acoustic->dims[1] < 1 || rec.acoustic->dims[2] < 1)
    throw std::invalid_argument("record " + rec.id + ": acoustic dims must be positive");
  if (!rec.text || rec.text->rank() != 2)
    throw std::invalid_argument("record " + rec.id + ": text must be rank 2");
  if (rec.text->dims[1] != rec.acoustic->dims[2])
    throw std::invalid_argument("record " + rec.id + ": text dim != acoustic dim");
  if (rec.label < 0 || rec.label >= kNumClasses)
    throw std::invalid_argument("record " + rec.id + ": label out of range");
}

// ---- waveform statistics ------------------------------------------------

using Waveform = std::vector<float>;

struct WaveStats {
  double mean = 0.0;
  double stdev = 1.0;
};

/// Mean and population standard deviation over every sample of the corpus.
inline WaveStats corpus_stats(const std::vector<Waveform>& waves) {
  size_t n = 0;
  double sum = 0.0, sumsq = 0.0;
  for (const auto& w : waves) {
    n += w.size();
    for (float x : w) {
      sum += double(x);
      sumsq += double(x) * double(x);
    }
  }
  if (n == 0) throw std::invalid_argument("corpus_stats: empty corpus");
  WaveStats s;
  s.mean = sum / double(n);
  s.stdev = std::sqrt(std::max(0.0, sumsq / double(n) - s.mean * s.mean));
  return s;
}

inline Waveform normalize_waveform(const Waveform& w, const WaveStats& stats) {
  if (stats.stdev <= 0.0) throw std::invalid_argument("normalize_waveform: zero deviation");
  Waveform out(w.size());
  for (size_t i = 0; i < w.size(); ++i)
    out[i] = float((double(w[i]) - stats.mean) / stats.stdev);
  return out;
}

// ---- log-mel features ---------------------------------------------------

/// Log-mel spectrogram of a mono waveform: 25 ms Hann frames every 10 ms,
/// magnitude spectrum, triangular mel bank spanning 0..rate/2, log(x + 1e-6).
/// Result is [frames x n_mels]; the input must cover at least one frame.
inline TensorF::Ptr mel_features(const Waveform& wave, int n_mels, int sample_rate = 16000) {
  if (n_mels < 1) throw std::invalid_argument("mel_features: n_mels must be positive");
  if (sample_rate < 1) throw std::invalid_argument("mel_features: bad sample rate");
  const int frame = sample_rate / 40;  // 25 ms
  const int hop = sample_rate / 100;   // 10 ms
  if (int(wave.size()) < frame)
    throw std::invalid_argument("mel_features: waveform shorter than one frame");
  const int frames = 1 + (int(wave.size()) - frame) / hop;
  const size_t nfft = detail::next_pow2(size_t(frame));
  const int bins = int(nfft / 2) + 1;

  std::vector<double> window(frame);
  const double pi = 3.14159265358979323846;
  for (int i = 0; i < frame; ++i)
    window[i] = 0.5 - 0.5 * std::cos(2.0 * pi * double(i) / double(frame - 1));

  // Triangular filters with mel-spaced corners, linear in Hz between corners.
  auto hz_to_mel = [](double f) { return 2595.0 * std::log10(1.0 + f / 700.0); };
  auto mel_to_hz = [](double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); };
  const double fmax = double(sample_rate) / 2.0;
  std::vector<double> corner(n_mels + 2);
  for (int i = 0; i < n_mels + 2; ++i)
    corner[i] = mel_to_hz(hz_to_mel(fmax) * double(i) / double(n_mels + 1));
  std::vector<std::vector<std::pair<int, double>>> bank(n_mels);
  for (int m = 0; m < n_mels; ++m) {
    for (int k = 0; k < bins; ++k) {
      const double f = double(k) * double(sample_rate) / double(nfft);
      double w = 0.0;
      if (f >= corner[m] && f <= corner[m + 1] && corner[m + 1] > corner[m])
        w = (f - corner[m]) / (corner[m + 1] - corner[m]);
      else if (f > corner[m + 1] && f <= corner[m + 2] && corner[m + 2] > corner[m + 1])
        w = (corner[m + 2] - f) / (corner[m + 2] - corner[m + 1]);
      if (w > 0.0) bank[m].emplace_back(k, w);
    }
  }

  auto out = TensorF::zeros({frames, n_mels});
  std::vector<std::complex<double>> buf(nfft);
  std::vector<double> mag(bins);
  for (int t = 0; t < frames; ++t) {
    const size_t off = size_t(t) * hop;
    for (size_t i = 0; i < nfft; ++i)
      buf[i] = i < size_t(frame) ? double(wave[off + i]) * window[i] : 0.0;
    detail::fft_radix2(buf, false);
    for (int k = 0; k < bins; ++k) mag[k] = std::abs(buf[k]);
    for (int m = 0; m < n_mels; ++m) {
      double acc = 0.0;
      for (const auto& [k, w] : bank[m]) acc += w * mag[k];
      out->at(t, m) = float(std::log(acc + 1e-6));
    }
  }
  return out;
}

// ---- synthetic dataset --------------------------------------------------

/// Recipe for a class-separable toy dataset: per-class Gaussian mean vectors
/// for the acoustic and text sides, frames sampled around them with
/// isotropic noise sigma. An empty class_profile gives `per_class` records
/// for every class; otherwise counts scale with the profile so the largest
/// entry maps to `per_class` (minimum one record per class).
struct SynthSpec {
  int per_class = 50;
  int layers = 3;
  int t_acoustic = 6;
  int t_text = 3;
  int dim = 16;
  double sigma = 0.1;
  std::vector<double> class_profile;

  void validate() const {
    if (per_class < 1 || layers < 1 || t_acoustic < 1 || t_text < 0 || dim < 1)
      throw std::invalid_argument("synth: counts and dims must be positive");
    if (sigma < 0) throw std::invalid_argument("synth: sigma must be non-negative");
    if (!class_profile.empty()) {
      if (int(class_profile.size()) != kNumClasses)
        throw std::invalid_argument("synth: class_profile needs one entry per class");
      for (double p : class_profile)
        if (p <= 0) throw std::invalid_argument("synth: class_profile entries must be positive");
    }
  }

  std::array<int, kNumClasses> counts() const {
    std::array<int, kNumClasses> n{};
    if (class_profile.empty()) {
      n.fill(per_class);
      return n;
    }
    double top = 0;
    for (double p : class_profile) top = std::max(top, p);
    for (int k = 0; k < kNumClasses; ++k)
      n[k] = std::max(1, int(std::lround(double(per_class) * class_profile[k] / top)));
    return n;
  }
};

/// Deterministic for a given (spec, seed, split): class means depend only on
/// the seed, frame noise on (seed, record id).
inline std::vector<FeatureRecord> synth_dataset(const SynthSpec& spec, uint64_t seed,
                                                std::string_view split) {
  spec.validate();
  RngStream root(seed);
  auto means = root.derive("class-means");
  std::vector<std::vector<float>> mu_a(kNumClasses), mu_t(kNumClasses);
  for (int k = 0; k < kNumClasses; ++k) {
    mu_a[k].resize(spec.dim);
    mu_t[k].resize(spec.dim);
    for (int d = 0; d < spec.dim; ++d) mu_a[k][d] = float(means.normal());
    for (int d = 0; d < spec.dim; ++d) mu_t[k][d] = float(means.normal());
  }

  const auto counts = spec.counts();
  std::vector<FeatureRecord> out;
  for (int k = 0; k < kNumClasses; ++k) {
    for (int i = 0; i < counts[k]; ++i) {
      FeatureRecord rec;
      char idbuf[64];
      std::snprintf(idbuf, sizeof idbuf, "%.*s-c%d-%04d", int(split.size()), split.data(), k, i);
      rec.id = idbuf;
      rec.label = k;
      auto noise = root.derive("frames").derive(rec.id);
      rec.acoustic = TensorF::zeros({spec.layers, spec.t_acoustic, spec.dim});
      for (size_t j = 0; j < rec.acoustic->numel(); ++j)
        rec.acoustic->data[j] = mu_a[k][j % spec.dim] + float(spec.sigma * noise.normal());
      rec.text = TensorF::zeros({spec.t_text, spec.dim});
      for (size_t j = 0; j < rec.text->numel(); ++j)
        rec.text->data[j] = mu_t[k][j % spec.dim] + float(spec.sigma * noise.normal());
      out.push_back(std::move(rec));
    }
  }
  return out;
}

}  // namespace dmha
