// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "dmha/features.hpp"
#include "dmha/fft.hpp"
#include "dmha/rng.hpp"

namespace dmha {

/// Training-time waveform policy. With probability apply_prob exactly one of
/// speed perturbation, reverberation, or additive noise is applied after the
/// fixed-window crop, so each technique runs on apply_prob/3 of the examples.
struct AugmentPolicy {
  double apply_prob = 0.5;
  double window_seconds = 5.5;
  std::vector<double> speed_factors = {0.9, 1.0, 1.1};
  double snr_low_db = 5.0;
  double snr_high_db = 20.0;
  std::vector<Waveform> rir_pool;
  std::vector<Waveform> noise_pool;

  void validate() const {
    if (apply_prob < 0.0 || apply_prob > 1.0)
      throw std::invalid_argument("augment: apply_prob must be in [0, 1]");
    if (window_seconds <= 0.0) throw std::invalid_argument("augment: window must be positive");
    if (speed_factors.empty()) throw std::invalid_argument("augment: no speed factors");
    for (double f : speed_factors)
      if (f <= 0.0) throw std::invalid_argument("augment: speed factors must be positive");
    if (snr_low_db > snr_high_db) throw std::invalid_argument("augment: snr range is inverted");
  }
};

/// Fixed-length window: longer inputs get a uniformly random contiguous
/// crop, shorter inputs are tiled from the start until the window is full.
inline Waveform crop_or_pad(const Waveform& w, double window_seconds, int sample_rate,
                            RngStream& rng) {
  if (w.empty()) throw std::invalid_argument("crop_or_pad: empty waveform");
  if (window_seconds <= 0.0 || sample_rate < 1)
    throw std::invalid_argument("crop_or_pad: bad window");
  const size_t target = size_t(std::lround(window_seconds * sample_rate));
  const size_t n = w.size();
  Waveform out(target);
  if (n >= target) {
    const size_t start = size_t(rng.uniform_int(int(n - target + 1)));
    std::copy(w.begin() + start, w.begin() + start + target, out.begin());
  } else {
    for (size_t i = 0; i < target; ++i) out[i] = w[i % n];
  }
  return out;
}

/// Resamples by linear interpolation: output sample i reads input position
/// i * factor, output length is round(n / factor). factor > 1 shortens the
/// clip and raises pitch by the same ratio.
inline Waveform speed_perturb(const Waveform& w, double factor) {
  if (w.empty()) throw std::invalid_argument("speed_perturb: empty waveform");
  if (factor <= 0.0) throw std::invalid_argument("speed_perturb: factor must be positive");
  const size_t n = w.size();
  const size_t m = size_t(std::max<long>(1, std::lround(double(n) / factor)));
  Waveform out(m);
  for (size_t i = 0; i < m; ++i) {
    const double pos = double(i) * factor;
    size_t i0 = size_t(pos);
    if (i0 >= n - 1) {
      out[i] = w[n - 1];
      continue;
    }
    const double frac = pos - double(i0);
    out[i] = float((1.0 - frac) * double(w[i0]) + frac * double(w[i0 + 1]));
  }
  return out;
}

/// Convolves with a room impulse response, truncates back to the input
/// length, and rescales so the output peak matches the input peak.
inline Waveform apply_rir(const Waveform& w, const Waveform& rir) {
  if (w.empty() || rir.empty()) throw std::invalid_argument("apply_rir: empty input");
  const auto conv = detail::fft_convolve(w, rir);
  double peak_in = 0.0, peak_out = 0.0;
  for (float x : w) peak_in = std::max(peak_in, std::abs(double(x)));
  for (size_t i = 0; i < w.size(); ++i) peak_out = std::max(peak_out, std::abs(conv[i]));
  const double scale = peak_out > 0.0 ? peak_in / peak_out : 1.0;
  Waveform out(w.size());
  for (size_t i = 0; i < w.size(); ++i) out[i] = float(conv[i] * scale);
  return out;
}

/// Mixes in a noise clip scaled to the requested signal-to-noise ratio.
/// Longer noise is cropped at a random offset; shorter noise is tiled.
inline Waveform add_noise(const Waveform& w, const Waveform& noise, double snr_db,
                          RngStream& rng) {
  if (w.empty() || noise.empty()) throw std::invalid_argument("add_noise: empty input");
  const size_t n = w.size();
  Waveform fit(n);
  if (noise.size() > n) {
    const size_t start = size_t(rng.uniform_int(int(noise.size() - n + 1)));
    std::copy(noise.begin() + start, noise.begin() + start + n, fit.begin());
  } else {
    for (size_t i = 0; i < n; ++i) fit[i] = noise[i % noise.size()];
  }
  double p_sig = 0.0, p_noise = 0.0;
  for (float x : w) p_sig += double(x) * double(x);
  for (float x : fit) p_noise += double(x) * double(x);
  p_sig /= double(n);
  p_noise /= double(n);
  if (p_sig <= 0.0) throw std::invalid_argument("add_noise: signal power is zero");
  if (p_noise <= 0.0) throw std::invalid_argument("add_noise: noise power is zero");
  const double gain = std::sqrt(p_sig / (p_noise * std::pow(10.0, snr_db / 10.0)));
  Waveform out(n);
  for (size_t i = 0; i < n; ++i) out[i] = float(double(w[i]) + gain * double(fit[i]));
  return out;
}

enum class AugmentKind { none, speed, rir, noise };

/// Draws the per-example decision: apply anything, and if so which
/// technique. Each technique comes out with probability apply_prob / 3.
inline AugmentKind select_augment(double apply_prob, RngStream& rng) {
  if (!rng.bernoulli(apply_prob)) return AugmentKind::none;
  switch (rng.uniform_int(3)) {
    case 0: return AugmentKind::speed;
    case 1: return AugmentKind::rir;
    default: return AugmentKind::noise;
  }
}

/// Training pipeline: crop to the fixed window, then with apply_prob pick
/// one technique uniformly (speed re-crops to keep the window length).
/// Outside training this is the identity.
inline Waveform augment(const Waveform& w, const AugmentPolicy& policy, int sample_rate,
                        RngStream& rng, bool training) {
  policy.validate();
  if (!training) return w;
  if (policy.apply_prob > 0.0 && (policy.rir_pool.empty() || policy.noise_pool.empty()))
    throw std::invalid_argument("augment: rir and noise pools must be loaded when apply_prob > 0");
  Waveform v = crop_or_pad(w, policy.window_seconds, sample_rate, rng);
  switch (select_augment(policy.apply_prob, rng)) {
    case AugmentKind::none:
      break;
    case AugmentKind::speed: {
      const double factor = policy.speed_factors[rng.uniform_int(int(policy.speed_factors.size()))];
      v = speed_perturb(v, factor);
      v = crop_or_pad(v, policy.window_seconds, sample_rate, rng);
      break;
    }
    case AugmentKind::rir:
      v = apply_rir(v, policy.rir_pool[rng.uniform_int(int(policy.rir_pool.size()))]);
      break;
    case AugmentKind::noise: {
      const auto& noise = policy.noise_pool[rng.uniform_int(int(policy.noise_pool.size()))];
      const double snr = rng.uniform(policy.snr_low_db, policy.snr_high_db);
      v = add_noise(v, noise, snr, rng);
      break;
    }
  }
  return v;
}

}  // namespace dmha
