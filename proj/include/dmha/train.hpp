// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "dmha/io.hpp"
#include "dmha/metrics.hpp"
#include "dmha/model.hpp"
#include "dmha/optim.hpp"

namespace dmha {

enum class LossKind { weighted_cross_entropy, focal };

inline const char* to_string(LossKind k) {
  return k == LossKind::weighted_cross_entropy ? "wce" : "focal";
}
inline LossKind loss_from_string(std::string_view s) {
  if (s == "wce") return LossKind::weighted_cross_entropy;
  if (s == "focal") return LossKind::focal;
  throw std::invalid_argument("unknown loss kind: " + std::string(s));
}

struct TrainConfig {
  int batch_size = 32;
  int max_epochs = 20;
  double initial_lr = 1e-4;
  double lr_decay = 0.5;
  int decay_patience = 5;       // epochs without improvement before each decay
  int early_stop_patience = 5;  // epochs without improvement before stopping
  LossKind loss = LossKind::weighted_cross_entropy;
  double gamma = 2.0;
  double weight_decay = 0.01;
  uint64_t seed = 42;

  void validate() const {
    if (batch_size < 1 || max_epochs < 1)
      throw std::invalid_argument("train: sizes must be positive");
    if (initial_lr <= 0) throw std::invalid_argument("train: initial_lr must be positive");
    if (lr_decay <= 0 || lr_decay > 1)
      throw std::invalid_argument("train: lr_decay must be in (0, 1]");
    if (decay_patience < 1 || early_stop_patience < 1)
      throw std::invalid_argument("train: patience must be positive");
    if (gamma < 0) throw std::invalid_argument("train: gamma must be non-negative");
    if (weight_decay < 0) throw std::invalid_argument("train: negative weight decay");
  }
};

/// Class weights proportional to inverse training frequency, rescaled to
/// mean 1. Classes absent from the training set are weighted as count 1.
inline std::array<double, kNumClasses> inverse_frequency_weights(
    const std::array<int, kNumClasses>& counts) {
  std::array<double, kNumClasses> w{};
  double sum = 0.0;
  for (int k = 0; k < kNumClasses; ++k) {
    w[k] = 1.0 / double(std::max(1, counts[k]));
    sum += w[k];
  }
  for (auto& x : w) x = x * double(kNumClasses) / sum;
  return w;
}

// ---- losses ---------------------------------------------------------------

/// Mean over the batch of -weight[y_i] * log(p_{i,y_i}). The log argument is
/// clamped at 1e-12; inside the clamped region the gradient is zero.
template <typename T>
inline TensorPtrT<T> wce_loss(GraphT<T>& g, const TensorPtrT<T>& probs,
                              const std::vector<int>& labels,
                              const std::vector<double>& weights) {
  if (probs->rank() != 2) throw std::invalid_argument("wce_loss: probs must be [batch x classes]");
  const int b = probs->rows(), c = probs->cols();
  if (b < 1) throw std::invalid_argument("wce_loss: empty batch");
  if (int(labels.size()) != b) throw std::invalid_argument("wce_loss: one label per row required");
  if (int(weights.size()) != c)
    throw std::invalid_argument("wce_loss: one weight per class required");
  for (int y : labels)
    if (y < 0 || y >= c) throw std::invalid_argument("wce_loss: label out of range");
  double acc = 0.0;
  for (int i = 0; i < b; ++i)
    acc -= weights[labels[i]] * std::log(std::max(double(probs->at(i, labels[i])), 1e-12));
  auto out = TensorT<T>::scalar(T(acc / b));
  g.record("wce_loss", {probs}, out, [probs, labels, weights, b, out] {
    if (!probs->requires_grad) return;
    probs->ensure_grad();
    const double g0 = double(out->grad[0]);
    for (int i = 0; i < b; ++i) {
      const int y = labels[i];
      const double p = double(probs->at(i, y));
      if (p > 1e-12) probs->grad_at(i, y) += T(-g0 * weights[y] / p / double(b));
    }
  });
  return out;
}

/// Mean over the batch of -(1-p)^gamma * log(p) on the true-class
/// probability, log clamped at 1e-12. gamma = 0 reduces to plain
/// cross-entropy; there is no alpha weighting term.
template <typename T>
inline TensorPtrT<T> focal_loss(GraphT<T>& g, const TensorPtrT<T>& probs,
                                const std::vector<int>& labels, double gamma) {
  if (probs->rank() != 2)
    throw std::invalid_argument("focal_loss: probs must be [batch x classes]");
  if (gamma < 0) throw std::invalid_argument("focal_loss: gamma must be non-negative");
  const int b = probs->rows(), c = probs->cols();
  if (b < 1) throw std::invalid_argument("focal_loss: empty batch");
  if (int(labels.size()) != b)
    throw std::invalid_argument("focal_loss: one label per row required");
  for (int y : labels)
    if (y < 0 || y >= c) throw std::invalid_argument("focal_loss: label out of range");
  double acc = 0.0;
  for (int i = 0; i < b; ++i) {
    const double p = double(probs->at(i, labels[i]));
    const double q = std::max(1.0 - p, 0.0);
    acc -= std::pow(q, gamma) * std::log(std::max(p, 1e-12));
  }
  auto out = TensorT<T>::scalar(T(acc / b));
  g.record("focal_loss", {probs}, out, [probs, labels, gamma, b, out] {
    if (!probs->requires_grad) return;
    probs->ensure_grad();
    const double g0 = double(out->grad[0]);
    for (int i = 0; i < b; ++i) {
      const int y = labels[i];
      const double p = double(probs->at(i, y));
      const double q = std::max(1.0 - p, 0.0);
      const double lp = std::log(std::max(p, 1e-12));
      const double t1 = (gamma > 0.0 && q > 0.0) ? gamma * std::pow(q, gamma - 1.0) * lp : 0.0;
      const double t2 = p > 1e-12 ? std::pow(q, gamma) / p : 0.0;
      probs->grad_at(i, y) += T(g0 * (t1 - t2) / double(b));
    }
  });
  return out;
}

// ---- training loop ----------------------------------------------------------

/// Supplies one record per (index, epoch). Feature-backed datasets ignore
/// the epoch; waveform-backed ones re-augment per epoch.
struct RecordProvider {
  int count = 0;
  std::function<FeatureRecord(int index, int epoch)> get;
  std::array<int, kNumClasses> class_counts{};
};

inline RecordProvider make_provider(std::vector<FeatureRecord> records) {
  auto shared = std::make_shared<std::vector<FeatureRecord>>(std::move(records));
  RecordProvider p;
  p.count = int(shared->size());
  for (const auto& r : *shared) {
    if (r.label < 0 || r.label >= kNumClasses)
      throw std::invalid_argument("provider: label out of range for " + r.id);
    p.class_counts[r.label]++;
  }
  p.get = [shared](int i, int) { return (*shared)[size_t(i)]; };
  return p;
}

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_macro_f1 = 0.0;
  double lr = 0.0;
  bool improved = false;
};

struct TrainResult {
  Checkpoint best;  // parameters at the best validation epoch
  double best_val_f1 = 0.0;
  int best_epoch = 0;
  int epochs_run = 0;
  std::vector<EpochLog> log;
};

/// Runs the full recipe: shuffled minibatches, AdamW, halved learning rate
/// after every `decay_patience` consecutive epochs without a validation
/// macro-F1 improvement, early stop after `early_stop_patience` of them.
/// Returns the parameters of the best validation epoch. Dropout streams are
/// derived per (epoch, utterance id), so batch composition does not move
/// another record's noise.
inline TrainResult train_loop(DmhaModel& model, const RecordProvider& train,
                              const RecordProvider& val, const TrainConfig& cfg,
                              const std::function<void(const EpochLog&)>& sink = {}) {
  cfg.validate();
  if (train.count < 1 || val.count < 1)
    throw std::invalid_argument("train_loop: train and validation sets must be nonempty");
  if (model.config().classes != kNumClasses)
    throw std::invalid_argument("train_loop: model must have one output per class");

  const auto warr = inverse_frequency_weights(train.class_counts);
  const std::vector<double> weights(warr.begin(), warr.end());
  AdamWF::Options opt_cfg;
  opt_cfg.lr = cfg.initial_lr;
  opt_cfg.weight_decay = cfg.weight_decay;
  AdamWF opt(model.parameters(), opt_cfg);

  RngStream root(cfg.seed);
  TrainResult res;
  double best = -1.0;
  int since_improve = 0;
  std::vector<std::pair<std::string, TensorF::Ptr>> best_state;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::vector<int> order(size_t(train.count));
    std::iota(order.begin(), order.end(), 0);
    auto shuffle_rng = root.derive("shuffle").derive(uint64_t(epoch));
    for (int i = train.count - 1; i > 0; --i)
      std::swap(order[size_t(i)], order[size_t(shuffle_rng.uniform_int(i + 1))]);

    double loss_sum = 0.0;
    for (int start = 0; start < train.count; start += cfg.batch_size) {
      const int bsz = std::min(cfg.batch_size, train.count - start);
      try {
        model.zero_grads();
        GraphF g;
        std::vector<TensorF::Ptr> rows;
        std::vector<int> labels;
        rows.reserve(size_t(bsz));
        for (int k = 0; k < bsz; ++k) {
          auto rec = train.get(order[size_t(start + k)], epoch);
          auto drop = root.derive("dropout").derive(uint64_t(epoch)).derive(rec.id);
          rows.push_back(model.forward(g, rec, true, &drop));
          labels.push_back(rec.label);
        }
        auto probs = g.concat_rows(rows);
        auto loss = cfg.loss == LossKind::weighted_cross_entropy
                        ? wce_loss(g, probs, labels, weights)
                        : focal_loss(g, probs, labels, cfg.gamma);
        g.backward(loss);
        opt.step();
        loss_sum += double(loss->data[0]) * bsz;
      } catch (const std::runtime_error& e) {
        throw std::runtime_error("training diverged at epoch " + std::to_string(epoch) +
                                 ", batch " + std::to_string(start / cfg.batch_size) + ": " +
                                 e.what());
      }
    }

    std::vector<int> truths, preds;
    truths.reserve(size_t(val.count));
    for (int i = 0; i < val.count; ++i) {
      auto rec = val.get(i, epoch);
      GraphF g;
      g.set_recording(false);
      auto p = model.forward(g, rec, false, nullptr);
      int arg = 0;
      for (int k = 1; k < model.config().classes; ++k)
        if (p->data[size_t(k)] > p->data[size_t(arg)]) arg = k;
      preds.push_back(arg);
      truths.push_back(rec.label);
    }
    const double f1 = macro_f1(truths, preds);

    const bool improved = f1 > best;
    if (improved) {
      best = f1;
      res.best_epoch = epoch;
      best_state = model.state();
      since_improve = 0;
    } else {
      ++since_improve;
      if (since_improve % cfg.decay_patience == 0) opt.set_lr(opt.lr() * cfg.lr_decay);
    }

    EpochLog entry{epoch, loss_sum / double(train.count), f1, opt.lr(), improved};
    res.log.push_back(entry);
    if (sink) sink(entry);
    res.epochs_run = epoch;
    if (!improved && since_improve >= cfg.early_stop_patience) break;
  }

  res.best_val_f1 = best;
  res.best.tensors = std::move(best_state);
  res.best.metadata = {
      {"epoch", res.best_epoch},
      {"val_macro_f1", res.best_val_f1},
      {"thresholds", std::vector<double>(kNumClasses, 0.0)},
  };
  return res;
}

}  // namespace dmha
