// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <stdexcept>
#include <vector>

#include "dmha/features.hpp"

namespace dmha {

/// One-vs-rest scores over the fixed class set. Classes with no support
/// and no predictions score zero and still enter the macro average.
struct ClassificationReport {
  std::array<std::array<int, kNumClasses>, kNumClasses> confusion{};  // [truth][prediction]
  std::array<double, kNumClasses> precision{};
  std::array<double, kNumClasses> recall{};
  std::array<double, kNumClasses> f1{};
  std::array<int, kNumClasses> support{};
  double macro_f1 = 0.0;
  double accuracy = 0.0;
};

inline ClassificationReport classification_report(const std::vector<int>& truth,
                                                  const std::vector<int>& pred) {
  if (truth.empty() || truth.size() != pred.size())
    throw std::invalid_argument("report: label vectors must be nonempty and equal length");
  ClassificationReport r;
  int correct = 0;
  for (size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= kNumClasses || pred[i] < 0 || pred[i] >= kNumClasses)
      throw std::invalid_argument("report: label out of range");
    r.confusion[truth[i]][pred[i]]++;
    if (truth[i] == pred[i]) ++correct;
  }
  r.accuracy = double(correct) / double(truth.size());
  double f1_sum = 0.0;
  for (int k = 0; k < kNumClasses; ++k) {
    int tp = r.confusion[k][k], fp = 0, fn = 0;
    for (int j = 0; j < kNumClasses; ++j) {
      if (j == k) continue;
      fp += r.confusion[j][k];
      fn += r.confusion[k][j];
    }
    r.support[k] = tp + fn;
    r.precision[k] = tp + fp > 0 ? double(tp) / double(tp + fp) : 0.0;
    r.recall[k] = tp + fn > 0 ? double(tp) / double(tp + fn) : 0.0;
    r.f1[k] = r.precision[k] + r.recall[k] > 0.0
                  ? 2.0 * r.precision[k] * r.recall[k] / (r.precision[k] + r.recall[k])
                  : 0.0;
    f1_sum += r.f1[k];
  }
  r.macro_f1 = f1_sum / double(kNumClasses);
  return r;
}

inline double macro_f1(const std::vector<int>& truth, const std::vector<int>& pred) {
  return classification_report(truth, pred).macro_f1;
}

}  // namespace dmha
