// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <stdexcept>
#include <vector>

#include "dmha/metrics.hpp"

namespace dmha {

using ProbRow = std::array<double, kNumClasses>;

/// Per-class decision thresholds on the winning probability.
struct ThresholdSet {
  std::array<double, kNumClasses> t{};

  void validate() const {
    for (double x : t)
      if (x < 0.0 || x >= 1.0) throw std::invalid_argument("thresholds must be in [0, 1)");
  }
};

/// Index of the largest probability; ties go to the lower class index.
inline int argmax_prob(const ProbRow& p) {
  int arg = 0;
  for (int k = 1; k < kNumClasses; ++k)
    if (p[size_t(k)] > p[size_t(arg)]) arg = k;
  return arg;
}

/// Argmax with one fallback step: when the winner does not clear its
/// threshold, the second-highest class is returned unconditionally.
inline int predict_with_thresholds(const ProbRow& p, const ThresholdSet& ts) {
  ts.validate();
  const int k1 = argmax_prob(p);
  if (p[size_t(k1)] > ts.t[size_t(k1)]) return k1;
  int k2 = -1;
  for (int k = 0; k < kNumClasses; ++k) {
    if (k == k1) continue;
    if (k2 < 0 || p[size_t(k)] > p[size_t(k2)]) k2 = k;
  }
  return k2;
}

inline std::vector<int> predict_all(const std::vector<ProbRow>& probs, const ThresholdSet& ts) {
  std::vector<int> out;
  out.reserve(probs.size());
  for (const auto& p : probs) out.push_back(predict_with_thresholds(p, ts));
  return out;
}

/// Single-pass coordinate ascent: classes in index order, candidate grid
/// {0, 0.01, ..., 0.99} per class, starting from all-zero thresholds. Only a
/// strict macro-F1 improvement moves a threshold, so ties keep the smaller
/// value and the result never scores below the all-zero baseline.
inline ThresholdSet tune_thresholds(const std::vector<ProbRow>& probs,
                                    const std::vector<int>& labels) {
  if (probs.empty() || probs.size() != labels.size())
    throw std::invalid_argument("tune_thresholds: probs and labels must align and be nonempty");
  ThresholdSet ts;
  double best = macro_f1(labels, predict_all(probs, ts));
  for (int k = 0; k < kNumClasses; ++k) {
    double keep = ts.t[size_t(k)];
    for (int i = 0; i < 100; ++i) {
      ts.t[size_t(k)] = double(i) / 100.0;
      const double f1 = macro_f1(labels, predict_all(probs, ts));
      if (f1 > best) {
        best = f1;
        keep = ts.t[size_t(k)];
      }
    }
    ts.t[size_t(k)] = keep;
  }
  return ts;
}

/// Majority of three votes; when all three disagree the designated
/// tie-breaker member decides.
inline int hard_vote(const std::array<int, 3>& votes, int tie_breaker) {
  if (tie_breaker < 0 || tie_breaker > 2)
    throw std::invalid_argument("hard_vote: tie_breaker must be 0, 1, or 2");
  for (int v : votes)
    if (v < 0 || v >= kNumClasses) throw std::invalid_argument("hard_vote: vote out of range");
  if (votes[1] == votes[2]) return votes[1];
  if (votes[0] == votes[1] || votes[0] == votes[2]) return votes[0];
  return votes[size_t(tie_breaker)];
}

inline std::vector<int> hard_vote_all(const std::array<std::vector<int>, 3>& member_preds,
                                      int tie_breaker) {
  const size_t n = member_preds[0].size();
  if (member_preds[1].size() != n || member_preds[2].size() != n)
    throw std::invalid_argument("hard_vote_all: member predictions must align");
  std::vector<int> out;
  out.reserve(n);
  for (size_t i = 0; i < n; ++i)
    out.push_back(hard_vote({member_preds[0][i], member_preds[1][i], member_preds[2][i]},
                            tie_breaker));
  return out;
}

}  // namespace dmha
