// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "dmha/model.hpp"
#include "dmha/train.hpp"

namespace dmha {

struct GradCheckGroup {
  std::string name;
  double max_rel_err = 0.0;
  int coords = 0;
};

struct GradCheckReport {
  std::vector<GradCheckGroup> groups;
  double max_rel_err = 0.0;
  double tolerance = 1e-4;
  bool passed = false;
};

/// Checks the analytic gradient of every parameter group against a central
/// finite difference of the full forward + loss path, in double precision.
/// Per group up to `coords_per_group` coordinates are probed (chosen by a
/// seeded stream; small groups are probed exhaustively). The batch mixes a
/// record with text frames and one without. Dropout must be disabled so the
/// loss is a deterministic function of the parameters.
inline GradCheckReport gradcheck_model(ModelConfig cfg, uint64_t seed, int coords_per_group = 5,
                                       double tolerance = 1e-4,
                                       LossKind loss_kind = LossKind::weighted_cross_entropy,
                                       double gamma = 2.0) {
  if (cfg.dropout != 0.0)
    throw std::invalid_argument("gradcheck: dropout must be 0 for a deterministic loss");
  cfg.validate();
  DmhaModelT<double> model(cfg, seed);
  RngStream root = RngStream(seed).derive("gradcheck");

  const int t1 = 3, t2 = 2;
  std::vector<FeatureRecordT<double>> batch;
  auto data_rng = root.derive("records");
  for (int r = 0; r < 3; ++r) {
    FeatureRecordT<double> rec;
    rec.id = "gc-" + std::to_string(r);
    rec.label = r % cfg.classes;
    rec.acoustic = TensorD::zeros({cfg.feature_layers, t1, cfg.dim});
    for (auto& x : rec.acoustic->data) x = 0.5 * data_rng.normal();
    const int rows = r == 2 ? 0 : t2;  // one record exercises the no-text path
    rec.text = TensorD::zeros({rows, cfg.dim});
    for (auto& x : rec.text->data) x = 0.5 * data_rng.normal();
    batch.push_back(std::move(rec));
  }
  std::vector<int> labels;
  std::array<int, kNumClasses> counts{};
  for (const auto& rec : batch) {
    labels.push_back(rec.label);
    counts[size_t(rec.label)]++;
  }
  const auto warr = inverse_frequency_weights(counts);
  const std::vector<double> weights(warr.begin(), warr.end());

  auto eval_loss = [&](bool with_tape) {
    GraphT<double> g;
    g.set_recording(with_tape);
    std::vector<TensorPtrT<double>> rows;
    for (const auto& rec : batch) rows.push_back(model.forward(g, rec, false, nullptr));
    auto probs = g.concat_rows(rows);
    auto loss = loss_kind == LossKind::weighted_cross_entropy
                    ? wce_loss(g, probs, labels, weights)
                    : focal_loss(g, probs, labels, gamma);
    if (with_tape) g.backward(loss);
    return double(loss->data[0]);
  };

  model.zero_grads();
  eval_loss(true);

  GradCheckReport report;
  report.tolerance = tolerance;
  auto pick_rng = root.derive("coords");
  for (const auto& [name, p] : model.named_parameters()) {
    GradCheckGroup group;
    group.name = name;
    std::vector<size_t> idx;
    if (int(p->numel()) <= coords_per_group) {
      idx.resize(p->numel());
      for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    } else {
      while (int(idx.size()) < coords_per_group) {
        const size_t cand = size_t(pick_rng.uniform_int(int(p->numel())));
        if (std::find(idx.begin(), idx.end(), cand) == idx.end()) idx.push_back(cand);
      }
    }
    for (size_t i : idx) {
      const double keep = p->data[i];
      const double h = 1e-5 * std::max(1.0, std::abs(keep));
      p->data[i] = keep + h;
      const double fp = eval_loss(false);
      p->data[i] = keep - h;
      const double fm = eval_loss(false);
      p->data[i] = keep;
      const double numeric = (fp - fm) / (2.0 * h);
      const double analytic = p->grad[i];
      const double rel = std::abs(analytic - numeric) /
                         std::max({std::abs(analytic), std::abs(numeric), 1e-3});
      group.max_rel_err = std::max(group.max_rel_err, rel);
      group.coords++;
    }
    report.max_rel_err = std::max(report.max_rel_err, group.max_rel_err);
    report.groups.push_back(std::move(group));
  }
  report.passed = report.max_rel_err <= tolerance;
  return report;
}

}  // namespace dmha
