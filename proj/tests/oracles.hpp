// SPDX-License-Identifier: Apache-2.0
//
// Scalar reference implementations plus the finite-difference gradient
// oracle used by the gtest suites.

#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include <gtest/gtest.h>

#include "dmha/rng.hpp"
#include "dmha/tensor.hpp"
#include "scalar_refs.hpp"

namespace oracle {

// ---- finite-difference gradient oracle -------------------------------------

/// Builds the loss twice per coordinate with perturbed leaves and compares
/// the central difference against the recorded gradient. `build` must be a
/// pure function of the leaf contents.
inline void expect_grad_matches(const std::vector<dmha::TensorD::Ptr>& leaves,
                                const std::function<dmha::TensorD::Ptr(dmha::GraphD&)>& build,
                                double h = 1e-5, double tol = 1e-4) {
  for (const auto& p : leaves) {
    p->requires_grad = true;
    p->ensure_grad();
    p->zero_grad();
  }
  dmha::GraphD g;
  auto loss = build(g);
  ASSERT_EQ(loss->numel(), 1u);
  g.backward(loss);
  auto eval = [&]() {
    dmha::GraphD g2;
    g2.set_recording(false);
    return build(g2)->data[0];
  };
  for (size_t pi = 0; pi < leaves.size(); ++pi) {
    const auto& p = leaves[pi];
    for (size_t i = 0; i < p->numel(); ++i) {
      const double keep = p->data[i];
      p->data[i] = keep + h;
      const double fp = eval();
      p->data[i] = keep - h;
      const double fm = eval();
      p->data[i] = keep;
      const double numeric = (fp - fm) / (2.0 * h);
      const double analytic = p->grad[i];
      const double rel = std::abs(analytic - numeric) /
                         std::max({std::abs(analytic), std::abs(numeric), 1e-3});
      EXPECT_LE(rel, tol) << "leaf " << pi << " coord " << i << " analytic " << analytic
                          << " numeric " << numeric;
    }
  }
}

}  // namespace oracle
