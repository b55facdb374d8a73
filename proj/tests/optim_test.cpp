// SPDX-License-Identifier: Apache-2.0

#include "dmha/optim.hpp"

#include <cmath>

#include <gtest/gtest.h>

#include "dmha/rng.hpp"
#include "dmha/tensor.hpp"

using dmha::AdamWF;
using dmha::GraphF;
using dmha::TensorF;

TEST(AdamW, ZeroGradStepIsPureDecay) {
  auto w = TensorF::make({3}, {1.0f, -2.0f, 0.5f});
  w->requires_grad = true;
  w->ensure_grad();
  AdamWF::Options opt;
  opt.lr = 0.1;
  opt.weight_decay = 0.01;
  AdamWF adam({w}, opt);
  adam.step();
  EXPECT_NEAR(w->data[0], 1.0 * (1.0 - 0.1 * 0.01), 1e-7);
  EXPECT_NEAR(w->data[1], -2.0 * (1.0 - 0.1 * 0.01), 1e-7);
  EXPECT_NEAR(w->data[2], 0.5 * (1.0 - 0.1 * 0.01), 1e-7);
}

TEST(AdamW, TwoStepsMatchClosedForm) {
  auto w = TensorF::make({1}, {0.0f});
  w->requires_grad = true;
  w->ensure_grad();
  AdamWF::Options opt;
  opt.lr = 0.1;
  opt.weight_decay = 0.0;  // isolate the adaptive term
  AdamWF adam({w}, opt);

  // Constant unit gradient. With bias correction, each step moves by
  // almost exactly -lr: m_hat = 1, v_hat = 1.
  double x = 0.0, m = 0.0, v = 0.0;
  for (int t = 1; t <= 2; ++t) {
    w->grad[0] = 1.0f;
    adam.step();
    m = 0.9 * m + 0.1 * 1.0;
    v = 0.999 * v + 0.001 * 1.0;
    const double mhat = m / (1.0 - std::pow(0.9, t));
    const double vhat = v / (1.0 - std::pow(0.999, t));
    x -= 0.1 * mhat / (std::sqrt(vhat) + 1e-8);
    EXPECT_NEAR(w->data[0], x, 1e-6) << "step " << t;
  }
  EXPECT_EQ(adam.steps(), 2);
}

TEST(AdamW, DecayDecoupledFromMoments) {
  // Same gradients, different weight values: the adaptive part of the update
  // must be identical, so the difference comes only from decay on w itself.
  auto a = TensorF::make({1}, {5.0f});
  auto b = TensorF::make({1}, {-3.0f});
  for (auto& t : {a, b}) {
    t->requires_grad = true;
    t->ensure_grad();
    t->grad[0] = 0.7f;
  }
  AdamWF::Options opt;
  opt.lr = 0.01;
  opt.weight_decay = 0.1;
  AdamWF adam_a({a}, opt), adam_b({b}, opt);
  adam_a.step();
  adam_b.step();
  const double adaptive_a = (5.0 - double(a->data[0])) - 0.01 * 0.1 * 5.0;
  const double adaptive_b = (-3.0 - double(b->data[0])) - 0.01 * 0.1 * -3.0;
  EXPECT_NEAR(adaptive_a, adaptive_b, 1e-6);
}

TEST(AdamW, DrivesQuadraticTowardMinimum) {
  auto w = TensorF::make({2}, {4.0f, -4.0f});
  w->requires_grad = true;
  AdamWF::Options opt;
  opt.lr = 0.05;
  opt.weight_decay = 0.0;
  AdamWF adam({w}, opt);
  for (int i = 0; i < 400; ++i) {
    adam.zero_grad();
    GraphF g;
    auto loss = g.sum(g.mul(w, w));
    g.backward(loss);
    adam.step();
  }
  EXPECT_NEAR(w->data[0], 0.0, 1e-2);
  EXPECT_NEAR(w->data[1], 0.0, 1e-2);
}

TEST(AdamW, SetLrValidates) {
  auto w = TensorF::make({1}, {1.0f});
  w->requires_grad = true;
  AdamWF adam({w}, {});
  adam.set_lr(0.5);
  EXPECT_DOUBLE_EQ(adam.lr(), 0.5);
  EXPECT_THROW(adam.set_lr(0.0), std::invalid_argument);
  AdamWF::Options bad;
  bad.beta1 = 1.0;
  EXPECT_THROW(AdamWF({w}, bad), std::invalid_argument);
}
