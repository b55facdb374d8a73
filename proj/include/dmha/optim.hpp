// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "dmha/tensor.hpp"

namespace dmha {

/// AdamW with decoupled weight decay: the decay term is applied directly to
/// the weights and never enters the moment estimates. Parameters with no
/// allocated gradient are treated as having zero gradient.
template <typename T>
class AdamWT {
 public:
  struct Options {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
  };

  AdamWT(std::vector<TensorPtrT<T>> params, Options opt) : params_(std::move(params)), opt_(opt) {
    if (opt_.lr <= 0 || opt_.eps <= 0) throw std::invalid_argument("adamw: lr and eps must be positive");
    if (opt_.beta1 < 0 || opt_.beta1 >= 1 || opt_.beta2 < 0 || opt_.beta2 >= 1)
      throw std::invalid_argument("adamw: betas must be in [0, 1)");
    if (opt_.weight_decay < 0) throw std::invalid_argument("adamw: negative weight decay");
    m_.resize(params_.size());
    v_.resize(params_.size());
    for (size_t p = 0; p < params_.size(); ++p) {
      m_[p].assign(params_[p]->numel(), 0.0);
      v_[p].assign(params_[p]->numel(), 0.0);
    }
  }

  double lr() const { return opt_.lr; }
  void set_lr(double lr) {
    if (lr <= 0) throw std::invalid_argument("adamw: lr must be positive");
    opt_.lr = lr;
  }
  long long steps() const { return t_; }

  void step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(opt_.beta1, double(t_));
    const double bc2 = 1.0 - std::pow(opt_.beta2, double(t_));
    for (size_t p = 0; p < params_.size(); ++p) {
      auto& w = *params_[p];
      const bool has_grad = !w.grad.empty();
      for (size_t i = 0; i < w.numel(); ++i) {
        const double g = has_grad ? double(w.grad[i]) : 0.0;
        m_[p][i] = opt_.beta1 * m_[p][i] + (1.0 - opt_.beta1) * g;
        v_[p][i] = opt_.beta2 * v_[p][i] + (1.0 - opt_.beta2) * g * g;
        const double mhat = m_[p][i] / bc1;
        const double vhat = v_[p][i] / bc2;
        const double upd = mhat / (std::sqrt(vhat) + opt_.eps) + opt_.weight_decay * double(w.data[i]);
        w.data[i] = T(double(w.data[i]) - opt_.lr * upd);
      }
    }
  }

  void zero_grad() {
    for (auto& p : params_) {
      p->ensure_grad();
      p->zero_grad();
    }
  }

 private:
  std::vector<TensorPtrT<T>> params_;
  Options opt_;
  long long t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

using AdamWF = AdamWT<float>;

}  // namespace dmha
