// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dmha/rng.hpp"

namespace dmha {

/// Dense row-major tensor of rank 1..3. Gradient storage is lazily
/// allocated and accumulated into; callers zero it between steps.
template <typename T>
class TensorT {
 public:
  using Ptr = std::shared_ptr<TensorT<T>>;

  std::vector<int> dims;
  std::vector<T> data;
  std::vector<T> grad;  // empty until ensure_grad(); same length as data after
  bool requires_grad = false;
  std::string name;

  TensorT() = default;

  static Ptr zeros(std::vector<int> dims) {
    auto t = std::make_shared<TensorT<T>>();
    t->dims = std::move(dims);
    t->data.assign(check_dims(t->dims), T(0));
    return t;
  }

  static Ptr make(std::vector<int> dims, std::vector<T> values) {
    auto t = std::make_shared<TensorT<T>>();
    t->dims = std::move(dims);
    if (values.size() != check_dims(t->dims))
      throw std::invalid_argument("tensor: value count does not match dims");
    t->data = std::move(values);
    return t;
  }

  static Ptr scalar(T v) { return make({1}, {v}); }

  /// Trainable leaf: zero-initialised, requires_grad set, named.
  static Ptr param(std::string name, std::vector<int> dims) {
    auto t = zeros(std::move(dims));
    t->requires_grad = true;
    t->name = std::move(name);
    return t;
  }

  size_t numel() const { return data.size(); }
  int rank() const { return static_cast<int>(dims.size()); }

  int rows() const {
    require_rank(2, "rows");
    return dims[0];
  }
  int cols() const {
    require_rank(2, "cols");
    return dims[1];
  }

  T& at(int r, int c) { return data[static_cast<size_t>(r) * dims[1] + c]; }
  T at(int r, int c) const { return data[static_cast<size_t>(r) * dims[1] + c]; }

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), T(0));
  }
  void zero_grad() { std::fill(grad.begin(), grad.end(), T(0)); }

  T& grad_at(int r, int c) { return grad[static_cast<size_t>(r) * dims[1] + c]; }

 private:
  static size_t check_dims(const std::vector<int>& dims) {
    if (dims.empty() || dims.size() > 3)
      throw std::invalid_argument("tensor: rank must be 1..3");
    size_t n = 1;
    for (int d : dims) {
      if (d < 0) throw std::invalid_argument("tensor: negative dimension");
      n *= static_cast<size_t>(d);
    }
    return n;
  }

  void require_rank(int r, const char* what) const {
    if (rank() != r)
      throw std::invalid_argument(std::string("tensor: ") + what + " needs rank " +
                                  std::to_string(r));
  }
};

template <typename T>
using TensorPtrT = typename TensorT<T>::Ptr;

using TensorF = TensorT<float>;
using TensorD = TensorT<double>;

namespace detail {

template <typename T>
inline void check_finite(const std::vector<T>& v, const char* tag) {
  for (T x : v)
    if (!std::isfinite(static_cast<double>(x)))
      throw std::runtime_error(std::string("non-finite value produced by ") + tag);
}

}  // namespace detail

/// Eager reverse-mode tape. Every op computes its output immediately and,
/// when any input requires a gradient, records a closure that scatters the
/// output gradient back to the inputs. The tape is rebuilt per forward pass.
/// Any NaN or Inf in an op output or in a gradient is a hard error.
template <typename T>
class GraphT {
 public:
  using Ptr = TensorPtrT<T>;

  GraphT() = default;
  GraphT(const GraphT&) = delete;
  GraphT& operator=(const GraphT&) = delete;

  size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

  /// Recording off turns the tape into a pure forward evaluator (outputs are
  /// still checked for NaN/Inf); backward is then unavailable.
  void set_recording(bool on) { recording_ = on; }
  bool recording() const { return recording_; }

  /// Registers a computed op. Output finiteness is checked here; the node is
  /// recorded only when some input carries a gradient requirement.
  void record(const char* tag, std::vector<Ptr> inputs, Ptr out, std::function<void()> back) {
    detail::check_finite(out->data, tag);
    if (!recording_) return;
    bool needs = false;
    for (const auto& in : inputs) needs = needs || in->requires_grad;
    if (!needs) return;
    out->requires_grad = true;
    nodes_.push_back(Node{tag, std::move(inputs), std::move(out), std::move(back)});
  }

  /// Seeds d(loss)/d(loss) = 1 and replays the tape in reverse. Gradients
  /// accumulate into .grad; the caller zeroes them between steps.
  void backward(const Ptr& loss) {
    if (loss->numel() != 1) throw std::invalid_argument("backward: loss must be a scalar");
    if (!loss->requires_grad)
      throw std::invalid_argument("backward: loss does not depend on any trainable tensor");
    loss->ensure_grad();
    loss->grad[0] += T(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      if (it->out->grad.empty()) continue;  // not on the path to the loss
      it->back();
    }
    for (const auto& n : nodes_) {
      for (const auto& in : n.inputs)
        if (!in->grad.empty()) detail::check_finite(in->grad, n.tag);
    }
  }

  // ---- ops -----------------------------------------------------------

  Ptr matmul(const Ptr& a, const Ptr& b) {
    require_rank(a, 2, "matmul lhs");
    require_rank(b, 2, "matmul rhs");
    if (a->dims[1] != b->dims[0]) throw std::invalid_argument("matmul: inner dims disagree");
    const int m = a->dims[0], k = a->dims[1], n = b->dims[1];
    auto out = TensorT<T>::zeros({m, n});
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) {
        double acc = 0.0;
        for (int p = 0; p < k; ++p) acc += double(a->at(i, p)) * double(b->at(p, j));
        out->at(i, j) = T(acc);
      }
    record("matmul", {a, b}, out, [a, b, out, m, k, n] {
      if (a->requires_grad) {
        a->ensure_grad();
        for (int i = 0; i < m; ++i)
          for (int p = 0; p < k; ++p) {
            double acc = 0.0;
            for (int j = 0; j < n; ++j) acc += double(out->grad_at(i, j)) * double(b->at(p, j));
            a->grad_at(i, p) += T(acc);
          }
      }
      if (b->requires_grad) {
        b->ensure_grad();
        for (int p = 0; p < k; ++p)
          for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int i = 0; i < m; ++i) acc += double(a->at(i, p)) * double(out->grad_at(i, j));
            b->grad_at(p, j) += T(acc);
          }
      }
    });
    return out;
  }

  /// [M x N] times [N] -> [M].
  Ptr matvec(const Ptr& a, const Ptr& v) {
    require_rank(a, 2, "matvec lhs");
    require_rank(v, 1, "matvec rhs");
    if (a->dims[1] != v->dims[0]) throw std::invalid_argument("matvec: dims disagree");
    const int m = a->dims[0], n = a->dims[1];
    auto out = TensorT<T>::zeros({m});
    for (int i = 0; i < m; ++i) {
      double acc = 0.0;
      for (int j = 0; j < n; ++j) acc += double(a->at(i, j)) * double(v->data[j]);
      out->data[i] = T(acc);
    }
    record("matvec", {a, v}, out, [a, v, out, m, n] {
      if (a->requires_grad) {
        a->ensure_grad();
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < n; ++j) a->grad_at(i, j) += out->grad[i] * v->data[j];
      }
      if (v->requires_grad) {
        v->ensure_grad();
        for (int j = 0; j < n; ++j) {
          double acc = 0.0;
          for (int i = 0; i < m; ++i) acc += double(a->at(i, j)) * double(out->grad[i]);
          v->grad[j] += T(acc);
        }
      }
    });
    return out;
  }

  /// [M] times [M x N] -> [N].
  Ptr vecmat(const Ptr& v, const Ptr& a) {
    require_rank(v, 1, "vecmat lhs");
    require_rank(a, 2, "vecmat rhs");
    if (v->dims[0] != a->dims[0]) throw std::invalid_argument("vecmat: dims disagree");
    const int m = a->dims[0], n = a->dims[1];
    auto out = TensorT<T>::zeros({n});
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int i = 0; i < m; ++i) acc += double(v->data[i]) * double(a->at(i, j));
      out->data[j] = T(acc);
    }
    record("vecmat", {v, a}, out, [v, a, out, m, n] {
      if (v->requires_grad) {
        v->ensure_grad();
        for (int i = 0; i < m; ++i) {
          double acc = 0.0;
          for (int j = 0; j < n; ++j) acc += double(a->at(i, j)) * double(out->grad[j]);
          v->grad[i] += T(acc);
        }
      }
      if (a->requires_grad) {
        a->ensure_grad();
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < n; ++j) a->grad_at(i, j) += v->data[i] * out->grad[j];
      }
    });
    return out;
  }

  Ptr transpose(const Ptr& a) {
    require_rank(a, 2, "transpose");
    const int m = a->dims[0], n = a->dims[1];
    auto out = TensorT<T>::zeros({n, m});
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) out->at(j, i) = a->at(i, j);
    record("transpose", {a}, out, [a, out, m, n] {
      if (!a->requires_grad) return;
      a->ensure_grad();
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) a->grad_at(i, j) += out->grad_at(j, i);
    });
    return out;
  }

  Ptr scale(const Ptr& a, double c) {
    auto out = TensorT<T>::zeros(a->dims);
    for (size_t i = 0; i < a->numel(); ++i) out->data[i] = T(double(a->data[i]) * c);
    record("scale", {a}, out, [a, out, c] {
      if (!a->requires_grad) return;
      a->ensure_grad();
      for (size_t i = 0; i < a->numel(); ++i) a->grad[i] += T(double(out->grad[i]) * c);
    });
    return out;
  }

  Ptr add(const Ptr& a, const Ptr& b) {
    require_same_dims(a, b, "add");
    auto out = TensorT<T>::zeros(a->dims);
    for (size_t i = 0; i < a->numel(); ++i) out->data[i] = a->data[i] + b->data[i];
    record("add", {a, b}, out, [a, b, out] {
      if (a->requires_grad) {
        a->ensure_grad();
        for (size_t i = 0; i < a->numel(); ++i) a->grad[i] += out->grad[i];
      }
      if (b->requires_grad) {
        b->ensure_grad();
        for (size_t i = 0; i < b->numel(); ++i) b->grad[i] += out->grad[i];
      }
    });
    return out;
  }

  Ptr mul(const Ptr& a, const Ptr& b) {
    require_same_dims(a, b, "mul");
    auto out = TensorT<T>::zeros(a->dims);
    for (size_t i = 0; i < a->numel(); ++i) out->data[i] = a->data[i] * b->data[i];
    record("mul", {a, b}, out, [a, b, out] {
      if (a->requires_grad) {
        a->ensure_grad();
        for (size_t i = 0; i < a->numel(); ++i) a->grad[i] += out->grad[i] * b->data[i];
      }
      if (b->requires_grad) {
        b->ensure_grad();
        for (size_t i = 0; i < b->numel(); ++i) b->grad[i] += out->grad[i] * a->data[i];
      }
    });
    return out;
  }

  Ptr sum(const Ptr& a) {
    double acc = 0.0;
    for (T x : a->data) acc += double(x);
    auto out = TensorT<T>::scalar(T(acc));
    record("sum", {a}, out, [a, out] {
      if (!a->requires_grad) return;
      a->ensure_grad();
      for (size_t i = 0; i < a->numel(); ++i) a->grad[i] += out->grad[0];
    });
    return out;
  }

  Ptr mean(const Ptr& a) {
    if (a->numel() == 0) throw std::invalid_argument("mean: empty tensor");
    double acc = 0.0;
    for (T x : a->data) acc += double(x);
    const double inv = 1.0 / double(a->numel());
    auto out = TensorT<T>::scalar(T(acc * inv));
    record("mean", {a}, out, [a, out, inv] {
      if (!a->requires_grad) return;
      a->ensure_grad();
      for (size_t i = 0; i < a->numel(); ++i) a->grad[i] += T(double(out->grad[0]) * inv);
    });
    return out;
  }

  /// Stacks inputs vertically. Rank-1 inputs count as single rows; rank-2
  /// inputs may have zero rows (they contribute nothing).
  Ptr concat_rows(const std::vector<Ptr>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
    int ncols = -1, nrows = 0;
    for (const auto& p : parts) {
      const int c = p->rank() == 1 ? p->dims[0] : p->dims[1];
      if (p->rank() > 2) throw std::invalid_argument("concat_rows: inputs must be rank 1 or 2");
      if (ncols == -1) ncols = c;
      if (c != ncols) throw std::invalid_argument("concat_rows: column counts disagree");
      nrows += p->rank() == 1 ? 1 : p->dims[0];
    }
    auto out = TensorT<T>::zeros({nrows, ncols});
    int r0 = 0;
    for (const auto& p : parts) {
      const int r = p->rank() == 1 ? 1 : p->dims[0];
      std::copy(p->data.begin(), p->data.end(), out->data.begin() + size_t(r0) * ncols);
      r0 += r;
    }
    record("concat_rows", parts, out, [parts, out, ncols] {
      int r0 = 0;
      for (const auto& p : parts) {
        const int r = p->rank() == 1 ? 1 : p->dims[0];
        if (p->requires_grad) {
          p->ensure_grad();
          for (size_t i = 0; i < p->numel(); ++i)
            p->grad[i] += out->grad[size_t(r0) * ncols + i];
        }
        r0 += r;
      }
    });
    return out;
  }

  /// Stacks rank-2 inputs side by side.
  Ptr concat_cols(const std::vector<Ptr>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
    const int nrows = parts[0]->rows();
    int ncols = 0;
    for (const auto& p : parts) {
      if (p->rows() != nrows) throw std::invalid_argument("concat_cols: row counts disagree");
      ncols += p->cols();
    }
    auto out = TensorT<T>::zeros({nrows, ncols});
    int c0 = 0;
    for (const auto& p : parts) {
      for (int i = 0; i < nrows; ++i)
        for (int j = 0; j < p->cols(); ++j) out->at(i, c0 + j) = p->at(i, j);
      c0 += p->cols();
    }
    record("concat_cols", parts, out, [parts, out, nrows] {
      int c0 = 0;
      for (const auto& p : parts) {
        if (p->requires_grad) {
          p->ensure_grad();
          for (int i = 0; i < nrows; ++i)
            for (int j = 0; j < p->cols(); ++j) p->grad_at(i, j) += out->grad_at(i, c0 + j);
        }
        c0 += p->cols();
      }
    });
    return out;
  }

  /// Columns [c0, c1) of a rank-2 tensor.
  Ptr slice_cols(const Ptr& a, int c0, int c1) {
    require_rank(a, 2, "slice_cols");
    if (c0 < 0 || c1 > a->cols() || c0 >= c1)
      throw std::invalid_argument("slice_cols: bad column range");
    const int m = a->rows(), w = c1 - c0;
    auto out = TensorT<T>::zeros({m, w});
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < w; ++j) out->at(i, j) = a->at(i, c0 + j);
    record("slice_cols", {a}, out, [a, out, m, w, c0] {
      if (!a->requires_grad) return;
      a->ensure_grad();
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < w; ++j) a->grad_at(i, c0 + j) += out->grad_at(i, j);
    });
    return out;
  }

  /// Row r of a rank-2 tensor, as rank-1.
  Ptr row(const Ptr& a, int r) {
    require_rank(a, 2, "row");
    if (r < 0 || r >= a->rows()) throw std::invalid_argument("row: index out of range");
    const int n = a->cols();
    auto out = TensorT<T>::zeros({n});
    for (int j = 0; j < n; ++j) out->data[j] = a->at(r, j);
    record("row", {a}, out, [a, out, r, n] {
      if (!a->requires_grad) return;
      a->ensure_grad();
      for (int j = 0; j < n; ++j) a->grad_at(r, j) += out->grad[j];
    });
    return out;
  }

  /// Softmax along `axis`; every slice along that axis sums to 1.
  /// Rank-1 tensors use axis 0; rank-2 tensors accept axis 0 (down columns)
  /// or axis 1 (across each row).
  Ptr softmax(const Ptr& a, int axis) {
    auto out = TensorT<T>::zeros(a->dims);
    if (a->rank() == 1) {
      if (axis != 0) throw std::invalid_argument("softmax: rank-1 tensors use axis 0");
      softmax_slice(a->data.data(), out->data.data(), a->dims[0], 1);
    } else if (a->rank() == 2) {
      const int m = a->dims[0], n = a->dims[1];
      if (axis == 1) {
        for (int i = 0; i < m; ++i)
          softmax_slice(a->data.data() + size_t(i) * n, out->data.data() + size_t(i) * n, n, 1);
      } else if (axis == 0) {
        for (int j = 0; j < n; ++j)
          softmax_slice(a->data.data() + j, out->data.data() + j, m, n);
      } else {
        throw std::invalid_argument("softmax: axis must be 0 or 1");
      }
    } else {
      throw std::invalid_argument("softmax: rank must be 1 or 2");
    }
    record("softmax", {a}, out, [a, out, axis] {
      if (!a->requires_grad) return;
      a->ensure_grad();
      auto slice_back = [&](size_t base, int len, int stride) {
        double dot = 0.0;
        for (int i = 0; i < len; ++i) {
          const size_t k = base + size_t(i) * stride;
          dot += double(out->grad[k]) * double(out->data[k]);
        }
        for (int i = 0; i < len; ++i) {
          const size_t k = base + size_t(i) * stride;
          a->grad[k] += T(double(out->data[k]) * (double(out->grad[k]) - dot));
        }
      };
      if (a->rank() == 1) {
        slice_back(0, a->dims[0], 1);
      } else {
        const int m = a->dims[0], n = a->dims[1];
        if (axis == 1)
          for (int i = 0; i < m; ++i) slice_back(size_t(i) * n, n, 1);
        else
          for (int j = 0; j < n; ++j) slice_back(j, m, n);
      }
    });
    return out;
  }

  /// Per-row layer normalisation with learnable gain and bias.
  /// x is rank 1 [N] or rank 2 [M x N]; gain and bias are rank 1 [N].
  Ptr layer_norm(const Ptr& x, const Ptr& gain, const Ptr& bias, double eps = 1e-5) {
    const int n = x->rank() == 1 ? x->dims[0] : x->dims[1];
    const int m = x->rank() == 1 ? 1 : x->dims[0];
    if (x->rank() > 2) throw std::invalid_argument("layer_norm: rank must be 1 or 2");
    if (gain->rank() != 1 || gain->dims[0] != n || bias->rank() != 1 || bias->dims[0] != n)
      throw std::invalid_argument("layer_norm: gain/bias must be rank-1 [N]");
    auto out = TensorT<T>::zeros(x->dims);
    for (int i = 0; i < m; ++i) {
      const size_t base = size_t(i) * n;
      double mu = 0.0;
      for (int j = 0; j < n; ++j) mu += double(x->data[base + j]);
      mu /= n;
      double var = 0.0;
      for (int j = 0; j < n; ++j) {
        const double d = double(x->data[base + j]) - mu;
        var += d * d;
      }
      var /= n;
      const double inv = 1.0 / std::sqrt(var + eps);
      for (int j = 0; j < n; ++j) {
        const double xhat = (double(x->data[base + j]) - mu) * inv;
        out->data[base + j] = T(xhat * double(gain->data[j]) + double(bias->data[j]));
      }
    }
    record("layer_norm", {x, gain, bias}, out, [x, gain, bias, out, m, n, eps] {
      for (int i = 0; i < m; ++i) {
        const size_t base = size_t(i) * n;
        double mu = 0.0;
        for (int j = 0; j < n; ++j) mu += double(x->data[base + j]);
        mu /= n;
        double var = 0.0;
        for (int j = 0; j < n; ++j) {
          const double d = double(x->data[base + j]) - mu;
          var += d * d;
        }
        var /= n;
        const double inv = 1.0 / std::sqrt(var + eps);
        double m1 = 0.0, m2 = 0.0;
        std::vector<double> xhat(n), dxhat(n);
        for (int j = 0; j < n; ++j) {
          xhat[j] = (double(x->data[base + j]) - mu) * inv;
          dxhat[j] = double(out->grad[base + j]) * double(gain->data[j]);
          m1 += dxhat[j];
          m2 += dxhat[j] * xhat[j];
        }
        m1 /= n;
        m2 /= n;
        if (x->requires_grad) {
          x->ensure_grad();
          for (int j = 0; j < n; ++j)
            x->grad[base + j] += T(inv * (dxhat[j] - m1 - xhat[j] * m2));
        }
        if (gain->requires_grad) {
          gain->ensure_grad();
          for (int j = 0; j < n; ++j)
            gain->grad[j] += T(double(out->grad[base + j]) * xhat[j]);
        }
        if (bias->requires_grad) {
          bias->ensure_grad();
          for (int j = 0; j < n; ++j) bias->grad[j] += out->grad[base + j];
        }
      }
    });
    return out;
  }

  /// Exact GELU: x * Phi(x) with the Gaussian CDF, no tanh shortcut.
  Ptr gelu(const Ptr& a) {
    auto out = TensorT<T>::zeros(a->dims);
    for (size_t i = 0; i < a->numel(); ++i) {
      const double x = double(a->data[i]);
      out->data[i] = T(0.5 * x * (1.0 + std::erf(x * 0.7071067811865475)));
    }
    record("gelu", {a}, out, [a, out] {
      if (!a->requires_grad) return;
      a->ensure_grad();
      for (size_t i = 0; i < a->numel(); ++i) {
        const double x = double(a->data[i]);
        const double cdf = 0.5 * (1.0 + std::erf(x * 0.7071067811865475));
        const double pdf = std::exp(-0.5 * x * x) * 0.3989422804014327;
        a->grad[i] += T(double(out->grad[i]) * (cdf + x * pdf));
      }
    });
    return out;
  }

  /// Inverted dropout. Identity when not training or p == 0; otherwise each
  /// element is zeroed with probability p and survivors are scaled by
  /// 1/(1-p). Mask draws come from `rng` in element order.
  Ptr dropout(const Ptr& a, double p, bool training, RngStream& rng) {
    if (p < 0.0 || p >= 1.0) throw std::invalid_argument("dropout: p must be in [0, 1)");
    if (!training || p == 0.0) return a;
    auto mask = std::make_shared<std::vector<T>>(a->numel());
    auto out = TensorT<T>::zeros(a->dims);
    const double keep = 1.0 / (1.0 - p);
    for (size_t i = 0; i < a->numel(); ++i) {
      (*mask)[i] = rng.uniform() < p ? T(0) : T(keep);
      out->data[i] = a->data[i] * (*mask)[i];
    }
    record("dropout", {a}, out, [a, out, mask] {
      if (!a->requires_grad) return;
      a->ensure_grad();
      for (size_t i = 0; i < a->numel(); ++i) a->grad[i] += out->grad[i] * (*mask)[i];
    });
    return out;
  }

  /// Fully connected layer on a rank-1 input: out = x W + b,
  /// W is [in x out], b is [out].
  Ptr dense(const Ptr& x, const Ptr& w, const Ptr& b) {
    require_rank(x, 1, "dense input");
    require_rank(w, 2, "dense weight");
    require_rank(b, 1, "dense bias");
    if (w->dims[0] != x->dims[0] || w->dims[1] != b->dims[0])
      throw std::invalid_argument("dense: dims disagree");
    const int in = w->dims[0], outn = w->dims[1];
    auto out = TensorT<T>::zeros({outn});
    for (int k = 0; k < outn; ++k) {
      double acc = double(b->data[k]);
      for (int i = 0; i < in; ++i) acc += double(x->data[i]) * double(w->at(i, k));
      out->data[k] = T(acc);
    }
    record("dense", {x, w, b}, out, [x, w, b, out, in, outn] {
      if (x->requires_grad) {
        x->ensure_grad();
        for (int i = 0; i < in; ++i) {
          double acc = 0.0;
          for (int k = 0; k < outn; ++k) acc += double(w->at(i, k)) * double(out->grad[k]);
          x->grad[i] += T(acc);
        }
      }
      if (w->requires_grad) {
        w->ensure_grad();
        for (int i = 0; i < in; ++i)
          for (int k = 0; k < outn; ++k) w->grad_at(i, k) += x->data[i] * out->grad[k];
      }
      if (b->requires_grad) {
        b->ensure_grad();
        for (int k = 0; k < outn; ++k) b->grad[k] += out->grad[k];
      }
    });
    return out;
  }

  /// Convex combination of layers: stack is [L x T x D], w is [L],
  /// out[t,d] = sum_l w[l] * stack[l,t,d].
  Ptr weighted_layer_sum(const Ptr& stack, const Ptr& w) {
    require_rank(stack, 3, "weighted_layer_sum stack");
    require_rank(w, 1, "weighted_layer_sum weights");
    const int L = stack->dims[0], t = stack->dims[1], d = stack->dims[2];
    if (w->dims[0] != L) throw std::invalid_argument("weighted_layer_sum: weight count != layers");
    const size_t plane = size_t(t) * d;
    auto out = TensorT<T>::zeros({t, d});
    for (size_t i = 0; i < plane; ++i) {
      double acc = 0.0;
      for (int l = 0; l < L; ++l) acc += double(w->data[l]) * double(stack->data[l * plane + i]);
      out->data[i] = T(acc);
    }
    record("weighted_layer_sum", {stack, w}, out, [stack, w, out, L, plane] {
      if (w->requires_grad) {
        w->ensure_grad();
        for (int l = 0; l < L; ++l) {
          double acc = 0.0;
          for (size_t i = 0; i < plane; ++i)
            acc += double(out->grad[i]) * double(stack->data[l * plane + i]);
          w->grad[l] += T(acc);
        }
      }
      if (stack->requires_grad) {
        stack->ensure_grad();
        for (int l = 0; l < L; ++l)
          for (size_t i = 0; i < plane; ++i)
            stack->grad[l * plane + i] += w->data[l] * out->grad[i];
      }
    });
    return out;
  }

 private:
  struct Node {
    const char* tag;
    std::vector<Ptr> inputs;
    Ptr out;
    std::function<void()> back;
  };

  static void require_rank(const Ptr& t, int r, const char* what) {
    if (t->rank() != r)
      throw std::invalid_argument(std::string(what) + ": expected rank " + std::to_string(r));
  }
  static void require_same_dims(const Ptr& a, const Ptr& b, const char* what) {
    if (a->dims != b->dims)
      throw std::invalid_argument(std::string(what) + ": shapes disagree");
  }

  bool recording_ = true;

  static void softmax_slice(const T* in, T* out, int len, int stride) {
    double mx = double(in[0]);
    for (int i = 1; i < len; ++i) mx = std::max(mx, double(in[size_t(i) * stride]));
    double denom = 0.0;
    for (int i = 0; i < len; ++i) denom += std::exp(double(in[size_t(i) * stride]) - mx);
    for (int i = 0; i < len; ++i)
      out[size_t(i) * stride] = T(std::exp(double(in[size_t(i) * stride]) - mx) / denom);
  }

  std::vector<Node> nodes_;
};

using GraphF = GraphT<float>;
using GraphD = GraphT<double>;

}  // namespace dmha
