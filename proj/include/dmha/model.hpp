// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "dmha/features.hpp"
#include "dmha/rng.hpp"
#include "dmha/tensor.hpp"

namespace dmha {

enum class AttentionVariant { standard, subvector };

inline const char* to_string(AttentionVariant v) {
  return v == AttentionVariant::standard ? "standard" : "subvector";
}
inline AttentionVariant variant_from_string(std::string_view s) {
  if (s == "standard") return AttentionVariant::standard;
  if (s == "subvector") return AttentionVariant::subvector;
  throw std::invalid_argument("unknown attention variant: " + std::string(s));
}

struct ModelConfig {
  AttentionVariant variant = AttentionVariant::standard;
  int heads = 4;
  int dim = 1024;          // feature dimension D shared by both modalities
  int feature_layers = 1;  // extractor layers entering the learned aggregation
  int hidden_width = 512;
  int hidden_layers = 4;
  int classes = kNumClasses;
  double dropout = 0.1;

  /// Width of the utterance vector handed to the classifier.
  int context_dim() const {
    return variant == AttentionVariant::standard ? dim : dim / heads;
  }

  void validate() const {
    if (heads < 1 || dim < 1 || feature_layers < 1 || hidden_width < 1 || hidden_layers < 0 ||
        classes < 2)
      throw std::invalid_argument("model: sizes must be positive");
    if (variant == AttentionVariant::subvector && dim % heads != 0)
      throw std::invalid_argument("model: subvector attention needs heads to divide dim");
    if (dropout < 0.0 || dropout >= 1.0)
      throw std::invalid_argument("model: dropout must be in [0, 1)");
  }
};

/// Double multi-head attention classifier. The first attention layer is
/// either the standard transformer form (per-head Q/K/V projections over the
/// fused sequence) or the projection-free sub-vector form (each head attends
/// over its own slice of the feature vector with a learned query). A second
/// attention layer pools the first layer's outputs into one context vector,
/// which a LayerNorm+GELU MLP maps to class probabilities.
template <typename T>
class DmhaModelT {
 public:
  using Ptr = TensorPtrT<T>;

  explicit DmhaModelT(ModelConfig cfg, uint64_t seed = 1) : cfg_(cfg) {
    cfg_.validate();
    const int d = cfg_.dim, h = cfg_.heads, c = cfg_.context_dim();
    add_param("agg.logits", {cfg_.feature_layers}, InitKind::zeros, 0);
    if (cfg_.variant == AttentionVariant::standard) {
      for (int j = 0; j < h; ++j) {
        const std::string base = "mha.h" + std::to_string(j) + ".";
        add_param(base + "wq", {d, d}, InitKind::fan_in, d);
        add_param(base + "wk", {d, d}, InitKind::fan_in, d);
        add_param(base + "wv", {d, d}, InitKind::fan_in, d);
      }
      add_param("mha.wo", {h * d, d}, InitKind::fan_in, h * d);
    } else {
      add_param("mha.u", {h, d / h}, InitKind::fan_in, d / h);
    }
    add_param("pool.u", {c}, InitKind::fan_in, c);
    int in = c;
    for (int i = 0; i <= cfg_.hidden_layers; ++i) {
      const std::string base = "clf.fc" + std::to_string(i) + ".";
      add_param(base + "w", {in, cfg_.hidden_width}, InitKind::fan_in, in);
      add_param(base + "b", {cfg_.hidden_width}, InitKind::zeros, 0);
      const std::string ln = "clf.ln" + std::to_string(i) + ".";
      add_param(ln + "g", {cfg_.hidden_width}, InitKind::ones, 0);
      add_param(ln + "b", {cfg_.hidden_width}, InitKind::zeros, 0);
      in = cfg_.hidden_width;
    }
    add_param("clf.out.w", {in, cfg_.classes}, InitKind::fan_in, in);
    add_param("clf.out.b", {cfg_.classes}, InitKind::zeros, 0);
    init_params(seed);
  }

  const ModelConfig& config() const { return cfg_; }

  const std::vector<std::pair<std::string, Ptr>>& named_parameters() const { return params_; }

  std::vector<Ptr> parameters() const {
    std::vector<Ptr> out;
    out.reserve(params_.size());
    for (const auto& [name, p] : params_) out.push_back(p);
    return out;
  }

  Ptr param(const std::string& name) const {
    for (const auto& [n, p] : params_)
      if (n == name) return p;
    throw std::invalid_argument("model: no parameter named " + name);
  }

  void zero_grads() {
    for (auto& [n, p] : params_) {
      p->ensure_grad();
      p->zero_grad();
    }
  }

  /// Softmax-weighted sum of extractor layers: [layers x T1 x D] -> [T1 x D].
  Ptr aggregate(GraphT<T>& g, const Ptr& acoustic) const {
    if (acoustic->rank() != 3 || acoustic->dims[0] != cfg_.feature_layers ||
        acoustic->dims[2] != cfg_.dim)
      throw std::invalid_argument("aggregate: acoustic stack does not match model config");
    auto w = g.softmax(param("agg.logits"), 0);
    return g.weighted_layer_sum(acoustic, w);
  }

  /// Early fusion: acoustic frames then text frames along time.
  Ptr fuse(GraphT<T>& g, const Ptr& acoustic, const Ptr& text) const {
    if (acoustic->rank() != 2 || acoustic->dims[1] != cfg_.dim)
      throw std::invalid_argument("fuse: acoustic must be [T1 x dim]");
    if (text->rank() != 2 || text->dims[1] != cfg_.dim)
      throw std::invalid_argument("fuse: text must be [T2 x dim]");
    if (text->dims[0] == 0) return acoustic;
    return g.concat_rows({acoustic, text});
  }

  /// Standard multi-head self-attention over the fused sequence [T x D].
  /// Per head: softmax(X Wq (X Wk)^t / sqrt(D)) X Wv; heads concatenate and
  /// project through Wo back to [T x D].
  Ptr standard_mha(GraphT<T>& g, const Ptr& x) const {
    require_variant(AttentionVariant::standard, "standard_mha");
    check_sequence(x, "standard_mha");
    const double inv_sqrt_d = 1.0 / std::sqrt(double(cfg_.dim));
    std::vector<Ptr> heads;
    for (int j = 0; j < cfg_.heads; ++j) {
      const std::string base = "mha.h" + std::to_string(j) + ".";
      auto q = g.matmul(x, param(base + "wq"));
      auto k = g.matmul(x, param(base + "wk"));
      auto v = g.matmul(x, param(base + "wv"));
      auto scores = g.scale(g.matmul(q, g.transpose(k)), inv_sqrt_d);
      heads.push_back(g.matmul(g.softmax(scores, 1), v));
    }
    return g.matmul(g.concat_cols(heads), param("mha.wo"));
  }

  /// Sub-vector multi-head attention: head j sees columns
  /// [j*D/H, (j+1)*D/H) of the sequence and pools them over time with its
  /// learned query. Output is one row per head, [H x D/H].
  Ptr subvector_mha(GraphT<T>& g, const Ptr& x) const {
    require_variant(AttentionVariant::subvector, "subvector_mha");
    check_sequence(x, "subvector_mha");
    const int sub = cfg_.dim / cfg_.heads;
    const double inv_sqrt = 1.0 / std::sqrt(double(sub));
    auto u = param("mha.u");
    std::vector<Ptr> pooled;
    for (int j = 0; j < cfg_.heads; ++j) {
      auto xj = g.slice_cols(x, j * sub, (j + 1) * sub);
      auto scores = g.scale(g.matvec(xj, g.row(u, j)), inv_sqrt);
      pooled.push_back(g.vecmat(g.softmax(scores, 0), xj));
    }
    return g.concat_rows(pooled);
  }

  /// Second attention layer: pools [L x C] rows into one [C] vector with the
  /// learned query, scaled by sqrt(C).
  Ptr attention_pool(GraphT<T>& g, const Ptr& cin) const {
    const int c = cfg_.context_dim();
    if (cin->rank() != 2 || cin->dims[1] != c)
      throw std::invalid_argument("attention_pool: input must be [L x context_dim]");
    check_sequence(cin, "attention_pool");
    auto scores = g.scale(g.matvec(cin, param("pool.u")), 1.0 / std::sqrt(double(c)));
    return g.vecmat(g.softmax(scores, 0), cin);
  }

  /// First attention layer for the configured variant, then pooling.
  Ptr fuse_and_pool(GraphT<T>& g, const Ptr& acoustic, const Ptr& text) const {
    auto x = fuse(g, acoustic, text);
    auto first = cfg_.variant == AttentionVariant::standard ? standard_mha(g, x)
                                                            : subvector_mha(g, x);
    return attention_pool(g, first);
  }

  /// MLP head: (dense, layer norm, GELU, dropout) per block, then a dense
  /// output layer and softmax over classes.
  Ptr classify(GraphT<T>& g, const Ptr& context, bool training, RngStream* dropout_rng) const {
    if (context->rank() != 1 || context->dims[0] != cfg_.context_dim())
      throw std::invalid_argument("classify: context vector has wrong width");
    if (training && cfg_.dropout > 0.0 && dropout_rng == nullptr)
      throw std::invalid_argument("classify: training with dropout needs an rng stream");
    RngStream unused(0);
    RngStream& rng = dropout_rng ? *dropout_rng : unused;
    Ptr h = context;
    for (int i = 0; i <= cfg_.hidden_layers; ++i) {
      const std::string fc = "clf.fc" + std::to_string(i) + ".";
      const std::string ln = "clf.ln" + std::to_string(i) + ".";
      h = g.dense(h, param(fc + "w"), param(fc + "b"));
      h = g.layer_norm(h, param(ln + "g"), param(ln + "b"));
      h = g.gelu(h);
      h = g.dropout(h, cfg_.dropout, training, rng);
    }
    auto logits = g.dense(h, param("clf.out.w"), param("clf.out.b"));
    return g.softmax(logits, 0);
  }

  /// Full pass for one record: aggregate layers, fuse modalities, both
  /// attention layers, classifier. Returns class probabilities [classes].
  Ptr forward(GraphT<T>& g, const FeatureRecordT<T>& rec, bool training,
              RngStream* dropout_rng) const {
    validate_record(rec);
    auto pooled = fuse_and_pool(g, aggregate(g, rec.acoustic), rec.text);
    return classify(g, pooled, training, dropout_rng);
  }

  /// Parameter tally per component plus the total.
  std::map<std::string, long long> param_count() const {
    std::map<std::string, long long> out;
    out["layer_aggregator"] = cfg_.feature_layers;
    long long first = 0;
    if (cfg_.variant == AttentionVariant::standard)
      first = 3LL * cfg_.heads * cfg_.dim * cfg_.dim +
              1LL * cfg_.heads * cfg_.dim * cfg_.dim;  // Q,K,V per head + output projection
    else
      first = cfg_.dim;  // one query of width dim/heads per head
    out["first_attention"] = first;
    out["attention_pooling"] = cfg_.context_dim();
    long long clf = 0;
    for (const auto& [name, p] : params_)
      if (name.rfind("clf.", 0) == 0) clf += (long long)p->numel();
    out["classifier"] = clf;
    long long total = 0;
    for (const auto& [name, p] : params_) total += (long long)p->numel();
    out["total"] = total;
    return out;
  }

  /// Float snapshot of every parameter, for checkpointing.
  std::vector<std::pair<std::string, TensorF::Ptr>> state() const {
    std::vector<std::pair<std::string, TensorF::Ptr>> out;
    for (const auto& [name, p] : params_) {
      auto t = TensorF::zeros(p->dims);
      for (size_t i = 0; i < p->numel(); ++i) t->data[i] = float(p->data[i]);
      out.emplace_back(name, t);
    }
    return out;
  }

  /// Restores a snapshot. The name set and every shape must match exactly.
  void load_state(const std::vector<std::pair<std::string, TensorF::Ptr>>& state) {
    if (state.size() != params_.size())
      throw std::invalid_argument("load_state: parameter count mismatch");
    for (const auto& [name, src] : state) {
      auto dst = param(name);
      if (dst->dims != src->dims)
        throw std::invalid_argument("load_state: shape mismatch for " + name);
      for (size_t i = 0; i < src->numel(); ++i) dst->data[i] = T(src->data[i]);
    }
  }

 private:
  enum class InitKind { zeros, ones, fan_in };

  void add_param(std::string name, std::vector<int> dims, InitKind kind, int fan_in) {
    auto p = TensorT<T>::param(name, std::move(dims));
    params_.emplace_back(std::move(name), std::move(p));
    init_kinds_.push_back({kind, fan_in});
  }

  void init_params(uint64_t seed) {
    RngStream root = RngStream(seed).derive("init");
    for (size_t i = 0; i < params_.size(); ++i) {
      auto& [name, p] = params_[i];
      const auto [kind, fan] = init_kinds_[i];
      if (kind == InitKind::ones) {
        std::fill(p->data.begin(), p->data.end(), T(1));
      } else if (kind == InitKind::fan_in) {
        auto rng = root.derive(name);
        const double bound = 1.0 / std::sqrt(double(fan));
        for (auto& x : p->data) x = T(rng.uniform(-bound, bound));
      }
    }
  }

  void require_variant(AttentionVariant v, const char* what) const {
    if (cfg_.variant != v)
      throw std::invalid_argument(std::string(what) + ": model was built for the other variant");
  }

  static void check_sequence(const Ptr& x, const char* what) {
    if (x->rank() != 2 || x->dims[0] < 1)
      throw std::invalid_argument(std::string(what) + ": needs at least one time step");
  }

  ModelConfig cfg_;
  std::vector<std::pair<std::string, Ptr>> params_;
  std::vector<std::pair<InitKind, int>> init_kinds_;
};

using DmhaModel = DmhaModelT<float>;

}  // namespace dmha
