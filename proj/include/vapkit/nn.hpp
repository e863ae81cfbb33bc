// Copyright 2026 The vapkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <Eigen/Core>
#include <cmath>
#include <string>
#include <vector>

#include "vapkit/common.hpp"
#include "vapkit/rng.hpp"

namespace vapkit {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using RowVec = Eigen::Matrix<S, 1, Eigen::Dynamic>;

// One learnable matrix. Gradients live outside (indexed by id) so that
// batch items can accumulate into private buffers and be reduced in a
// fixed order regardless of thread count.
template <typename S>
struct Param {
  Mat<S> value;
  int id = -1;
  bool decay = false;  // weight decay applies (weights yes, biases/LN no)
  std::string name;
};

// Per-item gradient buffers, same indexing as the parameter registry.
template <typename S>
using Grads = std::vector<Mat<S>>;

template <typename S>
class ParamRegistry {
 public:
  void add(Param<S>& p, const std::string& name, bool decay) {
    p.id = static_cast<int>(params_.size());
    p.decay = decay;
    p.name = name;
    params_.push_back(&p);
  }
  std::size_t size() const { return params_.size(); }
  Param<S>& operator[](std::size_t i) { return *params_[i]; }
  const Param<S>& operator[](std::size_t i) const { return *params_[i]; }
  const std::vector<Param<S>*>& all() const { return params_; }

  Grads<S> zero_grads() const {
    Grads<S> g(params_.size());
    for (std::size_t i = 0; i < params_.size(); ++i)
      g[i] = Mat<S>::Zero(params_[i]->value.rows(), params_[i]->value.cols());
    return g;
  }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto* p : params_) n += static_cast<std::size_t>(p->value.size());
    return n;
  }

 private:
  std::vector<Param<S>*> params_;
};

template <typename S>
inline void init_normal(Mat<S>& m, int rows, int cols, double stddev, Rng rng) {
  m.resize(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = static_cast<S>(rng.gaussian(0.0, stddev));
}

// ---------------------------------------------------------------------------
// Linear: y = x W + b
// ---------------------------------------------------------------------------
template <typename S>
struct Linear {
  Param<S> W;  // in x out
  Param<S> b;  // 1 x out

  void init(ParamRegistry<S>& reg, const std::string& name, int in, int out, double init_std,
            Rng rng) {
    init_normal(W.value, in, out, init_std, rng);
    b.value = Mat<S>::Zero(1, out);
    reg.add(W, name + ".W", true);
    reg.add(b, name + ".b", false);
  }

  Mat<S> forward(const Mat<S>& x) const {
    return (x * W.value).rowwise() + b.value.row(0);
  }

  // Accumulates into g, returns dx.
  Mat<S> backward(const Mat<S>& x, const Mat<S>& dy, Grads<S>& g) const {
    g[W.id].noalias() += x.transpose() * dy;
    g[b.id].row(0) += dy.colwise().sum();
    return dy * W.value.transpose();
  }
};

// ---------------------------------------------------------------------------
// LayerNorm over the feature dimension of each row.
// ---------------------------------------------------------------------------
template <typename S>
struct LayerNorm {
  Param<S> gamma;  // 1 x d
  Param<S> beta;   // 1 x d
  static constexpr double kEps = 1e-5;

  void init(ParamRegistry<S>& reg, const std::string& name, int d) {
    gamma.value = Mat<S>::Ones(1, d);
    beta.value = Mat<S>::Zero(1, d);
    reg.add(gamma, name + ".gamma", false);
    reg.add(beta, name + ".beta", false);
  }

  Mat<S> forward(const Mat<S>& x) const {
    const int d = static_cast<int>(x.cols());
    Mat<S> y(x.rows(), d);
    for (int t = 0; t < x.rows(); ++t) {
      const S mean = x.row(t).mean();
      const S var = (x.row(t).array() - mean).square().sum() / static_cast<S>(d);
      const S rstd = S(1) / std::sqrt(var + static_cast<S>(kEps));
      y.row(t) = ((x.row(t).array() - mean) * rstd) * gamma.value.row(0).array() +
                 beta.value.row(0).array();
    }
    return y;
  }

  Mat<S> backward(const Mat<S>& x, const Mat<S>& dy, Grads<S>& g) const {
    const int d = static_cast<int>(x.cols());
    Mat<S> dx(x.rows(), d);
    for (int t = 0; t < x.rows(); ++t) {
      const S mean = x.row(t).mean();
      const S var = (x.row(t).array() - mean).square().sum() / static_cast<S>(d);
      const S rstd = S(1) / std::sqrt(var + static_cast<S>(kEps));
      Eigen::Array<S, 1, Eigen::Dynamic> xhat = (x.row(t).array() - mean) * rstd;
      Eigen::Array<S, 1, Eigen::Dynamic> dyr = dy.row(t).array();
      g[gamma.id].row(0).array() += dyr * xhat;
      g[beta.id].row(0).array() += dyr;
      Eigen::Array<S, 1, Eigen::Dynamic> dxhat = dyr * gamma.value.row(0).array();
      const S m1 = dxhat.mean();
      const S m2 = (dxhat * xhat).mean();
      dx.row(t).array() = rstd * (dxhat - m1 - xhat * m2);
    }
    return dx;
  }
};

inline double gelu_scalar(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }
inline double gelu_grad_scalar(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
  return cdf + x * pdf;
}

// ---------------------------------------------------------------------------
// Causal multi-head attention. Supports self-attention (kv == q input) and
// cross-channel attention (queries from one channel, keys/values from the
// other); in both cases position t attends to positions <= t only.
// Softmax probabilities are recomputed blockwise in the backward pass
// instead of being cached, keeping memory at O(T d) per instance.
// ---------------------------------------------------------------------------
template <typename S>
struct CausalAttention {
  Linear<S> wq, wk, wv, wo;
  int n_heads = 1;
  int d_head = 1;
  static constexpr int kBlockRows = 128;

  void init(ParamRegistry<S>& reg, const std::string& name, int d, int heads, double init_std,
            Rng rng) {
    n_heads = heads;
    d_head = d / heads;
    wq.init(reg, name + ".q", d, d, init_std, rng.derive("q"));
    wk.init(reg, name + ".k", d, d, init_std, rng.derive("k"));
    wv.init(reg, name + ".v", d, d, init_std, rng.derive("v"));
    wo.init(reg, name + ".o", d, d, init_std, rng.derive("o"));
  }

  struct Cache {
    Mat<S> q, k, v, ctx;
  };

  // Row block [r0, r1) attends to keys [0, r1); the diagonal corner is
  // masked. Returns softmax probabilities for that block.
  Mat<S> block_probs(const Mat<S>& q, const Mat<S>& k, int head, int r0, int r1) const {
    const S scale = S(1) / std::sqrt(static_cast<S>(d_head));
    const auto qh = q.block(r0, head * d_head, r1 - r0, d_head);
    const auto kh = k.block(0, head * d_head, r1, d_head);
    Mat<S> scores = (qh * kh.transpose()) * scale;  // (r1-r0) x r1
    for (int r = 0; r < scores.rows(); ++r) {
      const int t = r0 + r;
      S mx = scores(r, 0);
      for (int j = 1; j <= t; ++j) mx = std::max(mx, scores(r, j));
      S denom = S(0);
      for (int j = 0; j <= t; ++j) {
        scores(r, j) = std::exp(scores(r, j) - mx);
        denom += scores(r, j);
      }
      for (int j = 0; j <= t; ++j) scores(r, j) /= denom;
      for (int j = t + 1; j < scores.cols(); ++j) scores(r, j) = S(0);
    }
    return scores;
  }

  Mat<S> forward(const Mat<S>& x_q, const Mat<S>& x_kv, Cache& cache) const {
    const int t_len = static_cast<int>(x_q.rows());
    cache.q = wq.forward(x_q);
    cache.k = wk.forward(x_kv);
    cache.v = wv.forward(x_kv);
    cache.ctx.setZero(t_len, n_heads * d_head);
    for (int h = 0; h < n_heads; ++h) {
      for (int r0 = 0; r0 < t_len; r0 += kBlockRows) {
        const int r1 = std::min(t_len, r0 + kBlockRows);
        Mat<S> probs = block_probs(cache.q, cache.k, h, r0, r1);
        cache.ctx.block(r0, h * d_head, r1 - r0, d_head).noalias() =
            probs * cache.v.block(0, h * d_head, r1, d_head);
      }
    }
    return wo.forward(cache.ctx);
  }

  // Returns (dx_q, dx_kv) via output parameters.
  void backward(const Mat<S>& x_q, const Mat<S>& x_kv, const Cache& cache, const Mat<S>& dy,
                Grads<S>& g, Mat<S>& dx_q, Mat<S>& dx_kv) const {
    const int t_len = static_cast<int>(x_q.rows());
    const S scale = S(1) / std::sqrt(static_cast<S>(d_head));
    Mat<S> dctx = wo.backward(cache.ctx, dy, g);
    Mat<S> dq = Mat<S>::Zero(t_len, n_heads * d_head);
    Mat<S> dk = Mat<S>::Zero(t_len, n_heads * d_head);
    Mat<S> dv = Mat<S>::Zero(t_len, n_heads * d_head);
    for (int h = 0; h < n_heads; ++h) {
      for (int r0 = 0; r0 < t_len; r0 += kBlockRows) {
        const int r1 = std::min(t_len, r0 + kBlockRows);
        Mat<S> probs = block_probs(cache.q, cache.k, h, r0, r1);
        const auto dctx_b = dctx.block(r0, h * d_head, r1 - r0, d_head);
        Mat<S> dprobs = dctx_b * cache.v.block(0, h * d_head, r1, d_head).transpose();
        // Softmax backward per row: ds = p .* (dp - sum(dp .* p)).
        for (int r = 0; r < dprobs.rows(); ++r) {
          const S dot = (dprobs.row(r).array() * probs.row(r).array()).sum();
          dprobs.row(r).array() = probs.row(r).array() * (dprobs.row(r).array() - dot);
        }
        dq.block(r0, h * d_head, r1 - r0, d_head).noalias() +=
            (dprobs * cache.k.block(0, h * d_head, r1, d_head)) * scale;
        dk.block(0, h * d_head, r1, d_head).noalias() +=
            (dprobs.transpose() * cache.q.block(r0, h * d_head, r1 - r0, d_head)) * scale;
        dv.block(0, h * d_head, r1, d_head).noalias() += probs.transpose() * dctx_b;
      }
    }
    dx_q = wq.backward(x_q, dq, g);
    dx_kv = wk.backward(x_kv, dk, g);
    dx_kv += wv.backward(x_kv, dv, g);
  }
};

// ---------------------------------------------------------------------------
// Pre-LN transformer block: x + Attn(LN1(x)) followed by x + FFN(LN2(x)).
// For cross blocks the attention keys/values come from the other channel,
// normalised by the same LN1.
// ---------------------------------------------------------------------------
template <typename S>
struct TransformerBlock {
  LayerNorm<S> ln1, ln2;
  CausalAttention<S> attn;
  Linear<S> ff1, ff2;
  int d = 0, d_ff = 0;

  void init(ParamRegistry<S>& reg, const std::string& name, int d_model, int heads,
            int ffn_factor, double init_std, Rng rng) {
    d = d_model;
    d_ff = ffn_factor * d_model;
    ln1.init(reg, name + ".ln1", d);
    ln2.init(reg, name + ".ln2", d);
    attn.init(reg, name + ".attn", d, heads, init_std, rng.derive("attn"));
    ff1.init(reg, name + ".ff1", d, d_ff, init_std, rng.derive("ff1"));
    ff2.init(reg, name + ".ff2", d_ff, d, init_std, rng.derive("ff2"));
  }

  struct Cache {
    Mat<S> x_in, x_kv_in;  // block inputs (pre-LN); x_kv_in empty for self
    Mat<S> ln1_q, ln1_kv;
    typename CausalAttention<S>::Cache attn_cache;
    Mat<S> h_mid;     // after attention residual
    Mat<S> ln2_out;
    Mat<S> ff_pre;    // pre-activation
    Mat<S> ff_act;    // gelu output
    Mat<S> drop_attn, drop_ffn;  // inverted-dropout masks, empty when off
    bool cross = false;
  };

  // Inverted dropout on the two residual branches during training.
  struct DropoutCtx {
    double p = 0.0;
    Rng rng;
  };

  // Self-attention form.
  Mat<S> forward(const Mat<S>& x, Cache& c, DropoutCtx* drop = nullptr) const {
    return forward_impl(x, x, false, c, drop);
  }

  // Cross form: queries from x, keys/values from x_other.
  Mat<S> forward_cross(const Mat<S>& x, const Mat<S>& x_other, Cache& c,
                       DropoutCtx* drop = nullptr) const {
    return forward_impl(x, x_other, true, c, drop);
  }

  Mat<S> forward_impl(const Mat<S>& x, const Mat<S>& x_kv, bool cross, Cache& c,
                      DropoutCtx* drop) const {
    c.cross = cross;
    c.x_in = x;
    c.ln1_q = ln1.forward(x);
    if (cross) {
      c.x_kv_in = x_kv;
      c.ln1_kv = ln1.forward(x_kv);
    }
    const Mat<S>& kv = cross ? c.ln1_kv : c.ln1_q;
    Mat<S> attn_out = attn.forward(c.ln1_q, kv, c.attn_cache);
    if (drop != nullptr && drop->p > 0.0) {
      c.drop_attn = dropout_mask(attn_out.rows(), attn_out.cols(), *drop);
      attn_out.array() *= c.drop_attn.array();
    }
    c.h_mid = x + attn_out;
    c.ln2_out = ln2.forward(c.h_mid);
    c.ff_pre = ff1.forward(c.ln2_out);
    c.ff_act = c.ff_pre.unaryExpr([](S v) { return static_cast<S>(gelu_scalar(static_cast<double>(v))); });
    Mat<S> ffn_out = ff2.forward(c.ff_act);
    if (drop != nullptr && drop->p > 0.0) {
      c.drop_ffn = dropout_mask(ffn_out.rows(), ffn_out.cols(), *drop);
      ffn_out.array() *= c.drop_ffn.array();
    }
    return c.h_mid + ffn_out;
  }

  // dx_other accumulates the gradient w.r.t. the other channel's input for
  // cross blocks (left untouched for self blocks).
  Mat<S> backward(const Cache& c, const Mat<S>& dy, Grads<S>& g, Mat<S>* dx_other = nullptr) const {
    // FFN branch.
    Mat<S> d_ffn_out = dy;
    if (c.drop_ffn.size() > 0) d_ffn_out.array() *= c.drop_ffn.array();
    Mat<S> d_act = ff2.backward(c.ff_act, d_ffn_out, g);
    Mat<S> d_pre = d_act.binaryExpr(c.ff_pre, [](S da, S x) {
      return static_cast<S>(static_cast<double>(da) * gelu_grad_scalar(static_cast<double>(x)));
    });
    Mat<S> dh_mid = dy + ln2.backward(c.h_mid, ff1.backward(c.ln2_out, d_pre, g), g);

    // Attention branch.
    const Mat<S>& kv = c.cross ? c.ln1_kv : c.ln1_q;
    Mat<S> d_attn_out = dh_mid;
    if (c.drop_attn.size() > 0) d_attn_out.array() *= c.drop_attn.array();
    Mat<S> d_ln1_q, d_ln1_kv;
    attn.backward(c.ln1_q, kv, c.attn_cache, d_attn_out, g, d_ln1_q, d_ln1_kv);
    if (c.cross) {
      if (dx_other != nullptr) *dx_other += ln1.backward(c.x_kv_in, d_ln1_kv, g);
      return dh_mid + ln1.backward(c.x_in, d_ln1_q, g);
    }
    return dh_mid + ln1.backward(c.x_in, d_ln1_q + d_ln1_kv, g);
  }

 private:
  static Mat<S> dropout_mask(Eigen::Index rows, Eigen::Index cols, DropoutCtx& drop) {
    Mat<S> m(rows, cols);
    const S keep_scale = static_cast<S>(1.0 / (1.0 - drop.p));
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index cc = 0; cc < cols; ++cc)
        m(r, cc) = drop.rng.uniform() < drop.p ? S(0) : keep_scale;
    return m;
  }
};

// Sinusoidal positional encoding, rows 0..t_len-1.
template <typename S>
Mat<S> positional_encoding(int t_len, int d) {
  Mat<S> pe(t_len, d);
  for (int t = 0; t < t_len; ++t) {
    for (int i = 0; i < d; i += 2) {
      const double angle = t / std::pow(10000.0, static_cast<double>(i) / d);
      pe(t, i) = static_cast<S>(std::sin(angle));
      if (i + 1 < d) pe(t, i + 1) = static_cast<S>(std::cos(angle));
    }
  }
  return pe;
}

// ---------------------------------------------------------------------------
// AdamW: decoupled weight decay, applied only to parameters marked decay.
// ---------------------------------------------------------------------------
template <typename S>
class AdamW {
 public:
  AdamW(double lr, double weight_decay, double beta1 = 0.9, double beta2 = 0.999,
        double eps = 1e-8)
      : lr_(lr), wd_(weight_decay), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(ParamRegistry<S>& reg, const Grads<S>& grads) {
    if (m_.empty()) {
      m_.resize(reg.size());
      v_.resize(reg.size());
      for (std::size_t i = 0; i < reg.size(); ++i) {
        m_[i] = Mat<S>::Zero(reg[i].value.rows(), reg[i].value.cols());
        v_[i] = Mat<S>::Zero(reg[i].value.rows(), reg[i].value.cols());
      }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    for (std::size_t i = 0; i < reg.size(); ++i) {
      auto& p = reg[i];
      m_[i] = static_cast<S>(beta1_) * m_[i] + static_cast<S>(1.0 - beta1_) * grads[i];
      v_[i].array() = static_cast<S>(beta2_) * v_[i].array() +
                      static_cast<S>(1.0 - beta2_) * grads[i].array().square();
      auto m_hat = m_[i].array() / static_cast<S>(bc1);
      auto v_hat = v_[i].array() / static_cast<S>(bc2);
      p.value.array() -= static_cast<S>(lr_) * (m_hat / (v_hat.sqrt() + static_cast<S>(eps_)));
      if (p.decay && wd_ > 0.0)
        p.value.array() -= static_cast<S>(lr_ * wd_) * p.value.array();
    }
  }

 private:
  double lr_, wd_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<Mat<S>> m_, v_;
};

// Global gradient-norm clipping; returns the pre-clip norm.
template <typename S>
double clip_grad_norm(Grads<S>& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads) sq += static_cast<double>(g.array().square().sum());
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const S scale = static_cast<S>(max_norm / norm);
    for (auto& g : grads) g *= scale;
  }
  return norm;
}

}  // namespace vapkit
