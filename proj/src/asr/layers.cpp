// Copyright 2026 The advjoint Authors.
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

#include "advjoint/asr/layers.hpp"

#include <cmath>
#include <limits>

namespace advjoint::asr {

using diff::ContractError;
using diff::DimensionError;
using diff::NormMode;

template <typename T>
Tensor<T> maybe_dropout(const Tensor<T>& x, const Context& ctx) {
  if (!ctx.train || ctx.dropout <= 0.0) return x;
  if (ctx.rng == nullptr) throw ContractError("dropout: training context has no random stream");
  return diff::dropout(x, static_cast<T>(ctx.dropout), *ctx.rng);
}

template <typename T>
Tensor<T> scaled_dot_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v, const Tensor<T>& bias,
                               const Context& ctx) {
  if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2) throw DimensionError("attention: expected rank-2 Q, K, V");
  if (q.dim(1) != k.dim(1)) {
    throw DimensionError("attention: axis 'd_k' differs (Q " + std::to_string(q.dim(1)) + ", K " +
                         std::to_string(k.dim(1)) + ")");
  }
  if (k.dim(0) != v.dim(0)) {
    throw DimensionError("attention: axis 't_k' differs (K " + std::to_string(k.dim(0)) + ", V " +
                         std::to_string(v.dim(0)) + ")");
  }
  Tensor<T> s = diff::scale(diff::matmul(q, k, false, true), T(1) / std::sqrt(static_cast<T>(q.dim(1))));
  if (bias.defined()) {
    if (bias.shape() != s.shape()) {
      throw DimensionError("attention: mask " + diff::to_string(bias.shape()) + " does not match scores " +
                           diff::to_string(s.shape()));
    }
    s = diff::add(s, bias);
  }
  return diff::matmul(maybe_dropout(diff::softmax_lastdim(s), ctx), v);
}

template <typename T>
Tensor<T> causal_mask(std::size_t n) {
  std::vector<T> m(n * n, T(0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) m[i * n + j] = -std::numeric_limits<T>::infinity();
  return Tensor<T>::from({n, n}, std::move(m));
}

template <typename T>
Tensor<T> distance_penalty(std::size_t tq, std::size_t tk, double rho) {
  std::vector<T> m(tq * tk);
  for (std::size_t i = 0; i < tq; ++i)
    for (std::size_t j = 0; j < tk; ++j)
      m[i * tk + j] = static_cast<T>(-rho * std::abs(static_cast<double>(i) - static_cast<double>(j)));
  return Tensor<T>::from({tq, tk}, std::move(m));
}

template <typename T>
Tensor<T> positional_encoding(std::size_t max_pos, std::size_t d_model) {
  if (d_model < 2) throw ContractError("positional_encoding: d_model must be >= 2");
  std::vector<T> pe(max_pos * d_model);
  for (std::size_t pos = 0; pos < max_pos; ++pos)
    for (std::size_t i = 0; i < d_model; ++i) {
      const double two_i = static_cast<double>(i - i % 2);
      const double angle = static_cast<double>(pos) / std::pow(10000.0, two_i / static_cast<double>(d_model));
      pe[pos * d_model + i] = static_cast<T>(i % 2 == 0 ? std::sin(angle) : std::cos(angle));
    }
  return Tensor<T>::from({max_pos, d_model}, std::move(pe));
}

template <typename T>
MultiHeadAttention<T>::MultiHeadAttention(diff::ParameterSet<T>& params, const std::string& prefix,
                                          std::size_t d_model, std::size_t heads, Rng& rng)
    : d_model_(d_model), heads_(heads) {
  if (heads == 0 || d_model % heads != 0) {
    throw DimensionError("multi_head_attention: d_model " + std::to_string(d_model) + " not divisible by " +
                         std::to_string(heads) + " heads");
  }
  wq = params.add_uniform(prefix + ".wq", {d_model, d_model}, d_model, rng);
  bq = params.add_constant(prefix + ".bq", {d_model}, T(0));
  wk = params.add_uniform(prefix + ".wk", {d_model, d_model}, d_model, rng);
  bk = params.add_constant(prefix + ".bk", {d_model}, T(0));
  wv = params.add_uniform(prefix + ".wv", {d_model, d_model}, d_model, rng);
  bv = params.add_constant(prefix + ".bv", {d_model}, T(0));
  wo = params.add_uniform(prefix + ".wo", {d_model, d_model}, d_model, rng);
  bo = params.add_constant(prefix + ".bo", {d_model}, T(0));
}

template <typename T>
Tensor<T> MultiHeadAttention<T>::forward(const Tensor<T>& q, const Tensor<T>& kv, const Tensor<T>& bias,
                                         const Context& ctx) const {
  if (q.dim(-1) != d_model_ || kv.dim(-1) != d_model_) {
    throw DimensionError("multi_head_attention: inputs must have " + std::to_string(d_model_) + " channels");
  }
  const Tensor<T> qp = diff::dense(q, wq, bq);
  const Tensor<T> kp = diff::dense(kv, wk, bk);
  const Tensor<T> vp = diff::dense(kv, wv, bv);
  const std::size_t dk = d_model_ / heads_;
  if (heads_ == 1) return diff::dense(scaled_dot_attention(qp, kp, vp, bias, ctx), wo, bo);
  std::vector<Tensor<T>> outs;
  for (std::size_t h = 0; h < heads_; ++h) {
    outs.push_back(scaled_dot_attention(diff::slice(qp, 1, h * dk, dk), diff::slice(kp, 1, h * dk, dk),
                                        diff::slice(vp, 1, h * dk, dk), bias, ctx));
  }
  return diff::dense(diff::concat(outs, 1), wo, bo);
}

template <typename T>
FeedForward<T>::FeedForward(diff::ParameterSet<T>& params, const std::string& prefix, std::size_t d_model,
                            std::size_t d_ff, bool swish, Rng& rng)
    : swish_(swish) {
  w1 = params.add_uniform(prefix + ".w1", {d_model, d_ff}, d_model, rng);
  b1 = params.add_constant(prefix + ".b1", {d_ff}, T(0));
  w2 = params.add_uniform(prefix + ".w2", {d_ff, d_model}, d_ff, rng);
  b2 = params.add_constant(prefix + ".b2", {d_model}, T(0));
}

template <typename T>
Tensor<T> FeedForward<T>::forward(const Tensor<T>& x, const Context& ctx) const {
  Tensor<T> h = diff::dense(x, w1, b1);
  h = swish_ ? diff::swish(h) : diff::relu(h);
  return diff::dense(maybe_dropout(h, ctx), w2, b2);
}

template <typename T>
LayerNorm<T>::LayerNorm(diff::ParameterSet<T>& params, const std::string& prefix, std::size_t dim) {
  gamma = params.add_constant(prefix + ".gamma", {dim}, T(1));
  beta = params.add_constant(prefix + ".beta", {dim}, T(0));
}

template <typename T>
Tensor<T> LayerNorm<T>::forward(const Tensor<T>& x) const {
  return diff::layer_norm(x, gamma, beta, T(1e-5));
}

template <typename T>
ConvModule<T>::ConvModule(diff::ParameterSet<T>& params, const std::string& prefix, std::size_t d_model,
                          std::size_t kernel, Rng& rng)
    : norm(params, prefix + ".ln", d_model), kernel_(kernel) {
  if (kernel % 2 == 0) throw DimensionError("conv_module: kernel must be odd, got " + std::to_string(kernel));
  pw1_w = params.add_uniform(prefix + ".pw1.w", {d_model, 2 * d_model}, d_model, rng);
  pw1_b = params.add_constant(prefix + ".pw1.b", {2 * d_model}, T(0));
  dw_w = params.add_uniform(prefix + ".dw.w", {kernel, d_model}, kernel, rng);
  dw_b = params.add_constant(prefix + ".dw.b", {d_model}, T(0));
  bn = diff::BatchNorm<T>(params, prefix + ".bn", d_model);
  pw2_w = params.add_uniform(prefix + ".pw2.w", {d_model, d_model}, d_model, rng);
  pw2_b = params.add_constant(prefix + ".pw2.b", {d_model}, T(0));
}

template <typename T>
Tensor<T> ConvModule<T>::forward(const Tensor<T>& x, const Context& ctx) {
  Tensor<T> h = diff::glu(diff::dense(norm.forward(x), pw1_w, pw1_b));
  h = diff::depthwise_conv1d(h, dw_w, dw_b, (kernel_ - 1) / 2);
  h = diff::swish(bn.forward(h, ctx.train ? NormMode::kTrain : NormMode::kEval));
  return maybe_dropout(diff::dense(h, pw2_w, pw2_b), ctx);
}

template <typename T>
ConformerBlock<T>::ConformerBlock(diff::ParameterSet<T>& params, const std::string& prefix, std::size_t d_model,
                                  std::size_t heads, std::size_t d_ff, std::size_t kernel, Rng& rng)
    : ln_ff1(params, prefix + ".ln_ff1", d_model),
      ln_mhsa(params, prefix + ".ln_mhsa", d_model),
      ln_ff2(params, prefix + ".ln_ff2", d_model),
      ln_out(params, prefix + ".ln_out", d_model),
      ff1(params, prefix + ".ff1", d_model, d_ff, true, rng),
      ff2(params, prefix + ".ff2", d_model, d_ff, true, rng),
      mhsa(params, prefix + ".mhsa", d_model, heads, rng),
      conv(params, prefix + ".conv", d_model, kernel, rng) {}

template <typename T>
Tensor<T> ConformerBlock<T>::forward(const Tensor<T>& x, const Tensor<T>& attn_bias, const Context& ctx) {
  Tensor<T> h = diff::add(x, diff::scale(maybe_dropout(ff1.forward(ln_ff1.forward(x), ctx), ctx), T(0.5)));
  const Tensor<T> hn = ln_mhsa.forward(h);
  h = diff::add(h, maybe_dropout(mhsa.forward(hn, hn, attn_bias, ctx), ctx));
  h = diff::add(h, conv.forward(h, ctx));
  h = diff::add(h, diff::scale(maybe_dropout(ff2.forward(ln_ff2.forward(h), ctx), ctx), T(0.5)));
  return ln_out.forward(h);
}

template <typename T>
Subsample<T>::Subsample(diff::ParameterSet<T>& params, const std::string& prefix, std::size_t input_dim,
                        std::size_t channels, std::size_t d_model, Rng& rng) {
  c1_w = params.add_uniform(prefix + ".conv1.w", {3, input_dim, channels}, 3 * input_dim, rng);
  c1_b = params.add_constant(prefix + ".conv1.b", {channels}, T(0));
  c2_w = params.add_uniform(prefix + ".conv2.w", {3, channels, channels}, 3 * channels, rng);
  c2_b = params.add_constant(prefix + ".conv2.b", {channels}, T(0));
  proj_w = params.add_uniform(prefix + ".proj.w", {channels, d_model}, channels, rng);
  proj_b = params.add_constant(prefix + ".proj.b", {d_model}, T(0));
}

template <typename T>
Tensor<T> Subsample<T>::forward(const Tensor<T>& feats) const {
  if (feats.rank() != 2) throw DimensionError("subsample: expected [frames, dim]");
  if (feats.dim(0) < 4) {
    throw DimensionError("subsample: needs at least 4 frames, got " + std::to_string(feats.dim(0)));
  }
  Tensor<T> h = diff::relu(diff::conv1d(feats, c1_w, c1_b, 2, 1));
  h = diff::relu(diff::conv1d(h, c2_w, c2_b, 2, 1));
  return diff::dense(h, proj_w, proj_b);
}

#define ADVJOINT_INSTANTIATE_ASR_LAYERS(T)                                                                   \
  template Tensor<T> maybe_dropout<T>(const Tensor<T>&, const Context&);                                     \
  template Tensor<T> scaled_dot_attention<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,           \
                                             const Tensor<T>&, const Context&);                              \
  template Tensor<T> causal_mask<T>(std::size_t);                                                            \
  template Tensor<T> distance_penalty<T>(std::size_t, std::size_t, double);                                  \
  template Tensor<T> positional_encoding<T>(std::size_t, std::size_t);                                       \
  template class MultiHeadAttention<T>;                                                                      \
  template class FeedForward<T>;                                                                             \
  template class LayerNorm<T>;                                                                               \
  template class ConvModule<T>;                                                                              \
  template class ConformerBlock<T>;                                                                          \
  template class Subsample<T>;

ADVJOINT_INSTANTIATE_ASR_LAYERS(float)
ADVJOINT_INSTANTIATE_ASR_LAYERS(double)

}  // namespace advjoint::asr
