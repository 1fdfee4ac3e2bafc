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

// Attention, feed-forward and Conformer building blocks over [time, dim]
// sequences.

#pragma once

#include <string>
#include <vector>

#include "advjoint/diff/batch_norm.hpp"
#include "advjoint/diff/ops.hpp"
#include "advjoint/diff/params.hpp"

namespace advjoint::asr {

using diff::Rng;
using diff::Tensor;

/// Train/eval switch plus the dropout stream.
struct Context {
  bool train = false;
  Rng* rng = nullptr;
  double dropout = 0.0;
};

template <typename T>
Tensor<T> maybe_dropout(const Tensor<T>& x, const Context& ctx);

/// softmax(Q K^T / sqrt(d_k) + bias) V. `bias` is a constant [tq, tk]
/// tensor (or undefined); -inf entries mask a key out.
template <typename T>
Tensor<T> scaled_dot_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v, const Tensor<T>& bias,
                               const Context& ctx = {});

/// Additive masks and penalties.
template <typename T>
Tensor<T> causal_mask(std::size_t n);
template <typename T>
Tensor<T> distance_penalty(std::size_t tq, std::size_t tk, double rho);

/// Rows are positions, sin on even dims and cos on odd dims.
template <typename T>
Tensor<T> positional_encoding(std::size_t max_pos, std::size_t d_model);

template <typename T>
class MultiHeadAttention {
 public:
  MultiHeadAttention() = default;
  MultiHeadAttention(diff::ParameterSet<T>& params, const std::string& prefix, std::size_t d_model, std::size_t heads,
                     Rng& rng);

  Tensor<T> forward(const Tensor<T>& q, const Tensor<T>& kv, const Tensor<T>& bias, const Context& ctx) const;

  std::size_t heads() const { return heads_; }
  Tensor<T> wq, bq, wk, bk, wv, bv, wo, bo;

 private:
  std::size_t d_model_ = 0, heads_ = 1;
};

/// act(x W1 + b1) W2 + b2 with ReLU (Transformer) or Swish (Conformer).
template <typename T>
class FeedForward {
 public:
  FeedForward() = default;
  FeedForward(diff::ParameterSet<T>& params, const std::string& prefix, std::size_t d_model, std::size_t d_ff,
              bool swish, Rng& rng);

  Tensor<T> forward(const Tensor<T>& x, const Context& ctx) const;

  Tensor<T> w1, b1, w2, b2;

 private:
  bool swish_ = false;
};

template <typename T>
class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(diff::ParameterSet<T>& params, const std::string& prefix, std::size_t dim);
  Tensor<T> forward(const Tensor<T>& x) const;

  Tensor<T> gamma, beta;
};

/// LN -> pointwise (2d) -> GLU -> depthwise -> batch norm -> Swish ->
/// pointwise -> dropout. The caller adds the residual.
template <typename T>
class ConvModule {
 public:
  ConvModule() = default;
  ConvModule(diff::ParameterSet<T>& params, const std::string& prefix, std::size_t d_model, std::size_t kernel,
             Rng& rng);

  Tensor<T> forward(const Tensor<T>& x, const Context& ctx);

  LayerNorm<T> norm;
  Tensor<T> pw1_w, pw1_b, dw_w, dw_b, pw2_w, pw2_b;
  diff::BatchNorm<T> bn;

 private:
  std::size_t kernel_ = 0;
};

/// Macaron block: half FFN, MHSA, conv, half FFN, final layer norm.
template <typename T>
class ConformerBlock {
 public:
  ConformerBlock() = default;
  ConformerBlock(diff::ParameterSet<T>& params, const std::string& prefix, std::size_t d_model, std::size_t heads,
                 std::size_t d_ff, std::size_t kernel, Rng& rng);

  Tensor<T> forward(const Tensor<T>& x, const Tensor<T>& attn_bias, const Context& ctx);

  LayerNorm<T> ln_ff1, ln_mhsa, ln_ff2, ln_out;
  FeedForward<T> ff1, ff2;
  MultiHeadAttention<T> mhsa;
  ConvModule<T> conv;
};

/// Two stride-2 kernel-3 convolutions (padding 1, ReLU after each) then a
/// projection to d_model. Each stage maps n frames to ceil(n/2).
template <typename T>
class Subsample {
 public:
  Subsample() = default;
  Subsample(diff::ParameterSet<T>& params, const std::string& prefix, std::size_t input_dim, std::size_t channels,
            std::size_t d_model, Rng& rng);

  Tensor<T> forward(const Tensor<T>& feats) const;
  static std::size_t output_frames(std::size_t frames) { return ((frames + 1) / 2 + 1) / 2; }

  Tensor<T> c1_w, c1_b, c2_w, c2_b, proj_w, proj_b;
};

}  // namespace advjoint::asr
