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

// Differentiable primitives. Every function records a backward rule when
// grad mode is on and an input requires a gradient.
//
// Sequence layout convention: [batch, time, channels] (rank 3) or
// [time, channels] (rank 2, implicit batch of one). Convolution weights are
// [width, ch_in, ch_out].

#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "advjoint/diff/tensor.hpp"

namespace advjoint::diff {

// ---- elementwise / structural ------------------------------------------

template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> scale(const Tensor<T>& a, T factor);
template <typename T> Tensor<T> add_scalar(const Tensor<T>& a, T value);
/// x + b with b broadcast over every trailing-dim slice of x.
template <typename T> Tensor<T> add_lastdim(const Tensor<T>& x, const Tensor<T>& b);
/// x * g with g broadcast over every trailing-dim slice of x.
template <typename T> Tensor<T> mul_lastdim(const Tensor<T>& x, const Tensor<T>& g);
template <typename T> Tensor<T> square(const Tensor<T>& a);
template <typename T> Tensor<T> abs(const Tensor<T>& a);
/// log(max(x, floor)); zero gradient where x < floor.
template <typename T> Tensor<T> log_floor(const Tensor<T>& a, T floor);

template <typename T> Tensor<T> sum(const Tensor<T>& a);
template <typename T> Tensor<T> mean(const Tensor<T>& a);

template <typename T> Tensor<T> reshape(const Tensor<T>& a, Shape shape);
/// Swaps the last two axes.
template <typename T> Tensor<T> transpose_last2(const Tensor<T>& a);
template <typename T> Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis);
template <typename T> Tensor<T> slice(const Tensor<T>& a, int axis, std::size_t start, std::size_t length);

// ---- linear algebra ------------------------------------------------------

/// Rank-2 or batched rank-3 product with optional transposition of either
/// operand's last two axes.
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b, bool trans_a = false, bool trans_b = false);

/// y = x·w + b over the trailing axis. `b` may be undefined.
template <typename T> Tensor<T> dense(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b);

// ---- normalization -------------------------------------------------------

template <typename T> Tensor<T> softmax_lastdim(const Tensor<T>& x);
template <typename T> Tensor<T> log_softmax_lastdim(const Tensor<T>& x);

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps);

/// Channel-wise normalization of x viewed as [groups, n, C]. Each group is
/// normalized by statistics that blend a constant prior with the group's own
/// moments: mean = prior_weight*prior_mean + (1-prior_weight)*group_mean, and
/// likewise for the second moment. prior_weight = 0 with one group is the
/// usual training-mode batch norm; a per-example group with prior_weight =
/// N/(N+1) is virtual batch norm against an N-example reference batch.
/// Writes the per-channel moments of the whole input to the out-params when
/// they are non-null.
template <typename T>
Tensor<T> batch_norm_blend(const Tensor<T>& x, std::size_t groups, const std::vector<T>& prior_mean,
                           const std::vector<T>& prior_sqmean, T prior_weight,
                           const Tensor<T>& gamma, const Tensor<T>& beta, T eps,
                           std::vector<T>* batch_mean = nullptr, std::vector<T>* batch_var = nullptr);

/// gamma*(x - mean)/sqrt(var + eps) + beta with constant statistics.
template <typename T>
Tensor<T> batch_norm_fixed(const Tensor<T>& x, const std::vector<T>& mean, const std::vector<T>& var,
                           const Tensor<T>& gamma, const Tensor<T>& beta, T eps);

// ---- activations ----------------------------------------------------------

template <typename T> Tensor<T> relu(const Tensor<T>& x);
template <typename T> Tensor<T> leaky_relu(const Tensor<T>& x, T alpha);
/// Per-channel learned negative slope (slope has the trailing extent of x,
/// or a single element shared by all channels).
template <typename T> Tensor<T> prelu(const Tensor<T>& x, const Tensor<T>& slope);
template <typename T> Tensor<T> sigmoid(const Tensor<T>& x);
template <typename T> Tensor<T> tanh(const Tensor<T>& x);
template <typename T> Tensor<T> swish(const Tensor<T>& x);
/// Splits the trailing axis into [A | B] and returns A * sigmoid(B).
template <typename T> Tensor<T> glu(const Tensor<T>& x);

/// Inverted dropout; identity when p == 0.
template <typename T> Tensor<T> dropout(const Tensor<T>& x, T p, std::mt19937_64& rng);

// ---- sequence ops ------------------------------------------------------------

template <typename T>
Tensor<T> conv1d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, std::size_t stride,
                 std::size_t pad);

/// Adjoint of conv1d. Output length (len-1)*stride - 2*pad + width +
/// output_pad; the full-length result is cropped by `pad` on the left and by
/// pad - output_pad on the right.
template <typename T>
Tensor<T> conv1d_transposed(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b,
                            std::size_t stride, std::size_t pad, std::size_t output_pad = 0);

/// Per-channel convolution, stride 1, weights [width, C].
template <typename T>
Tensor<T> depthwise_conv1d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, std::size_t pad);

/// Max over time windows; ties route the gradient to the lowest index.
template <typename T> Tensor<T> max_pool1d(const Tensor<T>& x, std::size_t width, std::size_t stride);

/// Row lookup into table [V, d] -> [ids.size(), d].
template <typename T> Tensor<T> embedding(const Tensor<T>& table, const std::vector<int>& ids);

/// Cuts a 1-d signal into [frames, width] rows with the given hop.
template <typename T> Tensor<T> frame_signal(const Tensor<T>& x, std::size_t width, std::size_t hop);

/// Sum over rows of -log_softmax(logits)[row, target], skipping rows whose
/// target equals `ignore_index`. With label_smoothing > 0 the target
/// distribution is (1-ls) on the target plus ls/V spread uniformly.
template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, const std::vector<int>& targets, T label_smoothing = T(0),
                        int ignore_index = -1);

}  // namespace advjoint::diff
