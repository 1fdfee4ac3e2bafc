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

// Self-attention speech-enhancement GAN: attention layer, generator,
// discriminator and the least-squares losses.

#pragma once

#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "advjoint/diff/batch_norm.hpp"
#include "advjoint/diff/ops.hpp"
#include "advjoint/diff/params.hpp"

namespace advjoint::segan {

using diff::Rng;
using diff::Shape;
using diff::Tensor;

/// Architecture of G and D. Layer indices in `attention_layers` are 1-based
/// encoder positions.
struct SeganConfig {
  std::size_t chunk = 16384;
  std::vector<std::size_t> filters = {16, 32, 32, 64, 64, 128, 128, 256, 256, 512, 1024};
  std::size_t kernel = 31;
  std::size_t stride = 2;
  std::set<int> attention_layers = {10};
  std::size_t b = 8;  // channel reduction
  std::size_t p = 4;  // key/value pooling
  double leaky_alpha = 0.3;
  double preemph = 0.95;

  static SeganConfig paper();
  /// 4 layers {16,32,64,128}, chunk 1024, attention at layer 3.
  static SeganConfig toy();

  std::size_t layers() const { return filters.size(); }
  /// Time extent after encoder layer i (i = 0 is the input).
  std::size_t length_at(std::size_t i) const;
  /// Latent shape [time, channels], equal to the deepest encoder map.
  Shape z_shape() const { return {length_at(layers()), filters.back()}; }

  /// Throws ConfigurationError when the ladder cannot be built.
  void validate() const;
  std::string fingerprint() const;
};

/// Attention over a [L, C] or [B, L, C] feature map with channel reduction
/// b and key/value max pooling p. F' = beta * O + F.
template <typename T>
class SelfAttention {
 public:
  SelfAttention() = default;
  SelfAttention(diff::ParameterSet<T>& params, const std::string& prefix, std::size_t channels, std::size_t b,
                std::size_t p, Rng& rng);

  /// `attention_map` receives A ([B, L, ceil(L/p)]) when non-null.
  Tensor<T> forward(const Tensor<T>& f, Tensor<T>* attention_map = nullptr) const;

  Tensor<T> beta() const { return beta_; }
  std::size_t channels() const { return channels_; }

 private:
  std::size_t channels_ = 0, b_ = 1, p_ = 1;
  Tensor<T> wq_, wk_, wv_, wo_, beta_;
};

template <typename T>
class Generator {
 public:
  Generator(const SeganConfig& cfg, std::uint64_t seed);

  /// noisy [B, chunk, 1] (or [chunk]) and z [B, z_shape] -> [B, chunk, 1].
  /// `ladder` collects the encoder output shapes when non-null.
  Tensor<T> forward(const Tensor<T>& noisy, const Tensor<T>& z, std::vector<Shape>* ladder = nullptr) const;

  /// Standard normal latent for a batch.
  Tensor<T> sample_z(std::size_t batch, Rng& rng) const;

  /// Enhances a preemphasized 1-d signal of any length by zero padding to
  /// whole chunks, one latent per chunk. Differentiable.
  Tensor<T> enhance_signal(const Tensor<T>& x, Rng& z_rng) const;

  const SeganConfig& config() const { return cfg_; }
  diff::ParameterSet<T>& params() { return *params_; }
  const diff::ParameterSet<T>& params() const { return *params_; }

 private:
  struct Layer {
    Tensor<T> w, b, slope;
    std::unique_ptr<SelfAttention<T>> attn;
  };

  SeganConfig cfg_;
  std::unique_ptr<diff::ParameterSet<T>> params_ = std::make_unique<diff::ParameterSet<T>>();
  std::vector<Layer> enc_, dec_;
};

template <typename T>
class Discriminator {
 public:
  Discriminator(const SeganConfig& cfg, std::uint64_t seed);

  /// candidate and noisy [B, chunk, 1] -> scores [B, 1]. kVirtual needs a
  /// reference batch; kTrain uses the batch's own statistics.
  Tensor<T> forward(const Tensor<T>& candidate, const Tensor<T>& noisy,
                    diff::NormMode mode = diff::NormMode::kVirtual);

  /// Freezes a reference batch of (clean, noisy) pairs for virtual batch
  /// norm and computes its statistics under the current weights. The batch
  /// is kept in the parameter buffers so checkpoints carry it.
  void set_reference(const Tensor<T>& clean, const Tensor<T>& noisy);
  /// Recomputes the reference statistics after a weight update.
  void refresh_reference();
  bool has_reference() const { return params_->has_buffer("ref.clean"); }

  const SeganConfig& config() const { return cfg_; }
  diff::ParameterSet<T>& params() { return *params_; }
  const diff::ParameterSet<T>& params() const { return *params_; }

 private:
  struct Layer {
    Tensor<T> w, b;
    diff::BatchNorm<T> bn;
    std::unique_ptr<SelfAttention<T>> attn;
  };

  Tensor<T> run(const Tensor<T>& candidate, const Tensor<T>& noisy, diff::NormMode mode, bool capture);

  SeganConfig cfg_;
  std::unique_ptr<diff::ParameterSet<T>> params_ = std::make_unique<diff::ParameterSet<T>>();
  std::vector<Layer> layers_;
  Tensor<T> out_w_, out_b_, head_w_, head_b_;
};

/// 0.5*mean((real-1)^2) + 0.5*mean(fake^2).
template <typename T>
Tensor<T> d_loss(const Tensor<T>& score_real, const Tensor<T>& score_fake);

/// Adversarial part 0.5*mean((fake-1)^2).
template <typename T>
Tensor<T> g_loss_adv(const Tensor<T>& score_fake);

/// lambda * mean|enhanced - clean|.
template <typename T>
Tensor<T> g_loss_l1(const Tensor<T>& enhanced, const Tensor<T>& clean, T lambda);

template <typename T>
Tensor<T> g_loss(const Tensor<T>& score_fake, const Tensor<T>& enhanced, const Tensor<T>& clean, T lambda);

/// Adds a trailing channel axis: [B, L] or [L] -> [B, L, 1].
template <typename T>
Tensor<T> as_chunks(const Tensor<T>& x, std::size_t chunk);

}  // namespace advjoint::segan
