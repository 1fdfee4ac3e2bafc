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

// Attention encoder-decoder recognizers with a CTC branch.

#pragma once

#include <memory>
#include <string>
#include <vector>

#include "advjoint/asr/layers.hpp"

namespace advjoint::asr {

enum class EncoderKind { kTransformer, kConformer };

std::string to_string(EncoderKind kind);
EncoderKind encoder_kind_from_string(const std::string& name);

struct AsrConfig {
  EncoderKind kind = EncoderKind::kTransformer;
  std::size_t input_dim = 240;
  int vocab = 16;
  std::size_t d_model = 256;
  std::size_t heads = 4;
  std::size_t enc_layers = 12;
  std::size_t dec_layers = 6;
  std::size_t d_ff = 2048;
  double dropout = 0.1;
  double ctc_weight = 0.3;
  /// rho in the additive -rho*|i-j| encoder attention penalty; 0 is off.
  double distance_penalty = 0.0;
  double label_smoothing = 0.0;
  bool positional_encoding = true;
  // Conformer only.
  std::size_t conv_kernel = 31;
  std::size_t subsample_channels = 256;
  std::size_t max_len = 512;

  static AsrConfig paper_transformer(std::size_t input_dim, int vocab);
  static AsrConfig paper_conformer(std::size_t input_dim, int vocab);
  /// d_model 64, 4 heads, 2+2 blocks, d_ff 128.
  static AsrConfig toy(EncoderKind kind, std::size_t input_dim, int vocab);

  void validate() const;
  std::string fingerprint() const;
};

template <typename T>
struct AsrLoss {
  Tensor<T> total, ce, ctc;
};

template <typename T>
class AsrModel {
 public:
  AsrModel(const AsrConfig& cfg, std::uint64_t seed);

  /// feats [frames, input_dim] -> memory [frames', d_model].
  Tensor<T> encode(const Tensor<T>& feats, const Context& ctx);
  /// CTC frame log-probabilities [frames', vocab].
  Tensor<T> ctc_log_probs(const Tensor<T>& memory) const;
  /// Decoder logits [prefix, vocab] for a prefix starting with sos.
  Tensor<T> decoder_logits(const Tensor<T>& memory, const std::vector<int>& prefix, const Context& ctx) const;
  /// Next-token log-distribution after `prefix` (eval mode).
  std::vector<double> next_log_probs(const Tensor<T>& memory, const std::vector<int>& prefix) const;

  /// Teacher-forced cross entropy (summed over tokens incl. eos), CTC and
  /// their weighted sum for one utterance.
  AsrLoss<T> loss(const Tensor<T>& feats, const std::vector<int>& targets, const Context& ctx);

  const AsrConfig& config() const { return cfg_; }
  diff::ParameterSet<T>& params() { return *params_; }
  const diff::ParameterSet<T>& params() const { return *params_; }

 private:
  struct EncBlock {
    LayerNorm<T> ln1, ln2;
    MultiHeadAttention<T> mha;
    FeedForward<T> ffn;
  };
  struct DecBlock {
    LayerNorm<T> ln1, ln2, ln3;
    MultiHeadAttention<T> self_attn, cross_attn;
    FeedForward<T> ffn;
  };

  AsrConfig cfg_;
  std::unique_ptr<diff::ParameterSet<T>> params_ = std::make_unique<diff::ParameterSet<T>>();
  Tensor<T> pe_;
  Tensor<T> in_w_, in_b_;
  Subsample<T> subsample_;
  std::vector<EncBlock> enc_;
  std::vector<ConformerBlock<T>> conformer_;
  Tensor<T> ctc_w_, ctc_b_;
  Tensor<T> embed_;
  std::vector<DecBlock> dec_;
  LayerNorm<T> dec_ln_;
  Tensor<T> out_w_, out_b_;
};

}  // namespace advjoint::asr
