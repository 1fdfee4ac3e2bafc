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

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "advjoint/asr/decode.hpp"
#include "advjoint/asr/model.hpp"
#include "advjoint/asr/vocab.hpp"
#include "advjoint/diff/params.hpp"

namespace advjoint::asr {

/// Normalized features of one utterance with its token targets.
struct FeatureUtterance {
  std::string id;
  std::size_t frames = 0, dim = 0;
  std::vector<double> feats;  // row-major [frames, dim]
  std::vector<int> tokens;
  std::string text;
};

struct AsrTrainConfig {
  int epochs = 30;
  std::size_t batch = 8;  // utterances per optimizer step
  diff::LrSchedule schedule{};
  double clip_norm = 5.0;
  std::uint64_t seed = 1;
  std::size_t beam = 1;
  double length_alpha = 1.0;
  std::size_t max_decode_len = 64;

  void validate() const;
};

struct DecodedUtterance {
  std::string id, hyp, ref;
  double cer = 0.0;
};

template <typename T>
class AsrTrainer {
 public:
  AsrTrainer(const AsrConfig& model_cfg, const AsrTrainConfig& cfg, std::uint64_t seed);

  /// Mean joint loss over the epoch; throws NonFiniteError on NaN.
  double train_epoch(const std::vector<FeatureUtterance>& data);

  DecodeResult transcribe(const Tensor<T>& feats);
  std::vector<DecodedUtterance> decode_all(const std::vector<FeatureUtterance>& data, const TokenVocab& vocab);
  /// Total edit distance over total reference length.
  double corpus_cer(const std::vector<FeatureUtterance>& data, const TokenVocab& vocab);

  AsrModel<T>& model() { return model_; }
  diff::Adam<T>& optimizer() { return opt_; }
  const AsrTrainConfig& config() const { return cfg_; }
  Rng& rng() { return rng_; }

 private:
  AsrTrainConfig cfg_;
  AsrModel<T> model_;
  diff::Adam<T> opt_;
  Rng rng_;
};

template <typename T>
Tensor<T> feature_tensor(const FeatureUtterance& u);

/// Eval-mode decode; beam 1 is greedy.
template <typename T>
DecodeResult transcribe(AsrModel<T>& model, const Tensor<T>& feats, std::size_t beam, double length_alpha,
                        std::size_t max_len);

}  // namespace advjoint::asr
