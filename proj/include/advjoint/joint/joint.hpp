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

#include "advjoint/asr/model.hpp"
#include "advjoint/diff/params.hpp"
#include "advjoint/joint/pipeline.hpp"
#include "advjoint/segan/segan.hpp"
#include "advjoint/signal/fbank.hpp"

namespace advjoint::joint {

using diff::Tensor;

struct JointConfig {
  double kappa = 6.0;
  double gamma = 3.0;
  double lambda_l1 = 100.0;  // weight inside the enhancement term
  bool freeze_g = false, freeze_d = false, freeze_asr = false;
  double lr_g = 2e-4, lr_d = 2e-4;  // RMSprop
  diff::LrSchedule asr_schedule{};  // Adam; continues from the optimizer's step count
  double clip_norm = 5.0;
  std::size_t batch = 4;
  int epochs = 3;
  std::uint64_t seed = 1;

  void validate() const;
};

/// l_asr + kappa * l_enh + gamma * l_gan; a non-finite component raises NonFiniteError naming it.
double joint_loss(double l_asr, double l_enh, double l_gan, const JointConfig& cfg);
template <typename T>
Tensor<T> joint_loss(const Tensor<T>& l_asr, const Tensor<T>& l_enh, const Tensor<T>& l_gan, const JointConfig& cfg);

struct JointSample {
  std::string id;
  std::vector<double> clean, noisy;  // raw waveforms, same length
  std::vector<int> tokens;
};

/// Pairs every record with its clean reference (clean records pair with themselves).
std::vector<JointSample> make_joint_samples(const data::Corpus& corpus, const asr::TokenVocab& vocab);

struct JointLosses {
  double total = 0, asr = 0, enh = 0, gan = 0, d = 0;
};

template <typename T>
class JointTrainer {
 public:
  JointTrainer(const segan::SeganConfig& segan_cfg, const asr::AsrConfig& asr_cfg, const FeatureFrontEnd& frontend,
               const JointConfig& cfg);

  struct Forward {
    Tensor<T> total, asr, enh, gan;
    Tensor<T> enhanced;  // [chunks, chunk, 1], pre-emphasized
    Tensor<T> clean, noisy;
  };
  /// Composed graph noisy -> G -> de-emphasis -> FBank -> ASR for one utterance. D is used as is.
  Forward forward(const JointSample& s, const Tensor<T>& z, bool train);

  /// One optimizer step per component over the batch (gradients averaged).
  JointLosses step(const std::vector<JointSample>& batch);
  JointLosses run_epoch(const std::vector<JointSample>& data);

  segan::Generator<T>& generator() { return g_; }
  segan::Discriminator<T>& discriminator() { return d_; }
  asr::AsrModel<T>& asr() { return asr_; }
  diff::RmsProp<T>& g_optimizer() { return g_opt_; }
  diff::RmsProp<T>& d_optimizer() { return d_opt_; }
  diff::Adam<T>& asr_optimizer() { return asr_opt_; }
  const JointConfig& config() const { return cfg_; }
  const FeatureFrontEnd& frontend() const { return frontend_; }
  std::int64_t steps() const { return steps_; }
  diff::Rng& rng() { return rng_; }

 private:
  bool updates_d() const { return cfg_.gamma > 0.0 && !cfg_.freeze_d; }

  JointConfig cfg_;
  FeatureFrontEnd frontend_;
  segan::Generator<T> g_;
  segan::Discriminator<T> d_;
  asr::AsrModel<T> asr_;
  signal::FbankExtractor<T> fbank_;
  diff::RmsProp<T> g_opt_, d_opt_;
  diff::Adam<T> asr_opt_;
  diff::Rng rng_;
  std::int64_t steps_ = 0;
};

}  // namespace advjoint::joint
