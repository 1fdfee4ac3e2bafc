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

// Experiment matrix: data, the separately trained stages and the joint arms.

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "advjoint/data/noise.hpp"
#include "advjoint/joint/joint.hpp"
#include "advjoint/joint/pipeline.hpp"

namespace advjoint::joint {

struct DataConfig {
  std::size_t n_train = 96;
  std::size_t n_test = 30;
  double mct_fraction = 0.9;
  double snr_lo_db = 0.0, snr_hi_db = 20.0;
  double probe_snr_db = 5.0;  // fixed-SNR matched test set for enhancement quality
  data::ToyCorpusConfig corpus{};
};

struct ExperimentConfig {
  std::string preset = "toy";
  std::uint64_t seed = 1;
  DataConfig data;
  segan::SeganConfig segan = segan::SeganConfig::toy();
  segan::SeganTrainConfig segan_train;
  signal::FbankConfig fbank = FeatureFrontEnd::default_fbank();
  asr::AsrConfig asr;
  asr::AsrTrainConfig asr_train;
  JointConfig joint;
  DecodeOptions decode;

  /// "toy" shrinks sizes and durations; "paper" keeps the published values.
  static ExperimentConfig make(const std::string& preset, asr::EncoderKind kind = asr::EncoderKind::kConformer);
  void validate() const;
};

/// Toy corpora for one seed; every noisy record keeps a link to its clean source.
struct ToyData {
  data::Corpus train_clean, train_mct;
  data::Corpus test_clean, test_match, test_unmatch;
  data::Corpus test_probe;  // matched noise at probe_snr_db
};
ToyData make_toy_data(const DataConfig& cfg, std::uint64_t seed);

/// Waveforms of every record, for fitting front-end statistics.
std::vector<const signal::Waveform*> waveforms(const data::Corpus& corpus);

using Logger = std::function<void(const std::string&)>;

template <typename T>
struct TrainedAsr {
  std::unique_ptr<asr::AsrTrainer<T>> trainer;
  FeatureFrontEnd frontend;
  std::vector<double> history;  // mean loss per epoch
};

template <typename T>
segan::PretrainResult<T> pretrain_segan(const data::Corpus& noisy_train, const ExperimentConfig& cfg,
                                        const Logger& log = {});

template <typename T>
TrainedAsr<T> train_asr(const data::Corpus& train, const ExperimentConfig& cfg, const Logger& log = {});

/// Joint trainer initialized from the given checkpoints (segan + asr) and trained on `train`.
template <typename T>
std::unique_ptr<JointTrainer<T>> train_joint(const data::Checkpoint& segan_ckpt, const data::Checkpoint& asr_ckpt,
                                             const data::Corpus& train, const ExperimentConfig& cfg,
                                             const JointConfig& joint, const Logger& log = {});

struct ArmResult {
  std::string arm, training;
  CerTable table;
};

struct ExperimentResult {
  std::vector<ArmResult> arms;
  double ssnr_noisy = 0.0, ssnr_enhanced = 0.0;              // matched test set, dB
  double probe_ssnr_noisy = 0.0, probe_ssnr_enhanced = 0.0;  // fixed-SNR matched set, dB
  double segan_seconds = 0.0;                                // wall time of pretraining
  const ArmResult& arm(const std::string& name, const std::string& training) const;
};

/// The full matrix for one seed.
template <typename T>
ExperimentResult run_experiment(const ExperimentConfig& cfg, const Logger& log = {});

/// CSV with columns arm,training,clean,match,unmatch.
std::string cer_csv(const std::vector<ArmResult>& arms);

}  // namespace advjoint::joint
