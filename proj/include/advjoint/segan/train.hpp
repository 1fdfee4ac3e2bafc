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

// Adversarial pretraining loop and sliding-window enhancement.

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "advjoint/segan/segan.hpp"
#include "advjoint/signal/waveform.hpp"

namespace advjoint::segan {

struct SeganTrainConfig {
  double lambda_l1 = 100.0;
  double lr = 2e-4;
  std::size_t batch = 50;
  int epochs = 86;
  double chunk_overlap = 0.5;
  std::uint64_t seed = 1;

  void validate() const;
};

/// One preemphasized (clean, noisy) training chunk.
struct ChunkPair {
  std::vector<double> clean, noisy;
};

/// Cuts aligned utterance pairs into chunks with the given overlap. The tail
/// of each utterance is zero padded into a final chunk. Preemphasis is
/// applied per utterance before cutting.
std::vector<ChunkPair> make_chunk_pairs(const std::vector<signal::Waveform>& clean,
                                        const std::vector<signal::Waveform>& noisy, std::size_t chunk,
                                        double overlap, double preemph);

struct EpochLoss {
  int epoch = 0;
  double d_loss = 0.0, g_loss_adv = 0.0, g_loss_l1 = 0.0;
};

struct StepLoss {
  double d_loss = 0.0, g_loss_adv = 0.0, g_loss_l1 = 0.0;
};

/// G, D, their RMSprop states and the latent RNG.
template <typename T>
class SeganTrainer {
 public:
  SeganTrainer(const SeganConfig& arch, const SeganTrainConfig& cfg, std::uint64_t seed);

  /// One D update on a detached G output, then one G update through a
  /// frozen D. Batches are [B, chunk] rows. Sets the virtual batch norm
  /// reference from the first batch seen when none exists.
  StepLoss step(const Tensor<T>& clean, const Tensor<T>& noisy);

  /// Shuffled pass over `data`; throws NonFiniteError on a NaN loss.
  EpochLoss run_epoch(const std::vector<ChunkPair>& data, int epoch);

  Generator<T>& generator() { return g_; }
  Discriminator<T>& discriminator() { return d_; }
  diff::RmsProp<T>& g_optimizer() { return g_opt_; }
  diff::RmsProp<T>& d_optimizer() { return d_opt_; }
  const SeganTrainConfig& config() const { return cfg_; }
  Rng& rng() { return rng_; }

 private:
  SeganTrainConfig cfg_;
  Generator<T> g_;
  Discriminator<T> d_;
  diff::RmsProp<T> g_opt_, d_opt_;
  Rng rng_;
};

template <typename T>
struct PretrainResult {
  std::unique_ptr<SeganTrainer<T>> trainer;
  std::vector<EpochLoss> history;
};

/// Runs cfg.epochs epochs. `on_epoch` (optional) sees every epoch record.
template <typename T>
PretrainResult<T> segan_pretrain(const std::vector<ChunkPair>& data, const SeganConfig& arch,
                                 const SeganTrainConfig& cfg,
                                 const std::function<void(const EpochLoss&)>& on_epoch = {});

/// Fraction of correct real/fake decisions at threshold 0.5 with fixed z.
template <typename T>
double discriminator_accuracy(Generator<T>& g, Discriminator<T>& d, const std::vector<ChunkPair>& data,
                              std::uint64_t z_seed);

/// Preemphasis, chunked enhancement with a latent drawn from `z_seed`,
/// de-emphasis. Output length equals input length.
template <typename T>
signal::Waveform enhance_waveform(const signal::Waveform& x, const Generator<T>& g, std::uint64_t z_seed);

/// CSV with header epoch,d_loss,g_loss_adv,g_loss_l1.
void write_loss_csv(const std::string& path, const std::vector<EpochLoss>& history);

}  // namespace advjoint::segan
