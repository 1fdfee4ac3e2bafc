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
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "advjoint/asr/train.hpp"
#include "advjoint/data/checkpoint.hpp"
#include "advjoint/data/corpus.hpp"
#include "advjoint/segan/train.hpp"
#include "advjoint/signal/fbank.hpp"

namespace advjoint::joint {

/// FBank settings plus normalization statistics frozen from ASR training data.
struct FeatureFrontEnd {
  signal::FbankConfig fbank = default_fbank();
  signal::NormStats stats;

  static signal::FbankConfig default_fbank();
  /// Statistics over the given waveforms.
  static FeatureFrontEnd fit(const std::vector<const signal::Waveform*>& train,
                             const signal::FbankConfig& fbank = default_fbank());
  /// Normalized features, row-major [frames, dim].
  std::vector<double> features(const signal::Waveform& w) const;
  std::size_t dim() const { return fbank.dim(); }
  std::string fingerprint() const;

 private:
  mutable std::shared_ptr<signal::FbankExtractor<double>> extractor_;
};

/// Normalized features and tokens for every record, in manifest order.
std::vector<asr::FeatureUtterance> make_feature_set(const data::Corpus& corpus, const FeatureFrontEnd& frontend,
                                                    const asr::TokenVocab& vocab);

/// Same, after passing every waveform through the generator.
template <typename T>
std::vector<asr::FeatureUtterance> make_enhanced_feature_set(const data::Corpus& corpus, const segan::Generator<T>& g,
                                                             const FeatureFrontEnd& frontend,
                                                             const asr::TokenVocab& vocab, std::uint64_t z_seed);

/// Multi-condition training set: round(fraction * n) records mixed with matched noise at U[lo, hi] dB.
data::Corpus build_mct_dataset(const data::Corpus& clean, const data::NoiseBank& bank, std::uint64_t seed,
                               double fraction = 0.9, double snr_lo_db = 0.0, double snr_hi_db = 20.0);

/// (clean, noisy) chunk pairs of every noisy record, pre-emphasized.
std::vector<segan::ChunkPair> make_segan_pairs(const data::Corpus& corpus, const segan::SeganConfig& cfg,
                                               double overlap);

struct DecodeOptions {
  std::size_t beam = 12;
  double length_alpha = 1.0;
  std::size_t max_len = 64;
};

struct CerRow {
  std::string condition, id, ref, hyp;
  double cer = 0.0;
};

struct CerTable {
  std::map<std::string, double> cer;  // condition -> corpus CER (total edits / total reference chars)
  std::vector<CerRow> rows;
  double at(const std::string& condition) const;
};

/// Decodes every test set; g == nullptr skips enhancement.
template <typename T>
CerTable evaluate_pipeline(const segan::Generator<T>* g, asr::AsrModel<T>& model,
                           const FeatureFrontEnd& frontend, const asr::TokenVocab& vocab,
                           const std::map<std::string, const data::Corpus*>& tests, const DecodeOptions& opts,
                           std::uint64_t z_seed);

/// Mean segmental SNR of processed noisy records against their clean references.
template <typename T>
double mean_ssnr(const data::Corpus& noisy, const segan::Generator<T>* g, std::uint64_t z_seed);

// ---- checkpoints ---------------------------------------------------------------

std::string pipeline_fingerprint(const segan::SeganConfig& s, const asr::AsrConfig& a, const FeatureFrontEnd& f);

template <typename T>
data::Checkpoint segan_checkpoint(const segan::Generator<T>& g, const segan::Discriminator<T>& d,
                                  const diff::Optimizer<T>* g_opt = nullptr, const diff::Optimizer<T>* d_opt = nullptr);
template <typename T>
void restore_segan(const data::Checkpoint& c, segan::Generator<T>& g, segan::Discriminator<T>* d = nullptr);

template <typename T>
data::Checkpoint asr_checkpoint(const asr::AsrModel<T>& m, const FeatureFrontEnd& f,
                                const diff::Optimizer<T>* opt = nullptr);
/// Restores parameters (and optimizer state when given) and returns the stored front-end.
template <typename T>
FeatureFrontEnd restore_asr(const data::Checkpoint& c, asr::AsrModel<T>& m, diff::Optimizer<T>* opt = nullptr);

template <typename T>
data::Checkpoint pipeline_checkpoint(const segan::Generator<T>& g, const segan::Discriminator<T>& d,
                                     const asr::AsrModel<T>& m, const FeatureFrontEnd& f, std::int64_t step);
/// Returns the stored front-end and step; refuses a different architecture.
template <typename T>
std::pair<FeatureFrontEnd, std::int64_t> restore_pipeline(const data::Checkpoint& c, segan::Generator<T>& g,
                                                          segan::Discriminator<T>& d, asr::AsrModel<T>& m);

void store_frontend(data::Checkpoint& c, const FeatureFrontEnd& f);
FeatureFrontEnd load_frontend(const data::Checkpoint& c);

}  // namespace advjoint::joint
