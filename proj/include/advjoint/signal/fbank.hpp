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

// Log mel filterbank features built from differentiable primitives, so the
// whole chain from waveform to normalized features carries gradients.

#pragma once

#include <vector>

#include "advjoint/diff/ops.hpp"
#include "advjoint/signal/waveform.hpp"

namespace advjoint::signal {

struct FbankConfig {
  int sample_rate = kSampleRate;
  double win_ms = 25.0;
  double hop_ms = 10.0;
  std::size_t n_fft = 512;
  std::size_t n_mels = 80;
  double fmin = 20.0;
  double fmax = 8000.0;
  double log_floor = 1e-10;
  bool with_deltas = false;
  int delta_window = 2;

  std::size_t win_length() const;
  std::size_t hop_length() const;
  std::size_t dim() const { return with_deltas ? 3 * n_mels : n_mels; }
};

/// Row-major [n_mels, n_fft/2 + 1] triangular filters on the HTK mel scale.
struct MelFilterbank {
  std::size_t n_mels = 0;
  std::size_t n_bins = 0;
  double fmin = 0, fmax = 0;
  std::vector<double> weights;

  double at(std::size_t mel, std::size_t bin) const { return weights[mel * n_bins + bin]; }
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);
MelFilterbank make_mel_filterbank(std::size_t n_mels, std::size_t n_fft, int sample_rate, double fmin, double fmax);

/// Periodic Hann window of the given length.
std::vector<double> hann_window(std::size_t length);

/// Complex STFT frames (no implicit padding).
struct StftFrames {
  std::size_t frames = 0;
  std::size_t bins = 0;
  std::vector<double> re, im;  // [frames, bins]
};

std::size_t frame_count(std::size_t length, std::size_t win, std::size_t hop);
StftFrames stft(const std::vector<double>& x, const FbankConfig& cfg = {});

/// Per-dimension normalization statistics.
struct NormStats {
  std::vector<double> mean;
  std::vector<double> var;

  bool empty() const { return mean.empty(); }
};

/// Accumulates statistics over the rows of many [frames, dim] matrices.
NormStats compute_norm_stats(const std::vector<std::vector<double>>& matrices, std::size_t dim);

/// Regression deltas over time with edge replication, [frames, dim] in and
/// out. Differentiable.
template <typename T>
diff::Tensor<T> delta(const diff::Tensor<T>& features, int window = 2);

/// Waveform -> [frames, dim] log mel features, optionally with deltas and
/// normalization. Holds the constant DFT and mel matrices.
template <typename T>
class FbankExtractor {
 public:
  explicit FbankExtractor(FbankConfig cfg = {});

  const FbankConfig& config() const { return cfg_; }
  const MelFilterbank& mel() const { return mel_; }

  /// Power spectrum [frames, bins] of a 1-d signal.
  diff::Tensor<T> power_spectrum(const diff::Tensor<T>& x) const;
  /// log(max(mel(power), floor)) plus deltas when configured; unnormalized.
  diff::Tensor<T> raw(const diff::Tensor<T>& x) const;
  /// (raw - mean) / sqrt(var); stats must match dim().
  diff::Tensor<T> normalize(const diff::Tensor<T>& feats, const NormStats& stats) const;
  /// raw() followed by normalize().
  diff::Tensor<T> operator()(const diff::Tensor<T>& x, const NormStats& stats) const;

 private:
  FbankConfig cfg_;
  MelFilterbank mel_;
  diff::Tensor<T> cos_, sin_, mel_t_;
};

}  // namespace advjoint::signal
