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
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "advjoint/diff/tensor.hpp"

namespace advjoint::signal {

inline constexpr int kSampleRate = 16000;

/// Raised for silent or otherwise unusable signals (zero power, too short).
class SignalError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Waveform {
  std::vector<double> samples;
  int sample_rate = kSampleRate;
  std::string id;

  std::size_t size() const { return samples.size(); }
};

double mean_power(const std::vector<double>& x);

/// 16-bit PCM mono. Non-16 kHz or non-PCM files are rejected.
Waveform read_wav(const std::filesystem::path& path);
/// Writes 16-bit PCM, hard-clipping to [-1, 1]. Atomic (temp file + rename).
void write_wav(const std::filesystem::path& path, const Waveform& wav);

struct MixResult {
  Waveform mixed;
  double gain = 0.0;         // scale applied to the noise segment
  std::size_t offset = 0;    // start of the noise segment
  bool clipped = false;      // any sample hit the [-1, 1] rails
  double measured_snr_db = 0.0;  // before clipping
};

/// clean + g * noise[offset : offset + len] with g chosen so that the
/// clean-to-scaled-noise power ratio equals snr_db. The offset is drawn from
/// `seed`; the result is hard-clipped to [-1, 1].
MixResult mix_at_snr(const Waveform& clean, const Waveform& noise, double snr_db, std::uint64_t seed);

/// y[0] = x[0], y[n] = x[n] - coeff * x[n-1].
std::vector<double> preemphasis(const std::vector<double>& x, double coeff);
/// Inverse of preemphasis: y[n] = x[n] + coeff * y[n-1].
std::vector<double> deemphasis(const std::vector<double>& x, double coeff);

/// Differentiable versions over a 1-d tensor.
template <typename T>
diff::Tensor<T> preemphasis(const diff::Tensor<T>& x, T coeff);
template <typename T>
diff::Tensor<T> deemphasis(const diff::Tensor<T>& x, T coeff);

struct SsnrConfig {
  double frame_ms = 32.0;
  double floor_db = -10.0;
  double ceil_db = 35.0;
  int sample_rate = kSampleRate;
};

/// Mean over non-overlapping frames of the clamped per-frame SNR in dB. A
/// frame with zero error scores the ceiling; a silent clean frame with
/// nonzero error scores the floor.
double ssnr(const std::vector<double>& clean, const std::vector<double>& processed, const SsnrConfig& cfg = {});

}  // namespace advjoint::signal
