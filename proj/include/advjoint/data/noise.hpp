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

#include "advjoint/signal/waveform.hpp"

namespace advjoint::data {

enum class NoiseFamily {
  kWhite,
  kTonalMachinery,
  kBandpassLow,
  kImpulsive,
  kEngineHum,
  kPink,
  kBandpassHigh,
  kAmplitudeModulated,
};

std::string to_string(NoiseFamily f);
NoiseFamily noise_family_from_string(const std::string& name);
/// Training-time families; the rest are held out.
bool is_matched(NoiseFamily f);
std::vector<NoiseFamily> matched_families();
std::vector<NoiseFamily> unmatched_families();

struct NoiseSpec {
  std::string name;
  NoiseFamily family = NoiseFamily::kWhite;
  std::uint64_t seed = 0;
  double band_lo_hz = 0.0, band_hi_hz = 0.0;  // band families
  double base_hz = 0.0;                       // tonal, hum and modulation rate
  double pulse_rate_hz = 0.0;                 // impulsive

  static NoiseSpec preset(NoiseFamily f, std::uint64_t seed = 0);
};

/// Unit-power noise, deterministic per (name, seed, length).
signal::Waveform synth_noise(const NoiseSpec& spec, std::size_t length);

struct NoiseBank {
  std::vector<NoiseSpec> specs;

  /// One preset per family.
  static NoiseBank standard(std::uint64_t seed);
  std::vector<NoiseSpec> matched() const;
  std::vector<NoiseSpec> unmatched() const;
};

}  // namespace advjoint::data
