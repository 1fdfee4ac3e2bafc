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

#include "advjoint/data/noise.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "advjoint/data/manifest.hpp"

namespace advjoint::data {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kFs = signal::kSampleRate;

struct FamilyName {
  NoiseFamily family;
  const char* name;
};

constexpr FamilyName kFamilies[] = {
    {NoiseFamily::kWhite, "white"},
    {NoiseFamily::kTonalMachinery, "tonal-machinery"},
    {NoiseFamily::kBandpassLow, "bandpass-low"},
    {NoiseFamily::kImpulsive, "impulsive"},
    {NoiseFamily::kEngineHum, "engine-hum"},
    {NoiseFamily::kPink, "pink"},
    {NoiseFamily::kBandpassHigh, "bandpass-high"},
    {NoiseFamily::kAmplitudeModulated, "amplitude-modulated"},
};

// Direct form I biquad.
struct Biquad {
  double b0, b1, b2, a1, a2;
  double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
  double operator()(double x) {
    const double y = b0 * x + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
    x2 = x1;
    x1 = x;
    y2 = y1;
    y1 = y;
    return y;
  }
};

Biquad bandpass(double center, double q) {
  const double w = 2 * kPi * center / kFs, alpha = std::sin(w) / (2 * q), a0 = 1 + alpha;
  return {alpha / a0, 0.0, -alpha / a0, -2 * std::cos(w) / a0, (1 - alpha) / a0};
}

Biquad lowpass(double cutoff, double q) {
  const double w = 2 * kPi * cutoff / kFs, alpha = std::sin(w) / (2 * q), c = std::cos(w), a0 = 1 + alpha;
  return {(1 - c) / 2 / a0, (1 - c) / a0, (1 - c) / 2 / a0, -2 * c / a0, (1 - alpha) / a0};
}

std::vector<double> white(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> x(n);
  for (auto& v : x) v = g(rng);
  return x;
}

std::vector<double> band_noise(std::size_t n, double lo, double hi, std::mt19937_64& rng) {
  const double center = std::sqrt(lo * hi), q = center / (hi - lo);
  Biquad s1 = bandpass(center, q), s2 = bandpass(center, q);
  auto x = white(n + 1024, rng);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = s2(s1(x[i]));
    if (i >= 1024) y[i - 1024] = v;
  }
  return y;
}

// Alternating real pole/zero sections half an octave apart give an average -3 dB/octave.
std::vector<double> pink(std::size_t n, std::mt19937_64& rng) {
  struct Section {
    double b0, b1, a1;
    double x1 = 0, y1 = 0;
  };
  std::vector<Section> sections;
  const double k = 2 * kFs;
  for (double fp = 10.0; fp * std::sqrt(2.0) < 0.45 * kFs; fp *= 2.0) {
    const double a = k * std::tan(kPi * fp * std::sqrt(2.0) / kFs);  // zero
    const double b = k * std::tan(kPi * fp / kFs);                   // pole
    sections.push_back({(k + a) / (k + b), (a - k) / (k + b), (b - k) / (k + b)});
  }
  const std::size_t warm = 8000;
  auto x = white(n + warm, rng);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < x.size(); ++i) {
    double v = x[i];
    for (auto& s : sections) {
      const double out = s.b0 * v + s.b1 * s.x1 - s.a1 * s.y1;
      s.x1 = v;
      s.y1 = out;
      v = out;
    }
    if (i >= warm) y[i - warm] = v;
  }
  return y;
}

std::vector<double> harmonics(std::size_t n, double base, int count, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> phase(0.0, 2 * kPi);
  std::vector<double> y(n, 0.0);
  for (int h = 1; h <= count && base * h < 0.45 * kFs; ++h) {
    const double ph = phase(rng), w = 2 * kPi * base * h / kFs;
    for (std::size_t i = 0; i < n; ++i) y[i] += std::sin(w * static_cast<double>(i) + ph) / h;
  }
  return y;
}

}  // namespace

std::string to_string(NoiseFamily f) {
  for (const auto& e : kFamilies)
    if (e.family == f) return e.name;
  return "white";
}

NoiseFamily noise_family_from_string(const std::string& name) {
  for (const auto& e : kFamilies)
    if (name == e.name) return e.family;
  throw DataError("unknown noise family '" + name + "'");
}

bool is_matched(NoiseFamily f) {
  switch (f) {
    case NoiseFamily::kWhite:
    case NoiseFamily::kTonalMachinery:
    case NoiseFamily::kBandpassLow:
    case NoiseFamily::kImpulsive:
    case NoiseFamily::kEngineHum:
      return true;
    default:
      return false;
  }
}

std::vector<NoiseFamily> matched_families() {
  std::vector<NoiseFamily> out;
  for (const auto& e : kFamilies)
    if (is_matched(e.family)) out.push_back(e.family);
  return out;
}

std::vector<NoiseFamily> unmatched_families() {
  std::vector<NoiseFamily> out;
  for (const auto& e : kFamilies)
    if (!is_matched(e.family)) out.push_back(e.family);
  return out;
}

NoiseSpec NoiseSpec::preset(NoiseFamily f, std::uint64_t seed) {
  NoiseSpec s;
  s.family = f;
  s.name = to_string(f);
  s.seed = seed;
  switch (f) {
    case NoiseFamily::kTonalMachinery: s.base_hz = 150.0; break;
    case NoiseFamily::kBandpassLow: s.band_lo_hz = 150.0; s.band_hi_hz = 800.0; break;
    case NoiseFamily::kImpulsive: s.pulse_rate_hz = 8.0; break;
    case NoiseFamily::kEngineHum: s.base_hz = 50.0; break;
    case NoiseFamily::kBandpassHigh: s.band_lo_hz = 2500.0; s.band_hi_hz = 6000.0; break;
    case NoiseFamily::kAmplitudeModulated:
      s.base_hz = 4.0;
      s.band_lo_hz = 300.0;
      s.band_hi_hz = 3400.0;
      break;
    default: break;
  }
  return s;
}

signal::Waveform synth_noise(const NoiseSpec& spec, std::size_t length) {
  if (length < 1) throw DataError("synth_noise: length must be at least 1");
  std::mt19937_64 rng(derive_seed(spec.seed, spec.name + "/" + to_string(spec.family)));
  std::vector<double> y;
  switch (spec.family) {
    case NoiseFamily::kWhite:
      y = white(length, rng);
      break;
    case NoiseFamily::kPink:
      y = pink(length, rng);
      break;
    case NoiseFamily::kBandpassLow:
    case NoiseFamily::kBandpassHigh:
      if (!(spec.band_lo_hz > 0 && spec.band_hi_hz > spec.band_lo_hz && spec.band_hi_hz < 0.5 * kFs)) {
        throw DataError("synth_noise: '" + spec.name + "' needs 0 < band_lo < band_hi < Nyquist");
      }
      y = band_noise(length, spec.band_lo_hz, spec.band_hi_hz, rng);
      break;
    case NoiseFamily::kTonalMachinery: {
      if (spec.base_hz <= 0) throw DataError("synth_noise: '" + spec.name + "' needs base_hz > 0");
      y = harmonics(length, spec.base_hz, 12, rng);
      const auto w = white(length, rng);
      for (std::size_t i = 0; i < length; ++i) y[i] += 0.1 * w[i];
      break;
    }
    case NoiseFamily::kEngineHum: {
      if (spec.base_hz <= 0) throw DataError("synth_noise: '" + spec.name + "' needs base_hz > 0");
      y = harmonics(length, spec.base_hz, 6, rng);
      Biquad lp1 = lowpass(120.0, 0.707), lp2 = lowpass(120.0, 0.707);
      const auto w = white(length + 2048, rng);
      for (std::size_t i = 0; i < w.size(); ++i) {
        const double r = lp2(lp1(w[i]));
        if (i >= 2048) {
          const std::size_t j = i - 2048;
          const double am = 1.0 + 0.3 * std::sin(2 * kPi * 1.5 * static_cast<double>(j) / kFs);
          y[j] = am * (y[j] + 8.0 * r);
        }
      }
      break;
    }
    case NoiseFamily::kImpulsive: {
      if (spec.pulse_rate_hz <= 0) throw DataError("synth_noise: '" + spec.name + "' needs pulse_rate_hz > 0");
      y = white(length, rng);
      for (auto& v : y) v *= 0.05;
      std::exponential_distribution<double> gap(spec.pulse_rate_hz / kFs);
      std::uniform_real_distribution<double> amp(0.5, 1.0);
      std::normal_distribution<double> g(0.0, 1.0);
      const double tau = 0.003 * kFs;
      for (double t = gap(rng); t < static_cast<double>(length); t += gap(rng)) {
        const double a = amp(rng);
        const std::size_t start = static_cast<std::size_t>(t);
        for (std::size_t i = start; i < length && i < start + static_cast<std::size_t>(8 * tau); ++i) {
          y[i] += a * std::exp(-static_cast<double>(i - start) / tau) * g(rng);
        }
      }
      break;
    }
    case NoiseFamily::kAmplitudeModulated: {
      if (spec.base_hz <= 0 || !(spec.band_hi_hz > spec.band_lo_hz && spec.band_lo_hz > 0)) {
        throw DataError("synth_noise: '" + spec.name + "' needs a modulation rate and a band");
      }
      y = band_noise(length, spec.band_lo_hz, spec.band_hi_hz, rng);
      const double ph = std::uniform_real_distribution<double>(0.0, 2 * kPi)(rng);
      for (std::size_t i = 0; i < length; ++i) {
        y[i] *= 1.0 + 0.9 * std::sin(2 * kPi * spec.base_hz * static_cast<double>(i) / kFs + ph);
      }
      break;
    }
  }
  const double p = signal::mean_power(y);
  if (!(p > 0.0)) throw DataError("synth_noise: '" + spec.name + "' produced a silent signal");
  const double g = 1.0 / std::sqrt(p);
  for (auto& v : y) v *= g;
  signal::Waveform w;
  w.samples = std::move(y);
  w.id = spec.name;
  return w;
}

NoiseBank NoiseBank::standard(std::uint64_t seed) {
  NoiseBank b;
  for (const auto& e : kFamilies) b.specs.push_back(NoiseSpec::preset(e.family, derive_seed(seed, e.name)));
  return b;
}

std::vector<NoiseSpec> NoiseBank::matched() const {
  std::vector<NoiseSpec> out;
  for (const auto& s : specs)
    if (is_matched(s.family)) out.push_back(s);
  return out;
}

std::vector<NoiseSpec> NoiseBank::unmatched() const {
  std::vector<NoiseSpec> out;
  for (const auto& s : specs)
    if (!is_matched(s.family)) out.push_back(s);
  return out;
}

}  // namespace advjoint::data
