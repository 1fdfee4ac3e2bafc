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

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "advjoint/signal/fbank.hpp"
#include "advjoint/signal/waveform.hpp"
#include "gradcheck.hpp"

namespace advjoint::signal {
namespace {

using TD = diff::Tensor<double>;

std::vector<double> gaussian(std::size_t n, std::uint64_t seed, double sd = 0.1) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, sd);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

Waveform wav(std::vector<double> s) { return Waveform{std::move(s), kSampleRate, ""}; }

// ---- mixing -----------------------------------------------------------------

TEST(MixAtSnr, EqualPowerZeroDbHasUnitGain) {
  auto c = wav(gaussian(4000, 1));
  auto n = c;
  auto r = mix_at_snr(c, n, 0.0, 7);
  EXPECT_NEAR(r.gain, 1.0, 1e-12);
}

TEST(MixAtSnr, TwentyDbOnEqualPowersGivesTenthGain) {
  auto c = wav(gaussian(4000, 2));
  auto n = c;
  auto r = mix_at_snr(c, n, 20.0, 7);
  EXPECT_NEAR(r.gain, 0.1, 1e-12);
  // power-ratio oracle on the mixture itself
  double pn = 0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    const double d = r.mixed.samples[i] - c.samples[i];
    pn += d * d;
  }
  pn /= static_cast<double>(c.size());
  EXPECT_NEAR(10 * std::log10(mean_power(c.samples) / pn), 20.0, 0.1);
}

TEST(MixAtSnr, MeasuredSnrWithinTenthDbForRandomSignals) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> snr(0, 20);
  for (int trial = 0; trial < 25; ++trial) {
    auto c = wav(gaussian(3000, 100 + trial, 0.05));
    auto n = wav(gaussian(9000, 200 + trial, 0.3));
    const double target = snr(rng);
    auto r = mix_at_snr(c, n, target, trial);
    EXPECT_NEAR(r.measured_snr_db, target, 0.1);
    EXPECT_FALSE(r.clipped);
  }
}

TEST(MixAtSnr, DegenerateInputs) {
  auto n = wav(gaussian(100, 4));
  EXPECT_THROW(mix_at_snr(wav(std::vector<double>(50, 0.0)), n, 5.0, 1), SignalError);
  EXPECT_THROW(mix_at_snr(wav(gaussian(50, 5)), wav(std::vector<double>(100, 0.0)), 5.0, 1), SignalError);
  EXPECT_THROW(mix_at_snr(wav(gaussian(200, 5)), n, 5.0, 1), SignalError);
}

TEST(MixAtSnr, ClipsAndFlags) {
  auto c = wav(std::vector<double>(100, 0.9));
  auto n = wav(gaussian(100, 6, 1.0));
  auto r = mix_at_snr(c, n, 0.0, 1);
  EXPECT_TRUE(r.clipped);
  for (double v : r.mixed.samples) EXPECT_LE(std::abs(v), 1.0);
}

TEST(MixAtSnr, OffsetIsSeedDriven) {
  auto c = wav(gaussian(100, 7));
  auto n = wav(gaussian(5000, 8));
  EXPECT_EQ(mix_at_snr(c, n, 5, 11).offset, mix_at_snr(c, n, 5, 11).offset);
  EXPECT_NE(mix_at_snr(c, n, 5, 11).offset, mix_at_snr(c, n, 5, 12).offset);
}

// ---- preemphasis --------------------------------------------------------------

TEST(Preemphasis, Examples) {
  auto x = gaussian(20, 9);
  EXPECT_EQ(preemphasis(x, 0.0), x);
  auto y = preemphasis(std::vector<double>(5, 1.0), 0.95);
  EXPECT_DOUBLE_EQ(y[0], 1.0);
  for (int i = 1; i < 5; ++i) EXPECT_NEAR(y[i], 0.05, 1e-15);
  for (double v : preemphasis(std::vector<double>(5, 0.0), 0.95)) EXPECT_EQ(v, 0.0);
}

TEST(Preemphasis, IsLinear) {
  auto x = gaussian(64, 10), y = gaussian(64, 11);
  const double a = 0.5, b = -2.0;  // exactly representable scalings
  std::vector<double> combo(64);
  for (int i = 0; i < 64; ++i) combo[i] = a * x[i] + b * y[i];
  auto lhs = preemphasis(combo, 0.95);
  auto px = preemphasis(x, 0.95), py = preemphasis(y, 0.95);
  for (int i = 0; i < 64; ++i) EXPECT_NEAR(lhs[i], a * px[i] + b * py[i], 1e-15);
}

TEST(Preemphasis, DeemphasisInverts) {
  auto x = gaussian(300, 12);
  auto back = deemphasis(preemphasis(x, 0.95), 0.95);
  for (int i = 0; i < 300; ++i) EXPECT_NEAR(back[i], x[i], 1e-12);
}

TEST(Preemphasis, TensorVersionsAgreeAndDifferentiate) {
  std::mt19937_64 rng(13);
  auto x = testing::random_tensor({40}, rng);
  auto y = preemphasis(x, 0.95);
  auto ref = preemphasis(std::vector<double>(x.values().begin(), x.values().end()), 0.95);
  for (int i = 0; i < 40; ++i) EXPECT_NEAR(y.at(i), ref[i], 1e-15);
  auto r1 = testing::gradcheck([](const std::vector<TD>& v) { return testing::project(preemphasis(v[0], 0.95)); }, {x});
  auto r2 = testing::gradcheck([](const std::vector<TD>& v) { return testing::project(deemphasis(v[0], 0.95)); }, {x});
  EXPECT_LT(r1.max_rel_error, 1e-7);
  EXPECT_LT(r2.max_rel_error, 1e-7);
}

// ---- STFT / mel ------------------------------------------------------------------

TEST(Stft, FrameCountForOneSecond) {
  FbankConfig cfg;
  EXPECT_EQ(frame_count(16000, cfg.win_length(), cfg.hop_length()), 98u);
  EXPECT_EQ(stft(std::vector<double>(16000, 0.0), cfg).frames, 98u);
}

TEST(Stft, ZeroSignalGivesZeroFrames) {
  auto s = stft(std::vector<double>(800, 0.0));
  for (double v : s.re) EXPECT_EQ(v, 0.0);
  for (double v : s.im) EXPECT_EQ(v, 0.0);
}

TEST(Stft, BinCenteredSineArgmax) {
  FbankConfig cfg;
  const std::size_t bin = 40;
  const double f = bin * 16000.0 / 512.0;
  std::vector<double> x(4000);
  for (std::size_t n = 0; n < x.size(); ++n) x[n] = std::sin(2 * std::numbers::pi * f * n / 16000.0);
  auto s = stft(x, cfg);
  for (std::size_t fr = 0; fr < s.frames; ++fr) {
    std::size_t best = 0;
    double bestv = -1;
    for (std::size_t k = 0; k < s.bins; ++k) {
      const double m = s.re[fr * s.bins + k] * s.re[fr * s.bins + k] + s.im[fr * s.bins + k] * s.im[fr * s.bins + k];
      if (m > bestv) bestv = m, best = k;
    }
    EXPECT_EQ(best, bin);
  }
}

TEST(Stft, ShortSignalIsError) { EXPECT_THROW(stft(std::vector<double>(100, 0.0)), SignalError); }

TEST(Stft, MatchesPowerSpectrumPath) {
  auto x = gaussian(1200, 14);
  FbankExtractor<double> fe;
  auto s = stft(x);
  auto p = fe.power_spectrum(TD::from({x.size()}, x));
  ASSERT_EQ(p.dim(0), s.frames);
  for (std::size_t i = 0; i < p.numel(); ++i) EXPECT_NEAR(p.at(i), s.re[i] * s.re[i] + s.im[i] * s.im[i], 1e-9);
}

TEST(MelFilterbank, RowsAreTriangularNonNegativeNonEmpty) {
  auto fb = make_mel_filterbank(80, 512, 16000, 20, 8000);
  ASSERT_EQ(fb.n_bins, 257u);
  for (std::size_t m = 0; m < 80; ++m) {
    int nonzero = 0, direction_changes = 0;
    double prev = 0;
    int dir = 1;
    for (std::size_t k = 0; k < fb.n_bins; ++k) {
      const double w = fb.at(m, k);
      EXPECT_GE(w, 0.0);
      if (w > 0) ++nonzero;
      if (dir == 1 && w < prev) dir = -1, ++direction_changes;
      else if (dir == -1 && w > prev) ++direction_changes;
      prev = w;
    }
    EXPECT_GE(nonzero, 1) << "filter " << m;
    EXPECT_LE(direction_changes, 1) << "filter " << m;
  }
}

TEST(MelFilterbank, AllOnesSpectrumGivesPositiveOutputs) {
  auto fb = make_mel_filterbank(80, 512, 16000, 20, 8000);
  for (std::size_t m = 0; m < 80; ++m) {
    double s = 0;
    for (std::size_t k = 0; k < fb.n_bins; ++k) s += fb.at(m, k);
    EXPECT_GT(s, 0.0);
  }
}

// ---- fbank ------------------------------------------------------------------------

TEST(Fbank, Dimensions) {
  auto x = TD::from({4000}, gaussian(4000, 15));
  FbankConfig cfg;
  EXPECT_EQ(FbankExtractor<double>(cfg).raw(x).dim(1), 80u);
  cfg.with_deltas = true;
  EXPECT_EQ(FbankExtractor<double>(cfg).raw(x).dim(1), 240u);
}

TEST(Fbank, ConstantSpectrumNormalizedAgainstItselfIsZero) {
  // A periodic signal whose period divides the hop has identical frames.
  std::vector<double> x(3200);
  for (std::size_t n = 0; n < x.size(); ++n) x[n] = std::sin(2 * std::numbers::pi * 500.0 * (n % 160) / 16000.0);
  FbankExtractor<double> fe;
  auto raw = fe.raw(TD::from({x.size()}, x));
  auto stats = compute_norm_stats({std::vector<double>(raw.values().begin(), raw.values().end())}, 80);
  auto f = fe.normalize(raw, stats);
  for (double v : f.values()) EXPECT_NEAR(v, 0.0, 1e-6);
}

TEST(Fbank, NormalizationInvariantsOverPopulation) {
  FbankConfig cfg;
  cfg.with_deltas = true;
  FbankExtractor<double> fe(cfg);
  std::vector<std::vector<double>> pop;
  std::vector<TD> raws;
  for (int u = 0; u < 3; ++u) {
    auto r = fe.raw(TD::from({2400}, gaussian(2400, 20 + u)));
    raws.push_back(r);
    pop.emplace_back(r.values().begin(), r.values().end());
  }
  auto stats = compute_norm_stats(pop, 240);
  std::vector<double> m(240, 0), v(240, 0);
  std::size_t rows = 0;
  for (auto& r : raws) {
    auto f = fe.normalize(r, stats);
    for (std::size_t i = 0; i < f.numel(); ++i) m[i % 240] += f.at(i);
    rows += f.dim(0);
  }
  for (auto& x : m) x /= static_cast<double>(rows);
  for (auto& r : raws) {
    auto f = fe.normalize(r, stats);
    for (std::size_t i = 0; i < f.numel(); ++i) v[i % 240] += (f.at(i) - m[i % 240]) * (f.at(i) - m[i % 240]);
  }
  for (std::size_t d = 0; d < 240; ++d) {
    EXPECT_NEAR(m[d], 0.0, 1e-6);
    EXPECT_NEAR(v[d] / static_cast<double>(rows), 1.0, 1e-4);
  }
}

TEST(Fbank, GradientMatchesFiniteDifferences) {
  FbankConfig cfg;
  cfg.with_deltas = true;
  FbankExtractor<double> fe(cfg);
  std::mt19937_64 rng(16);
  auto x = testing::random_tensor({720}, rng, -0.5, 0.5);
  auto raw = fe.raw(x);
  auto stats = compute_norm_stats({std::vector<double>(raw.values().begin(), raw.values().end())}, 240);
  auto res = testing::gradcheck([&](const std::vector<TD>& v) { return diff::sum(fe(v[0], stats)); }, {x}, 1e-5,
                                1e-4, 200);
  EXPECT_LT(res.max_rel_error, 1e-4);
}

TEST(Fbank, ShortSignalIsError) {
  FbankExtractor<double> fe;
  EXPECT_THROW(fe.raw(TD::zeros({399})), SignalError);
}

// ---- delta ------------------------------------------------------------------------

TEST(Delta, ConstantOverTimeGivesZero) {
  auto d = delta(TD::full({10, 3}, 4.0), 2);
  for (double v : d.values()) EXPECT_EQ(v, 0.0);
}

TEST(Delta, LinearRampGivesSlopeInInterior) {
  std::vector<double> v(20);
  for (int t = 0; t < 20; ++t) v[t] = 0.75 * t;
  auto d = delta(TD::from({20, 1}, v), 2);
  for (int t = 2; t < 18; ++t) EXPECT_NEAR(d.at(t), 0.75, 1e-12);
}

TEST(Delta, SingleFrameIsZero) {
  auto d = delta(TD::from({1, 4}, {1, 2, 3, 4}), 2);
  for (double v : d.values()) EXPECT_EQ(v, 0.0);
}

TEST(Delta, Gradient) {
  std::mt19937_64 rng(17);
  auto res = testing::gradcheck([](const std::vector<TD>& v) { return testing::project(delta(v[0], 2)); },
                                {testing::random_tensor({7, 3}, rng)});
  EXPECT_LT(res.max_rel_error, 1e-7);
}

// ---- ssnr ---------------------------------------------------------------------------

TEST(Ssnr, IdenticalIsCeiling) {
  auto c = gaussian(4096, 18);
  EXPECT_DOUBLE_EQ(ssnr(c, c), 35.0);
}

TEST(Ssnr, NegatedHasQuarterPowerRatio) {
  // error = 2*clean, so every frame sits at 10*log10(1/4), above the floor
  auto c = gaussian(4096, 19);
  std::vector<double> p(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) p[i] = -c[i];
  EXPECT_NEAR(ssnr(c, p), 10.0 * std::log10(0.25), 1e-12);
}

TEST(Ssnr, LargeErrorClampsToFloor) {
  auto c = gaussian(4096, 19);
  std::vector<double> p(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) p[i] = -9.0 * c[i];
  EXPECT_DOUBLE_EQ(ssnr(c, p), -10.0);
}

TEST(Ssnr, OrthogonalEqualPowerNoiseIsZeroDb) {
  // Per 512-sample frame: clean = sine at bin 8, noise = cosine at bin 8 with
  // equal power; the error is exactly the noise.
  std::vector<double> c(4096), p(4096);
  for (std::size_t i = 0; i < c.size(); ++i) {
    const double ph = 2 * std::numbers::pi * 8.0 * static_cast<double>(i % 512) / 512.0;
    c[i] = 0.3 * std::sin(ph);
    p[i] = c[i] + 0.3 * std::cos(ph);
  }
  EXPECT_NEAR(ssnr(c, p), 0.0, 1e-9);
}

TEST(Ssnr, LengthMismatchIsError) {
  EXPECT_THROW(ssnr(std::vector<double>(10, 0.1), std::vector<double>(11, 0.1)), std::invalid_argument);
}

// ---- wav --------------------------------------------------------------------------

TEST(Wav, RoundTripQuantized) {
  auto dir = std::filesystem::temp_directory_path() / "advjoint_wav_test";
  std::filesystem::create_directories(dir);
  Waveform w = wav(gaussian(1000, 21, 0.2));
  w.samples[3] = 1.7;  // clipped on write
  write_wav(dir / "a.wav", w);
  auto r = read_wav(dir / "a.wav");
  ASSERT_EQ(r.size(), w.size());
  EXPECT_NEAR(r.samples[3], 32767.0 / 32768.0, 1e-12);
  for (std::size_t i = 0; i < w.size(); ++i)
    if (i != 3) EXPECT_NEAR(r.samples[i], w.samples[i], 1.0 / 32768.0);
  write_wav(dir / "b.wav", r);
  EXPECT_EQ(read_wav(dir / "b.wav").samples, r.samples);
  std::filesystem::remove_all(dir);
}

TEST(Wav, RejectsOtherSampleRates) {
  auto dir = std::filesystem::temp_directory_path() / "advjoint_wav_rate";
  std::filesystem::create_directories(dir);
  Waveform w = wav(gaussian(10, 22));
  w.sample_rate = 8000;
  write_wav(dir / "a.wav", w);
  EXPECT_THROW(read_wav(dir / "a.wav"), SignalError);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace advjoint::signal
