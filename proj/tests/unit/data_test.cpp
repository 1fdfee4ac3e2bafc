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
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>
#include <cstring>

#include <zlib.h>

#include "advjoint/data/checkpoint.hpp"
#include "advjoint/data/corpus.hpp"
#include "advjoint/data/manifest.hpp"
#include "advjoint/data/noise.hpp"
#include "advjoint/segan/segan.hpp"

namespace advjoint::data {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("advjoint_data_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// Averaged periodogram with a test-side DFT (rectangular window, 512 points).
std::vector<double> periodogram(const std::vector<double>& x, std::size_t frames) {
  const std::size_t n = 512, bins = n / 2 + 1;
  std::vector<double> p(bins, 0.0);
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t k = 0; k < bins; ++k) {
      double re = 0, im = 0;
      for (std::size_t t = 0; t < n; ++t) {
        const double a = 2 * std::numbers::pi * static_cast<double>(k * t) / n;
        re += x[f * n + t] * std::cos(a);
        im -= x[f * n + t] * std::sin(a);
      }
      p[k] += (re * re + im * im) / static_cast<double>(frames);
    }
  }
  return p;
}

// ---- corpus ---------------------------------------------------------------------

TEST(ToyCorpusTest, SameSeedGivesIdenticalCorpus) {
  const auto a = synth_toy_corpus(6, 11), b = synth_toy_corpus(6, 11), c = synth_toy_corpus(6, 12);
  EXPECT_EQ(a.manifest, b.manifest);
  for (const auto& r : a.manifest.records) EXPECT_EQ(a.wave(r.id).samples, b.wave(r.id).samples);
  EXPECT_NE(a.wave("utt0000").samples, c.wave("utt0000").samples);
  EXPECT_THROW(synth_toy_corpus(0, 1), DataError);
}

TEST(ToyCorpusTest, TranscriptLengthsAndSymbols) {
  const auto c = synth_toy_corpus(200, 3);
  std::set<char> seen;
  for (const auto& r : c.manifest.records) {
    EXPECT_GE(r.transcript.size(), 3u);
    EXPECT_LE(r.transcript.size(), 8u);
    for (char ch : r.transcript) seen.insert(ch);
    EXPECT_EQ(r.condition, Condition::kClean);
    EXPECT_FALSE(r.snr_db.has_value());
    for (double v : c.wave(r.id).samples) ASSERT_LE(std::abs(v), 1.0);
  }
  EXPECT_EQ(seen.size(), 12u);
  EXPECT_EQ(toy_words().size(), 12u);
}

TEST(ToyCorpusTest, WordChirpsStayInBandAndAreDistinct) {
  std::vector<std::pair<double, double>> ranges;
  for (std::size_t w = 0; w < 12; ++w) {
    auto [f0, f1] = word_chirp(w);
    EXPECT_GE(std::min(f0, f1), 0.95 * 400.0 - 1e-9);
    EXPECT_LE(std::max(f0, f1), 1.05 * 2000.0 + 1e-9);
    ranges.emplace_back(std::min(f0, f1), std::max(f0, f1));
    EXPECT_EQ(render_word(w).size(), 1600u);
  }
  for (std::size_t w = 1; w < 12; ++w) EXPECT_LT(ranges[w - 1].second, ranges[w].first);
}

// Energy segmentation, then the template with the highest normalized correlation.
std::string matched_filter_decode(const std::vector<double>& x) {
  const std::size_t hop = 80;
  std::vector<double> energy;
  for (std::size_t i = 0; i + hop <= x.size(); i += hop) {
    double e = 0;
    for (std::size_t j = 0; j < hop; ++j) e += x[i + j] * x[i + j];
    energy.push_back(e / hop);
  }
  const double thr = 0.02 * *std::max_element(energy.begin(), energy.end());
  std::vector<std::pair<std::size_t, std::size_t>> segs;
  for (std::size_t i = 0; i < energy.size();) {
    if (energy[i] <= thr) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < energy.size() && energy[j] > thr) ++j;
    segs.emplace_back(i * hop, j * hop);
    i = j;
  }
  std::vector<std::vector<double>> templates;
  for (std::size_t w = 0; w < 12; ++w) templates.push_back(render_word(w));
  std::string out;
  for (auto [s, e] : segs) {
    double best = -1;
    std::size_t best_w = 0;
    for (std::size_t w = 0; w < 12; ++w) {
      const auto& t = templates[w];
      double tn = 0;
      for (double v : t) tn += v * v;
      for (std::ptrdiff_t lag = -240; lag <= 240; lag += 2) {
        const std::ptrdiff_t start = static_cast<std::ptrdiff_t>(s) + lag;
        if (start < 0 || start + static_cast<std::ptrdiff_t>(t.size()) > static_cast<std::ptrdiff_t>(x.size())) continue;
        double dot = 0, xn = 0;
        for (std::size_t k = 0; k < t.size(); ++k) {
          const double v = x[static_cast<std::size_t>(start) + k];
          dot += v * t[k];
          xn += v * v;
        }
        const double score = dot / std::sqrt(tn * xn + 1e-30);
        if (score > best) {
          best = score;
          best_w = w;
        }
      }
    }
    (void)e;
    out += static_cast<char>('a' + best_w);
  }
  return out;
}

TEST(ToyCorpusTest, MatchedFilterRecoversTranscripts) {
  const auto c = synth_toy_corpus(10, 21);
  for (const auto& r : c.manifest.records) EXPECT_EQ(matched_filter_decode(c.wave(r.id).samples), r.transcript);
  std::vector<std::size_t> onsets;
  const auto w = render_transcript({0, 11, 5, 5}, 4, {}, &onsets);
  EXPECT_EQ(matched_filter_decode(w.samples), "alff");
  ASSERT_EQ(onsets.size(), 4u);
  EXPECT_EQ(onsets[0], 640u);
  for (std::size_t k = 1; k < 4; ++k) {
    const std::size_t gap = onsets[k] - onsets[k - 1] - 1600;
    EXPECT_GE(gap, 320u);
    EXPECT_LE(gap, 800u);
  }
}

// ---- noise -------------------------------------------------------------------------

TEST(NoiseTest, FamilySetsAreDisjoint) {
  const auto m = matched_families(), u = unmatched_families();
  EXPECT_EQ(m.size(), 5u);
  EXPECT_EQ(u.size(), 3u);
  for (auto f : m) EXPECT_EQ(std::count(u.begin(), u.end(), f), 0);
  const auto bank = NoiseBank::standard(1);
  EXPECT_EQ(bank.matched().size(), 5u);
  EXPECT_EQ(bank.unmatched().size(), 3u);
  EXPECT_THROW(noise_family_from_string("babble"), DataError);
  for (auto f : m) EXPECT_EQ(noise_family_from_string(to_string(f)), f);
}

TEST(NoiseTest, EveryFamilyHasUnitPowerAndIsDeterministic) {
  for (const auto& spec : NoiseBank::standard(5).specs) {
    const auto a = synth_noise(spec, 12345);
    EXPECT_EQ(a.size(), 12345u);
    EXPECT_NEAR(signal::mean_power(a.samples), 1.0, 1e-6) << spec.name;
    EXPECT_EQ(a.samples, synth_noise(spec, 12345).samples) << spec.name;
    auto other = spec;
    other.seed += 1;
    EXPECT_NE(a.samples, synth_noise(other, 12345).samples) << spec.name;
  }
  EXPECT_NEAR(signal::mean_power(synth_noise(NoiseSpec::preset(NoiseFamily::kWhite, 1), 1).samples), 1.0, 1e-6);
  EXPECT_THROW(synth_noise(NoiseSpec::preset(NoiseFamily::kWhite), 0), DataError);
}

TEST(NoiseTest, WhiteSpectrumIsFlat) {
  const auto x = synth_noise(NoiseSpec::preset(NoiseFamily::kWhite, 3), 512 * 100);
  const auto p = periodogram(x.samples, 100);
  const auto [lo, hi] = std::minmax_element(p.begin() + 1, p.end() - 1);
  EXPECT_LT(*hi / *lo, 3.0);
}

TEST(NoiseTest, PinkSlopeIsMinusThreeDbPerOctave) {
  const auto x = synth_noise(NoiseSpec::preset(NoiseFamily::kPink, 3), 512 * 100);
  const auto p = periodogram(x.samples, 100);
  double sx = 0, sy = 0, sxx = 0, sxy = 0, n = 0;
  for (std::size_t k = 1; k < p.size(); ++k) {
    const double f = k * 16000.0 / 512;
    if (f < 100 || f > 4000) continue;
    const double lx = std::log2(f), ly = 10 * std::log10(p[k]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    n += 1;
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  EXPECT_NEAR(slope, -3.0, 0.5);
}

TEST(NoiseTest, BandFamiliesConcentrateEnergyInBand) {
  for (auto f : {NoiseFamily::kBandpassLow, NoiseFamily::kBandpassHigh}) {
    const auto spec = NoiseSpec::preset(f, 2);
    const auto p = periodogram(synth_noise(spec, 512 * 20).samples, 20);
    double in = 0, total = 0;
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double hz = k * 16000.0 / 512;
      total += p[k];
      if (hz >= 0.5 * spec.band_lo_hz && hz <= 2 * spec.band_hi_hz) in += p[k];
    }
    EXPECT_GT(in / total, 0.9) << spec.name;
  }
}

// ---- corruption ---------------------------------------------------------------------

TEST(CorruptTest, ConditionsUseTheirFamilySetsAndSnrRange) {
  const auto clean = synth_toy_corpus(30, 7);
  const auto bank = NoiseBank::standard(7);
  std::set<std::string> matched, unmatched;
  for (const auto& s : bank.matched()) matched.insert(s.name);
  for (const auto& s : bank.unmatched()) unmatched.insert(s.name);
  for (auto cond : {Condition::kMatch, Condition::kUnmatch}) {
    const auto noisy = corrupt_split(clean, bank, cond, 0.0, 20.0, 9);
    ASSERT_EQ(noisy.manifest.records.size(), 30u);
    for (const auto& r : noisy.manifest.records) {
      ASSERT_TRUE(r.snr_db && r.noise && r.clean_audio);
      EXPECT_GE(*r.snr_db, 0.0);
      EXPECT_LE(*r.snr_db, 20.0);
      EXPECT_EQ(r.condition, cond);
      EXPECT_EQ((cond == Condition::kMatch ? matched : unmatched).count(*r.noise), 1u) << *r.noise;
      EXPECT_EQ(noisy.wave(r.id).size(), noisy.clean_wave(r.id).size());
    }
    const auto again = corrupt_split(clean, bank, cond, 0.0, 20.0, 9);
    EXPECT_EQ(again.manifest, noisy.manifest);
    for (const auto& r : noisy.manifest.records) EXPECT_EQ(again.wave(r.id).samples, noisy.wave(r.id).samples);
  }
  NoiseBank only_matched{bank.matched()};
  EXPECT_THROW(corrupt_split(clean, only_matched, Condition::kUnmatch, 0, 20, 1), DataError);
  EXPECT_THROW(corrupt_record(clean.manifest.records[0], clean.wave("utt0000"), bank.unmatched()[0],
                              Condition::kMatch, 5.0, 1),
               DataError);
}

TEST(CorruptTest, MixedSignalHasRequestedSnr) {
  const auto clean = synth_toy_corpus(3, 8);
  const auto& rec = clean.manifest.records[1];
  const auto c = corrupt_record(rec, clean.wave(rec.id), NoiseSpec::preset(NoiseFamily::kWhite, 1),
                                Condition::kMatch, 10.0, 3);
  const auto& x = clean.wave(rec.id).samples;
  std::vector<double> diff(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) diff[i] = c.noisy.samples[i] - x[i];
  EXPECT_NEAR(10 * std::log10(signal::mean_power(x) / signal::mean_power(diff)), 10.0, 1e-6);
}

// ---- manifest --------------------------------------------------------------------------

TEST(ManifestTest, RoundTripIsLossless) {
  const auto clean = synth_toy_corpus(4, 1);
  auto noisy = corrupt_split(clean, NoiseBank::standard(1), Condition::kMatch, 0, 20, 2);
  DatasetManifest m = clean.manifest;
  m.records.insert(m.records.end(), noisy.manifest.records.begin(), noisy.manifest.records.end());
  m.records[4].snr_db = 0.1 + 0.2;  // not exactly representable as short decimal
  const auto dir = scratch("manifest");
  save_manifest(dir / "m.jsonl", m);
  EXPECT_EQ(load_manifest(dir / "m.jsonl"), m);
  std::ifstream f(dir / "m.jsonl");
  std::string line;
  std::size_t lines = 0;
  while (std::getline(f, line)) ++lines;
  EXPECT_EQ(lines, m.records.size() + 1);
}

TEST(ManifestTest, InvalidManifestsAreRejected) {
  DatasetManifest m;
  m.records.push_back({"a", "a.wav", std::nullopt, "ab", Split::kTrain, Condition::kClean, std::nullopt, std::nullopt});
  m.records.push_back(m.records[0]);
  EXPECT_THROW(m.validate(), DataError);
  m.records.pop_back();
  m.records[0].snr_db = 3.0;
  EXPECT_THROW(m.validate(), DataError);
  m.records[0].condition = Condition::kMatch;
  EXPECT_NO_THROW(m.validate());
  const auto dir = scratch("bad_manifest");
  {
    std::ofstream f(dir / "v.jsonl");
    f << R"({"format":"advjoint-manifest","version":99,"vocab":[]})" << "\n";
  }
  EXPECT_THROW(load_manifest(dir / "v.jsonl"), DataError);
  {
    std::ofstream f(dir / "k.jsonl");
    f << R"({"format":"advjoint-manifest","version":1,"vocab":[]})" << "\n"
      << R"({"id":"a","audio":"a.wav","transcript":"a","split":"train","condition":"clean","speaker":"x"})" << "\n";
  }
  EXPECT_THROW(load_manifest(dir / "k.jsonl"), DataError);
  EXPECT_THROW(load_manifest(dir / "absent.jsonl"), DataError);
}

TEST(ManifestTest, CorpusRoundTripAndMissingFilesAreListed) {
  const auto clean = synth_toy_corpus(3, 4);
  const auto noisy = corrupt_split(clean, NoiseBank::standard(4), Condition::kUnmatch, 0, 20, 5);
  const auto dir = scratch("corpus");
  save_corpus(dir, noisy);
  const Corpus back = load_corpus(dir / "manifest.jsonl");
  EXPECT_EQ(back.manifest, noisy.manifest);
  for (const auto& r : back.manifest.records) {
    const auto& a = back.wave(r.id).samples;
    const auto& b = noisy.wave(r.id).samples;
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) ASSERT_NEAR(a[i], b[i], 1.0 / 32768.0 + 1e-12);
    EXPECT_EQ(back.clean_wave(r.id).size(), a.size());
  }
  fs::remove(dir / noisy.manifest.records[0].audio);
  fs::remove(dir / noisy.manifest.records[2].audio);
  try {
    load_corpus(dir / "manifest.jsonl");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find(noisy.manifest.records[0].audio), std::string::npos);
    EXPECT_NE(msg.find(noisy.manifest.records[2].audio), std::string::npos);
  }
}

TEST(SeedTest, DerivedSeedsDependOnBothInputs) {
  EXPECT_EQ(derive_seed(1, "x"), derive_seed(1, "x"));
  EXPECT_NE(derive_seed(1, "x"), derive_seed(2, "x"));
  EXPECT_NE(derive_seed(1, "x"), derive_seed(1, "y"));
}

// ---- checkpoints -------------------------------------------------------------------------

Checkpoint toy_generator_checkpoint(std::uint64_t seed) {
  segan::Generator<float> g(segan::SeganConfig::toy(), seed);
  Checkpoint c;
  c.arch = "segan.g";
  c.fingerprint = segan::SeganConfig::toy().fingerprint();
  c.metadata["epoch"] = 3;
  store_params(c, "g.", g.params());
  return c;
}

TEST(CheckpointTest, RoundTripIsBitExact) {
  const auto dir = scratch("ckpt");
  segan::Generator<float> g(segan::SeganConfig::toy(), 3);
  diff::Adam<float> opt(g.params(), 1e-3);
  // Give the optimizer non-trivial state.
  for (auto e : g.params().entries())
    for (auto& v : e.tensor.mutable_grad()) v = 0.01f;
  opt.step();
  Checkpoint c;
  c.arch = "segan.g";
  c.fingerprint = segan::SeganConfig::toy().fingerprint();
  store_params(c, "g.", g.params());
  store_optimizer(c, "g.", opt);
  save_checkpoint(dir / "g.ckpt", c);
  const Checkpoint back = load_checkpoint(dir / "g.ckpt");
  EXPECT_EQ(back, c);
  segan::Generator<float> h(segan::SeganConfig::toy(), 99);
  diff::Adam<float> opt2(h.params(), 0.5);
  restore_params(back, "g.", h.params());
  restore_optimizer(back, "g.", opt2);
  for (std::size_t i = 0; i < g.params().entries().size(); ++i) {
    const auto a = g.params().entries()[i].tensor.values(), b = h.params().entries()[i].tensor.values();
    ASSERT_TRUE(std::equal(a.begin(), a.end(), b.begin()));
  }
  EXPECT_EQ(opt2.steps(), 1);
  EXPECT_EQ(opt2.state(), opt.state());
  EXPECT_EQ(serialize_checkpoint(back), serialize_checkpoint(c));
}

TEST(CheckpointTest, CorruptionIsDetected) {
  const auto dir = scratch("ckpt_bad");
  const std::string bytes = serialize_checkpoint(toy_generator_checkpoint(1));
  try {
    parse_checkpoint(bytes.substr(0, bytes.size() - 100));
    FAIL();
  } catch (const CheckpointError& e) {
    EXPECT_EQ(e.kind(), CheckpointError::Kind::kChecksum);
  }
  std::string flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x40;
  try {
    parse_checkpoint(flipped);
    FAIL();
  } catch (const CheckpointError& e) {
    EXPECT_EQ(e.kind(), CheckpointError::Kind::kChecksum);
  }
  try {
    parse_checkpoint("not a checkpoint");
    FAIL();
  } catch (const CheckpointError& e) {
    EXPECT_EQ(e.kind(), CheckpointError::Kind::kFormat);
  }
  {
    std::ofstream f(dir / "t.ckpt", std::ios::binary);
    f << bytes.substr(0, 40);
  }
  EXPECT_THROW(load_checkpoint(dir / "t.ckpt"), CheckpointError);
  EXPECT_THROW(load_checkpoint(dir / "absent.ckpt"), CheckpointError);
}

TEST(CheckpointTest, VersionMismatchIsRefused) {
  std::string bytes = serialize_checkpoint(toy_generator_checkpoint(1));
  const std::uint32_t v = kCheckpointVersion + 1;
  std::memcpy(bytes.data() + 8, &v, 4);
  // Re-seal so only the version differs.
  const std::string body = bytes.substr(0, bytes.size() - 4);
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size()));
  const std::uint32_t c32 = static_cast<std::uint32_t>(crc);
  std::memcpy(bytes.data() + bytes.size() - 4, &c32, 4);
  try {
    parse_checkpoint(bytes);
    FAIL();
  } catch (const CheckpointError& e) {
    EXPECT_EQ(e.kind(), CheckpointError::Kind::kVersion);
  }
}

TEST(CheckpointTest, ArchitectureMismatchIsRefused) {
  const Checkpoint c = toy_generator_checkpoint(1);
  try {
    require_fingerprint(c, segan::SeganConfig::paper().fingerprint());
    FAIL();
  } catch (const CheckpointError& e) {
    EXPECT_EQ(e.kind(), CheckpointError::Kind::kArchitecture);
  }
  EXPECT_NO_THROW(require_fingerprint(c, segan::SeganConfig::toy().fingerprint()));
  segan::Generator<float> paper(segan::SeganConfig::paper(), 1);
  try {
    restore_params(c, "g.", paper.params());
    FAIL();
  } catch (const CheckpointError& e) {
    EXPECT_TRUE(e.kind() == CheckpointError::Kind::kArchitecture || e.kind() == CheckpointError::Kind::kMissing);
  }
  Checkpoint partial = c;
  partial.tensors.pop_back();
  segan::Generator<float> toy(segan::SeganConfig::toy(), 2);
  try {
    restore_params(partial, "g.", toy.params());
    FAIL();
  } catch (const CheckpointError& e) {
    EXPECT_EQ(e.kind(), CheckpointError::Kind::kMissing);
  }
}

TEST(CheckpointTest, PrecisionConversionOnLoad) {
  Checkpoint c;
  c.put<float>("x", {3}, {1.5f, -2.0f, 0.1f});
  const auto d = c.get<double>("x", 3);
  EXPECT_EQ(d[0], 1.5);
  EXPECT_EQ(d[2], static_cast<double>(0.1f));
  EXPECT_THROW(c.get<double>("x", 4), CheckpointError);
  EXPECT_THROW(c.put<float>("x", {3}, {1, 2, 3}), CheckpointError);
  EXPECT_THROW(c.put<float>("y", {2}, {1, 2, 3}), CheckpointError);
}

}  // namespace
}  // namespace advjoint::data
