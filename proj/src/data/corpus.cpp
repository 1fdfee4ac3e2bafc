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

#include "advjoint/data/corpus.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

namespace advjoint::data {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr std::size_t kWords = 12;

std::size_t ms_to_samples(double ms) {
  return static_cast<std::size_t>(std::lround(ms * signal::kSampleRate / 1000.0));
}

}  // namespace

std::vector<std::string> toy_words() {
  std::vector<std::string> w;
  for (std::size_t i = 0; i < kWords; ++i) w.emplace_back(1, static_cast<char>('a' + i));
  return w;
}

std::pair<double, double> word_chirp(std::size_t word) {
  if (word >= kWords) throw DataError("word index " + std::to_string(word) + " out of range");
  // Log-spaced centres from 400 Hz to 2 kHz; even words sweep up, odd words down.
  const double fc = 400.0 * std::pow(5.0, static_cast<double>(word) / (kWords - 1));
  return word % 2 == 0 ? std::pair{0.95 * fc, 1.05 * fc} : std::pair{1.05 * fc, 0.95 * fc};
}

std::vector<double> render_word(std::size_t word, const ToyCorpusConfig& cfg) {
  const auto [f0, f1] = word_chirp(word);
  const std::size_t n = ms_to_samples(cfg.word_ms);
  const std::size_t ramp = ms_to_samples(10.0);
  const double dur = static_cast<double>(n) / signal::kSampleRate;
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / signal::kSampleRate;
    const double phase = 2 * kPi * (f0 * t + (f1 - f0) * t * t / (2 * dur));
    double env = 1.0;
    if (i < ramp) env = 0.5 - 0.5 * std::cos(kPi * static_cast<double>(i) / ramp);
    if (n - 1 - i < ramp) env = 0.5 - 0.5 * std::cos(kPi * static_cast<double>(n - 1 - i) / ramp);
    y[i] = cfg.amplitude * env * std::sin(phase);
  }
  return y;
}

signal::Waveform render_transcript(const std::vector<std::size_t>& words, std::uint64_t seed,
                                   const ToyCorpusConfig& cfg, std::vector<std::size_t>* onsets) {
  if (words.empty()) throw DataError("render_transcript: empty transcript");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> gap(cfg.gap_min_ms, cfg.gap_max_ms);
  std::vector<double> y(ms_to_samples(cfg.edge_ms), 0.0);
  if (onsets) onsets->clear();
  for (std::size_t k = 0; k < words.size(); ++k) {
    if (k > 0) y.resize(y.size() + ms_to_samples(gap(rng)), 0.0);
    if (onsets) onsets->push_back(y.size());
    const auto w = render_word(words[k], cfg);
    y.insert(y.end(), w.begin(), w.end());
  }
  y.resize(y.size() + ms_to_samples(cfg.edge_ms), 0.0);
  std::normal_distribution<double> dither(0.0, cfg.dither);
  for (auto& v : y) v += dither(rng);
  signal::Waveform out;
  out.samples = std::move(y);
  return out;
}

Corpus synth_toy_corpus(std::size_t n_utts, std::uint64_t seed, Split split, const std::string& id_prefix,
                        const ToyCorpusConfig& cfg) {
  if (n_utts < 1) throw DataError("synth_toy_corpus: need at least one utterance");
  if (cfg.min_words < 1 || cfg.max_words < cfg.min_words) throw DataError("synth_toy_corpus: bad word-count range");
  Corpus c;
  c.manifest.vocab = toy_words();
  c.manifest.provenance = {{"generator", kGeneratorVersion}, {"seed", seed}, {"split", to_string(split)},
                           {"n_utts", n_utts}};
  const auto symbols = toy_words();
  for (std::size_t i = 0; i < n_utts; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04zu", i);
    const std::string id = id_prefix + buf;
    std::mt19937_64 rng(derive_seed(seed, id));
    const std::size_t n_words = std::uniform_int_distribution<std::size_t>(cfg.min_words, cfg.max_words)(rng);
    std::uniform_int_distribution<std::size_t> pick(0, kWords - 1);
    std::vector<std::size_t> words(n_words);
    std::string text;
    for (auto& w : words) {
      w = pick(rng);
      text += symbols[w];
    }
    signal::Waveform wav = render_transcript(words, rng(), cfg);
    wav.id = id;
    UtteranceRecord r;
    r.id = id;
    r.audio = "wav/" + id + ".wav";
    r.transcript = text;
    r.split = split;
    c.manifest.records.push_back(r);
    c.audio[id] = std::move(wav);
  }
  return c;
}

Corruption corrupt_record(const UtteranceRecord& rec, const signal::Waveform& clean, const NoiseSpec& noise,
                          Condition condition, double snr_db, std::uint64_t seed) {
  if (condition == Condition::kClean) throw DataError("corrupt_record: condition must be match or unmatch");
  if (is_matched(noise.family) != (condition == Condition::kMatch)) {
    throw DataError("corrupt_record: family '" + to_string(noise.family) + "' is not in the " + to_string(condition) +
                    " set");
  }
  NoiseSpec spec = noise;
  spec.seed = derive_seed(noise.seed ^ seed, rec.id);
  const signal::Waveform nz = synth_noise(spec, clean.size() + signal::kSampleRate);
  signal::MixResult mix = signal::mix_at_snr(clean, nz, snr_db, derive_seed(seed, rec.id + "/offset"));
  Corruption out;
  out.record = rec;
  out.record.id = rec.id + "." + to_string(condition);
  out.record.audio = "wav/" + out.record.id + ".wav";
  out.record.clean_audio = rec.clean_audio ? *rec.clean_audio : rec.audio;
  out.record.condition = condition;
  out.record.snr_db = snr_db;
  out.record.noise = noise.name;
  out.record.clipped = mix.clipped;
  out.noisy = std::move(mix.mixed);
  out.noisy.id = out.record.id;
  return out;
}

Corpus corrupt_split(const Corpus& clean, const NoiseBank& bank, Condition condition, double snr_lo_db,
                     double snr_hi_db, std::uint64_t seed) {
  if (clean.manifest.records.empty()) throw DataError("corrupt_split: empty manifest");
  if (!(snr_lo_db <= snr_hi_db)) throw DataError("corrupt_split: SNR range is empty");
  if (condition == Condition::kClean) throw DataError("corrupt_split: condition must be match or unmatch");
  const auto families = condition == Condition::kMatch ? bank.matched() : bank.unmatched();
  if (families.empty()) throw DataError("corrupt_split: no " + to_string(condition) + " noise families in the bank");
  Corpus out;
  out.manifest.vocab = clean.manifest.vocab;
  out.manifest.provenance = clean.manifest.provenance;
  out.manifest.provenance["corruption"] = {{"condition", to_string(condition)}, {"seed", seed},
                                           {"snr_db", {snr_lo_db, snr_hi_db}}};
  std::mt19937_64 rng(derive_seed(seed, "corrupt/" + to_string(condition)));
  std::uniform_int_distribution<std::size_t> pick(0, families.size() - 1);
  std::uniform_real_distribution<double> snr(snr_lo_db, snr_hi_db);
  for (const auto& r : clean.manifest.records) {
    const NoiseSpec& fam = families[pick(rng)];
    const double s = snr(rng);
    Corruption c = corrupt_record(r, clean.wave(r.id), fam, condition, s, seed);
    out.clean[c.record.id] = clean.wave(r.id);
    out.audio[c.record.id] = std::move(c.noisy);
    out.manifest.records.push_back(std::move(c.record));
  }
  return out;
}

}  // namespace advjoint::data
