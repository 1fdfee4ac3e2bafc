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

#include "advjoint/data/manifest.hpp"
#include "advjoint/data/noise.hpp"

namespace advjoint::data {

inline constexpr const char* kGeneratorVersion = "toy-1";

struct ToyCorpusConfig {
  std::size_t min_words = 3, max_words = 8;
  double word_ms = 100.0;
  double gap_min_ms = 20.0, gap_max_ms = 50.0;
  double edge_ms = 40.0;  // leading and trailing silence
  double amplitude = 0.5;
  double dither = 3e-3;   // white floor under the whole utterance
};

/// The 12 word symbols "a".."l".
std::vector<std::string> toy_words();

/// Start and end frequency (Hz) of word i's chirp.
std::pair<double, double> word_chirp(std::size_t word);

/// Noise-free rendering of a single word.
std::vector<double> render_word(std::size_t word, const ToyCorpusConfig& cfg = {});

/// Renders a word-index sequence; onsets (samples) are reported when requested.
signal::Waveform render_transcript(const std::vector<std::size_t>& words, std::uint64_t seed,
                                   const ToyCorpusConfig& cfg = {}, std::vector<std::size_t>* onsets = nullptr);

/// n_utts utterances with 3-8 words each, ids "<prefix>NNNN".
Corpus synth_toy_corpus(std::size_t n_utts, std::uint64_t seed, Split split = Split::kTrain,
                        const std::string& id_prefix = "utt", const ToyCorpusConfig& cfg = {});

/// Mixes one record at the given SNR; the result keeps a link to the clean audio.
struct Corruption {
  UtteranceRecord record;
  signal::Waveform noisy;
};
Corruption corrupt_record(const UtteranceRecord& rec, const signal::Waveform& clean, const NoiseSpec& noise,
                          Condition condition, double snr_db, std::uint64_t seed);

/// Corrupts every record with a family drawn from the condition's set and an SNR in [lo, hi].
Corpus corrupt_split(const Corpus& clean, const NoiseBank& bank, Condition condition, double snr_lo_db,
                     double snr_hi_db, std::uint64_t seed);

}  // namespace advjoint::data
