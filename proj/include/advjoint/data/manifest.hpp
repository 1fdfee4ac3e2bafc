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
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "advjoint/signal/waveform.hpp"

namespace advjoint::data {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Split { kTrain, kDev, kTest };
enum class Condition { kClean, kMatch, kUnmatch };

std::string to_string(Split s);
std::string to_string(Condition c);
Split split_from_string(const std::string& s);
Condition condition_from_string(const std::string& s);

struct UtteranceRecord {
  std::string id;
  std::string audio;                // path relative to the manifest directory
  std::optional<std::string> clean_audio;  // paired clean reference, if any
  std::string transcript;
  Split split = Split::kTrain;
  Condition condition = Condition::kClean;
  std::optional<double> snr_db;
  std::optional<std::string> noise;  // noise spec name
  bool clipped = false;  // mixture hit the [-1, 1] rails

  bool operator==(const UtteranceRecord&) const = default;
};

inline constexpr int kManifestVersion = 1;

struct DatasetManifest {
  std::vector<UtteranceRecord> records;
  std::vector<std::string> vocab;
  nlohmann::json provenance = nlohmann::json::object();

  /// Unique ids, clean records carry no SNR, noisy records carry one.
  void validate() const;
  const UtteranceRecord& find(const std::string& id) const;
  bool operator==(const DatasetManifest&) const = default;
};

/// One JSON header line followed by one JSON record per line.
void save_manifest(const std::filesystem::path& path, const DatasetManifest& m);
DatasetManifest load_manifest(const std::filesystem::path& path);

/// Manifest plus its audio, keyed by record id.
struct Corpus {
  DatasetManifest manifest;
  std::map<std::string, signal::Waveform> audio;
  std::map<std::string, signal::Waveform> clean;  // paired references for noisy records

  const signal::Waveform& wave(const std::string& id) const;
  /// Clean reference for a noisy record, or the record's own audio when clean.
  const signal::Waveform& clean_wave(const std::string& id) const;
};

/// Writes every waveform as 16-bit WAV under dir and the manifest as dir/manifest_name.
void save_corpus(const std::filesystem::path& dir, const Corpus& c, const std::string& manifest_name = "manifest.jsonl");
/// Reads the manifest and all referenced audio; every missing file is listed in the error.
Corpus load_corpus(const std::filesystem::path& manifest_path);

/// Writes bytes to path via a temporary file and rename.
void atomic_write(const std::filesystem::path& path, const std::string& bytes);

/// Stable per-item seed derived from a master seed and a name.
std::uint64_t derive_seed(std::uint64_t master, const std::string& name);

}  // namespace advjoint::data
