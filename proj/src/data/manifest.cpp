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

#include "advjoint/data/manifest.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace advjoint::data {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kDev: return "dev";
    case Split::kTest: return "test";
  }
  return "train";
}

std::string to_string(Condition c) {
  switch (c) {
    case Condition::kClean: return "clean";
    case Condition::kMatch: return "match";
    case Condition::kUnmatch: return "unmatch";
  }
  return "clean";
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "dev") return Split::kDev;
  if (s == "test") return Split::kTest;
  throw DataError("unknown split '" + s + "'");
}

Condition condition_from_string(const std::string& s) {
  if (s == "clean") return Condition::kClean;
  if (s == "match") return Condition::kMatch;
  if (s == "unmatch") return Condition::kUnmatch;
  throw DataError("unknown condition '" + s + "'");
}

void DatasetManifest::validate() const {
  std::set<std::string> seen;
  for (const auto& r : records) {
    if (r.id.empty()) throw DataError("manifest: record with empty id");
    if (!seen.insert(r.id).second) throw DataError("manifest: duplicate id '" + r.id + "'");
    if (r.condition == Condition::kClean && r.snr_db) throw DataError("manifest: clean record '" + r.id + "' has an SNR");
    if (r.condition != Condition::kClean && !r.snr_db) throw DataError("manifest: noisy record '" + r.id + "' lacks an SNR");
  }
}

const UtteranceRecord& DatasetManifest::find(const std::string& id) const {
  for (const auto& r : records)
    if (r.id == id) return r;
  throw DataError("manifest: no record '" + id + "'");
}

namespace {

json to_json(const UtteranceRecord& r) {
  json j{{"id", r.id},
         {"audio", r.audio},
         {"transcript", r.transcript},
         {"split", to_string(r.split)},
         {"condition", to_string(r.condition)}};
  if (r.clean_audio) j["clean_audio"] = *r.clean_audio;
  if (r.snr_db) j["snr_db"] = *r.snr_db;
  if (r.noise) j["noise"] = *r.noise;
  if (r.clipped) j["clipped"] = true;
  return j;
}

UtteranceRecord from_json(const json& j) {
  static const std::set<std::string> known{"id", "audio", "clean_audio", "transcript", "split",
                                           "condition", "snr_db", "noise", "clipped"};
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) throw DataError("manifest: unknown record field '" + k + "'");
  }
  UtteranceRecord r;
  r.id = j.at("id").get<std::string>();
  r.audio = j.at("audio").get<std::string>();
  r.transcript = j.at("transcript").get<std::string>();
  r.split = split_from_string(j.at("split").get<std::string>());
  r.condition = condition_from_string(j.at("condition").get<std::string>());
  if (j.contains("clean_audio")) r.clean_audio = j["clean_audio"].get<std::string>();
  if (j.contains("snr_db")) r.snr_db = j["snr_db"].get<double>();
  if (j.contains("noise")) r.noise = j["noise"].get<std::string>();
  r.clipped = j.value("clipped", false);
  return r;
}

}  // namespace

void atomic_write(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot open '" + tmp.string() + "' for writing");
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw DataError("short write to '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

void save_manifest(const fs::path& path, const DatasetManifest& m) {
  m.validate();
  std::ostringstream os;
  // Full round-trip precision for SNR values.
  const json header{{"format", "advjoint-manifest"},
                    {"version", kManifestVersion},
                    {"vocab", m.vocab},
                    {"provenance", m.provenance}};
  os << header.dump() << '\n';
  for (const auto& r : m.records) os << to_json(r).dump() << '\n';
  atomic_write(path, os.str());
}

DatasetManifest load_manifest(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw DataError("manifest '" + path.string() + "' not found");
  std::string line;
  if (!std::getline(f, line)) throw DataError("manifest '" + path.string() + "' is empty");
  DatasetManifest m;
  try {
    const json header = json::parse(line);
    if (header.value("format", "") != "advjoint-manifest") throw DataError("not an advjoint manifest");
    const int version = header.at("version").get<int>();
    if (version != kManifestVersion) {
      throw DataError("manifest version " + std::to_string(version) + " is not supported (expected " +
                      std::to_string(kManifestVersion) + ")");
    }
    m.vocab = header.at("vocab").get<std::vector<std::string>>();
    m.provenance = header.value("provenance", json::object());
    std::size_t lineno = 1;
    while (std::getline(f, line)) {
      ++lineno;
      if (line.empty()) continue;
      try {
        m.records.push_back(from_json(json::parse(line)));
      } catch (const json::exception& e) {
        throw DataError("line " + std::to_string(lineno) + ": " + e.what());
      }
    }
  } catch (const json::exception& e) {
    throw DataError("manifest '" + path.string() + "': " + e.what());
  } catch (const DataError& e) {
    throw DataError("manifest '" + path.string() + "': " + e.what());
  }
  m.validate();
  return m;
}

const signal::Waveform& Corpus::wave(const std::string& id) const {
  auto it = audio.find(id);
  if (it == audio.end()) throw DataError("corpus: no audio for '" + id + "'");
  return it->second;
}

const signal::Waveform& Corpus::clean_wave(const std::string& id) const {
  auto it = clean.find(id);
  if (it != clean.end()) return it->second;
  if (manifest.find(id).condition != Condition::kClean) throw DataError("corpus: no clean reference for '" + id + "'");
  return wave(id);
}

void save_corpus(const fs::path& dir, const Corpus& c, const std::string& manifest_name) {
  c.manifest.validate();
  std::set<std::string> written;
  auto ensure_dir = [&](const std::string& rel) { fs::create_directories((dir / rel).parent_path()); };
  for (const auto& r : c.manifest.records) {
    ensure_dir(r.audio);
    if (r.clean_audio) ensure_dir(*r.clean_audio);
    if (written.insert(r.audio).second) signal::write_wav(dir / r.audio, c.wave(r.id));
    if (r.clean_audio && written.insert(*r.clean_audio).second) {
      signal::write_wav(dir / *r.clean_audio, c.clean_wave(r.id));
    }
  }
  save_manifest(dir / manifest_name, c.manifest);
}

Corpus load_corpus(const fs::path& manifest_path) {
  Corpus c;
  c.manifest = load_manifest(manifest_path);
  if (c.manifest.records.empty()) throw DataError("manifest '" + manifest_path.string() + "' has no records");
  const fs::path base = manifest_path.parent_path();
  std::vector<std::string> missing;
  for (const auto& r : c.manifest.records) {
    if (!fs::exists(base / r.audio)) missing.push_back((base / r.audio).string());
    if (r.clean_audio && !fs::exists(base / *r.clean_audio)) missing.push_back((base / *r.clean_audio).string());
  }
  if (!missing.empty()) {
    std::string msg = "missing audio files (" + std::to_string(missing.size()) + "):";
    for (const auto& m : missing) msg += "\n  " + m;
    throw DataError(msg);
  }
  std::map<std::string, signal::Waveform> cache;
  auto read = [&](const std::string& rel) {
    auto it = cache.find(rel);
    if (it == cache.end()) it = cache.emplace(rel, signal::read_wav(base / rel)).first;
    return it->second;
  };
  for (const auto& r : c.manifest.records) {
    c.audio[r.id] = read(r.audio);
    c.audio[r.id].id = r.id;
    if (r.clean_audio) {
      c.clean[r.id] = read(*r.clean_audio);
      c.clean[r.id].id = r.id;
    }
  }
  return c;
}

std::uint64_t derive_seed(std::uint64_t master, const std::string& name) {
  // FNV-1a over the name, then a splitmix64 finalizer.
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : name) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  std::uint64_t z = h ^ (master + 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace advjoint::data
