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

#include <nlohmann/json.hpp>

#include "advjoint/diff/params.hpp"

namespace advjoint::data {

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  enum class Kind { kIo, kChecksum, kVersion, kFormat, kMissing, kArchitecture };
  CheckpointError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct TensorRecord {
  std::string name;
  std::string dtype;  // "f32" or "f64"
  diff::Shape shape;
  std::vector<std::uint8_t> bytes;  // little-endian
  bool operator==(const TensorRecord&) const = default;
};

struct Checkpoint {
  std::string arch;         // e.g. "segan", "asr", "pipeline"
  std::string fingerprint;  // architecture descriptor
  nlohmann::json metadata = nlohmann::json::object();
  std::vector<TensorRecord> tensors;

  template <typename T>
  void put(const std::string& name, const diff::Shape& shape, const std::vector<T>& values);
  /// Values converted to T; throws kMissing or kFormat on absence or size mismatch.
  template <typename T>
  std::vector<T> get(const std::string& name, std::size_t expected_size) const;
  bool has(const std::string& name) const;
  const TensorRecord& record(const std::string& name) const;
  bool operator==(const Checkpoint&) const = default;
};

/// magic, version, JSON header, raw buffers, crc32; written atomically.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);
std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(const std::string& bytes);

/// Throws kArchitecture naming both descriptors.
void require_fingerprint(const Checkpoint& ckpt, const std::string& expected);

/// Parameters under "<prefix>p/<name>", buffers under "<prefix>b/<name>".
template <typename T>
void store_params(Checkpoint& ckpt, const std::string& prefix, const diff::ParameterSet<T>& ps);
template <typename T>
void restore_params(const Checkpoint& ckpt, const std::string& prefix, diff::ParameterSet<T>& ps);

template <typename T>
void store_optimizer(Checkpoint& ckpt, const std::string& prefix, const diff::Optimizer<T>& opt);
template <typename T>
void restore_optimizer(const Checkpoint& ckpt, const std::string& prefix, diff::Optimizer<T>& opt);

}  // namespace advjoint::data
