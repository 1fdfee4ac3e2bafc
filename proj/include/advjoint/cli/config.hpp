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

// Flat key = value configuration with namespaced keys (segan.lambda_l1, ...).

#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "advjoint/joint/experiment.hpp"

namespace advjoint::cli {

/// Environment variables override file values: ADVJOINT_SEGAN_LAMBDA_L1 sets segan.lambda_l1.
inline constexpr const char* kEnvPrefix = "ADVJOINT_";

using Assignment = std::pair<std::string, std::string>;

/// Every accepted key, in serialization order.
std::vector<std::string> config_keys();
/// Environment variable name for a key.
std::string env_name(const std::string& key);

/// Parses "key = value" lines; '#' starts a comment. Keys are not checked here.
std::vector<Assignment> parse_config_text(const std::string& text, const std::string& origin = "<config>");
std::vector<Assignment> read_config_file(const std::filesystem::path& path);
/// ADVJOINT_* variables from envp (null terminated); unknown names are rejected.
std::vector<Assignment> env_assignments(char** envp);

/// Preset defaults (run.preset, run.model) followed by every assignment in
/// order. Unknown keys and malformed values throw ConfigurationError naming the key.
joint::ExperimentConfig resolve_config(const std::vector<Assignment>& assignments);

/// Value of one key under cfg, in the same text form serialize_config writes.
std::string get_value(const joint::ExperimentConfig& cfg, const std::string& key);
/// Every key with its resolved value; parses back to an identical config.
std::string serialize_config(const joint::ExperimentConfig& cfg);
/// 16 hex digits over the serialized config.
std::string config_hash(const joint::ExperimentConfig& cfg);

}  // namespace advjoint::cli
