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

// Pipeline stages over a run directory named by the config hash.

#pragma once

#include <exception>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "advjoint/joint/experiment.hpp"

namespace advjoint::cli {

namespace fs = std::filesystem;

/// Process exit statuses. Stable across releases.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,       // anything not listed below
  kExitConfig = 2,        // bad flags, unknown key, invalid value
  kExitMissingInput = 3,  // a referenced file or stage output does not exist
  kExitNonFinite = 4,     // training produced NaN or Inf and was aborted
  kExitIncompatible = 5,  // checkpoint fingerprint, version or CSV schema mismatch
};

class MissingInputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

int exit_code_for(const std::exception_ptr& e);

/// Header line of every CER table.
inline constexpr const char* kCerHeader = "arm,training,clean,match,unmatch";

struct Run {
  fs::path dir;
  joint::ExperimentConfig cfg;
  joint::Logger log;
};

/// Creates out_root/<config hash>/ with config.txt and a log.txt that every
/// message is appended to (and echoed to `echo` when given).
Run open_run(const fs::path& out_root, const joint::ExperimentConfig& cfg, std::ostream* echo = nullptr);

/// Throws MissingInputError listing every absent path.
void require_inputs(const std::vector<fs::path>& paths);

void synth_data(const Run& run);
void train_segan(const Run& run);
/// trainings: "clean" and/or "mct".
void train_asr(const Run& run, const std::vector<std::string>& trainings);
/// arms: "joint" (gamma 0) and/or "joint+gan".
void joint_train(const Run& run, const std::vector<std::string>& arms);
/// Enhances WAV files (or, with no inputs, the matched and unmatched test sets)
/// with the generator of `from` in {segan, joint, joint+gan}. Returns the written files.
std::vector<fs::path> enhance(const Run& run, const std::string& from, const std::vector<fs::path>& inputs,
                              const fs::path& out_dir);
/// Every arm whose checkpoints exist; writes cer.csv, decodes.csv and ssnr.csv.
std::vector<joint::ArmResult> evaluate(const Run& run);

struct ReportRow {
  std::string arm, training;
  std::size_t runs = 0;
  double clean = 0, match = 0, unmatch = 0;  // means over runs
};

/// Merges cer.csv (and ssnr.csv when present) of each run directory into
/// out_dir/merged.csv, cer_per_condition.dat and ssnr_per_arm.dat.
std::vector<ReportRow> report(const std::vector<fs::path>& run_dirs, const fs::path& out_dir);

}  // namespace advjoint::cli
