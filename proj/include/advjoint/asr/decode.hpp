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

#include <functional>
#include <string>
#include <vector>

namespace advjoint::asr {

struct Hypothesis {
  std::vector<int> tokens;  // starts with sos
  double log_prob = 0.0;
  bool finished = false;
};

/// Log-distribution over the vocabulary given a prefix.
using StepFn = std::function<std::vector<double>(const std::vector<int>& prefix)>;

struct DecodeResult {
  std::vector<int> tokens;  // without sos; ends with eos unless truncated
  double log_prob = 0.0;
  bool truncated = false;
};

/// ((5 + len) / 6)^alpha.
double length_penalty(std::size_t len, double alpha);

DecodeResult greedy_decode(const StepFn& step, int sos, int eos, std::size_t max_len);

/// Keeps the `beam` best partial hypotheses by log-probability (ties go to
/// the lower token id). Finished hypotheses are ranked by
/// log_prob / length_penalty(len, alpha).
DecodeResult beam_decode(const StepFn& step, int sos, int eos, std::size_t beam, double alpha, std::size_t max_len);

/// Levenshtein distance over code points.
std::size_t edit_distance(const std::vector<std::string>& a, const std::vector<std::string>& b);
/// edit_distance(hyp, ref) / |ref|; throws std::invalid_argument on an
/// empty reference.
double cer(const std::string& hyp, const std::string& ref);

}  // namespace advjoint::asr
