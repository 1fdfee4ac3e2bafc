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

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace advjoint::asr {

/// Character vocabulary. Ids 0..3 are blank, sos, eos and pad; symbols
/// follow in the order given. A symbol is one UTF-8 code point.
class TokenVocab {
 public:
  static constexpr int kBlank = 0;
  static constexpr int kSos = 1;
  static constexpr int kEos = 2;
  static constexpr int kPad = 3;

  TokenVocab() = default;
  explicit TokenVocab(const std::vector<std::string>& symbols);

  /// Twelve word symbols "a".."l".
  static TokenVocab toy();

  /// Throws std::invalid_argument on an out-of-vocabulary character.
  std::vector<int> encode(const std::string& text) const;
  /// Drops reserved ids.
  std::string decode(const std::vector<int>& ids) const;

  int size() const { return static_cast<int>(symbols_.size()) + 4; }
  const std::vector<std::string>& symbols() const { return symbols_; }

 private:
  std::vector<std::string> symbols_;
  std::map<std::string, int> index_;
};

/// Splits a UTF-8 string into code points (each as a string).
std::vector<std::string> utf8_chars(const std::string& text);

}  // namespace advjoint::asr
