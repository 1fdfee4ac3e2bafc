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

#include "advjoint/asr/vocab.hpp"

namespace advjoint::asr {

std::vector<std::string> utf8_chars(const std::string& text) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < text.size();) {
    const auto c = static_cast<unsigned char>(text[i]);
    std::size_t n = 1;
    if (c >= 0xF0) {
      n = 4;
    } else if (c >= 0xE0) {
      n = 3;
    } else if (c >= 0xC0) {
      n = 2;
    }
    if (i + n > text.size()) throw std::invalid_argument("utf8: truncated sequence in '" + text + "'");
    out.push_back(text.substr(i, n));
    i += n;
  }
  return out;
}

TokenVocab::TokenVocab(const std::vector<std::string>& symbols) : symbols_(symbols) {
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    if (utf8_chars(symbols_[i]).size() != 1) {
      throw std::invalid_argument("vocab: symbol '" + symbols_[i] + "' is not a single character");
    }
    if (!index_.emplace(symbols_[i], static_cast<int>(i) + 4).second) {
      throw std::invalid_argument("vocab: duplicate symbol '" + symbols_[i] + "'");
    }
  }
}

TokenVocab TokenVocab::toy() {
  std::vector<std::string> s;
  for (char c = 'a'; c <= 'l'; ++c) s.emplace_back(1, c);
  return TokenVocab(s);
}

std::vector<int> TokenVocab::encode(const std::string& text) const {
  std::vector<int> ids;
  for (const auto& ch : utf8_chars(text)) {
    auto it = index_.find(ch);
    if (it == index_.end()) throw std::invalid_argument("vocab: '" + ch + "' is not in the vocabulary");
    ids.push_back(it->second);
  }
  return ids;
}

std::string TokenVocab::decode(const std::vector<int>& ids) const {
  std::string out;
  for (int id : ids) {
    if (id >= 4 && id < size()) out += symbols_[id - 4];
  }
  return out;
}

}  // namespace advjoint::asr
