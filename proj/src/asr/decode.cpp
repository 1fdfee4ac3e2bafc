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

#include "advjoint/asr/decode.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "advjoint/asr/vocab.hpp"

namespace advjoint::asr {

double length_penalty(std::size_t len, double alpha) {
  return std::pow((5.0 + static_cast<double>(len)) / 6.0, alpha);
}

DecodeResult greedy_decode(const StepFn& step, int sos, int eos, std::size_t max_len) {
  std::vector<int> prefix{sos};
  DecodeResult res;
  while (res.tokens.size() < max_len) {
    const auto lp = step(prefix);
    const int best = static_cast<int>(std::max_element(lp.begin(), lp.end()) - lp.begin());
    res.tokens.push_back(best);
    res.log_prob += lp[best];
    prefix.push_back(best);
    if (best == eos) return res;
  }
  res.truncated = true;
  return res;
}

DecodeResult beam_decode(const StepFn& step, int sos, int eos, std::size_t beam, double alpha, std::size_t max_len) {
  if (beam < 1) throw std::invalid_argument("beam_decode: beam must be >= 1");
  std::vector<Hypothesis> alive{{{sos}, 0.0, false}};
  std::vector<Hypothesis> finished;
  auto norm_score = [alpha](const Hypothesis& h) {
    return h.log_prob / length_penalty(h.tokens.size() - 1, alpha);
  };
  for (std::size_t t = 0; t < max_len && !alive.empty(); ++t) {
    struct Cand {
      std::size_t parent;
      int token;
      double log_prob;
    };
    std::vector<Cand> cands;
    for (std::size_t i = 0; i < alive.size(); ++i) {
      const auto lp = step(alive[i].tokens);
      for (std::size_t v = 0; v < lp.size(); ++v) {
        if (std::isfinite(lp[v])) cands.push_back({i, static_cast<int>(v), alive[i].log_prob + lp[v]});
      }
    }
    std::stable_sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
      if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
      if (a.token != b.token) return a.token < b.token;
      return a.parent < b.parent;
    });
    std::vector<Hypothesis> next;
    for (std::size_t r = 0; r < std::min(beam, cands.size()); ++r) {
      const auto& c = cands[r];
      Hypothesis h = alive[c.parent];
      h.tokens.push_back(c.token);
      h.log_prob = c.log_prob;
      h.finished = c.token == eos;
      (h.finished ? finished : next).push_back(std::move(h));
    }
    if (finished.size() >= beam) break;
    alive = std::move(next);
  }
  DecodeResult res;
  const std::vector<Hypothesis>& pool = finished.empty() ? alive : finished;
  if (pool.empty()) {
    res.truncated = true;
    return res;
  }
  const Hypothesis* best = &pool.front();
  for (const auto& h : pool)
    if (norm_score(h) > norm_score(*best)) best = &h;
  res.tokens.assign(best->tokens.begin() + 1, best->tokens.end());
  res.log_prob = best->log_prob;
  res.truncated = finished.empty();
  return res;
}

std::size_t edit_distance(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double cer(const std::string& hyp, const std::string& ref) {
  const auto r = utf8_chars(ref);
  if (r.empty()) throw std::invalid_argument("cer: empty reference");
  return static_cast<double>(edit_distance(utf8_chars(hyp), r)) / static_cast<double>(r.size());
}

}  // namespace advjoint::asr
