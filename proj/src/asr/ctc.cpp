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

#include "advjoint/asr/ctc.hpp"

#include <cmath>
#include <limits>

#include "advjoint/diff/ops.hpp"

namespace advjoint::asr {

using diff::ContractError;
using diff::DimensionError;
using diff::Tensor;

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

}  // namespace

std::size_t ctc_min_frames(const std::vector<int>& targets) {
  std::size_t n = targets.size();
  for (std::size_t i = 1; i < targets.size(); ++i) n += targets[i] == targets[i - 1];
  return n;
}

template <typename T>
Tensor<T> ctc_loss(const Tensor<T>& log_probs, const std::vector<int>& targets, int blank) {
  if (log_probs.rank() != 2) throw DimensionError("ctc_loss: expected [frames, vocab] log-probabilities");
  const std::size_t frames = log_probs.dim(0), vocab = log_probs.dim(1);
  for (int t : targets) {
    if (t < 0 || static_cast<std::size_t>(t) >= vocab || t == blank) {
      throw ContractError("ctc_loss: target id " + std::to_string(t) + " is blank or outside the vocabulary");
    }
  }
  if (frames < ctc_min_frames(targets) || frames == 0) {
    throw ContractError("ctc_loss: " + std::to_string(targets.size()) + " labels cannot be aligned in " +
                        std::to_string(frames) + " frames (loss is infinite)");
  }
  const std::size_t S = 2 * targets.size() + 1;
  std::vector<int> ext(S, blank);
  for (std::size_t i = 0; i < targets.size(); ++i) ext[2 * i + 1] = targets[i];
  const T* lp = log_probs.data();
  auto at = [&](std::size_t t, std::size_t s) { return static_cast<double>(lp[t * vocab + ext[s]]); };
  auto skip_ok = [&](std::size_t s) { return s >= 2 && ext[s] != blank && ext[s] != ext[s - 2]; };

  std::vector<double> alpha(frames * S, kNegInf);
  alpha[0] = at(0, 0);
  if (S > 1) alpha[1] = at(0, 1);
  for (std::size_t t = 1; t < frames; ++t)
    for (std::size_t s = 0; s < S; ++s) {
      double a = alpha[(t - 1) * S + s];
      if (s >= 1) a = log_add(a, alpha[(t - 1) * S + s - 1]);
      if (skip_ok(s)) a = log_add(a, alpha[(t - 1) * S + s - 2]);
      alpha[t * S + s] = a == kNegInf ? kNegInf : a + at(t, s);
    }
  double log_p = alpha[(frames - 1) * S + S - 1];
  if (S > 1) log_p = log_add(log_p, alpha[(frames - 1) * S + S - 2]);
  if (!std::isfinite(log_p)) throw ContractError("ctc_loss: no alignment has nonzero probability (loss is infinite)");

  return diff::detail::make_result<T>(
      {}, diff::Buffer<T>{static_cast<T>(-log_p)}, {&log_probs},
      [alpha = std::move(alpha), ext, frames, vocab, S, log_p, blank](diff::TensorImpl<T>& o) {
        auto* p = o.parents[0].get();
        if (!diff::detail::wants_grad(p)) return;
        const T* lpv = p->value.data();
        auto em = [&](std::size_t t, std::size_t s) { return static_cast<double>(lpv[t * vocab + ext[s]]); };
        auto skip_from = [&](std::size_t s) { return s + 2 < S && ext[s + 2] != blank && ext[s + 2] != ext[s]; };
        std::vector<double> beta(frames * S, kNegInf);
        beta[(frames - 1) * S + S - 1] = em(frames - 1, S - 1);
        if (S > 1) beta[(frames - 1) * S + S - 2] = em(frames - 1, S - 2);
        for (std::size_t t = frames - 1; t-- > 0;)
          for (std::size_t s = 0; s < S; ++s) {
            double b = beta[(t + 1) * S + s];
            if (s + 1 < S) b = log_add(b, beta[(t + 1) * S + s + 1]);
            if (skip_from(s)) b = log_add(b, beta[(t + 1) * S + s + 2]);
            beta[t * S + s] = b == kNegInf ? kNegInf : b + em(t, s);
          }
        T* g = p->grad_buffer();
        const double scale = static_cast<double>(o.grad[0]);
        for (std::size_t t = 0; t < frames; ++t)
          for (std::size_t s = 0; s < S; ++s) {
            const double ab = alpha[t * S + s] + beta[t * S + s];
            if (ab == kNegInf) continue;
            const double occ = std::exp(ab - em(t, s) - log_p);
            g[t * vocab + ext[s]] -= static_cast<T>(scale * occ);
          }
      });
}

template <typename T>
Tensor<T> joint_asr_loss(const Tensor<T>& ce, const Tensor<T>& ctc, T ctc_weight) {
  if (!(ctc_weight >= T(0) && ctc_weight <= T(1))) throw ContractError("joint_asr_loss: weight must be in [0, 1]");
  return diff::add(diff::scale(ce, T(1) - ctc_weight), diff::scale(ctc, ctc_weight));
}

template Tensor<float> ctc_loss<float>(const Tensor<float>&, const std::vector<int>&, int);
template Tensor<double> ctc_loss<double>(const Tensor<double>&, const std::vector<int>&, int);
template Tensor<float> joint_asr_loss<float>(const Tensor<float>&, const Tensor<float>&, float);
template Tensor<double> joint_asr_loss<double>(const Tensor<double>&, const Tensor<double>&, double);

}  // namespace advjoint::asr
