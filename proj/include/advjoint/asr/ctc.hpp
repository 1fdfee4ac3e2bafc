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

#include <vector>

#include "advjoint/diff/tensor.hpp"

namespace advjoint::asr {

/// Frames needed to emit `targets`: one per label plus one blank between
/// each repeated pair.
std::size_t ctc_min_frames(const std::vector<int>& targets);

/// -log sum over alignments of prod_t p_t, from frame log-probabilities
/// [T, V] by the forward recursion in log space. The backward rule uses the
/// forward-backward occupancies. Throws ContractError when the targets
/// cannot be aligned in T frames.
template <typename T>
diff::Tensor<T> ctc_loss(const diff::Tensor<T>& log_probs, const std::vector<int>& targets, int blank = 0);

/// (1 - w) * ce + w * ctc.
template <typename T>
diff::Tensor<T> joint_asr_loss(const diff::Tensor<T>& ce, const diff::Tensor<T>& ctc, T ctc_weight);

}  // namespace advjoint::asr
