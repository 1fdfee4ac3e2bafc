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

#include <string>

#include "advjoint/diff/ops.hpp"
#include "advjoint/diff/params.hpp"

namespace advjoint::diff {

enum class NormMode { kTrain, kEval, kVirtual };

/// Channel batch norm over [batch, time, channels] input with train, eval
/// and virtual (reference batch) modes. Running statistics and reference
/// moments live in the owning ParameterSet's buffers.
template <typename T>
class BatchNorm {
 public:
  BatchNorm() = default;
  BatchNorm(ParameterSet<T>& params, const std::string& prefix, std::size_t channels, T momentum = T(0.1),
            T eps = T(1e-5));

  Tensor<T> forward(const Tensor<T>& x, NormMode mode);

  /// Stores the per-channel moments of `ref` (values only) as the virtual
  /// reference. The number of examples is ref's leading extent.
  void set_reference(const Tensor<T>& ref);
  bool has_reference() const;

  std::size_t channels() const { return channels_; }

 private:
  ParameterSet<T>* params_ = nullptr;
  std::string prefix_;
  std::size_t channels_ = 0;
  T momentum_ = T(0.1), eps_ = T(1e-5);
  Tensor<T> gamma_, beta_;
};

}  // namespace advjoint::diff
