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

#include "advjoint/diff/batch_norm.hpp"

namespace advjoint::diff {

template <typename T>
BatchNorm<T>::BatchNorm(ParameterSet<T>& params, const std::string& prefix, std::size_t channels, T momentum, T eps)
    : params_(&params), prefix_(prefix), channels_(channels), momentum_(momentum), eps_(eps) {
  gamma_ = params.add_constant(prefix + ".gamma", {channels}, T(1));
  beta_ = params.add_constant(prefix + ".beta", {channels}, T(0));
  params.buffer(prefix + ".running_mean", channels, T(0));
  params.buffer(prefix + ".running_var", channels, T(1));
}

template <typename T>
bool BatchNorm<T>::has_reference() const {
  return params_ != nullptr && params_->has_buffer(prefix_ + ".ref_mean");
}

template <typename T>
void BatchNorm<T>::set_reference(const Tensor<T>& ref) {
  if (ref.dim(-1) != channels_) {
    throw DimensionError("batch_norm: reference has " + std::to_string(ref.dim(-1)) + " channels, expected " +
                         std::to_string(channels_));
  }
  const std::size_t rows = ref.numel() / channels_;
  std::vector<T> m(channels_, T(0)), s(channels_, T(0));
  const T* v = ref.data();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < channels_; ++c) {
      m[c] += v[r * channels_ + c];
      s[c] += v[r * channels_ + c] * v[r * channels_ + c];
    }
  for (std::size_t c = 0; c < channels_; ++c) {
    m[c] /= static_cast<T>(rows);
    s[c] /= static_cast<T>(rows);
  }
  params_->buffer(prefix_ + ".ref_mean") = std::move(m);
  params_->buffer(prefix_ + ".ref_sqmean") = std::move(s);
  params_->buffer(prefix_ + ".ref_count") = {static_cast<T>(ref.rank() == 3 ? ref.dim(0) : 1)};
}

template <typename T>
Tensor<T> BatchNorm<T>::forward(const Tensor<T>& x, NormMode mode) {
  if (params_ == nullptr) throw ConfigurationError("batch_norm: layer not initialized");
  static const std::vector<T> kNone;
  switch (mode) {
    case NormMode::kEval:
      return batch_norm_fixed(x, params_->buffer(prefix_ + ".running_mean"), params_->buffer(prefix_ + ".running_var"),
                              gamma_, beta_, eps_);
    case NormMode::kTrain: {
      std::vector<T> bm, bv;
      Tensor<T> y = batch_norm_blend(x, 1, kNone, kNone, T(0), gamma_, beta_, eps_, &bm, &bv);
      auto& rm = params_->buffer(prefix_ + ".running_mean");
      auto& rv = params_->buffer(prefix_ + ".running_var");
      for (std::size_t c = 0; c < channels_; ++c) {
        rm[c] = (T(1) - momentum_) * rm[c] + momentum_ * bm[c];
        rv[c] = (T(1) - momentum_) * rv[c] + momentum_ * bv[c];
      }
      return y;
    }
    case NormMode::kVirtual: {
      if (!has_reference()) {
        throw ConfigurationError("batch_norm '" + prefix_ + "': virtual mode used before a reference batch was set");
      }
      const T n_ref = params_->buffer(prefix_ + ".ref_count")[0];
      const std::size_t groups = x.rank() == 3 ? x.dim(0) : 1;
      return batch_norm_blend(x, groups, params_->buffer(prefix_ + ".ref_mean"), params_->buffer(prefix_ + ".ref_sqmean"),
                              n_ref / (n_ref + T(1)), gamma_, beta_, eps_);
    }
  }
  throw ContractError("batch_norm: unknown mode");
}

template class BatchNorm<float>;
template class BatchNorm<double>;

}  // namespace advjoint::diff
