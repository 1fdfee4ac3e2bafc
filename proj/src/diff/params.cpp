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

#include "advjoint/diff/params.hpp"

#include <cmath>

namespace advjoint::diff {

template <typename T>
Tensor<T> ParameterSet<T>::insert(const std::string& name, Tensor<T> t) {
  if (index_.count(name)) throw ContractError("duplicate parameter name '" + name + "'");
  index_[name] = entries_.size();
  entries_.push_back({name, t});
  return t;
}

template <typename T>
Tensor<T> ParameterSet<T>::add_uniform(const std::string& name, Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(fan_in, 1)));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<T> v(numel(shape));
  for (auto& x : v) x = static_cast<T>(dist(rng));
  return insert(name, Tensor<T>::from(std::move(shape), std::move(v), true));
}

template <typename T>
Tensor<T> ParameterSet<T>::add_constant(const std::string& name, Shape shape, T value) {
  return insert(name, Tensor<T>::full(std::move(shape), value, true));
}

template <typename T>
std::vector<T>& ParameterSet<T>::buffer(const std::string& name, std::size_t size, T fill) {
  auto it = buffers_.find(name);
  if (it == buffers_.end()) it = buffers_.emplace(name, std::vector<T>(size, fill)).first;
  return it->second;
}

template <typename T>
Tensor<T> ParameterSet<T>::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("unknown parameter '" + name + "'");
  return entries_[it->second].tensor;
}

template <typename T>
std::size_t ParameterSet<T>::count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.tensor.numel();
  return n;
}

template <typename T>
void ParameterSet<T>::zero_grad() {
  for (auto& e : entries_) e.tensor.impl()->grad.clear();
}

template <typename T>
void ParameterSet<T>::set_trainable(bool flag) {
  for (auto& e : entries_) e.tensor.set_requires_grad(flag);
}

template <typename T>
double ParameterSet<T>::grad_norm() const {
  double s = 0;
  for (const auto& e : entries_)
    for (T g : e.tensor.grad()) s += static_cast<double>(g) * static_cast<double>(g);
  return std::sqrt(s);
}

template <typename T>
void ParameterSet<T>::clip_grad_norm(double max_norm) {
  const double norm = grad_norm();
  if (!(norm > max_norm) || norm == 0.0) return;
  const T factor = static_cast<T>(max_norm / norm);
  for (auto& e : entries_)
    for (T& g : e.tensor.impl()->grad) g *= factor;
}

template <typename T>
void ParameterSet<T>::copy_from(const ParameterSet& other) {
  for (auto& e : entries_) {
    const Tensor<T> src = other.get(e.name);
    if (src.shape() != e.tensor.shape()) {
      throw DimensionError("parameter '" + e.name + "': shape " + to_string(src.shape()) + " vs " +
                           to_string(e.tensor.shape()));
    }
    std::copy(src.values().begin(), src.values().end(), e.tensor.mutable_values().begin());
  }
  for (auto& [name, buf] : buffers_) {
    auto it = other.buffers_.find(name);
    if (it != other.buffers_.end()) buf = it->second;
  }
}

template <typename T>
void Optimizer<T>::check_shapes(const std::vector<std::vector<T>>& acc) const {
  const auto& entries = params_->entries();
  if (acc.size() != entries.size()) throw DimensionError("optimizer state covers a different parameter count");
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (acc[i].size() != entries[i].tensor.numel()) {
      throw DimensionError("optimizer accumulator for '" + entries[i].name + "' has " + std::to_string(acc[i].size()) +
                           " values, parameter has " + std::to_string(entries[i].tensor.numel()));
    }
  }
}

namespace {

template <typename T>
std::vector<std::vector<T>> zeros_like(const ParameterSet<T>& params) {
  std::vector<std::vector<T>> acc;
  for (const auto& e : params.entries()) acc.emplace_back(e.tensor.numel(), T(0));
  return acc;
}

template <typename T>
void load_acc(const std::map<std::string, std::vector<T>>& state, const std::string& prefix,
              const ParameterSet<T>& params, std::vector<std::vector<T>>& acc) {
  for (std::size_t i = 0; i < params.entries().size(); ++i) {
    const auto& e = params.entries()[i];
    auto it = state.find(prefix + "/" + e.name);
    if (it == state.end()) throw ContractError("optimizer state lacks '" + prefix + "/" + e.name + "'");
    if (it->second.size() != e.tensor.numel()) {
      throw DimensionError("optimizer state '" + prefix + "/" + e.name + "' has wrong size");
    }
    acc[i] = it->second;
  }
}

}  // namespace

template <typename T>
RmsProp<T>::RmsProp(ParameterSet<T>& params, double lr, double rho, double eps)
    : Optimizer<T>(params, lr), rho_(rho), eps_(eps), r_(zeros_like(params)) {}

template <typename T>
void RmsProp<T>::step() {
  this->check_shapes(r_);
  const auto& entries = this->params_->entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    Tensor<T> p = entries[i].tensor;
    if (!p.has_grad()) continue;
    auto g = p.grad();
    auto v = p.mutable_values();
    auto& r = r_[i];
    for (std::size_t j = 0; j < v.size(); ++j) {
      const double gj = g[j];
      const double rj = rho_ * r[j] + (1.0 - rho_) * gj * gj;
      r[j] = static_cast<T>(rj);
      v[j] = static_cast<T>(v[j] - this->lr_ * gj / (std::sqrt(rj) + eps_));
    }
  }
  ++this->steps_;
}

template <typename T>
std::map<std::string, std::vector<T>> RmsProp<T>::state() const {
  std::map<std::string, std::vector<T>> s;
  const auto& entries = this->params_->entries();
  for (std::size_t i = 0; i < entries.size(); ++i) s["r/" + entries[i].name] = r_[i];
  return s;
}

template <typename T>
void RmsProp<T>::load_state(const std::map<std::string, std::vector<T>>& state, std::int64_t steps) {
  load_acc(state, "r", *this->params_, r_);
  this->steps_ = steps;
}

template <typename T>
Adam<T>::Adam(ParameterSet<T>& params, double lr, double beta1, double beta2, double eps)
    : Optimizer<T>(params, lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(zeros_like(params)), v_(zeros_like(params)) {}

template <typename T>
void Adam<T>::step() {
  this->check_shapes(m_);
  const std::int64_t n = this->steps_ + 1;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(n));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(n));
  const auto& entries = this->params_->entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    Tensor<T> p = entries[i].tensor;
    if (!p.has_grad()) continue;
    auto g = p.grad();
    auto val = p.mutable_values();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < val.size(); ++j) {
      const double gj = g[j];
      const double mj = beta1_ * m[j] + (1.0 - beta1_) * gj;
      const double vj = beta2_ * v[j] + (1.0 - beta2_) * gj * gj;
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
      val[j] = static_cast<T>(val[j] - this->lr_ * (mj / c1) / (std::sqrt(vj / c2) + eps_));
    }
  }
  this->steps_ = n;
}

template <typename T>
std::map<std::string, std::vector<T>> Adam<T>::state() const {
  std::map<std::string, std::vector<T>> s;
  const auto& entries = this->params_->entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    s["m/" + entries[i].name] = m_[i];
    s["v/" + entries[i].name] = v_[i];
  }
  return s;
}

template <typename T>
void Adam<T>::load_state(const std::map<std::string, std::vector<T>>& state, std::int64_t steps) {
  load_acc(state, "m", *this->params_, m_);
  load_acc(state, "v", *this->params_, v_);
  this->steps_ = steps;
}

double LrSchedule::lr_at(std::int64_t n) const {
  if (n < 1) throw ContractError("lr_at: step must be >= 1, got " + std::to_string(n));
  if (k_prime <= 0 || d_model < 1 || warmup_n < 1) throw ContractError("lr_at: invalid schedule parameters");
  const double nd = static_cast<double>(n);
  const double w = static_cast<double>(warmup_n);
  return k_prime / std::sqrt(static_cast<double>(d_model)) * std::min(1.0 / std::sqrt(nd), nd * std::pow(w, -1.5));
}

template class ParameterSet<float>;
template class ParameterSet<double>;
template class Optimizer<float>;
template class Optimizer<double>;
template class RmsProp<float>;
template class RmsProp<double>;
template class Adam<float>;
template class Adam<double>;

}  // namespace advjoint::diff
