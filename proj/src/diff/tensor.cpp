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

#include "advjoint/diff/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

namespace advjoint::diff {

namespace {
thread_local bool g_grad_mode = true;
}  // namespace

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

bool grad_mode_enabled() { return g_grad_mode; }

NoGradGuard::NoGradGuard() : previous_(g_grad_mode) { g_grad_mode = false; }
NoGradGuard::~NoGradGuard() { g_grad_mode = previous_; }

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), T(0), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape shape, T value, bool requires_grad) {
  auto impl = std::make_shared<Impl>();
  impl->value.assign(diff::numel(shape), value);
  impl->shape = std::move(shape);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

template <typename T>
Tensor<T> Tensor<T>::from(Shape shape, std::vector<T> values, bool requires_grad) {
  if (diff::numel(shape) != values.size()) {
    throw DimensionError("Tensor::from: shape " + to_string(shape) + " holds " +
                         std::to_string(diff::numel(shape)) + " values, got " +
                         std::to_string(values.size()));
  }
  auto impl = std::make_shared<Impl>();
  impl->shape = std::move(shape);
  impl->value.assign(values.begin(), values.end());
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value, bool requires_grad) {
  return from({}, {value}, requires_grad);
}

template <typename T>
std::size_t Tensor<T>::dim(int axis) const {
  const int r = static_cast<int>(rank());
  const int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " +
                         to_string(shape()));
  }
  return impl_->shape[static_cast<std::size_t>(a)];
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) {
    throw ContractError("item() on tensor of shape " + to_string(shape()));
  }
  return impl_->value[0];
}

template <typename T>
void Tensor<T>::zero_grad() {
  if (!impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), T(0));
}

template <typename T>
void Tensor<T>::set_requires_grad(bool flag) {
  if (!is_leaf()) throw ContractError("set_requires_grad on a non-leaf tensor");
  impl_->requires_grad = flag;
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
  return from(shape(), std::vector<T>(impl_->value.begin(), impl_->value.end()), false);
}

template <typename T>
void Tensor<T>::backward() const {
  if (numel() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " + to_string(shape()));
  }
  if (!impl_->requires_grad) {
    throw ContractError("backward() on a tensor that is not part of a recorded graph");
  }
  // Iterative post-order DFS gives a topological order.
  std::vector<Impl*> order;
  std::unordered_set<Impl*> seen;
  std::vector<std::pair<Impl*, std::size_t>> stack;
  stack.emplace_back(impl_.get(), 0);
  seen.insert(impl_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Impl* p = node->parents[next++].get();
      if (p != nullptr && p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  for (Impl* node : order) {
    if (node->backward_fn) node->grad.assign(node->value.size(), T(0));
  }
  impl_->grad_buffer()[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Impl* node = *it;
    if (node->backward_fn) node->backward_fn(*node);
  }
}

namespace detail {

template <typename T>
Tensor<T> make_result(Shape shape, Buffer<T> value,
                      std::initializer_list<const Tensor<T>*> inputs, BackwardFn<T> fn) {
  auto impl = std::make_shared<TensorImpl<T>>();
  impl->shape = std::move(shape);
  impl->value = std::move(value);
  if (grad_mode_enabled()) {
    bool any = false;
    for (const auto* in : inputs) any = any || (in != nullptr && in->defined() && in->requires_grad());
    if (any) {
      impl->requires_grad = true;
      impl->parents.reserve(inputs.size());
      for (const auto* in : inputs) {
        impl->parents.push_back(in != nullptr && in->defined() ? in->impl_ptr() : nullptr);
      }
      impl->backward_fn = std::move(fn);
    }
  }
  return Tensor<T>(std::move(impl));
}

template <typename T>
Tensor<T> make_result(Shape shape, Buffer<T> value, const std::vector<Tensor<T>>& inputs,
                      BackwardFn<T> fn) {
  auto impl = std::make_shared<TensorImpl<T>>();
  impl->shape = std::move(shape);
  impl->value = std::move(value);
  if (grad_mode_enabled()) {
    bool any = std::any_of(inputs.begin(), inputs.end(),
                           [](const Tensor<T>& t) { return t.defined() && t.requires_grad(); });
    if (any) {
      impl->requires_grad = true;
      for (const auto& in : inputs) impl->parents.push_back(in.defined() ? in.impl_ptr() : nullptr);
      impl->backward_fn = std::move(fn);
    }
  }
  return Tensor<T>(std::move(impl));
}

template Tensor<float> make_result(Shape, Buffer<float>,
                                   std::initializer_list<const Tensor<float>*>, BackwardFn<float>);
template Tensor<double> make_result(Shape, Buffer<double>,
                                    std::initializer_list<const Tensor<double>*>, BackwardFn<double>);
template Tensor<float> make_result(Shape, Buffer<float>, const std::vector<Tensor<float>>&,
                                   BackwardFn<float>);
template Tensor<double> make_result(Shape, Buffer<double>, const std::vector<Tensor<double>>&,
                                    BackwardFn<double>);

}  // namespace detail

template class Tensor<float>;
template class Tensor<double>;

}  // namespace advjoint::diff
