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

#include <cstddef>
#include <cstdlib>
#include <functional>
#include <memory>
#include <new>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace advjoint::diff {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

/// 64-byte aligned storage. Vectorized kernels then split every buffer the
/// same way regardless of where the heap put it, so results are bit-stable.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::size_t kAlign = 64;

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) {}

  T* allocate(std::size_t n) {
    const std::size_t bytes = (n * sizeof(T) + kAlign - 1) / kAlign * kAlign;
    void* p = std::aligned_alloc(kAlign, bytes == 0 ? kAlign : bytes);
    if (p == nullptr) throw std::bad_alloc();
    return static_cast<T*>(p);
  }
  void deallocate(T* p, std::size_t) { std::free(p); }

  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const { return true; }
};

template <typename T>
using Buffer = std::vector<T, AlignedAllocator<T>>;

/// Raised when operand extents are incompatible. The message names the
/// offending axes.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a caller violates an operation precondition that is not a
/// shape problem (non-scalar loss, n < 1 for a schedule, NaN input, ...).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Raised for invalid module configuration, e.g. virtual batch norm used
/// before a reference batch was registered.
class ConfigurationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A training loss or gradient became NaN or infinite.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename T>
struct TensorImpl {
  Shape shape;
  Buffer<T> value;
  Buffer<T> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorImpl>> parents;
  std::function<void(TensorImpl&)> backward_fn;

  T* grad_buffer() {
    if (grad.size() != value.size()) grad.assign(value.size(), T(0));
    return grad.data();
  }
};

/// Shared handle to a row-major n-d array that may take part in a recorded
/// computation graph. Copies alias the same storage.
template <typename T>
class Tensor {
 public:
  using Impl = TensorImpl<T>;

  Tensor() = default;
  explicit Tensor(std::shared_ptr<Impl> impl) : impl_(std::move(impl)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, T value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<T> values, bool requires_grad = false);
  static Tensor scalar(T value, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(impl_); }
  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  /// Extent of `axis`; negative axes count from the back.
  std::size_t dim(int axis) const;
  std::size_t numel() const { return impl_->value.size(); }

  std::span<const T> values() const { return impl_->value; }
  std::span<T> mutable_values() { return impl_->value; }
  const T* data() const { return impl_->value.data(); }
  T item() const;
  T at(std::size_t flat_index) const { return impl_->value.at(flat_index); }

  bool has_grad() const { return impl_->grad.size() == impl_->value.size() && !impl_->value.empty(); }
  std::span<const T> grad() const { return impl_->grad; }
  std::span<T> mutable_grad() { return {impl_->grad_buffer(), impl_->value.size()}; }
  void zero_grad();

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool flag);
  bool is_leaf() const { return !impl_->backward_fn; }

  /// Copy of the values with no graph attached.
  Tensor detach() const;
  /// Reverse-mode sweep from this scalar. Leaf gradients accumulate across
  /// calls; interior gradients are recomputed each time.
  void backward() const;

  Impl* impl() const { return impl_.get(); }
  const std::shared_ptr<Impl>& impl_ptr() const { return impl_; }

 private:
  std::shared_ptr<Impl> impl_;
};

/// Disables graph recording on the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_mode_enabled();

namespace detail {

template <typename T>
using BackwardFn = std::function<void(TensorImpl<T>&)>;

/// Wraps an op result, attaching `fn` as its backward rule when recording is
/// enabled and any input requires a gradient.
template <typename T>
Tensor<T> make_result(Shape shape, Buffer<T> value,
                      std::initializer_list<const Tensor<T>*> inputs,
                      BackwardFn<T> fn);

template <typename T>
Tensor<T> make_result(Shape shape, Buffer<T> value,
                      const std::vector<Tensor<T>>& inputs, BackwardFn<T> fn);

template <typename T>
Tensor<T> make_result(Shape shape, const std::vector<T>& value,
                      std::initializer_list<const Tensor<T>*> inputs, BackwardFn<T> fn) {
  return make_result<T>(std::move(shape), Buffer<T>(value.begin(), value.end()), inputs, std::move(fn));
}

template <typename T>
Tensor<T> make_result(Shape shape, const std::vector<T>& value,
                      const std::vector<Tensor<T>>& inputs, BackwardFn<T> fn) {
  return make_result<T>(std::move(shape), Buffer<T>(value.begin(), value.end()), inputs, std::move(fn));
}

template <typename T>
inline bool wants_grad(const TensorImpl<T>* impl) {
  return impl != nullptr && impl->requires_grad;
}

}  // namespace detail

}  // namespace advjoint::diff
