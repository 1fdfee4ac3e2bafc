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

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "advjoint/diff/tensor.hpp"

namespace advjoint::diff {

using Rng = std::mt19937_64;

/// Named, insertion-ordered trainable tensors plus non-trainable buffers
/// (running statistics and the like). Tensors handed out alias the stored
/// ones, so modules keep handles and the set sees every update.
template <typename T>
class ParameterSet {
 public:
  struct Entry {
    std::string name;
    Tensor<T> tensor;
  };

  /// U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  Tensor<T> add_uniform(const std::string& name, Shape shape, std::size_t fan_in, Rng& rng);
  Tensor<T> add_constant(const std::string& name, Shape shape, T value);

  /// Registers (or returns) a buffer. Buffers are saved with the parameters.
  std::vector<T>& buffer(const std::string& name, std::size_t size = 0, T fill = T(0));
  bool has_buffer(const std::string& name) const { return buffers_.count(name) != 0; }

  const std::vector<Entry>& entries() const { return entries_; }
  std::map<std::string, std::vector<T>>& buffers() { return buffers_; }
  const std::map<std::string, std::vector<T>>& buffers() const { return buffers_; }

  Tensor<T> get(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  std::size_t count() const;  // total scalar parameters

  void zero_grad();
  /// Turns gradient tracking on or off for every parameter.
  void set_trainable(bool flag);
  /// Global L2 norm of the current gradients.
  double grad_norm() const;
  /// Rescales gradients so their global norm is at most max_norm.
  void clip_grad_norm(double max_norm);

  /// Copies values (and buffers) from a set with the same names and shapes.
  void copy_from(const ParameterSet& other);

 private:
  Tensor<T> insert(const std::string& name, Tensor<T> t);

  std::vector<Entry> entries_;
  std::map<std::string, std::size_t> index_;
  std::map<std::string, std::vector<T>> buffers_;
};

/// Common interface for in-place optimizers over a ParameterSet.
template <typename T>
class Optimizer {
 public:
  explicit Optimizer(ParameterSet<T>& params, double lr) : params_(&params), lr_(lr) {}
  virtual ~Optimizer() = default;

  virtual void step() = 0;
  virtual std::string kind() const = 0;

  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }
  std::int64_t steps() const { return steps_; }

  /// Accumulator buffers keyed "<state>/<param>" for checkpointing.
  virtual std::map<std::string, std::vector<T>> state() const = 0;
  virtual void load_state(const std::map<std::string, std::vector<T>>& state, std::int64_t steps) = 0;

 protected:
  void check_shapes(const std::vector<std::vector<T>>& acc) const;

  ParameterSet<T>* params_;
  double lr_;
  std::int64_t steps_ = 0;
};

/// r <- rho*r + (1-rho)*g^2 ; p <- p - lr*g/(sqrt(r)+eps)
template <typename T>
class RmsProp final : public Optimizer<T> {
 public:
  RmsProp(ParameterSet<T>& params, double lr, double rho = 0.9, double eps = 1e-8);
  void step() override;
  std::string kind() const override { return "rmsprop"; }
  std::map<std::string, std::vector<T>> state() const override;
  void load_state(const std::map<std::string, std::vector<T>>& state, std::int64_t steps) override;

 private:
  double rho_, eps_;
  std::vector<std::vector<T>> r_;
};

/// Bias-corrected Adam.
template <typename T>
class Adam final : public Optimizer<T> {
 public:
  Adam(ParameterSet<T>& params, double lr, double beta1 = 0.9, double beta2 = 0.98, double eps = 1e-9);
  void step() override;
  std::string kind() const override { return "adam"; }
  std::map<std::string, std::vector<T>> state() const override;
  void load_state(const std::map<std::string, std::vector<T>>& state, std::int64_t steps) override;

 private:
  double beta1_, beta2_, eps_;
  std::vector<std::vector<T>> m_, v_;
};

/// lr(n) = k' * d_model^-0.5 * min(n^-0.5, n * warmup^-1.5)
struct LrSchedule {
  double k_prime = 10.0;
  int d_model = 256;
  int warmup_n = 25000;

  double lr_at(std::int64_t n) const;
};

}  // namespace advjoint::diff
