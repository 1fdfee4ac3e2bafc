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

#include "advjoint/diff/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace advjoint::diff {

using detail::make_result;
using detail::wants_grad;

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapC = Eigen::Map<const RowMat<T>>;
template <typename T>
using MapM = Eigen::Map<RowMat<T>>;

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": operand shapes differ, " + to_string(a.shape()) + " vs " +
                         to_string(b.shape()));
  }
}

std::string axis_msg(const char* op, const char* axis, std::size_t got, std::size_t want) {
  return std::string(op) + ": axis '" + axis + "' has extent " + std::to_string(got) + ", expected " +
         std::to_string(want);
}

template <typename T>
std::size_t last_dim(const Tensor<T>& x, const char* op) {
  if (x.rank() == 0) throw DimensionError(std::string(op) + ": scalar input has no trailing axis");
  return x.shape().back();
}

std::size_t norm_axis(int axis, std::size_t rank, const char* op) {
  const int r = static_cast<int>(rank);
  const int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) + " out of range");
  return static_cast<std::size_t>(a);
}

// Views a rank-2 or rank-3 sequence tensor as [batch, time, channels].
struct SeqDims {
  std::size_t batch, len, ch;
};

template <typename T>
SeqDims seq_dims(const Tensor<T>& x, const char* op) {
  if (x.rank() == 3) return {x.shape()[0], x.shape()[1], x.shape()[2]};
  if (x.rank() == 2) return {1, x.shape()[0], x.shape()[1]};
  throw DimensionError(std::string(op) + ": expected [batch,time,channels] or [time,channels], got " +
                       to_string(x.shape()));
}

Shape seq_shape(std::size_t rank, std::size_t batch, std::size_t len, std::size_t ch) {
  if (rank == 3) return {batch, len, ch};
  return {len, ch};
}

template <typename T>
T stable_sigmoid(T v) {
  if (v >= T(0)) {
    const T e = std::exp(-v);
    return T(1) / (T(1) + e);
  }
  const T e = std::exp(v);
  return e / (T(1) + e);
}

template <typename T, typename F, typename G>
Tensor<T> unary(const Tensor<T>& a, F forward, G derivative) {
  Buffer<T> out(a.numel());
  const T* av = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = forward(av[i]);
  return make_result<T>(a.shape(), std::move(out), {&a}, [derivative](TensorImpl<T>& o) {
    auto* p = o.parents[0].get();
    if (!wants_grad(p)) return;
    T* g = p->grad_buffer();
    for (std::size_t i = 0; i < o.value.size(); ++i) g[i] += o.grad[i] * derivative(p->value[i], o.value[i]);
  });
}

}  // namespace

// ---- elementwise / structural ------------------------------------------

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "add");
  Buffer<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  return make_result<T>(a.shape(), std::move(out), {&a, &b}, [](TensorImpl<T>& o) {
    for (int k = 0; k < 2; ++k) {
      auto* p = o.parents[k].get();
      if (!wants_grad(p)) continue;
      T* g = p->grad_buffer();
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i];
    }
  });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "sub");
  Buffer<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  return make_result<T>(a.shape(), std::move(out), {&a, &b}, [](TensorImpl<T>& o) {
    if (auto* p = o.parents[0].get(); wants_grad(p)) {
      T* g = p->grad_buffer();
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i];
    }
    if (auto* p = o.parents[1].get(); wants_grad(p)) {
      T* g = p->grad_buffer();
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] -= o.grad[i];
    }
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "mul");
  Buffer<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  return make_result<T>(a.shape(), std::move(out), {&a, &b}, [](TensorImpl<T>& o) {
    auto* pa = o.parents[0].get();
    auto* pb = o.parents[1].get();
    if (wants_grad(pa)) {
      T* g = pa->grad_buffer();
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i] * pb->value[i];
    }
    if (wants_grad(pb)) {
      T* g = pb->grad_buffer();
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i] * pa->value[i];
    }
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  return unary<T>(
      a, [factor](T v) { return v * factor; }, [factor](T, T) { return factor; });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T value) {
  return unary<T>(
      a, [value](T v) { return v + value; }, [](T, T) { return T(1); });
}

template <typename T>
Tensor<T> add_lastdim(const Tensor<T>& x, const Tensor<T>& b) {
  const std::size_t d = last_dim(x, "add_lastdim");
  if (b.numel() != d) throw DimensionError(axis_msg("add_lastdim", "bias", b.numel(), d));
  Buffer<T> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] + b.data()[i % d];
  return make_result<T>(x.shape(), std::move(out), {&x, &b}, [d](TensorImpl<T>& o) {
    if (auto* p = o.parents[0].get(); wants_grad(p)) {
      T* g = p->grad_buffer();
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i];
    }
    if (auto* p = o.parents[1].get(); wants_grad(p)) {
      T* g = p->grad_buffer();
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i % d] += o.grad[i];
    }
  });
}

template <typename T>
Tensor<T> mul_lastdim(const Tensor<T>& x, const Tensor<T>& s) {
  const std::size_t d = last_dim(x, "mul_lastdim");
  if (s.numel() != d) throw DimensionError(axis_msg("mul_lastdim", "scale", s.numel(), d));
  Buffer<T> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] * s.data()[i % d];
  return make_result<T>(x.shape(), std::move(out), {&x, &s}, [d](TensorImpl<T>& o) {
    auto* px = o.parents[0].get();
    auto* ps = o.parents[1].get();
    if (wants_grad(px)) {
      T* g = px->grad_buffer();
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i] * ps->value[i % d];
    }
    if (wants_grad(ps)) {
      T* g = ps->grad_buffer();
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i % d] += o.grad[i] * px->value[i];
    }
  });
}

template <typename T>
Tensor<T> square(const Tensor<T>& a) {
  return unary<T>(
      a, [](T v) { return v * v; }, [](T x, T) { return T(2) * x; });
}

template <typename T>
Tensor<T> abs(const Tensor<T>& a) {
  return unary<T>(
      a, [](T v) { return std::abs(v); },
      [](T x, T) { return x > T(0) ? T(1) : (x < T(0) ? T(-1) : T(0)); });
}

template <typename T>
Tensor<T> log_floor(const Tensor<T>& a, T floor) {
  return unary<T>(
      a, [floor](T v) { return std::log(std::max(v, floor)); },
      [floor](T x, T) { return x >= floor ? T(1) / x : T(0); });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  T s = 0;
  for (T v : a.values()) s += v;
  return make_result<T>({}, Buffer<T>{s}, {&a}, [](TensorImpl<T>& o) {
    auto* p = o.parents[0].get();
    if (!wants_grad(p)) return;
    T* g = p->grad_buffer();
    for (std::size_t i = 0; i < p->value.size(); ++i) g[i] += o.grad[0];
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
  if (a.numel() == 0) throw DimensionError("mean: empty tensor");
  return scale(sum(a), T(1) / static_cast<T>(a.numel()));
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
  if (numel(shape) != a.numel()) {
    throw DimensionError("reshape: cannot view " + to_string(a.shape()) + " as " + to_string(shape));
  }
  Buffer<T> out(a.values().begin(), a.values().end());
  return make_result<T>(std::move(shape), std::move(out), {&a}, [](TensorImpl<T>& o) {
    auto* p = o.parents[0].get();
    if (!wants_grad(p)) return;
    T* g = p->grad_buffer();
    for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i];
  });
}

template <typename T>
Tensor<T> transpose_last2(const Tensor<T>& a) {
  if (a.rank() < 2) throw DimensionError("transpose_last2: rank < 2 for shape " + to_string(a.shape()));
  const std::size_t m = a.shape()[a.rank() - 2];
  const std::size_t n = a.shape()[a.rank() - 1];
  const std::size_t batch = a.numel() / std::max<std::size_t>(1, m * n);
  Shape shape = a.shape();
  std::swap(shape[shape.size() - 1], shape[shape.size() - 2]);
  Buffer<T> out(a.numel());
  for (std::size_t b = 0; b < batch; ++b) {
    const T* src = a.data() + b * m * n;
    T* dst = out.data() + b * m * n;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) dst[j * m + i] = src[i * n + j];
  }
  return make_result<T>(std::move(shape), std::move(out), {&a}, [m, n, batch](TensorImpl<T>& o) {
    auto* p = o.parents[0].get();
    if (!wants_grad(p)) return;
    T* g = p->grad_buffer();
    for (std::size_t b = 0; b < batch; ++b) {
      const T* src = o.grad.data() + b * m * n;
      T* dst = g + b * m * n;
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) dst[i * n + j] += src[j * m + i];
    }
  });
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis) {
  if (parts.empty()) throw DimensionError("concat: no inputs");
  const std::size_t ax = norm_axis(axis, parts[0].rank(), "concat");
  const Shape& ref = parts[0].shape();
  std::size_t outer = 1, inner = 1, total = 0;
  for (std::size_t i = 0; i < ax; ++i) outer *= ref[i];
  for (std::size_t i = ax + 1; i < ref.size(); ++i) inner *= ref[i];
  std::vector<std::size_t> lens;
  for (const auto& p : parts) {
    if (p.rank() != ref.size()) throw DimensionError("concat: rank mismatch " + to_string(p.shape()));
    for (std::size_t i = 0; i < ref.size(); ++i) {
      if (i != ax && p.shape()[i] != ref[i]) {
        throw DimensionError("concat: axis " + std::to_string(i) + " differs, " + to_string(p.shape()) + " vs " +
                             to_string(ref));
      }
    }
    lens.push_back(p.shape()[ax]);
    total += p.shape()[ax];
  }
  Shape shape = ref;
  shape[ax] = total;
  Buffer<T> out(outer * total * inner);
  for (std::size_t o = 0; o < outer; ++o) {
    std::size_t offset = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
      const std::size_t block = lens[k] * inner;
      std::copy_n(parts[k].data() + o * block, block, out.data() + (o * total) * inner + offset);
      offset += block;
    }
  }
  return make_result<T>(std::move(shape), std::move(out), parts, [outer, inner, total, lens](TensorImpl<T>& o) {
    std::size_t offset = 0;
    for (std::size_t k = 0; k < lens.size(); ++k) {
      const std::size_t block = lens[k] * inner;
      auto* p = o.parents[k].get();
      if (wants_grad(p)) {
        T* g = p->grad_buffer();
        for (std::size_t r = 0; r < outer; ++r) {
          const T* src = o.grad.data() + r * total * inner + offset;
          for (std::size_t i = 0; i < block; ++i) g[r * block + i] += src[i];
        }
      }
      offset += block;
    }
  });
}

template <typename T>
Tensor<T> slice(const Tensor<T>& a, int axis, std::size_t start, std::size_t length) {
  const std::size_t ax = norm_axis(axis, a.rank(), "slice");
  const std::size_t extent = a.shape()[ax];
  if (start + length > extent) {
    throw DimensionError("slice: range [" + std::to_string(start) + ", " + std::to_string(start + length) +
                         ") exceeds axis " + std::to_string(ax) + " extent " + std::to_string(extent));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < ax; ++i) outer *= a.shape()[i];
  for (std::size_t i = ax + 1; i < a.rank(); ++i) inner *= a.shape()[i];
  Shape shape = a.shape();
  shape[ax] = length;
  Buffer<T> out(outer * length * inner);
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(a.data() + (o * extent + start) * inner, length * inner, out.data() + o * length * inner);
  }
  return make_result<T>(std::move(shape), std::move(out), {&a},
                        [outer, inner, extent, start, length](TensorImpl<T>& o) {
                          auto* p = o.parents[0].get();
                          if (!wants_grad(p)) return;
                          T* g = p->grad_buffer();
                          for (std::size_t r = 0; r < outer; ++r) {
                            const T* src = o.grad.data() + r * length * inner;
                            T* dst = g + (r * extent + start) * inner;
                            for (std::size_t i = 0; i < length * inner; ++i) dst[i] += src[i];
                          }
                        });
}

// ---- linear algebra ------------------------------------------------------

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b, bool trans_a, bool trans_b) {
  if (a.rank() != b.rank() || (a.rank() != 2 && a.rank() != 3)) {
    throw DimensionError("matmul: need matching rank 2 or 3 operands, got " + to_string(a.shape()) + " and " +
                         to_string(b.shape()));
  }
  const std::size_t r = a.rank();
  const std::size_t batch = r == 3 ? a.shape()[0] : 1;
  if (r == 3 && b.shape()[0] != batch) throw DimensionError(axis_msg("matmul", "batch", b.shape()[0], batch));
  const std::size_t ar = a.shape()[r - 2], ac = a.shape()[r - 1];
  const std::size_t br = b.shape()[r - 2], bc = b.shape()[r - 1];
  const std::size_t m = trans_a ? ac : ar, k = trans_a ? ar : ac;
  const std::size_t kb = trans_b ? bc : br, n = trans_b ? br : bc;
  if (k != kb) throw DimensionError(axis_msg("matmul", "inner", kb, k));
  Buffer<T> out(batch * m * n);
  auto prod = [&](const T* pa, const T* pb, T* pc) {
    MapC<T> A(pa, ar, ac), B(pb, br, bc);
    MapM<T> C(pc, m, n);
    if (!trans_a && !trans_b) C.noalias() = A * B;
    else if (trans_a && !trans_b) C.noalias() = A.transpose() * B;
    else if (!trans_a && trans_b) C.noalias() = A * B.transpose();
    else C.noalias() = A.transpose() * B.transpose();
  };
  for (std::size_t i = 0; i < batch; ++i) prod(a.data() + i * ar * ac, b.data() + i * br * bc, out.data() + i * m * n);
  Shape shape = r == 3 ? Shape{batch, m, n} : Shape{m, n};
  return make_result<T>(std::move(shape), std::move(out), {&a, &b},
                        [=](TensorImpl<T>& o) {
                          auto* pa = o.parents[0].get();
                          auto* pb = o.parents[1].get();
                          for (std::size_t i = 0; i < batch; ++i) {
                            MapC<T> A(pa->value.data() + i * ar * ac, ar, ac);
                            MapC<T> B(pb->value.data() + i * br * bc, br, bc);
                            MapC<T> G(o.grad.data() + i * m * n, m, n);
                            if (wants_grad(pa)) {
                              MapM<T> GA(pa->grad_buffer() + i * ar * ac, ar, ac);
                              // d op(A) = G op(B)^T
                              if (!trans_a) {
                                if (!trans_b) GA.noalias() += G * B.transpose();
                                else GA.noalias() += G * B;
                              } else {
                                if (!trans_b) GA.noalias() += B * G.transpose();
                                else GA.noalias() += B.transpose() * G.transpose();
                              }
                            }
                            if (wants_grad(pb)) {
                              MapM<T> GB(pb->grad_buffer() + i * br * bc, br, bc);
                              // d op(B) = op(A)^T G
                              if (!trans_b) {
                                if (!trans_a) GB.noalias() += A.transpose() * G;
                                else GB.noalias() += A * G;
                              } else {
                                if (!trans_a) GB.noalias() += G.transpose() * A;
                                else GB.noalias() += G.transpose() * A.transpose();
                              }
                            }
                          }
                        });
}

template <typename T>
Tensor<T> dense(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  const std::size_t din = last_dim(x, "dense");
  if (w.rank() != 2) throw DimensionError("dense: weight must be [d_in, d_out], got " + to_string(w.shape()));
  if (w.shape()[0] != din) throw DimensionError(axis_msg("dense", "d_in", w.shape()[0], din));
  const std::size_t dout = w.shape()[1];
  if (b.defined() && b.numel() != dout) throw DimensionError(axis_msg("dense", "bias", b.numel(), dout));
  const std::size_t rows = x.numel() / std::max<std::size_t>(din, 1);
  Shape shape = x.shape();
  shape.back() = dout;
  Buffer<T> out(rows * dout);
  MapM<T> Y(out.data(), rows, dout);
  Y.noalias() = MapC<T>(x.data(), rows, din) * MapC<T>(w.data(), din, dout);
  if (b.defined()) Y.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(b.data(), dout);
  return make_result<T>(std::move(shape), std::move(out), {&x, &w, &b}, [rows, din, dout](TensorImpl<T>& o) {
    auto* px = o.parents[0].get();
    auto* pw = o.parents[1].get();
    auto* pb = o.parents[2].get();
    MapC<T> G(o.grad.data(), rows, dout);
    if (wants_grad(px)) {
      MapM<T>(px->grad_buffer(), rows, din).noalias() += G * MapC<T>(pw->value.data(), din, dout).transpose();
    }
    if (wants_grad(pw)) {
      MapM<T>(pw->grad_buffer(), din, dout).noalias() += MapC<T>(px->value.data(), rows, din).transpose() * G;
    }
    if (wants_grad(pb)) {
      Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(pb->grad_buffer(), dout) += G.colwise().sum();
    }
  });
}

// ---- normalization -------------------------------------------------------

template <typename T>
Tensor<T> softmax_lastdim(const Tensor<T>& x) {
  const std::size_t d = last_dim(x, "softmax_lastdim");
  if (d == 0) throw DimensionError("softmax_lastdim: empty trailing axis");
  const std::size_t rows = x.numel() / d;
  Buffer<T> out(x.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = x.data() + r * d;
    T* y = out.data() + r * d;
    T mx = -std::numeric_limits<T>::infinity();
    for (std::size_t j = 0; j < d; ++j) {
      if (std::isnan(in[j])) throw ContractError("softmax_lastdim: NaN input");
      mx = std::max(mx, in[j]);
    }
    if (mx == -std::numeric_limits<T>::infinity()) {
      std::fill(y, y + d, T(0));  // fully masked row
      continue;
    }
    T s = 0;
    for (std::size_t j = 0; j < d; ++j) s += (y[j] = std::exp(in[j] - mx));
    const T inv = T(1) / s;
    for (std::size_t j = 0; j < d; ++j) y[j] *= inv;
  }
  return make_result<T>(x.shape(), std::move(out), {&x}, [rows, d](TensorImpl<T>& o) {
    auto* p = o.parents[0].get();
    if (!wants_grad(p)) return;
    T* g = p->grad_buffer();
    for (std::size_t r = 0; r < rows; ++r) {
      const T* y = o.value.data() + r * d;
      const T* gy = o.grad.data() + r * d;
      T dot = 0;
      for (std::size_t j = 0; j < d; ++j) dot += gy[j] * y[j];
      for (std::size_t j = 0; j < d; ++j) g[r * d + j] += y[j] * (gy[j] - dot);
    }
  });
}

template <typename T>
Tensor<T> log_softmax_lastdim(const Tensor<T>& x) {
  const std::size_t d = last_dim(x, "log_softmax_lastdim");
  const std::size_t rows = x.numel() / d;
  Buffer<T> out(x.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = x.data() + r * d;
    T* y = out.data() + r * d;
    T mx = *std::max_element(in, in + d);
    if (std::isnan(mx)) throw ContractError("log_softmax_lastdim: NaN input");
    T s = 0;
    for (std::size_t j = 0; j < d; ++j) s += std::exp(in[j] - mx);
    const T lse = mx + std::log(s);
    for (std::size_t j = 0; j < d; ++j) y[j] = in[j] - lse;
  }
  return make_result<T>(x.shape(), std::move(out), {&x}, [rows, d](TensorImpl<T>& o) {
    auto* p = o.parents[0].get();
    if (!wants_grad(p)) return;
    T* g = p->grad_buffer();
    for (std::size_t r = 0; r < rows; ++r) {
      const T* y = o.value.data() + r * d;
      const T* gy = o.grad.data() + r * d;
      T total = 0;
      for (std::size_t j = 0; j < d; ++j) total += gy[j];
      for (std::size_t j = 0; j < d; ++j) g[r * d + j] += gy[j] - std::exp(y[j]) * total;
    }
  });
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps) {
  const std::size_t d = last_dim(x, "layer_norm");
  if (d == 0) throw DimensionError("layer_norm: empty trailing axis");
  if (gamma.numel() != d) throw DimensionError(axis_msg("layer_norm", "gamma", gamma.numel(), d));
  if (beta.numel() != d) throw DimensionError(axis_msg("layer_norm", "beta", beta.numel(), d));
  const std::size_t rows = x.numel() / d;
  Buffer<T> out(x.numel()), xhat(x.numel()), rstd(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = x.data() + r * d;
    T mu = 0;
    for (std::size_t j = 0; j < d; ++j) mu += in[j];
    mu /= static_cast<T>(d);
    T var = 0;
    for (std::size_t j = 0; j < d; ++j) var += (in[j] - mu) * (in[j] - mu);
    var /= static_cast<T>(d);
    rstd[r] = T(1) / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      xhat[r * d + j] = (in[j] - mu) * rstd[r];
      out[r * d + j] = gamma.data()[j] * xhat[r * d + j] + beta.data()[j];
    }
  }
  return make_result<T>(x.shape(), std::move(out), {&x, &gamma, &beta},
                        [rows, d, xhat = std::move(xhat), rstd = std::move(rstd)](TensorImpl<T>& o) {
                          auto* px = o.parents[0].get();
                          auto* pg = o.parents[1].get();
                          auto* pb = o.parents[2].get();
                          if (wants_grad(pg)) {
                            T* g = pg->grad_buffer();
                            for (std::size_t i = 0; i < o.grad.size(); ++i) g[i % d] += o.grad[i] * xhat[i];
                          }
                          if (wants_grad(pb)) {
                            T* g = pb->grad_buffer();
                            for (std::size_t i = 0; i < o.grad.size(); ++i) g[i % d] += o.grad[i];
                          }
                          if (!wants_grad(px)) return;
                          T* gx = px->grad_buffer();
                          Buffer<T> gh(d);
                          for (std::size_t r = 0; r < rows; ++r) {
                            T mean_g = 0, mean_gx = 0;
                            for (std::size_t j = 0; j < d; ++j) {
                              gh[j] = o.grad[r * d + j] * pg->value[j];
                              mean_g += gh[j];
                              mean_gx += gh[j] * xhat[r * d + j];
                            }
                            mean_g /= static_cast<T>(d);
                            mean_gx /= static_cast<T>(d);
                            for (std::size_t j = 0; j < d; ++j) {
                              gx[r * d + j] += rstd[r] * (gh[j] - mean_g - xhat[r * d + j] * mean_gx);
                            }
                          }
                        });
}

template <typename T>
Tensor<T> batch_norm_blend(const Tensor<T>& x, std::size_t groups, const std::vector<T>& prior_mean,
                           const std::vector<T>& prior_sqmean, T prior_weight, const Tensor<T>& gamma,
                           const Tensor<T>& beta, T eps, std::vector<T>* batch_mean, std::vector<T>* batch_var) {
  const std::size_t c = last_dim(x, "batch_norm");
  if (groups == 0 || x.numel() % (groups * c) != 0) {
    throw DimensionError("batch_norm: " + std::to_string(groups) + " groups do not tile shape " +
                         to_string(x.shape()));
  }
  if (gamma.numel() != c) throw DimensionError(axis_msg("batch_norm", "gamma", gamma.numel(), c));
  if (beta.numel() != c) throw DimensionError(axis_msg("batch_norm", "beta", beta.numel(), c));
  if (prior_weight > T(0) && (prior_mean.size() != c || prior_sqmean.size() != c)) {
    throw DimensionError(axis_msg("batch_norm", "reference statistics", prior_mean.size(), c));
  }
  const std::size_t n = x.numel() / (groups * c);
  const T w = T(1) - prior_weight;
  Buffer<T> out(x.numel()), xhat(x.numel()), rstd(groups * c);
  Buffer<T> tot_mean(c, 0), tot_sq(c, 0);
  for (std::size_t g = 0; g < groups; ++g) {
    const T* in = x.data() + g * n * c;
    Buffer<T> m(c, 0), e2(c, 0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < c; ++k) {
        const T v = in[i * c + k];
        m[k] += v;
        e2[k] += v * v;
      }
    for (std::size_t k = 0; k < c; ++k) {
      tot_mean[k] += m[k];
      tot_sq[k] += e2[k];
      m[k] /= static_cast<T>(n);
      e2[k] /= static_cast<T>(n);
      T mu = w * m[k], s2 = w * e2[k];
      if (prior_weight > T(0)) {
        mu += prior_weight * prior_mean[k];
        s2 += prior_weight * prior_sqmean[k];
      }
      const T var = std::max(s2 - mu * mu, T(0));
      rstd[g * c + k] = T(1) / std::sqrt(var + eps);
      m[k] = mu;
    }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < c; ++k) {
        const std::size_t idx = g * n * c + i * c + k;
        xhat[idx] = (in[i * c + k] - m[k]) * rstd[g * c + k];
        out[idx] = gamma.data()[k] * xhat[idx] + beta.data()[k];
      }
  }
  if (batch_mean != nullptr || batch_var != nullptr) {
    const T total = static_cast<T>(groups * n);
    Buffer<T> bm(c), bv(c);
    for (std::size_t k = 0; k < c; ++k) {
      bm[k] = tot_mean[k] / total;
      bv[k] = std::max(tot_sq[k] / total - bm[k] * bm[k], T(0));
    }
    if (batch_mean) batch_mean->assign(bm.begin(), bm.end());
    if (batch_var) batch_var->assign(bv.begin(), bv.end());
  }
  return make_result<T>(
      x.shape(), std::move(out), {&x, &gamma, &beta},
      [groups, n, c, w, xhat = std::move(xhat), rstd = std::move(rstd)](TensorImpl<T>& o) {
        auto* px = o.parents[0].get();
        auto* pg = o.parents[1].get();
        auto* pb = o.parents[2].get();
        if (wants_grad(pg)) {
          T* g = pg->grad_buffer();
          for (std::size_t i = 0; i < o.grad.size(); ++i) g[i % c] += o.grad[i] * xhat[i];
        }
        if (wants_grad(pb)) {
          T* g = pb->grad_buffer();
          for (std::size_t i = 0; i < o.grad.size(); ++i) g[i % c] += o.grad[i];
        }
        if (!wants_grad(px)) return;
        T* gx = px->grad_buffer();
        const T coef = w / static_cast<T>(n);
        for (std::size_t g = 0; g < groups; ++g) {
          Buffer<T> sg(c, 0), sgx(c, 0);
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < c; ++k) {
              const std::size_t idx = g * n * c + i * c + k;
              const T gh = o.grad[idx] * pg->value[k];
              sg[k] += gh;
              sgx[k] += gh * xhat[idx];
            }
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < c; ++k) {
              const std::size_t idx = g * n * c + i * c + k;
              const T gh = o.grad[idx] * pg->value[k];
              gx[idx] += rstd[g * c + k] * (gh - coef * sg[k] - coef * xhat[idx] * sgx[k]);
            }
        }
      });
}

template <typename T>
Tensor<T> batch_norm_fixed(const Tensor<T>& x, const std::vector<T>& mean_v, const std::vector<T>& var_v,
                           const Tensor<T>& gamma, const Tensor<T>& beta, T eps) {
  const std::size_t c = last_dim(x, "batch_norm");
  if (mean_v.size() != c || var_v.size() != c) {
    throw DimensionError(axis_msg("batch_norm", "running statistics", mean_v.size(), c));
  }
  if (gamma.numel() != c) throw DimensionError(axis_msg("batch_norm", "gamma", gamma.numel(), c));
  if (beta.numel() != c) throw DimensionError(axis_msg("batch_norm", "beta", beta.numel(), c));
  Buffer<T> rstd(c), xhat(x.numel()), out(x.numel());
  for (std::size_t k = 0; k < c; ++k) rstd[k] = T(1) / std::sqrt(var_v[k] + eps);
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const std::size_t k = i % c;
    xhat[i] = (x.data()[i] - mean_v[k]) * rstd[k];
    out[i] = gamma.data()[k] * xhat[i] + beta.data()[k];
  }
  return make_result<T>(x.shape(), std::move(out), {&x, &gamma, &beta},
                        [c, xhat = std::move(xhat), rstd = std::move(rstd)](TensorImpl<T>& o) {
                          auto* px = o.parents[0].get();
                          auto* pg = o.parents[1].get();
                          auto* pb = o.parents[2].get();
                          if (wants_grad(px)) {
                            T* g = px->grad_buffer();
                            for (std::size_t i = 0; i < o.grad.size(); ++i)
                              g[i] += o.grad[i] * pg->value[i % c] * rstd[i % c];
                          }
                          if (wants_grad(pg)) {
                            T* g = pg->grad_buffer();
                            for (std::size_t i = 0; i < o.grad.size(); ++i) g[i % c] += o.grad[i] * xhat[i];
                          }
                          if (wants_grad(pb)) {
                            T* g = pb->grad_buffer();
                            for (std::size_t i = 0; i < o.grad.size(); ++i) g[i % c] += o.grad[i];
                          }
                        });
}

// ---- activations ----------------------------------------------------------

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  return unary<T>(
      x, [](T v) { return v > T(0) ? v : T(0); }, [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& x, T alpha) {
  return unary<T>(
      x, [alpha](T v) { return v > T(0) ? v : alpha * v; }, [alpha](T v, T) { return v > T(0) ? T(1) : alpha; });
}

template <typename T>
Tensor<T> prelu(const Tensor<T>& x, const Tensor<T>& slope) {
  const std::size_t c = last_dim(x, "prelu");
  const std::size_t ns = slope.numel();
  if (ns != 1 && ns != c) throw DimensionError(axis_msg("prelu", "slope", ns, c));
  Buffer<T> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const T v = x.data()[i];
    out[i] = v > T(0) ? v : slope.data()[ns == 1 ? 0 : i % c] * v;
  }
  return make_result<T>(x.shape(), std::move(out), {&x, &slope}, [c, ns](TensorImpl<T>& o) {
    auto* px = o.parents[0].get();
    auto* ps = o.parents[1].get();
    if (wants_grad(px)) {
      T* g = px->grad_buffer();
      for (std::size_t i = 0; i < o.grad.size(); ++i) {
        const T a = ps->value[ns == 1 ? 0 : i % c];
        g[i] += o.grad[i] * (px->value[i] > T(0) ? T(1) : a);
      }
    }
    if (wants_grad(ps)) {
      T* g = ps->grad_buffer();
      for (std::size_t i = 0; i < o.grad.size(); ++i) {
        if (px->value[i] <= T(0)) g[ns == 1 ? 0 : i % c] += o.grad[i] * px->value[i];
      }
    }
  });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return unary<T>(
      x, [](T v) { return stable_sigmoid(v); }, [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> tanh(const Tensor<T>& x) {
  return unary<T>(
      x, [](T v) { return std::tanh(v); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Tensor<T> swish(const Tensor<T>& x) {
  return unary<T>(
      x, [](T v) { return v * stable_sigmoid(v); },
      [](T v, T) {
        const T s = stable_sigmoid(v);
        return s + v * s * (T(1) - s);
      });
}

template <typename T>
Tensor<T> glu(const Tensor<T>& x) {
  const std::size_t c2 = last_dim(x, "glu");
  if (c2 % 2 != 0) throw DimensionError("glu: channel axis has odd extent " + std::to_string(c2));
  const std::size_t c = c2 / 2;
  const std::size_t rows = x.numel() / c2;
  Shape shape = x.shape();
  shape.back() = c;
  Buffer<T> out(rows * c), gate(rows * c);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t k = 0; k < c; ++k) {
      gate[r * c + k] = stable_sigmoid(x.data()[r * c2 + c + k]);
      out[r * c + k] = x.data()[r * c2 + k] * gate[r * c + k];
    }
  return make_result<T>(std::move(shape), std::move(out), {&x}, [rows, c, gate = std::move(gate)](TensorImpl<T>& o) {
    auto* p = o.parents[0].get();
    if (!wants_grad(p)) return;
    T* g = p->grad_buffer();
    const std::size_t c2 = 2 * c;
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t k = 0; k < c; ++k) {
        const T s = gate[r * c + k];
        const T go = o.grad[r * c + k];
        g[r * c2 + k] += go * s;
        g[r * c2 + c + k] += go * p->value[r * c2 + k] * s * (T(1) - s);
      }
  });
}

template <typename T>
Tensor<T> dropout(const Tensor<T>& x, T p, std::mt19937_64& rng) {
  if (p <= T(0)) return x;
  if (p >= T(1)) throw ContractError("dropout: probability must be < 1");
  std::bernoulli_distribution keep(1.0 - static_cast<double>(p));
  const T factor = T(1) / (T(1) - p);
  Buffer<T> mask(x.numel());
  for (auto& m : mask) m = keep(rng) ? factor : T(0);
  Buffer<T> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] * mask[i];
  return make_result<T>(x.shape(), std::move(out), {&x}, [mask = std::move(mask)](TensorImpl<T>& o) {
    auto* px = o.parents[0].get();
    if (!wants_grad(px)) return;
    T* g = px->grad_buffer();
    for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i] * mask[i];
  });
}

// ---- sequence ops ------------------------------------------------------------

namespace {

// col[t, k*cin + c] = x[t*stride - pad + k, c], zero outside [0, len).
template <typename T>
void im2col(const T* x, std::size_t len, std::size_t cin, std::size_t width, std::size_t stride, std::size_t pad,
            std::size_t len_out, T* col) {
  const std::size_t row = width * cin;
  for (std::size_t t = 0; t < len_out; ++t) {
    T* dst = col + t * row;
    const long base = static_cast<long>(t * stride) - static_cast<long>(pad);
    for (std::size_t k = 0; k < width; ++k) {
      const long src = base + static_cast<long>(k);
      if (src < 0 || src >= static_cast<long>(len)) std::fill_n(dst + k * cin, cin, T(0));
      else std::copy_n(x + static_cast<std::size_t>(src) * cin, cin, dst + k * cin);
    }
  }
}

template <typename T>
void col2im_add(const T* col, std::size_t len, std::size_t cin, std::size_t width, std::size_t stride,
                std::size_t pad, std::size_t len_out, T* gx) {
  const std::size_t row = width * cin;
  for (std::size_t t = 0; t < len_out; ++t) {
    const T* src_row = col + t * row;
    const long base = static_cast<long>(t * stride) - static_cast<long>(pad);
    for (std::size_t k = 0; k < width; ++k) {
      const long dst = base + static_cast<long>(k);
      if (dst < 0 || dst >= static_cast<long>(len)) continue;
      T* g = gx + static_cast<std::size_t>(dst) * cin;
      const T* s = src_row + k * cin;
      for (std::size_t c = 0; c < cin; ++c) g[c] += s[c];
    }
  }
}

template <typename T>
void check_conv_weight(const Tensor<T>& w, const Tensor<T>& b, std::size_t cin, const char* op) {
  if (w.rank() != 3) throw DimensionError(std::string(op) + ": weight must be [width,ch_in,ch_out], got " + to_string(w.shape()));
  if (w.shape()[1] != cin) throw DimensionError(axis_msg(op, "ch_in", w.shape()[1], cin));
  if (b.defined() && b.numel() != w.shape()[2]) throw DimensionError(axis_msg(op, "bias", b.numel(), w.shape()[2]));
}

}  // namespace

template <typename T>
Tensor<T> conv1d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, std::size_t stride, std::size_t pad) {
  const auto [batch, len, cin] = seq_dims(x, "conv1d");
  check_conv_weight(w, b, cin, "conv1d");
  if (stride < 1) throw ContractError("conv1d: stride must be >= 1");
  const std::size_t width = w.shape()[0], cout = w.shape()[2];
  if (len + 2 * pad < width) {
    throw DimensionError("conv1d: axis 'len' (" + std::to_string(len) + ") + 2*pad shorter than axis 'width' (" +
                         std::to_string(width) + ")");
  }
  const std::size_t len_out = (len + 2 * pad - width) / stride + 1;
  const std::size_t row = width * cin;
  Buffer<T> out(batch * len_out * cout);
  Buffer<T> col(len_out * row);
  MapC<T> W(w.data(), row, cout);
  for (std::size_t n = 0; n < batch; ++n) {
    im2col(x.data() + n * len * cin, len, cin, width, stride, pad, len_out, col.data());
    MapM<T> Y(out.data() + n * len_out * cout, len_out, cout);
    Y.noalias() = MapC<T>(col.data(), len_out, row) * W;
    if (b.defined()) Y.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(b.data(), cout);
  }
  return make_result<T>(seq_shape(x.rank(), batch, len_out, cout), std::move(out), {&x, &w, &b},
                        [=](TensorImpl<T>& o) {
                          auto* px = o.parents[0].get();
                          auto* pw = o.parents[1].get();
                          auto* pb = o.parents[2].get();
                          Buffer<T> colb(len_out * row);
                          MapC<T> Wm(pw->value.data(), row, cout);
                          for (std::size_t n = 0; n < batch; ++n) {
                            MapC<T> G(o.grad.data() + n * len_out * cout, len_out, cout);
                            if (wants_grad(pw)) {
                              im2col(px->value.data() + n * len * cin, len, cin, width, stride, pad, len_out,
                                     colb.data());
                              MapM<T>(pw->grad_buffer(), row, cout).noalias() +=
                                  MapC<T>(colb.data(), len_out, row).transpose() * G;
                            }
                            if (wants_grad(px)) {
                              MapM<T>(colb.data(), len_out, row).noalias() = G * Wm.transpose();
                              col2im_add(colb.data(), len, cin, width, stride, pad, len_out,
                                         px->grad_buffer() + n * len * cin);
                            }
                            if (wants_grad(pb)) {
                              Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(pb->grad_buffer(), cout) +=
                                  G.colwise().sum();
                            }
                          }
                        });
}

template <typename T>
Tensor<T> conv1d_transposed(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, std::size_t stride,
                            std::size_t pad, std::size_t output_pad) {
  const auto [batch, len, cin] = seq_dims(x, "conv1d_transposed");
  check_conv_weight(w, b, cin, "conv1d_transposed");
  if (stride < 1) throw ContractError("conv1d_transposed: stride must be >= 1");
  const std::size_t width = w.shape()[0], cout = w.shape()[2];
  const long full = static_cast<long>((len - 1) * stride + width);
  const long out_len_l = full - 2 * static_cast<long>(pad) + static_cast<long>(output_pad);
  if (len == 0 || out_len_l <= 0) {
    throw DimensionError("conv1d_transposed: axis 'len' " + std::to_string(len) + " yields empty output");
  }
  const std::size_t len_out = static_cast<std::size_t>(out_len_l);
  const std::size_t row = width * cout;
  // M[ci, k*cout + co] = w[k, ci, co]
  Buffer<T> m(cin * row);
  for (std::size_t k = 0; k < width; ++k)
    for (std::size_t ci = 0; ci < cin; ++ci)
      std::copy_n(w.data() + (k * cin + ci) * cout, cout, m.data() + ci * row + k * cout);
  Buffer<T> out(batch * len_out * cout);
  Buffer<T> y(len * row);
  MapC<T> M(m.data(), cin, row);
  for (std::size_t n = 0; n < batch; ++n) {
    MapM<T>(y.data(), len, row).noalias() = MapC<T>(x.data() + n * len * cin, len, cin) * M;
    T* dst = out.data() + n * len_out * cout;
    for (std::size_t t = 0; t < len; ++t)
      for (std::size_t k = 0; k < width; ++k) {
        const long o = static_cast<long>(t * stride + k) - static_cast<long>(pad);
        if (o < 0 || o >= static_cast<long>(len_out)) continue;
        T* d = dst + static_cast<std::size_t>(o) * cout;
        const T* s = y.data() + t * row + k * cout;
        for (std::size_t c = 0; c < cout; ++c) d[c] += s[c];
      }
    if (b.defined()) {
      MapM<T>(dst, len_out, cout).rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(b.data(), cout);
    }
  }
  return make_result<T>(
      seq_shape(x.rank(), batch, len_out, cout), std::move(out), {&x, &w, &b},
      [=, m = std::move(m)](TensorImpl<T>& o) {
        auto* px = o.parents[0].get();
        auto* pw = o.parents[1].get();
        auto* pb = o.parents[2].get();
        Buffer<T> dy(len * row);
        Buffer<T> dm(wants_grad(pw) ? cin * row : 0, T(0));
        MapC<T> Mm(m.data(), cin, row);
        for (std::size_t n = 0; n < batch; ++n) {
          const T* g = o.grad.data() + n * len_out * cout;
          for (std::size_t t = 0; t < len; ++t)
            for (std::size_t k = 0; k < width; ++k) {
              const long oi = static_cast<long>(t * stride + k) - static_cast<long>(pad);
              T* d = dy.data() + t * row + k * cout;
              if (oi < 0 || oi >= static_cast<long>(len_out)) std::fill_n(d, cout, T(0));
              else std::copy_n(g + static_cast<std::size_t>(oi) * cout, cout, d);
            }
          MapC<T> DY(dy.data(), len, row);
          if (wants_grad(px)) {
            MapM<T>(px->grad_buffer() + n * len * cin, len, cin).noalias() += DY * Mm.transpose();
          }
          if (wants_grad(pw)) {
            MapM<T>(dm.data(), cin, row).noalias() += MapC<T>(px->value.data() + n * len * cin, len, cin).transpose() * DY;
          }
          if (wants_grad(pb)) {
            Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(pb->grad_buffer(), cout) +=
                MapC<T>(g, len_out, cout).colwise().sum();
          }
        }
        if (wants_grad(pw)) {
          T* gw = pw->grad_buffer();
          for (std::size_t k = 0; k < width; ++k)
            for (std::size_t ci = 0; ci < cin; ++ci)
              for (std::size_t co = 0; co < cout; ++co) gw[(k * cin + ci) * cout + co] += dm[ci * row + k * cout + co];
        }
      });
}

template <typename T>
Tensor<T> depthwise_conv1d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, std::size_t pad) {
  const auto [batch, len, c] = seq_dims(x, "depthwise_conv1d");
  if (w.rank() != 2 || w.shape()[1] != c) {
    throw DimensionError("depthwise_conv1d: weight must be [width," + std::to_string(c) + "], got " +
                         to_string(w.shape()));
  }
  if (b.defined() && b.numel() != c) throw DimensionError(axis_msg("depthwise_conv1d", "bias", b.numel(), c));
  const std::size_t width = w.shape()[0];
  if (len + 2 * pad < width) throw DimensionError("depthwise_conv1d: axis 'len' shorter than kernel width");
  const std::size_t len_out = len + 2 * pad - width + 1;
  Buffer<T> out(batch * len_out * c);
  for (std::size_t n = 0; n < batch; ++n)
    for (std::size_t t = 0; t < len_out; ++t) {
      T* dst = out.data() + (n * len_out + t) * c;
      if (b.defined()) std::copy_n(b.data(), c, dst);
      for (std::size_t k = 0; k < width; ++k) {
        const long s = static_cast<long>(t + k) - static_cast<long>(pad);
        if (s < 0 || s >= static_cast<long>(len)) continue;
        const T* src = x.data() + (n * len + static_cast<std::size_t>(s)) * c;
        const T* wk = w.data() + k * c;
        for (std::size_t ch = 0; ch < c; ++ch) dst[ch] += src[ch] * wk[ch];
      }
    }
  return make_result<T>(seq_shape(x.rank(), batch, len_out, c), std::move(out), {&x, &w, &b},
                        [=](TensorImpl<T>& o) {
                          auto* px = o.parents[0].get();
                          auto* pw = o.parents[1].get();
                          auto* pb = o.parents[2].get();
                          T* gx = wants_grad(px) ? px->grad_buffer() : nullptr;
                          T* gw = wants_grad(pw) ? pw->grad_buffer() : nullptr;
                          T* gb = wants_grad(pb) ? pb->grad_buffer() : nullptr;
                          for (std::size_t n = 0; n < batch; ++n)
                            for (std::size_t t = 0; t < len_out; ++t) {
                              const T* g = o.grad.data() + (n * len_out + t) * c;
                              if (gb)
                                for (std::size_t ch = 0; ch < c; ++ch) gb[ch] += g[ch];
                              for (std::size_t k = 0; k < width; ++k) {
                                const long s = static_cast<long>(t + k) - static_cast<long>(pad);
                                if (s < 0 || s >= static_cast<long>(len)) continue;
                                const std::size_t xi = (n * len + static_cast<std::size_t>(s)) * c;
                                for (std::size_t ch = 0; ch < c; ++ch) {
                                  if (gx) gx[xi + ch] += g[ch] * pw->value[k * c + ch];
                                  if (gw) gw[k * c + ch] += g[ch] * px->value[xi + ch];
                                }
                              }
                            }
                        });
}

template <typename T>
Tensor<T> max_pool1d(const Tensor<T>& x, std::size_t width, std::size_t stride) {
  const auto [batch, len, c] = seq_dims(x, "max_pool1d");
  if (width < 1 || stride < 1) throw ContractError("max_pool1d: width and stride must be >= 1");
  if (width > len) {
    throw DimensionError("max_pool1d: axis 'width' (" + std::to_string(width) + ") exceeds axis 'len' (" +
                         std::to_string(len) + ")");
  }
  const std::size_t len_out = (len - width) / stride + 1;
  Buffer<T> out(batch * len_out * c);
  std::vector<std::size_t> arg(out.size());
  for (std::size_t n = 0; n < batch; ++n)
    for (std::size_t t = 0; t < len_out; ++t)
      for (std::size_t ch = 0; ch < c; ++ch) {
        std::size_t best = (n * len + t * stride) * c + ch;
        for (std::size_t k = 1; k < width; ++k) {
          const std::size_t idx = (n * len + t * stride + k) * c + ch;
          if (x.data()[idx] > x.data()[best]) best = idx;
        }
        const std::size_t o = (n * len_out + t) * c + ch;
        out[o] = x.data()[best];
        arg[o] = best;
      }
  return make_result<T>(seq_shape(x.rank(), batch, len_out, c), std::move(out), {&x},
                        [arg = std::move(arg)](TensorImpl<T>& o) {
                          auto* p = o.parents[0].get();
                          if (!wants_grad(p)) return;
                          T* g = p->grad_buffer();
                          for (std::size_t i = 0; i < arg.size(); ++i) g[arg[i]] += o.grad[i];
                        });
}

template <typename T>
Tensor<T> embedding(const Tensor<T>& table, const std::vector<int>& ids) {
  if (table.rank() != 2) throw DimensionError("embedding: table must be [V, d], got " + to_string(table.shape()));
  const std::size_t v = table.shape()[0], d = table.shape()[1];
  Buffer<T> out(ids.size() * d);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= v) {
      throw DimensionError("embedding: id " + std::to_string(ids[i]) + " outside vocabulary of " + std::to_string(v));
    }
    std::copy_n(table.data() + static_cast<std::size_t>(ids[i]) * d, d, out.data() + i * d);
  }
  return make_result<T>({ids.size(), d}, std::move(out), {&table}, [ids, d](TensorImpl<T>& o) {
    auto* p = o.parents[0].get();
    if (!wants_grad(p)) return;
    T* g = p->grad_buffer();
    for (std::size_t i = 0; i < ids.size(); ++i)
      for (std::size_t j = 0; j < d; ++j) g[static_cast<std::size_t>(ids[i]) * d + j] += o.grad[i * d + j];
  });
}

template <typename T>
Tensor<T> frame_signal(const Tensor<T>& x, std::size_t width, std::size_t hop) {
  const std::size_t len = x.numel();
  if (width == 0 || hop == 0) throw ContractError("frame_signal: width and hop must be >= 1");
  if (len < width) {
    throw DimensionError("frame_signal: signal of " + std::to_string(len) + " samples is shorter than one window (" +
                         std::to_string(width) + ")");
  }
  const std::size_t frames = 1 + (len - width) / hop;
  Buffer<T> out(frames * width);
  for (std::size_t f = 0; f < frames; ++f) std::copy_n(x.data() + f * hop, width, out.data() + f * width);
  return make_result<T>({frames, width}, std::move(out), {&x}, [frames, width, hop](TensorImpl<T>& o) {
    auto* p = o.parents[0].get();
    if (!wants_grad(p)) return;
    T* g = p->grad_buffer();
    for (std::size_t f = 0; f < frames; ++f)
      for (std::size_t j = 0; j < width; ++j) g[f * hop + j] += o.grad[f * width + j];
  });
}

template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, const std::vector<int>& targets, T label_smoothing,
                        int ignore_index) {
  if (logits.rank() != 2) throw DimensionError("cross_entropy: logits must be [n, V], got " + to_string(logits.shape()));
  const std::size_t n = logits.shape()[0], v = logits.shape()[1];
  if (targets.size() != n) throw DimensionError(axis_msg("cross_entropy", "targets", targets.size(), n));
  Buffer<T> probs(n * v);
  T loss = 0;
  const T ls = label_smoothing;
  for (std::size_t r = 0; r < n; ++r) {
    const T* in = logits.data() + r * v;
    const T mx = *std::max_element(in, in + v);
    if (std::isnan(mx)) throw ContractError("cross_entropy: NaN logits");
    T s = 0;
    for (std::size_t j = 0; j < v; ++j) s += (probs[r * v + j] = std::exp(in[j] - mx));
    const T lse = mx + std::log(s);
    for (std::size_t j = 0; j < v; ++j) probs[r * v + j] /= s;
    if (targets[r] == ignore_index) continue;
    if (targets[r] < 0 || static_cast<std::size_t>(targets[r]) >= v) {
      throw DimensionError("cross_entropy: target " + std::to_string(targets[r]) + " outside vocabulary");
    }
    const T nll = lse - in[targets[r]];
    if (ls > T(0)) {
      T smooth = 0;
      for (std::size_t j = 0; j < v; ++j) smooth += lse - in[j];
      loss += (T(1) - ls) * nll + ls * smooth / static_cast<T>(v);
    } else {
      loss += nll;
    }
  }
  return make_result<T>({}, Buffer<T>{loss}, {&logits},
                        [n, v, ls, targets, ignore_index, probs = std::move(probs)](TensorImpl<T>& o) {
                          auto* p = o.parents[0].get();
                          if (!wants_grad(p)) return;
                          T* g = p->grad_buffer();
                          const T go = o.grad[0];
                          for (std::size_t r = 0; r < n; ++r) {
                            if (targets[r] == ignore_index) continue;
                            for (std::size_t j = 0; j < v; ++j) {
                              T target = ls / static_cast<T>(v);
                              if (static_cast<int>(j) == targets[r]) target += T(1) - ls;
                              g[r * v + j] += go * (probs[r * v + j] - target);
                            }
                          }
                        });
}

#define ADVJOINT_INSTANTIATE_OPS(T)                                                                              \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                                    \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                                    \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                                    \
  template Tensor<T> scale(const Tensor<T>&, T);                                                                 \
  template Tensor<T> add_scalar(const Tensor<T>&, T);                                                            \
  template Tensor<T> add_lastdim(const Tensor<T>&, const Tensor<T>&);                                            \
  template Tensor<T> mul_lastdim(const Tensor<T>&, const Tensor<T>&);                                            \
  template Tensor<T> square(const Tensor<T>&);                                                                   \
  template Tensor<T> abs(const Tensor<T>&);                                                                      \
  template Tensor<T> log_floor(const Tensor<T>&, T);                                                             \
  template Tensor<T> sum(const Tensor<T>&);                                                                      \
  template Tensor<T> mean(const Tensor<T>&);                                                                     \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                                           \
  template Tensor<T> transpose_last2(const Tensor<T>&);                                                          \
  template Tensor<T> concat(const std::vector<Tensor<T>>&, int);                                                 \
  template Tensor<T> slice(const Tensor<T>&, int, std::size_t, std::size_t);                                     \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&, bool, bool);                                     \
  template Tensor<T> dense(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                                \
  template Tensor<T> softmax_lastdim(const Tensor<T>&);                                                          \
  template Tensor<T> log_softmax_lastdim(const Tensor<T>&);                                                      \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T);                        \
  template Tensor<T> batch_norm_blend(const Tensor<T>&, std::size_t, const std::vector<T>&, const std::vector<T>&, \
                                      T, const Tensor<T>&, const Tensor<T>&, T, std::vector<T>*, std::vector<T>*); \
  template Tensor<T> batch_norm_fixed(const Tensor<T>&, const std::vector<T>&, const std::vector<T>&,           \
                                      const Tensor<T>&, const Tensor<T>&, T);                                    \
  template Tensor<T> relu(const Tensor<T>&);                                                                     \
  template Tensor<T> leaky_relu(const Tensor<T>&, T);                                                            \
  template Tensor<T> prelu(const Tensor<T>&, const Tensor<T>&);                                                  \
  template Tensor<T> sigmoid(const Tensor<T>&);                                                                  \
  template Tensor<T> tanh(const Tensor<T>&);                                                                     \
  template Tensor<T> swish(const Tensor<T>&);                                                                    \
  template Tensor<T> glu(const Tensor<T>&);                                                                      \
  template Tensor<T> dropout(const Tensor<T>&, T, std::mt19937_64&);                                             \
  template Tensor<T> conv1d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, std::size_t, std::size_t);     \
  template Tensor<T> conv1d_transposed(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, std::size_t,        \
                                       std::size_t, std::size_t);                                                \
  template Tensor<T> depthwise_conv1d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, std::size_t);        \
  template Tensor<T> max_pool1d(const Tensor<T>&, std::size_t, std::size_t);                                     \
  template Tensor<T> embedding(const Tensor<T>&, const std::vector<int>&);                                       \
  template Tensor<T> frame_signal(const Tensor<T>&, std::size_t, std::size_t);                                   \
  template Tensor<T> cross_entropy(const Tensor<T>&, const std::vector<int>&, T, int);

ADVJOINT_INSTANTIATE_OPS(float)
ADVJOINT_INSTANTIATE_OPS(double)

}  // namespace advjoint::diff
