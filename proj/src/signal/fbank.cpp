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

#include "advjoint/signal/fbank.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace advjoint::signal {

using diff::Tensor;

std::size_t FbankConfig::win_length() const {
  return static_cast<std::size_t>(std::lround(win_ms * sample_rate / 1000.0));
}
std::size_t FbankConfig::hop_length() const {
  return static_cast<std::size_t>(std::lround(hop_ms * sample_rate / 1000.0));
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

MelFilterbank make_mel_filterbank(std::size_t n_mels, std::size_t n_fft, int sample_rate, double fmin, double fmax) {
  if (n_mels == 0 || n_fft < 2) throw std::invalid_argument("mel filterbank: need n_mels >= 1 and n_fft >= 2");
  if (!(fmin >= 0.0 && fmax > fmin && fmax <= sample_rate / 2.0)) {
    throw std::invalid_argument("mel filterbank: need 0 <= fmin < fmax <= Nyquist");
  }
  MelFilterbank fb;
  fb.n_mels = n_mels;
  fb.n_bins = n_fft / 2 + 1;
  fb.fmin = fmin;
  fb.fmax = fmax;
  fb.weights.assign(n_mels * fb.n_bins, 0.0);
  const double lo = hz_to_mel(fmin), hi = hz_to_mel(fmax);
  const double step = (hi - lo) / static_cast<double>(n_mels + 1);
  for (std::size_t m = 0; m < n_mels; ++m) {
    const double left = lo + step * static_cast<double>(m);
    const double center = left + step;
    const double right = center + step;
    for (std::size_t k = 0; k < fb.n_bins; ++k) {
      const double mel = hz_to_mel(static_cast<double>(k) * sample_rate / static_cast<double>(n_fft));
      double w = 0.0;
      if (mel > left && mel <= center) w = (mel - left) / (center - left);
      else if (mel > center && mel < right) w = (right - mel) / (right - center);
      fb.weights[m * fb.n_bins + k] = w;
    }
  }
  return fb;
}

std::vector<double> hann_window(std::size_t length) {
  std::vector<double> w(length);
  for (std::size_t n = 0; n < length; ++n) {
    w[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / static_cast<double>(length));
  }
  return w;
}

std::size_t frame_count(std::size_t length, std::size_t win, std::size_t hop) {
  if (length < win) return 0;
  return 1 + (length - win) / hop;
}

StftFrames stft(const std::vector<double>& x, const FbankConfig& cfg) {
  const std::size_t win = cfg.win_length(), hop = cfg.hop_length();
  if (cfg.n_fft < win) throw std::invalid_argument("stft: n_fft smaller than the window");
  if (x.size() < win) {
    throw SignalError("stft: signal of " + std::to_string(x.size()) + " samples is shorter than one window (" +
                      std::to_string(win) + ")");
  }
  StftFrames out;
  out.frames = frame_count(x.size(), win, hop);
  out.bins = cfg.n_fft / 2 + 1;
  out.re.assign(out.frames * out.bins, 0.0);
  out.im.assign(out.frames * out.bins, 0.0);
  const auto w = hann_window(win);
  for (std::size_t f = 0; f < out.frames; ++f) {
    for (std::size_t k = 0; k < out.bins; ++k) {
      double re = 0, im = 0;
      for (std::size_t n = 0; n < win; ++n) {
        const double v = w[n] * x[f * hop + n];
        const double ang = 2.0 * std::numbers::pi * static_cast<double>(k * n % cfg.n_fft) / static_cast<double>(cfg.n_fft);
        re += v * std::cos(ang);
        im -= v * std::sin(ang);
      }
      out.re[f * out.bins + k] = re;
      out.im[f * out.bins + k] = im;
    }
  }
  return out;
}

NormStats compute_norm_stats(const std::vector<std::vector<double>>& matrices, std::size_t dim) {
  if (dim == 0) throw std::invalid_argument("compute_norm_stats: dim must be >= 1");
  NormStats s;
  s.mean.assign(dim, 0.0);
  s.var.assign(dim, 0.0);
  std::size_t rows = 0;
  for (const auto& m : matrices) {
    if (m.size() % dim != 0) throw diff::DimensionError("compute_norm_stats: matrix not a multiple of dim");
    for (std::size_t i = 0; i < m.size(); ++i) s.mean[i % dim] += m[i];
    rows += m.size() / dim;
  }
  if (rows == 0) throw std::invalid_argument("compute_norm_stats: empty population");
  for (auto& v : s.mean) v /= static_cast<double>(rows);
  for (const auto& m : matrices)
    for (std::size_t i = 0; i < m.size(); ++i) {
      const double d = m[i] - s.mean[i % dim];
      s.var[i % dim] += d * d;
    }
  for (auto& v : s.var) v /= static_cast<double>(rows);
  return s;
}

template <typename T>
Tensor<T> delta(const Tensor<T>& features, int window) {
  if (window < 1) throw std::invalid_argument("delta: window must be >= 1");
  if (features.rank() != 2) throw diff::DimensionError("delta: expected [frames, dim], got " + diff::to_string(features.shape()));
  const std::size_t frames = features.dim(0), dim = features.dim(1);
  if (frames == 0) throw diff::DimensionError("delta: no frames");
  T denom = 0;
  for (int n = 1; n <= window; ++n) denom += T(2 * n * n);
  auto clampi = [frames](long t) { return static_cast<std::size_t>(std::clamp<long>(t, 0, static_cast<long>(frames) - 1)); };
  std::vector<T> out(frames * dim, T(0));
  const T* x = features.data();
  for (std::size_t t = 0; t < frames; ++t)
    for (int n = 1; n <= window; ++n) {
      const std::size_t a = clampi(static_cast<long>(t) + n), b = clampi(static_cast<long>(t) - n);
      for (std::size_t d = 0; d < dim; ++d) out[t * dim + d] += T(n) * (x[a * dim + d] - x[b * dim + d]) / denom;
    }
  return diff::detail::make_result<T>(features.shape(), std::move(out), {&features},
                                      [frames, dim, window, denom, clampi](diff::TensorImpl<T>& o) {
                                        auto* p = o.parents[0].get();
                                        if (!diff::detail::wants_grad(p)) return;
                                        T* g = p->grad_buffer();
                                        for (std::size_t t = 0; t < frames; ++t)
                                          for (int n = 1; n <= window; ++n) {
                                            const std::size_t a = clampi(static_cast<long>(t) + n);
                                            const std::size_t b = clampi(static_cast<long>(t) - n);
                                            for (std::size_t d = 0; d < dim; ++d) {
                                              const T v = T(n) * o.grad[t * dim + d] / denom;
                                              g[a * dim + d] += v;
                                              g[b * dim + d] -= v;
                                            }
                                          }
                                      });
}

template <typename T>
FbankExtractor<T>::FbankExtractor(FbankConfig cfg) : cfg_(cfg) {
  const std::size_t win = cfg_.win_length();
  if (cfg_.n_fft < win) throw std::invalid_argument("fbank: n_fft smaller than the window");
  mel_ = make_mel_filterbank(cfg_.n_mels, cfg_.n_fft, cfg_.sample_rate, cfg_.fmin, cfg_.fmax);
  const std::size_t bins = cfg_.n_fft / 2 + 1;
  const auto w = hann_window(win);
  std::vector<T> c(win * bins), s(win * bins);
  for (std::size_t n = 0; n < win; ++n)
    for (std::size_t k = 0; k < bins; ++k) {
      const double ang = 2.0 * std::numbers::pi * static_cast<double>(k * n % cfg_.n_fft) / static_cast<double>(cfg_.n_fft);
      c[n * bins + k] = static_cast<T>(w[n] * std::cos(ang));
      s[n * bins + k] = static_cast<T>(-w[n] * std::sin(ang));
    }
  cos_ = Tensor<T>::from({win, bins}, std::move(c));
  sin_ = Tensor<T>::from({win, bins}, std::move(s));
  std::vector<T> mt(bins * cfg_.n_mels);
  for (std::size_t m = 0; m < cfg_.n_mels; ++m)
    for (std::size_t k = 0; k < bins; ++k) mt[k * cfg_.n_mels + m] = static_cast<T>(mel_.at(m, k));
  mel_t_ = Tensor<T>::from({bins, cfg_.n_mels}, std::move(mt));
}

template <typename T>
Tensor<T> FbankExtractor<T>::power_spectrum(const Tensor<T>& x) const {
  if (x.numel() < cfg_.win_length()) {
    throw SignalError("fbank: signal of " + std::to_string(x.numel()) + " samples is shorter than one window");
  }
  Tensor<T> frames = diff::frame_signal(x, cfg_.win_length(), cfg_.hop_length());
  Tensor<T> re = diff::matmul(frames, cos_);
  Tensor<T> im = diff::matmul(frames, sin_);
  return diff::add(diff::square(re), diff::square(im));
}

template <typename T>
Tensor<T> FbankExtractor<T>::raw(const Tensor<T>& x) const {
  Tensor<T> logmel = diff::log_floor(diff::matmul(power_spectrum(x), mel_t_), static_cast<T>(cfg_.log_floor));
  if (!cfg_.with_deltas) return logmel;
  Tensor<T> d1 = delta(logmel, cfg_.delta_window);
  Tensor<T> d2 = delta(d1, cfg_.delta_window);
  return diff::concat<T>({logmel, d1, d2}, -1);
}

template <typename T>
Tensor<T> FbankExtractor<T>::normalize(const Tensor<T>& feats, const NormStats& stats) const {
  const std::size_t dim = feats.dim(-1);
  if (stats.mean.size() != dim || stats.var.size() != dim) {
    throw diff::DimensionError("fbank: normalization stats have " + std::to_string(stats.mean.size()) +
                               " dims, features have " + std::to_string(dim));
  }
  std::vector<T> shift(dim), inv(dim);
  for (std::size_t d = 0; d < dim; ++d) {
    shift[d] = static_cast<T>(-stats.mean[d]);
    inv[d] = static_cast<T>(1.0 / std::sqrt(stats.var[d] + 1e-12));
  }
  return diff::mul_lastdim(diff::add_lastdim(feats, Tensor<T>::from({dim}, std::move(shift))),
                           Tensor<T>::from({dim}, std::move(inv)));
}

template <typename T>
Tensor<T> FbankExtractor<T>::operator()(const Tensor<T>& x, const NormStats& stats) const {
  return normalize(raw(x), stats);
}

template Tensor<float> delta(const Tensor<float>&, int);
template Tensor<double> delta(const Tensor<double>&, int);
template class FbankExtractor<float>;
template class FbankExtractor<double>;

}  // namespace advjoint::signal
