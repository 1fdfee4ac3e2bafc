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

#include "advjoint/signal/waveform.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

namespace advjoint::signal {

namespace {

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
void put_u32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u16(std::string& s, std::uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
}

}  // namespace

double mean_power(const std::vector<double>& x) {
  if (x.empty()) return 0.0;
  double s = 0;
  for (double v : x) s += v * v;
  return s / static_cast<double>(x.size());
}

Waveform read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open WAV file " + path.string());
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < 12 || std::memcmp(buf.data(), "RIFF", 4) != 0 || std::memcmp(buf.data() + 8, "WAVE", 4) != 0) {
    throw SignalError(path.string() + ": not a RIFF/WAVE file");
  }
  std::size_t pos = 12;
  int channels = 0, rate = 0, bits = 0, format = 0;
  const unsigned char* data = nullptr;
  std::size_t data_len = 0;
  while (pos + 8 <= buf.size()) {
    const std::uint32_t len = read_u32(&buf[pos + 4]);
    const unsigned char* body = &buf[pos + 8];
    if (pos + 8 + len > buf.size()) throw SignalError(path.string() + ": truncated chunk");
    if (std::memcmp(&buf[pos], "fmt ", 4) == 0 && len >= 16) {
      format = read_u16(body);
      channels = read_u16(body + 2);
      rate = static_cast<int>(read_u32(body + 4));
      bits = read_u16(body + 14);
    } else if (std::memcmp(&buf[pos], "data", 4) == 0) {
      data = body;
      data_len = len;
    }
    pos += 8 + len + (len & 1);
  }
  if (format != 1 || bits != 16) throw SignalError(path.string() + ": only 16-bit PCM is supported");
  if (channels != 1) throw SignalError(path.string() + ": only mono audio is supported");
  if (rate != kSampleRate) {
    throw SignalError(path.string() + ": sample rate " + std::to_string(rate) + " Hz, expected 16000 (no resampling)");
  }
  if (data == nullptr) throw SignalError(path.string() + ": missing data chunk");
  Waveform w;
  w.sample_rate = rate;
  w.id = path.stem().string();
  w.samples.resize(data_len / 2);
  for (std::size_t i = 0; i < w.samples.size(); ++i) {
    const auto v = static_cast<std::int16_t>(read_u16(data + 2 * i));
    w.samples[i] = static_cast<double>(v) / 32768.0;
  }
  return w;
}

void write_wav(const std::filesystem::path& path, const Waveform& wav) {
  std::string out;
  const auto n = static_cast<std::uint32_t>(wav.samples.size());
  out.reserve(44 + 2 * n);
  out += "RIFF";
  put_u32(out, 36 + 2 * n);
  out += "WAVEfmt ";
  put_u32(out, 16);
  put_u16(out, 1);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(wav.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(wav.sample_rate) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out += "data";
  put_u32(out, 2 * n);
  for (double s : wav.samples) {
    const double c = std::clamp(s, -1.0, 1.0);
    const auto q = static_cast<std::int16_t>(std::lround(std::clamp(c * 32768.0, -32768.0, 32767.0)));
    put_u16(out, static_cast<std::uint16_t>(q));
  }
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + tmp.string());
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw std::runtime_error("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

MixResult mix_at_snr(const Waveform& clean, const Waveform& noise, double snr_db, std::uint64_t seed) {
  const std::size_t len = clean.size();
  if (len == 0) throw SignalError("mix_at_snr: empty clean signal");
  if (noise.size() < len) {
    throw SignalError("mix_at_snr: noise has " + std::to_string(noise.size()) + " samples, clean needs " +
                      std::to_string(len));
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, noise.size() - len);
  const std::size_t offset = pick(rng);
  std::vector<double> seg(noise.samples.begin() + static_cast<std::ptrdiff_t>(offset),
                          noise.samples.begin() + static_cast<std::ptrdiff_t>(offset + len));
  const double pc = mean_power(clean.samples);
  const double pn = mean_power(seg);
  if (pc <= 0.0) throw SignalError("mix_at_snr: clean signal has zero power");
  if (pn <= 0.0) throw SignalError("mix_at_snr: noise segment has zero power");
  MixResult r;
  r.offset = offset;
  r.gain = std::sqrt(pc / (pn * std::pow(10.0, snr_db / 10.0)));
  r.mixed.sample_rate = clean.sample_rate;
  r.mixed.id = clean.id;
  r.mixed.samples.resize(len);
  double scaled = 0;
  for (std::size_t i = 0; i < len; ++i) {
    const double nz = r.gain * seg[i];
    scaled += nz * nz;
    double v = clean.samples[i] + nz;
    if (v > 1.0 || v < -1.0) {
      r.clipped = true;
      v = std::clamp(v, -1.0, 1.0);
    }
    r.mixed.samples[i] = v;
  }
  r.measured_snr_db = 10.0 * std::log10(pc / (scaled / static_cast<double>(len)));
  return r;
}

std::vector<double> preemphasis(const std::vector<double>& x, double coeff) {
  if (coeff < 0.0 || coeff >= 1.0) throw std::invalid_argument("preemphasis: coefficient must be in [0, 1)");
  std::vector<double> y(x.size());
  for (std::size_t n = 0; n < x.size(); ++n) y[n] = n == 0 ? x[0] : x[n] - coeff * x[n - 1];
  return y;
}

std::vector<double> deemphasis(const std::vector<double>& x, double coeff) {
  if (coeff < 0.0 || coeff >= 1.0) throw std::invalid_argument("deemphasis: coefficient must be in [0, 1)");
  std::vector<double> y(x.size());
  for (std::size_t n = 0; n < x.size(); ++n) y[n] = n == 0 ? x[0] : x[n] + coeff * y[n - 1];
  return y;
}

template <typename T>
diff::Tensor<T> preemphasis(const diff::Tensor<T>& x, T coeff) {
  const std::size_t n = x.numel();
  std::vector<T> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = i == 0 ? x.data()[0] : x.data()[i] - coeff * x.data()[i - 1];
  return diff::detail::make_result<T>(x.shape(), std::move(y), {&x}, [coeff](diff::TensorImpl<T>& o) {
    auto* p = o.parents[0].get();
    if (!diff::detail::wants_grad(p)) return;
    T* g = p->grad_buffer();
    const std::size_t n = o.grad.size();
    for (std::size_t i = 0; i < n; ++i) g[i] += o.grad[i] - (i + 1 < n ? coeff * o.grad[i + 1] : T(0));
  });
}

template <typename T>
diff::Tensor<T> deemphasis(const diff::Tensor<T>& x, T coeff) {
  const std::size_t n = x.numel();
  std::vector<T> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = i == 0 ? x.data()[0] : x.data()[i] + coeff * y[i - 1];
  return diff::detail::make_result<T>(x.shape(), std::move(y), {&x}, [coeff](diff::TensorImpl<T>& o) {
    auto* p = o.parents[0].get();
    if (!diff::detail::wants_grad(p)) return;
    T* g = p->grad_buffer();
    // Adjoint of the recursion runs backwards in time.
    T carry = 0;
    for (std::size_t i = o.grad.size(); i-- > 0;) {
      carry = o.grad[i] + coeff * carry;
      g[i] += carry;
    }
  });
}

template diff::Tensor<float> preemphasis(const diff::Tensor<float>&, float);
template diff::Tensor<double> preemphasis(const diff::Tensor<double>&, double);
template diff::Tensor<float> deemphasis(const diff::Tensor<float>&, float);
template diff::Tensor<double> deemphasis(const diff::Tensor<double>&, double);

double ssnr(const std::vector<double>& clean, const std::vector<double>& processed, const SsnrConfig& cfg) {
  if (clean.size() != processed.size()) {
    throw std::invalid_argument("ssnr: length mismatch (" + std::to_string(clean.size()) + " vs " +
                                std::to_string(processed.size()) + ")");
  }
  if (clean.empty()) throw SignalError("ssnr: empty signals");
  const auto frame = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(cfg.frame_ms * cfg.sample_rate / 1000.0)));
  const std::size_t frames = std::max<std::size_t>(1, clean.size() / frame);
  double total = 0;
  for (std::size_t f = 0; f < frames; ++f) {
    const std::size_t start = f * frame;
    const std::size_t end = frames == 1 ? clean.size() : start + frame;
    double es = 0, ee = 0;
    for (std::size_t i = start; i < end; ++i) {
      es += clean[i] * clean[i];
      const double d = clean[i] - processed[i];
      ee += d * d;
    }
    double db;
    if (ee == 0.0) db = cfg.ceil_db;
    else if (es == 0.0) db = cfg.floor_db;
    else db = std::clamp(10.0 * std::log10(es / ee), cfg.floor_db, cfg.ceil_db);
    total += db;
  }
  return total / static_cast<double>(frames);
}

}  // namespace advjoint::signal
