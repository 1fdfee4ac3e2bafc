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

#include "advjoint/segan/segan.hpp"

#include <limits>
#include <sstream>

namespace advjoint::segan {

using diff::ConfigurationError;
using diff::ContractError;
using diff::DimensionError;
using diff::NormMode;

SeganConfig SeganConfig::paper() { return SeganConfig{}; }

SeganConfig SeganConfig::toy() {
  SeganConfig c;
  c.chunk = 1024;
  c.filters = {16, 32, 64, 128};
  c.attention_layers = {3};
  return c;
}

std::size_t SeganConfig::length_at(std::size_t i) const {
  std::size_t len = chunk;
  for (std::size_t k = 0; k < i; ++k) len /= stride;
  return len;
}

void SeganConfig::validate() const {
  if (filters.empty()) throw ConfigurationError("segan: filter ladder is empty");
  if (kernel % 2 == 0) throw ConfigurationError("segan: kernel width must be odd, got " + std::to_string(kernel));
  if (stride < 2) throw ConfigurationError("segan: stride must be >= 2");
  if (b < 1 || p < 1) throw ConfigurationError("segan: b and p must be positive");
  std::size_t len = chunk;
  for (std::size_t i = 0; i < filters.size(); ++i) {
    if (filters[i] == 0) throw ConfigurationError("segan: zero filters at layer " + std::to_string(i + 1));
    if (len % stride != 0 || len == 0) {
      throw ConfigurationError("segan: chunk " + std::to_string(chunk) + " does not halve cleanly through " +
                               std::to_string(filters.size()) + " layers");
    }
    len /= stride;
  }
  for (int l : attention_layers) {
    if (l < 1 || static_cast<std::size_t>(l) > filters.size()) {
      throw ConfigurationError("segan: attention layer " + std::to_string(l) + " outside 1.." +
                               std::to_string(filters.size()));
    }
    if (filters[l - 1] % b != 0) {
      throw ConfigurationError("segan: layer " + std::to_string(l) + " has " + std::to_string(filters[l - 1]) +
                               " channels, not divisible by b=" + std::to_string(b));
    }
  }
  if (!(preemph >= 0.0 && preemph < 1.0)) throw ConfigurationError("segan: preemphasis must be in [0, 1)");
}

std::string SeganConfig::fingerprint() const {
  std::ostringstream os;
  os << "segan:chunk=" << chunk << ";k=" << kernel << ";s=" << stride << ";f=";
  for (auto f : filters) os << f << ',';
  os << ";attn=";
  for (int l : attention_layers) os << l << ',';
  os << ";b=" << b << ";p=" << p;
  return os.str();
}

// ---- self-attention ---------------------------------------------------------

template <typename T>
SelfAttention<T>::SelfAttention(diff::ParameterSet<T>& params, const std::string& prefix, std::size_t channels,
                                std::size_t b, std::size_t p, Rng& rng)
    : channels_(channels), b_(b), p_(p) {
  if (b == 0 || p == 0 || channels % b != 0) {
    throw DimensionError("self_attention: " + std::to_string(channels) + " channels not divisible by b=" +
                         std::to_string(b));
  }
  const std::size_t r = channels / b;
  wq_ = params.add_uniform(prefix + ".wq", {channels, r}, channels, rng);
  wk_ = params.add_uniform(prefix + ".wk", {channels, r}, channels, rng);
  wv_ = params.add_uniform(prefix + ".wv", {channels, r}, channels, rng);
  wo_ = params.add_uniform(prefix + ".wo", {r, channels}, r, rng);
  beta_ = params.add_constant(prefix + ".beta", {1}, T(0));
}

template <typename T>
Tensor<T> SelfAttention<T>::forward(const Tensor<T>& f, Tensor<T>* attention_map) const {
  if (f.rank() != 2 && f.rank() != 3) throw DimensionError("self_attention: expected [L,C] or [B,L,C]");
  if (f.dim(-1) != channels_) {
    throw DimensionError("self_attention: input has " + std::to_string(f.dim(-1)) + " channels, layer expects " +
                         std::to_string(channels_));
  }
  const Tensor<T> x = f.rank() == 2 ? diff::reshape(f, {1, f.dim(0), f.dim(1)}) : f;
  const std::size_t batch = x.dim(0), len = x.dim(1);
  if (len == 0) throw DimensionError("self_attention: empty sequence");

  const Tensor<T> undef;
  Tensor<T> q = diff::dense(x, wq_, undef);
  // Right padding never wins a max window, and every window keeps at least
  // one real frame, so no pooled key is built from padding alone.
  Tensor<T> padded = x;
  if (const std::size_t rem = len % p_; rem != 0) {
    const auto pad = Tensor<T>::full({batch, p_ - rem, channels_}, std::numeric_limits<T>::lowest());
    padded = diff::concat<T>({x, pad}, 1);
  }
  Tensor<T> pooled = p_ > 1 ? diff::max_pool1d(padded, p_, p_) : padded;
  Tensor<T> k = diff::dense(pooled, wk_, undef);
  Tensor<T> v = diff::dense(pooled, wv_, undef);
  Tensor<T> a = diff::softmax_lastdim(diff::matmul(q, k, false, true));
  if (attention_map) *attention_map = a;
  Tensor<T> o = diff::dense(diff::matmul(a, v), wo_, undef);
  Tensor<T> scaled = diff::reshape(diff::mul_lastdim(diff::reshape(o, {o.numel(), 1}), beta_), x.shape());
  Tensor<T> y = diff::add(x, scaled);
  return f.rank() == 2 ? diff::reshape(y, f.shape()) : y;
}

// ---- generator --------------------------------------------------------------

namespace {

template <typename T>
Tensor<T> to_batch(const Tensor<T>& x, std::size_t chunk, const char* what) {
  Tensor<T> y;
  if (x.rank() == 1) {
    y = diff::reshape(x, {1, x.dim(0), 1});
  } else if (x.rank() == 2) {
    y = diff::reshape(x, {x.dim(0), x.dim(1), 1});
  } else if (x.rank() == 3) {
    y = x;
  } else {
    throw DimensionError(std::string(what) + ": unsupported rank " + std::to_string(x.rank()));
  }
  if (y.dim(1) != chunk || y.dim(2) != 1) {
    throw DimensionError(std::string(what) + ": expected chunks of " + std::to_string(chunk) + "x1, got " +
                         diff::to_string(x.shape()));
  }
  return y;
}

}  // namespace

template <typename T>
Tensor<T> as_chunks(const Tensor<T>& x, std::size_t chunk) {
  return to_batch(x, chunk, "as_chunks");
}

template <typename T>
Generator<T>::Generator(const SeganConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(seed);
  const std::size_t n = cfg_.layers();
  const std::size_t k = cfg_.kernel;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t cin = i == 0 ? 1 : cfg_.filters[i - 1];
    const std::size_t cout = cfg_.filters[i];
    const std::string name = "g.enc" + std::to_string(i + 1);
    Layer layer;
    layer.w = params_->add_uniform(name + ".w", {k, cin, cout}, k * cin, rng);
    layer.b = params_->add_constant(name + ".b", {cout}, T(0));
    layer.slope = params_->add_constant(name + ".prelu", {cout}, T(0.25));
    if (cfg_.attention_layers.count(static_cast<int>(i + 1))) {
      layer.attn = std::make_unique<SelfAttention<T>>(*params_, name + ".sa", cout, cfg_.b, cfg_.p, rng);
    }
    enc_.push_back(std::move(layer));
  }
  // dec_[j] is the mirror of encoder layer n - j; its output matches the
  // map of encoder layer n - j - 1.
  for (std::size_t lvl = n; lvl >= 1; --lvl) {
    const std::size_t cin = 2 * cfg_.filters[lvl - 1];
    const std::size_t cout = lvl > 1 ? cfg_.filters[lvl - 2] : 1;
    const std::string name = "g.dec" + std::to_string(lvl);
    Layer layer;
    layer.w = params_->add_uniform(name + ".w", {k, cin, cout}, k * cin / cfg_.stride, rng);
    layer.b = params_->add_constant(name + ".b", {cout}, T(0));
    if (lvl > 1) {
      layer.slope = params_->add_constant(name + ".prelu", {cout}, T(0.25));
      if (cfg_.attention_layers.count(static_cast<int>(lvl - 1))) {
        layer.attn = std::make_unique<SelfAttention<T>>(*params_, name + ".sa", cout, cfg_.b, cfg_.p, rng);
      }
    }
    dec_.push_back(std::move(layer));
  }
}

template <typename T>
Tensor<T> Generator<T>::forward(const Tensor<T>& noisy, const Tensor<T>& z, std::vector<Shape>* ladder) const {
  Tensor<T> h = to_batch(noisy, cfg_.chunk, "generator");
  const std::size_t batch = h.dim(0);
  const Shape zs = cfg_.z_shape();
  Tensor<T> zb = z.rank() == 2 ? diff::reshape(z, {1, z.dim(0), z.dim(1)}) : z;
  if (zb.rank() != 3 || zb.dim(0) != batch || zb.dim(1) != zs[0] || zb.dim(2) != zs[1]) {
    throw DimensionError("generator: latent must be [" + std::to_string(batch) + "," + std::to_string(zs[0]) + "," +
                         std::to_string(zs[1]) + "], got " + diff::to_string(z.shape()));
  }
  const std::size_t pad = (cfg_.kernel - 1) / 2;
  std::vector<Tensor<T>> skips;
  for (const auto& layer : enc_) {
    h = diff::conv1d(h, layer.w, layer.b, cfg_.stride, pad);
    if (layer.attn) h = layer.attn->forward(h);
    h = diff::prelu(h, layer.slope);
    if (ladder) ladder->push_back({h.dim(1), h.dim(2)});
    skips.push_back(h);
  }
  h = diff::concat<T>({h, zb}, 2);
  const std::size_t n = enc_.size();
  for (std::size_t j = 0; j < n; ++j) {
    const auto& layer = dec_[j];
    h = diff::conv1d_transposed(h, layer.w, layer.b, cfg_.stride, pad, cfg_.stride - 1);
    if (layer.attn) h = layer.attn->forward(h);
    if (j + 1 < n) {
      h = diff::prelu(h, layer.slope);
      h = diff::concat<T>({h, skips[n - j - 2]}, 2);
    } else {
      h = diff::tanh(h);
    }
  }
  return h;
}

template <typename T>
Tensor<T> Generator<T>::sample_z(std::size_t batch, Rng& rng) const {
  const Shape zs = cfg_.z_shape();
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<T> v(batch * zs[0] * zs[1]);
  for (auto& x : v) x = static_cast<T>(nd(rng));
  return Tensor<T>::from({batch, zs[0], zs[1]}, std::move(v));
}

template <typename T>
Tensor<T> Generator<T>::enhance_signal(const Tensor<T>& x, Rng& z_rng) const {
  if (x.rank() != 1) throw DimensionError("enhance_signal: expected a 1-d signal, got " + diff::to_string(x.shape()));
  const std::size_t n = x.dim(0);
  if (n == 0) throw ContractError("enhance_signal: empty signal");
  const std::size_t chunks = (n + cfg_.chunk - 1) / cfg_.chunk;
  Tensor<T> padded = x;
  if (chunks * cfg_.chunk != n) padded = diff::concat<T>({x, Tensor<T>::zeros({chunks * cfg_.chunk - n})}, 0);
  Tensor<T> y = forward(diff::reshape(padded, {chunks, cfg_.chunk, 1}), sample_z(chunks, z_rng));
  return diff::slice(diff::reshape(y, {chunks * cfg_.chunk}), 0, 0, n);
}

// ---- discriminator ----------------------------------------------------------

template <typename T>
Discriminator<T>::Discriminator(const SeganConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(seed);
  const std::size_t k = cfg_.kernel;
  for (std::size_t i = 0; i < cfg_.layers(); ++i) {
    const std::size_t cin = i == 0 ? 2 : cfg_.filters[i - 1];
    const std::size_t cout = cfg_.filters[i];
    const std::string name = "d.conv" + std::to_string(i + 1);
    Layer layer;
    layer.w = params_->add_uniform(name + ".w", {k, cin, cout}, k * cin, rng);
    layer.b = params_->add_constant(name + ".b", {cout}, T(0));
    if (cfg_.attention_layers.count(static_cast<int>(i + 1))) {
      layer.attn = std::make_unique<SelfAttention<T>>(*params_, name + ".sa", cout, cfg_.b, cfg_.p, rng);
    }
    layer.bn = diff::BatchNorm<T>(*params_, name + ".vbn", cout);
    layers_.push_back(std::move(layer));
  }
  const std::size_t cn = cfg_.filters.back();
  const std::size_t ln = cfg_.length_at(cfg_.layers());
  out_w_ = params_->add_uniform("d.out.w", {1, cn, 1}, cn, rng);
  out_b_ = params_->add_constant("d.out.b", {1}, T(0));
  head_w_ = params_->add_uniform("d.head.w", {ln, 1}, ln, rng);
  head_b_ = params_->add_constant("d.head.b", {1}, T(0));
}

template <typename T>
Tensor<T> Discriminator<T>::run(const Tensor<T>& candidate, const Tensor<T>& noisy, NormMode mode, bool capture) {
  const Tensor<T> c = to_batch(candidate, cfg_.chunk, "discriminator");
  const Tensor<T> x = to_batch(noisy, cfg_.chunk, "discriminator");
  if (c.dim(0) != x.dim(0)) throw DimensionError("discriminator: candidate and conditioning batch sizes differ");
  const std::size_t pad = (cfg_.kernel - 1) / 2;
  Tensor<T> h = diff::concat<T>({c, x}, 2);
  for (auto& layer : layers_) {
    h = diff::conv1d(h, layer.w, layer.b, cfg_.stride, pad);
    if (layer.attn) h = layer.attn->forward(h);
    if (capture) {
      layer.bn.set_reference(h);
      h = layer.bn.forward(h, NormMode::kTrain);
    } else {
      h = layer.bn.forward(h, mode);
    }
    h = diff::leaky_relu(h, static_cast<T>(cfg_.leaky_alpha));
  }
  h = diff::conv1d(h, out_w_, out_b_, 1, 0);
  h = diff::reshape(h, {h.dim(0), h.dim(1)});
  return diff::dense(h, head_w_, head_b_);
}

template <typename T>
Tensor<T> Discriminator<T>::forward(const Tensor<T>& candidate, const Tensor<T>& noisy, NormMode mode) {
  if (mode == NormMode::kVirtual && !has_reference()) {
    throw ConfigurationError("discriminator: virtual batch norm needs a reference batch");
  }
  return run(candidate, noisy, mode, false);
}

template <typename T>
void Discriminator<T>::set_reference(const Tensor<T>& clean, const Tensor<T>& noisy) {
  const Tensor<T> c = to_batch(clean, cfg_.chunk, "discriminator reference");
  const Tensor<T> x = to_batch(noisy, cfg_.chunk, "discriminator reference");
  if (c.dim(0) != x.dim(0)) throw DimensionError("discriminator reference: batch sizes differ");
  params_->buffer("ref.clean") = std::vector<T>(c.values().begin(), c.values().end());
  params_->buffer("ref.noisy") = std::vector<T>(x.values().begin(), x.values().end());
  refresh_reference();
}

template <typename T>
void Discriminator<T>::refresh_reference() {
  if (!has_reference()) throw ConfigurationError("discriminator: no reference batch to refresh");
  const auto& cv = params_->buffer("ref.clean");
  const auto& xv = params_->buffer("ref.noisy");
  const std::size_t batch = cv.size() / cfg_.chunk;
  diff::NoGradGuard ng;
  run(Tensor<T>::from({batch, cfg_.chunk, 1}, cv), Tensor<T>::from({batch, cfg_.chunk, 1}, xv), NormMode::kTrain,
      true);
}

// ---- losses -----------------------------------------------------------------

template <typename T>
Tensor<T> d_loss(const Tensor<T>& score_real, const Tensor<T>& score_fake) {
  Tensor<T> r = diff::mean(diff::square(diff::add_scalar(score_real, T(-1))));
  Tensor<T> f = diff::mean(diff::square(score_fake));
  return diff::scale(diff::add(r, f), T(0.5));
}

template <typename T>
Tensor<T> g_loss_adv(const Tensor<T>& score_fake) {
  return diff::scale(diff::mean(diff::square(diff::add_scalar(score_fake, T(-1)))), T(0.5));
}

template <typename T>
Tensor<T> g_loss_l1(const Tensor<T>& enhanced, const Tensor<T>& clean, T lambda) {
  if (enhanced.numel() != clean.numel()) {
    throw DimensionError("g_loss: enhanced has " + std::to_string(enhanced.numel()) + " samples, clean has " +
                         std::to_string(clean.numel()));
  }
  const Tensor<T> c = clean.shape() == enhanced.shape() ? clean : diff::reshape(clean, enhanced.shape());
  return diff::scale(diff::mean(diff::abs(diff::sub(enhanced, c))), lambda);
}

template <typename T>
Tensor<T> g_loss(const Tensor<T>& score_fake, const Tensor<T>& enhanced, const Tensor<T>& clean, T lambda) {
  return diff::add(g_loss_adv(score_fake), g_loss_l1(enhanced, clean, lambda));
}

#define ADVJOINT_INSTANTIATE_SEGAN(T)                                                        \
  template class SelfAttention<T>;                                                           \
  template class Generator<T>;                                                               \
  template class Discriminator<T>;                                                           \
  template Tensor<T> d_loss<T>(const Tensor<T>&, const Tensor<T>&);                          \
  template Tensor<T> g_loss_adv<T>(const Tensor<T>&);                                        \
  template Tensor<T> g_loss_l1<T>(const Tensor<T>&, const Tensor<T>&, T);                    \
  template Tensor<T> g_loss<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T);     \
  template Tensor<T> as_chunks<T>(const Tensor<T>&, std::size_t);

ADVJOINT_INSTANTIATE_SEGAN(float)
ADVJOINT_INSTANTIATE_SEGAN(double)

}  // namespace advjoint::segan
