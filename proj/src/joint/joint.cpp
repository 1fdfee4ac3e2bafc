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

#include "advjoint/joint/joint.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "advjoint/signal/waveform.hpp"

namespace advjoint::joint {

using diff::ConfigurationError;
using diff::ContractError;
using diff::DimensionError;
using diff::NonFiniteError;

void JointConfig::validate() const {
  auto nonneg = [](double v, const char* name) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigurationError(std::string("joint: ") + name + " must be >= 0");
  };
  nonneg(kappa, "kappa");
  nonneg(gamma, "gamma");
  nonneg(lambda_l1, "lambda_l1");
  nonneg(clip_norm, "clip_norm");
  if (!(lr_g > 0.0) || !(lr_d > 0.0)) throw ConfigurationError("joint: learning rates must be positive");
  if (asr_schedule.warmup_n < 1 || !(asr_schedule.k_prime > 0)) throw ConfigurationError("joint: invalid asr schedule");
  if (batch < 1) throw ConfigurationError("joint: batch must be positive");
  if (epochs < 1) throw ConfigurationError("joint: epochs must be positive");
}

namespace {

void check_component(double v, const char* name) {
  if (!std::isfinite(v)) throw NonFiniteError(std::string("joint loss: ") + name + " is not finite (" + std::to_string(v) + ")");
}

}  // namespace

double joint_loss(double l_asr, double l_enh, double l_gan, const JointConfig& cfg) {
  check_component(l_asr, "l_asr");
  check_component(l_enh, "l_enh");
  check_component(l_gan, "l_gan");
  return l_asr + cfg.kappa * l_enh + cfg.gamma * l_gan;
}

template <typename T>
Tensor<T> joint_loss(const Tensor<T>& l_asr, const Tensor<T>& l_enh, const Tensor<T>& l_gan, const JointConfig& cfg) {
  check_component(static_cast<double>(l_asr.item()), "l_asr");
  check_component(static_cast<double>(l_enh.item()), "l_enh");
  check_component(static_cast<double>(l_gan.item()), "l_gan");
  Tensor<T> total = diff::add(l_asr, diff::scale(l_enh, static_cast<T>(cfg.kappa)));
  return diff::add(total, diff::scale(l_gan, static_cast<T>(cfg.gamma)));
}

std::vector<JointSample> make_joint_samples(const data::Corpus& corpus, const asr::TokenVocab& vocab) {
  std::vector<JointSample> out;
  out.reserve(corpus.manifest.records.size());
  for (const auto& r : corpus.manifest.records) {
    JointSample s;
    s.id = r.id;
    s.noisy = corpus.wave(r.id).samples;
    s.clean = corpus.clean_wave(r.id).samples;
    if (s.clean.size() != s.noisy.size()) throw DimensionError("joint: '" + r.id + "' clean/noisy lengths differ");
    s.tokens = vocab.encode(r.transcript);
    out.push_back(std::move(s));
  }
  return out;
}

template <typename T>
JointTrainer<T>::JointTrainer(const segan::SeganConfig& segan_cfg, const asr::AsrConfig& asr_cfg,
                              const FeatureFrontEnd& frontend, const JointConfig& cfg)
    : cfg_(cfg),
      frontend_(frontend),
      g_(segan_cfg, cfg.seed),
      d_(segan_cfg, cfg.seed + 1),
      asr_(asr_cfg, cfg.seed + 2),
      fbank_(frontend.fbank),
      g_opt_(g_.params(), cfg.lr_g),
      d_opt_(d_.params(), cfg.lr_d),
      asr_opt_(asr_.params(), 0.0),
      rng_(cfg.seed + 3) {
  cfg_.validate();
  if (frontend_.stats.empty()) throw ConfigurationError("joint: front-end has no normalization statistics");
  if (frontend_.dim() != asr_cfg.input_dim) {
    throw ConfigurationError("joint: front-end dim " + std::to_string(frontend_.dim()) + " != asr input_dim " +
                             std::to_string(asr_cfg.input_dim));
  }
}

namespace {

template <typename T>
Tensor<T> padded_chunks(const std::vector<double>& x, double coeff, std::size_t chunk) {
  const auto pre = signal::preemphasis(x, coeff);
  const std::size_t n = (pre.size() + chunk - 1) / chunk;
  std::vector<T> v(n * chunk, T(0));
  std::transform(pre.begin(), pre.end(), v.begin(), [](double s) { return static_cast<T>(s); });
  return Tensor<T>::from({n, chunk, 1}, std::move(v));
}

std::size_t chunk_count(const JointSample& s, std::size_t chunk) { return (s.noisy.size() + chunk - 1) / chunk; }

}  // namespace

template <typename T>
typename JointTrainer<T>::Forward JointTrainer<T>::forward(const JointSample& s, const Tensor<T>& z, bool train) {
  if (s.noisy.empty()) throw ContractError("joint: empty utterance '" + s.id + "'");
  if (s.clean.size() != s.noisy.size()) throw DimensionError("joint: '" + s.id + "' clean/noisy lengths differ");
  const auto& sc = g_.config();
  const std::size_t n = s.noisy.size();
  Forward f;
  f.noisy = padded_chunks<T>(s.noisy, sc.preemph, sc.chunk);
  f.clean = padded_chunks<T>(s.clean, sc.preemph, sc.chunk);
  const std::size_t chunks = f.noisy.dim(0);
  f.enhanced = g_.forward(f.noisy, z);

  const Tensor<T> flat = diff::slice(diff::reshape(f.enhanced, {chunks * sc.chunk}), 0, 0, n);
  const Tensor<T> wave = signal::deemphasis(flat, static_cast<T>(sc.preemph));
  const Tensor<T> feats = fbank_(wave, frontend_.stats);
  const asr::Context ctx{train, &rng_, 0.0};
  f.asr = asr_.loss(feats, s.tokens, ctx).total;

  f.enh = segan::g_loss_l1(f.enhanced, f.clean, static_cast<T>(cfg_.lambda_l1));
  if (cfg_.gamma > 0.0) {
    if (!d_.has_reference()) d_.set_reference(f.clean, f.noisy);
    f.gan = segan::g_loss_adv(d_.forward(f.enhanced, f.noisy));
  } else {
    f.gan = Tensor<T>::scalar(T(0));
  }
  f.total = joint_loss(f.asr, f.enh, f.gan, cfg_);
  return f;
}

template <typename T>
JointLosses JointTrainer<T>::step(const std::vector<JointSample>& batch) {
  if (batch.empty()) throw ContractError("joint: empty batch");
  const auto& sc = g_.config();
  const T inv = T(1) / static_cast<T>(batch.size());
  // Latents are drawn for every sample whatever the loss weights are.
  std::vector<Tensor<T>> zs;
  zs.reserve(batch.size());
  for (const auto& s : batch) zs.push_back(g_.sample_z(chunk_count(s, sc.chunk), rng_));

  JointLosses out;
  if (updates_d()) {
    d_.params().zero_grad();
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const Tensor<T> noisy = padded_chunks<T>(batch[i].noisy, sc.preemph, sc.chunk);
      const Tensor<T> clean = padded_chunks<T>(batch[i].clean, sc.preemph, sc.chunk);
      if (!d_.has_reference()) d_.set_reference(clean, noisy);
      Tensor<T> fake;
      {
        diff::NoGradGuard ng;
        fake = g_.forward(noisy, zs[i]);
      }
      const Tensor<T> ld = segan::d_loss(d_.forward(clean, noisy), d_.forward(fake, noisy));
      const double v = static_cast<double>(ld.item());
      if (!std::isfinite(v)) throw NonFiniteError("joint: discriminator loss for '" + batch[i].id + "' is not finite");
      out.d += v;
      diff::scale(ld, inv).backward();
    }
    d_opt_.step();
    d_.refresh_reference();
  }

  g_.params().zero_grad();
  asr_.params().zero_grad();
  g_.params().set_trainable(!cfg_.freeze_g);
  asr_.params().set_trainable(!cfg_.freeze_asr);
  d_.params().set_trainable(false);
  try {
    for (std::size_t i = 0; i < batch.size(); ++i) {
      Forward f = forward(batch[i], zs[i], true);
      out.total += static_cast<double>(f.total.item());
      out.asr += static_cast<double>(f.asr.item());
      out.enh += static_cast<double>(f.enh.item());
      out.gan += static_cast<double>(f.gan.item());
      diff::scale(f.total, inv).backward();
    }
  } catch (...) {
    g_.params().set_trainable(true);
    asr_.params().set_trainable(true);
    d_.params().set_trainable(true);
    throw;
  }
  g_.params().set_trainable(true);
  asr_.params().set_trainable(true);
  d_.params().set_trainable(true);

  if (!cfg_.freeze_g) {
    if (cfg_.clip_norm > 0) g_.params().clip_grad_norm(cfg_.clip_norm);
    g_opt_.step();
  }
  if (!cfg_.freeze_asr) {
    if (cfg_.clip_norm > 0) asr_.params().clip_grad_norm(cfg_.clip_norm);
    asr_opt_.set_lr(cfg_.asr_schedule.lr_at(asr_opt_.steps() + 1));
    asr_opt_.step();
  }
  ++steps_;
  const double b = static_cast<double>(batch.size());
  out.total /= b;
  out.asr /= b;
  out.enh /= b;
  out.gan /= b;
  out.d /= b;
  return out;
}

template <typename T>
JointLosses JointTrainer<T>::run_epoch(const std::vector<JointSample>& data) {
  if (data.empty()) throw ContractError("joint: empty training set");
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng_);
  JointLosses acc;
  for (std::size_t b = 0; b < idx.size(); b += cfg_.batch) {
    const std::size_t count = std::min(cfg_.batch, idx.size() - b);
    std::vector<JointSample> batch;
    batch.reserve(count);
    for (std::size_t i = 0; i < count; ++i) batch.push_back(data[idx[b + i]]);
    const JointLosses l = step(batch);
    const double w = static_cast<double>(count);
    acc.total += l.total * w;
    acc.asr += l.asr * w;
    acc.enh += l.enh * w;
    acc.gan += l.gan * w;
    acc.d += l.d * w;
  }
  const double n = static_cast<double>(data.size());
  acc.total /= n;
  acc.asr /= n;
  acc.enh /= n;
  acc.gan /= n;
  acc.d /= n;
  return acc;
}

template Tensor<float> joint_loss<float>(const Tensor<float>&, const Tensor<float>&, const Tensor<float>&,
                                         const JointConfig&);
template Tensor<double> joint_loss<double>(const Tensor<double>&, const Tensor<double>&, const Tensor<double>&,
                                           const JointConfig&);
template class JointTrainer<float>;
template class JointTrainer<double>;

}  // namespace advjoint::joint
