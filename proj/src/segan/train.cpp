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

#include "advjoint/segan/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace advjoint::segan {

using diff::ConfigurationError;
using diff::ContractError;
using diff::DimensionError;
using diff::NonFiniteError;

void SeganTrainConfig::validate() const {
  if (!(lambda_l1 >= 0.0)) throw ConfigurationError("segan train: lambda_l1 must be >= 0");
  if (!(lr > 0.0)) throw ConfigurationError("segan train: lr must be positive");
  if (batch < 1) throw ConfigurationError("segan train: batch must be positive");
  if (epochs < 1) throw ConfigurationError("segan train: epochs must be positive");
  if (!(chunk_overlap >= 0.0 && chunk_overlap < 1.0)) {
    throw ConfigurationError("segan train: chunk overlap must be in [0, 1)");
  }
}

std::vector<ChunkPair> make_chunk_pairs(const std::vector<signal::Waveform>& clean,
                                        const std::vector<signal::Waveform>& noisy, std::size_t chunk,
                                        double overlap, double preemph) {
  if (clean.size() != noisy.size()) throw DimensionError("make_chunk_pairs: clean and noisy counts differ");
  if (chunk == 0 || !(overlap >= 0.0 && overlap < 1.0)) throw ContractError("make_chunk_pairs: bad chunk/overlap");
  const std::size_t hop = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(chunk * (1.0 - overlap))));
  std::vector<ChunkPair> out;
  for (std::size_t u = 0; u < clean.size(); ++u) {
    if (clean[u].size() != noisy[u].size()) {
      throw DimensionError("make_chunk_pairs: utterance '" + clean[u].id + "' has mismatched lengths");
    }
    const auto c = signal::preemphasis(clean[u].samples, preemph);
    const auto x = signal::preemphasis(noisy[u].samples, preemph);
    for (std::size_t start = 0; start < c.size(); start += hop) {
      ChunkPair p{std::vector<double>(chunk, 0.0), std::vector<double>(chunk, 0.0)};
      const std::size_t n = std::min(chunk, c.size() - start);
      std::copy_n(c.begin() + start, n, p.clean.begin());
      std::copy_n(x.begin() + start, n, p.noisy.begin());
      out.push_back(std::move(p));
      if (start + chunk >= c.size()) break;
    }
  }
  return out;
}

namespace {

template <typename T>
void gather(const std::vector<ChunkPair>& data, const std::vector<std::size_t>& idx, std::size_t begin,
            std::size_t count, Tensor<T>& clean, Tensor<T>& noisy) {
  const std::size_t chunk = data[idx[begin]].clean.size();
  std::vector<T> c(count * chunk), x(count * chunk);
  for (std::size_t i = 0; i < count; ++i) {
    const auto& p = data[idx[begin + i]];
    if (p.clean.size() != chunk || p.noisy.size() != chunk) throw DimensionError("segan: ragged chunk pairs");
    std::transform(p.clean.begin(), p.clean.end(), c.begin() + i * chunk, [](double v) { return static_cast<T>(v); });
    std::transform(p.noisy.begin(), p.noisy.end(), x.begin() + i * chunk, [](double v) { return static_cast<T>(v); });
  }
  clean = Tensor<T>::from({count, chunk, 1}, std::move(c));
  noisy = Tensor<T>::from({count, chunk, 1}, std::move(x));
}

}  // namespace

template <typename T>
SeganTrainer<T>::SeganTrainer(const SeganConfig& arch, const SeganTrainConfig& cfg, std::uint64_t seed)
    : cfg_(cfg),
      g_(arch, seed),
      d_(arch, seed + 1),
      g_opt_(g_.params(), cfg.lr),
      d_opt_(d_.params(), cfg.lr),
      rng_(seed + 2) {
  cfg_.validate();
}

template <typename T>
StepLoss SeganTrainer<T>::step(const Tensor<T>& clean_in, const Tensor<T>& noisy_in) {
  const std::size_t chunk = g_.config().chunk;
  const Tensor<T> clean = as_chunks(clean_in, chunk);
  const Tensor<T> noisy = as_chunks(noisy_in, chunk);
  if (!d_.has_reference()) d_.set_reference(clean, noisy);
  const Tensor<T> z = g_.sample_z(clean.dim(0), rng_);

  Tensor<T> fake;
  {
    diff::NoGradGuard ng;
    fake = g_.forward(noisy, z);
  }
  d_.params().zero_grad();
  Tensor<T> ld = d_loss(d_.forward(clean, noisy), d_.forward(fake, noisy));
  if (!std::isfinite(static_cast<double>(ld.item()))) {
    throw NonFiniteError("segan: discriminator loss is not finite (" + std::to_string(ld.item()) + ")");
  }
  ld.backward();
  d_opt_.step();
  d_.refresh_reference();

  g_.params().zero_grad();
  d_.params().set_trainable(false);
  Tensor<T> enhanced = g_.forward(noisy, z);
  Tensor<T> adv = g_loss_adv(d_.forward(enhanced, noisy));
  Tensor<T> l1 = g_loss_l1(enhanced, clean, static_cast<T>(cfg_.lambda_l1));
  Tensor<T> lg = diff::add(adv, l1);
  d_.params().set_trainable(true);
  if (!std::isfinite(static_cast<double>(lg.item()))) {
    throw NonFiniteError("segan: generator loss is not finite (adv " + std::to_string(adv.item()) + ", l1 " +
                         std::to_string(l1.item()) + ")");
  }
  lg.backward();
  g_opt_.step();
  return {static_cast<double>(ld.item()), static_cast<double>(adv.item()), static_cast<double>(l1.item())};
}

template <typename T>
EpochLoss SeganTrainer<T>::run_epoch(const std::vector<ChunkPair>& data, int epoch) {
  if (data.empty()) throw ContractError("segan: empty training set");
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng_);
  EpochLoss rec;
  rec.epoch = epoch;
  std::size_t batches = 0;
  for (std::size_t b = 0; b < idx.size(); b += cfg_.batch) {
    const std::size_t count = std::min(cfg_.batch, idx.size() - b);
    Tensor<T> clean, noisy;
    gather(data, idx, b, count, clean, noisy);
    const StepLoss s = step(clean, noisy);
    rec.d_loss += s.d_loss;
    rec.g_loss_adv += s.g_loss_adv;
    rec.g_loss_l1 += s.g_loss_l1;
    ++batches;
  }
  rec.d_loss /= batches;
  rec.g_loss_adv /= batches;
  rec.g_loss_l1 /= batches;
  return rec;
}

template <typename T>
PretrainResult<T> segan_pretrain(const std::vector<ChunkPair>& data, const SeganConfig& arch,
                                 const SeganTrainConfig& cfg, const std::function<void(const EpochLoss&)>& on_epoch) {
  if (data.empty()) throw ContractError("segan_pretrain: empty dataset");
  cfg.validate();
  PretrainResult<T> res;
  res.trainer = std::make_unique<SeganTrainer<T>>(arch, cfg, cfg.seed);
  for (int e = 1; e <= cfg.epochs; ++e) {
    res.history.push_back(res.trainer->run_epoch(data, e));
    if (on_epoch) on_epoch(res.history.back());
  }
  return res;
}

template <typename T>
double discriminator_accuracy(Generator<T>& g, Discriminator<T>& d, const std::vector<ChunkPair>& data,
                              std::uint64_t z_seed) {
  if (data.empty()) throw ContractError("discriminator_accuracy: empty set");
  diff::NoGradGuard ng;
  Rng rng(z_seed);
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::size_t correct = 0;
  const std::size_t step = 16;
  for (std::size_t b = 0; b < idx.size(); b += step) {
    const std::size_t count = std::min(step, idx.size() - b);
    Tensor<T> clean, noisy;
    gather(data, idx, b, count, clean, noisy);
    const Tensor<T> fake = g.forward(noisy, g.sample_z(count, rng));
    const auto real_s = d.forward(clean, noisy).values();
    const auto fake_s = d.forward(fake, noisy).values();
    for (std::size_t i = 0; i < count; ++i) {
      correct += real_s[i] > T(0.5);
      correct += fake_s[i] < T(0.5);
    }
  }
  return static_cast<double>(correct) / (2.0 * data.size());
}

template <typename T>
signal::Waveform enhance_waveform(const signal::Waveform& x, const Generator<T>& g, std::uint64_t z_seed) {
  signal::Waveform out;
  out.sample_rate = x.sample_rate;
  out.id = x.id;
  if (x.samples.empty()) return out;
  const double coeff = g.config().preemph;
  const auto pre = signal::preemphasis(x.samples, coeff);
  const std::size_t n = pre.size();
  std::vector<T> v(pre.begin(), pre.end());
  diff::NoGradGuard ng;
  Rng rng(z_seed);
  const Tensor<T> y = g.enhance_signal(Tensor<T>::from({n}, std::move(v)), rng);
  std::vector<double> yd(y.values().begin(), y.values().end());
  out.samples = signal::deemphasis(yd, coeff);
  return out;
}

void write_loss_csv(const std::string& path, const std::vector<EpochLoss>& history) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write loss log '" + path + "'");
  os << "epoch,d_loss,g_loss_adv,g_loss_l1\n";
  os.precision(9);
  for (const auto& r : history) os << r.epoch << ',' << r.d_loss << ',' << r.g_loss_adv << ',' << r.g_loss_l1 << '\n';
}

#define ADVJOINT_INSTANTIATE_SEGAN_TRAIN(T)                                                                     \
  template class SeganTrainer<T>;                                                                               \
  template PretrainResult<T> segan_pretrain<T>(const std::vector<ChunkPair>&, const SeganConfig&,              \
                                               const SeganTrainConfig&,                                         \
                                               const std::function<void(const EpochLoss&)>&);                   \
  template double discriminator_accuracy<T>(Generator<T>&, Discriminator<T>&, const std::vector<ChunkPair>&,    \
                                            std::uint64_t);                                                     \
  template signal::Waveform enhance_waveform<T>(const signal::Waveform&, const Generator<T>&, std::uint64_t);

ADVJOINT_INSTANTIATE_SEGAN_TRAIN(float)
ADVJOINT_INSTANTIATE_SEGAN_TRAIN(double)

}  // namespace advjoint::segan
