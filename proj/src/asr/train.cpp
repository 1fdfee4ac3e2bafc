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

#include "advjoint/asr/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "advjoint/asr/vocab.hpp"

namespace advjoint::asr {

using diff::ConfigurationError;
using diff::ContractError;
using diff::NonFiniteError;

void AsrTrainConfig::validate() const {
  if (epochs < 1) throw ConfigurationError("asr train: epochs must be positive");
  if (batch < 1) throw ConfigurationError("asr train: batch must be positive");
  if (beam < 1) throw ConfigurationError("asr train: beam must be positive");
  if (schedule.warmup_n < 1 || schedule.k_prime <= 0) throw ConfigurationError("asr train: invalid lr schedule");
}

template <typename T>
Tensor<T> feature_tensor(const FeatureUtterance& u) {
  if (u.feats.size() != u.frames * u.dim) throw diff::DimensionError("utterance '" + u.id + "': feature size mismatch");
  return Tensor<T>::from({u.frames, u.dim}, std::vector<T>(u.feats.begin(), u.feats.end()));
}

template <typename T>
AsrTrainer<T>::AsrTrainer(const AsrConfig& model_cfg, const AsrTrainConfig& cfg, std::uint64_t seed)
    : cfg_(cfg), model_(model_cfg, seed), opt_(model_.params(), 0.0), rng_(seed + 7) {
  cfg_.validate();
}

template <typename T>
double AsrTrainer<T>::train_epoch(const std::vector<FeatureUtterance>& data) {
  if (data.empty()) throw ContractError("asr train: empty training set");
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng_);
  const Context ctx{true, &rng_, 0.0};
  double total = 0.0;
  for (std::size_t b = 0; b < idx.size(); b += cfg_.batch) {
    const std::size_t count = std::min(cfg_.batch, idx.size() - b);
    model_.params().zero_grad();
    for (std::size_t i = 0; i < count; ++i) {
      const auto& u = data[idx[b + i]];
      AsrLoss<T> l = model_.loss(feature_tensor<T>(u), u.tokens, ctx);
      const double v = static_cast<double>(l.total.item());
      if (!std::isfinite(v)) {
        throw NonFiniteError("asr: loss for '" + u.id + "' is not finite (ce " + std::to_string(l.ce.item()) +
                             ", ctc " + std::to_string(l.ctc.item()) + ")");
      }
      total += v;
      diff::scale(l.total, T(1) / static_cast<T>(count)).backward();
    }
    if (cfg_.clip_norm > 0) model_.params().clip_grad_norm(cfg_.clip_norm);
    opt_.set_lr(cfg_.schedule.lr_at(opt_.steps() + 1));
    opt_.step();
  }
  return total / static_cast<double>(data.size());
}

template <typename T>
DecodeResult transcribe(AsrModel<T>& model, const Tensor<T>& feats, std::size_t beam, double length_alpha,
                        std::size_t max_len) {
  if (beam < 1) throw ContractError("transcribe: beam must be positive");
  Tensor<T> memory;
  {
    diff::NoGradGuard ng;
    memory = model.encode(feats, Context{});
  }
  const StepFn step = [&](const std::vector<int>& prefix) { return model.next_log_probs(memory, prefix); };
  if (beam == 1) return greedy_decode(step, TokenVocab::kSos, TokenVocab::kEos, max_len);
  return beam_decode(step, TokenVocab::kSos, TokenVocab::kEos, beam, length_alpha, max_len);
}

template <typename T>
DecodeResult AsrTrainer<T>::transcribe(const Tensor<T>& feats) {
  return asr::transcribe(model_, feats, cfg_.beam, cfg_.length_alpha, cfg_.max_decode_len);
}

template <typename T>
std::vector<DecodedUtterance> AsrTrainer<T>::decode_all(const std::vector<FeatureUtterance>& data,
                                                        const TokenVocab& vocab) {
  std::vector<DecodedUtterance> out;
  for (const auto& u : data) {
    const DecodeResult r = transcribe(feature_tensor<T>(u));
    DecodedUtterance d;
    d.id = u.id;
    d.hyp = vocab.decode(r.tokens);
    d.ref = u.text.empty() ? vocab.decode(u.tokens) : u.text;
    d.cer = cer(d.hyp, d.ref);
    out.push_back(std::move(d));
  }
  return out;
}

template <typename T>
double AsrTrainer<T>::corpus_cer(const std::vector<FeatureUtterance>& data, const TokenVocab& vocab) {
  double errors = 0.0, chars = 0.0;
  for (const auto& d : decode_all(data, vocab)) {
    const double n = static_cast<double>(utf8_chars(d.ref).size());
    errors += d.cer * n;
    chars += n;
  }
  return chars > 0 ? errors / chars : 0.0;
}

template class AsrTrainer<float>;
template class AsrTrainer<double>;
template Tensor<float> feature_tensor<float>(const FeatureUtterance&);
template Tensor<double> feature_tensor<double>(const FeatureUtterance&);
template DecodeResult transcribe<float>(AsrModel<float>&, const Tensor<float>&, std::size_t, double, std::size_t);
template DecodeResult transcribe<double>(AsrModel<double>&, const Tensor<double>&, std::size_t, double, std::size_t);

}  // namespace advjoint::asr
