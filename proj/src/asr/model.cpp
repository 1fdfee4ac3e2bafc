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

#include "advjoint/asr/model.hpp"

#include <sstream>

#include "advjoint/asr/ctc.hpp"
#include "advjoint/asr/vocab.hpp"

namespace advjoint::asr {

using diff::ConfigurationError;
using diff::ContractError;
using diff::DimensionError;

std::string to_string(EncoderKind kind) { return kind == EncoderKind::kConformer ? "conformer" : "transformer"; }

EncoderKind encoder_kind_from_string(const std::string& name) {
  if (name == "transformer") return EncoderKind::kTransformer;
  if (name == "conformer") return EncoderKind::kConformer;
  throw ConfigurationError("unknown model '" + name + "' (expected transformer or conformer)");
}

AsrConfig AsrConfig::paper_transformer(std::size_t input_dim, int vocab) {
  AsrConfig c;
  c.input_dim = input_dim;
  c.vocab = vocab;
  return c;
}

AsrConfig AsrConfig::paper_conformer(std::size_t input_dim, int vocab) {
  AsrConfig c = paper_transformer(input_dim, vocab);
  c.kind = EncoderKind::kConformer;
  return c;
}

AsrConfig AsrConfig::toy(EncoderKind kind, std::size_t input_dim, int vocab) {
  AsrConfig c;
  c.kind = kind;
  c.input_dim = input_dim;
  c.vocab = vocab;
  c.d_model = 64;
  c.heads = 4;
  c.enc_layers = 2;
  c.dec_layers = 2;
  c.d_ff = 128;
  c.subsample_channels = 64;
  return c;
}

void AsrConfig::validate() const {
  if (input_dim == 0) throw ConfigurationError("asr: input_dim must be positive");
  if (vocab < 5) throw ConfigurationError("asr: vocabulary needs at least one symbol besides the reserved ids");
  if (heads == 0 || d_model % heads != 0) {
    throw ConfigurationError("asr: d_model " + std::to_string(d_model) + " not divisible by " +
                             std::to_string(heads) + " heads");
  }
  if (d_model < 2 || d_ff == 0) throw ConfigurationError("asr: d_model and d_ff must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigurationError("asr: dropout must be in [0, 1)");
  if (!(ctc_weight >= 0.0 && ctc_weight <= 1.0)) throw ConfigurationError("asr: ctc_weight must be in [0, 1]");
  if (!(label_smoothing >= 0.0 && label_smoothing < 1.0)) {
    throw ConfigurationError("asr: label_smoothing must be in [0, 1)");
  }
  if (distance_penalty < 0.0) throw ConfigurationError("asr: distance_penalty must be >= 0");
  if (kind == EncoderKind::kConformer && (conv_kernel % 2 == 0 || subsample_channels == 0)) {
    throw ConfigurationError("asr: conformer needs an odd conv kernel and positive subsample channels");
  }
  if (max_len == 0) throw ConfigurationError("asr: max_len must be positive");
}

std::string AsrConfig::fingerprint() const {
  std::ostringstream os;
  os << "asr:" << to_string(kind) << ";in=" << input_dim << ";V=" << vocab << ";d=" << d_model << ";h=" << heads
     << ";Ne=" << enc_layers << ";Nd=" << dec_layers << ";ff=" << d_ff << ";pe=" << positional_encoding;
  if (kind == EncoderKind::kConformer) os << ";k=" << conv_kernel << ";sub=" << subsample_channels;
  return os.str();
}

template <typename T>
AsrModel<T>::AsrModel(const AsrConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(seed);
  auto& ps = *params_;
  const std::size_t d = cfg_.d_model;
  if (cfg_.kind == EncoderKind::kTransformer) {
    in_w_ = ps.add_uniform("enc.embed.w", {cfg_.input_dim, d}, cfg_.input_dim, rng);
    in_b_ = ps.add_constant("enc.embed.b", {d}, T(0));
    for (std::size_t i = 0; i < cfg_.enc_layers; ++i) {
      const std::string p = "enc.block" + std::to_string(i);
      EncBlock b;
      b.ln1 = LayerNorm<T>(ps, p + ".ln1", d);
      b.mha = MultiHeadAttention<T>(ps, p + ".mha", d, cfg_.heads, rng);
      b.ln2 = LayerNorm<T>(ps, p + ".ln2", d);
      b.ffn = FeedForward<T>(ps, p + ".ffn", d, cfg_.d_ff, false, rng);
      enc_.push_back(std::move(b));
    }
  } else {
    subsample_ = Subsample<T>(ps, "enc.subsample", cfg_.input_dim, cfg_.subsample_channels, d, rng);
    for (std::size_t i = 0; i < cfg_.enc_layers; ++i) {
      conformer_.emplace_back(ps, "enc.block" + std::to_string(i), d, cfg_.heads, cfg_.d_ff, cfg_.conv_kernel, rng);
    }
  }
  ctc_w_ = ps.add_uniform("ctc.w", {d, static_cast<std::size_t>(cfg_.vocab)}, d, rng);
  ctc_b_ = ps.add_constant("ctc.b", {static_cast<std::size_t>(cfg_.vocab)}, T(0));
  embed_ = ps.add_uniform("dec.embed", {static_cast<std::size_t>(cfg_.vocab), d}, 1, rng);
  for (std::size_t i = 0; i < cfg_.dec_layers; ++i) {
    const std::string p = "dec.block" + std::to_string(i);
    DecBlock b;
    b.ln1 = LayerNorm<T>(ps, p + ".ln1", d);
    b.self_attn = MultiHeadAttention<T>(ps, p + ".self", d, cfg_.heads, rng);
    b.ln2 = LayerNorm<T>(ps, p + ".ln2", d);
    b.cross_attn = MultiHeadAttention<T>(ps, p + ".cross", d, cfg_.heads, rng);
    b.ln3 = LayerNorm<T>(ps, p + ".ln3", d);
    b.ffn = FeedForward<T>(ps, p + ".ffn", d, cfg_.d_ff, false, rng);
    dec_.push_back(std::move(b));
  }
  dec_ln_ = LayerNorm<T>(ps, "dec.ln", d);
  out_w_ = ps.add_uniform("dec.out.w", {d, static_cast<std::size_t>(cfg_.vocab)}, d, rng);
  out_b_ = ps.add_constant("dec.out.b", {static_cast<std::size_t>(cfg_.vocab)}, T(0));
}

namespace {

template <typename T>
Tensor<T> add_pe(const Tensor<T>& x) {
  return diff::add(x, positional_encoding<T>(x.dim(0), x.dim(1)));
}

}  // namespace

template <typename T>
Tensor<T> AsrModel<T>::encode(const Tensor<T>& feats, const Context& ctx_in) {
  if (feats.rank() != 2 || feats.dim(0) == 0) throw DimensionError("asr encode: features must be a non-empty [frames, dim]");
  if (feats.dim(1) != cfg_.input_dim) {
    throw DimensionError("asr encode: feature dim " + std::to_string(feats.dim(1)) + ", model expects " +
                         std::to_string(cfg_.input_dim));
  }
  Context ctx = ctx_in;
  ctx.dropout = cfg_.dropout;
  Tensor<T> x = cfg_.kind == EncoderKind::kTransformer ? diff::dense(feats, in_w_, in_b_) : subsample_.forward(feats);
  if (cfg_.positional_encoding) x = add_pe(x);
  x = maybe_dropout(x, ctx);
  const std::size_t n = x.dim(0);
  const Tensor<T> bias = cfg_.distance_penalty > 0.0 ? distance_penalty<T>(n, n, cfg_.distance_penalty) : Tensor<T>();
  if (cfg_.kind == EncoderKind::kTransformer) {
    for (const auto& b : enc_) {
      const Tensor<T> h = b.ln1.forward(x);
      x = diff::add(x, maybe_dropout(b.mha.forward(h, h, bias, ctx), ctx));
      x = diff::add(x, maybe_dropout(b.ffn.forward(b.ln2.forward(x), ctx), ctx));
    }
  } else {
    for (auto& b : conformer_) x = b.forward(x, bias, ctx);
  }
  return x;
}

template <typename T>
Tensor<T> AsrModel<T>::ctc_log_probs(const Tensor<T>& memory) const {
  return diff::log_softmax_lastdim(diff::dense(memory, ctc_w_, ctc_b_));
}

template <typename T>
Tensor<T> AsrModel<T>::decoder_logits(const Tensor<T>& memory, const std::vector<int>& prefix,
                                      const Context& ctx_in) const {
  if (prefix.empty()) throw ContractError("asr decode: empty prefix");
  if (prefix.front() != TokenVocab::kSos) throw ContractError("asr decode: prefix must start with sos");
  for (int id : prefix) {
    if (id < 0 || id >= cfg_.vocab) throw ContractError("asr decode: token id " + std::to_string(id) + " out of range");
  }
  Context ctx = ctx_in;
  ctx.dropout = cfg_.dropout;
  Tensor<T> x = diff::embedding(embed_, prefix);
  if (cfg_.positional_encoding) x = add_pe(x);
  x = maybe_dropout(x, ctx);
  const Tensor<T> mask = causal_mask<T>(prefix.size());
  const Tensor<T> none;
  for (const auto& b : dec_) {
    const Tensor<T> h = b.ln1.forward(x);
    x = diff::add(x, maybe_dropout(b.self_attn.forward(h, h, mask, ctx), ctx));
    x = diff::add(x, maybe_dropout(b.cross_attn.forward(b.ln2.forward(x), memory, none, ctx), ctx));
    x = diff::add(x, maybe_dropout(b.ffn.forward(b.ln3.forward(x), ctx), ctx));
  }
  return diff::dense(dec_ln_.forward(x), out_w_, out_b_);
}

template <typename T>
std::vector<double> AsrModel<T>::next_log_probs(const Tensor<T>& memory, const std::vector<int>& prefix) const {
  diff::NoGradGuard ng;
  const Tensor<T> logits = decoder_logits(memory, prefix, Context{});
  const Tensor<T> last = diff::log_softmax_lastdim(diff::slice(logits, 0, prefix.size() - 1, 1));
  return std::vector<double>(last.values().begin(), last.values().end());
}

template <typename T>
AsrLoss<T> AsrModel<T>::loss(const Tensor<T>& feats, const std::vector<int>& targets, const Context& ctx) {
  const Tensor<T> memory = encode(feats, ctx);
  std::vector<int> prefix{TokenVocab::kSos};
  prefix.insert(prefix.end(), targets.begin(), targets.end());
  std::vector<int> gold(targets);
  gold.push_back(TokenVocab::kEos);
  AsrLoss<T> out;
  out.ce = diff::cross_entropy(decoder_logits(memory, prefix, ctx), gold, static_cast<T>(cfg_.label_smoothing),
                               TokenVocab::kPad);
  out.ctc = cfg_.ctc_weight > 0.0 ? ctc_loss(ctc_log_probs(memory), targets, TokenVocab::kBlank)
                                  : Tensor<T>::scalar(T(0));
  out.total = joint_asr_loss(out.ce, out.ctc, static_cast<T>(cfg_.ctc_weight));
  return out;
}

template class AsrModel<float>;
template class AsrModel<double>;

}  // namespace advjoint::asr
