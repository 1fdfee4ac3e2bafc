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

#include "advjoint/joint/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "advjoint/asr/vocab.hpp"

namespace advjoint::joint {

using data::CheckpointError;
using data::DataError;
using diff::ContractError;
using diff::Tensor;
using nlohmann::json;

// ---- front-end ------------------------------------------------------------------

signal::FbankConfig FeatureFrontEnd::default_fbank() {
  signal::FbankConfig c;
  c.with_deltas = true;
  return c;
}

FeatureFrontEnd FeatureFrontEnd::fit(const std::vector<const signal::Waveform*>& train,
                                     const signal::FbankConfig& fbank) {
  if (train.empty()) throw ContractError("front-end: no waveforms to fit statistics on");
  FeatureFrontEnd f;
  f.fbank = fbank;
  f.extractor_ = std::make_shared<signal::FbankExtractor<double>>(fbank);
  std::vector<std::vector<double>> mats;
  mats.reserve(train.size());
  diff::NoGradGuard ng;
  for (const auto* w : train) {
    const Tensor<double> x = Tensor<double>::from({w->size()}, w->samples);
    const Tensor<double> r = f.extractor_->raw(x);
    mats.emplace_back(r.values().begin(), r.values().end());
  }
  f.stats = signal::compute_norm_stats(mats, fbank.dim());
  return f;
}

std::vector<double> FeatureFrontEnd::features(const signal::Waveform& w) const {
  if (stats.empty()) throw ContractError("front-end: normalization statistics are not set");
  if (!extractor_) extractor_ = std::make_shared<signal::FbankExtractor<double>>(fbank);
  diff::NoGradGuard ng;
  const Tensor<double> y = (*extractor_)(Tensor<double>::from({w.size()}, w.samples), stats);
  return {y.values().begin(), y.values().end()};
}

std::string FeatureFrontEnd::fingerprint() const {
  std::ostringstream os;
  os << "fbank:sr=" << fbank.sample_rate << ";win=" << fbank.win_ms << ";hop=" << fbank.hop_ms
     << ";nfft=" << fbank.n_fft << ";mels=" << fbank.n_mels << ";fmin=" << fbank.fmin << ";fmax=" << fbank.fmax
     << ";deltas=" << fbank.with_deltas << ';' << fbank.delta_window;
  return os.str();
}

namespace {

asr::FeatureUtterance to_utterance(const std::string& id, const std::vector<double>& feats, std::size_t dim,
                                   const std::string& text, const asr::TokenVocab& vocab) {
  asr::FeatureUtterance u;
  u.id = id;
  u.dim = dim;
  u.frames = feats.size() / dim;
  u.feats = feats;
  u.text = text;
  u.tokens = vocab.encode(text);
  return u;
}

}  // namespace

std::vector<asr::FeatureUtterance> make_feature_set(const data::Corpus& corpus, const FeatureFrontEnd& frontend,
                                                    const asr::TokenVocab& vocab) {
  std::vector<asr::FeatureUtterance> out;
  out.reserve(corpus.manifest.records.size());
  for (const auto& r : corpus.manifest.records) {
    out.push_back(to_utterance(r.id, frontend.features(corpus.wave(r.id)), frontend.dim(), r.transcript, vocab));
  }
  return out;
}

template <typename T>
std::vector<asr::FeatureUtterance> make_enhanced_feature_set(const data::Corpus& corpus, const segan::Generator<T>& g,
                                                             const FeatureFrontEnd& frontend,
                                                             const asr::TokenVocab& vocab, std::uint64_t z_seed) {
  std::vector<asr::FeatureUtterance> out;
  out.reserve(corpus.manifest.records.size());
  for (const auto& r : corpus.manifest.records) {
    const auto enh = segan::enhance_waveform(corpus.wave(r.id), g, data::derive_seed(z_seed, r.id));
    out.push_back(to_utterance(r.id, frontend.features(enh), frontend.dim(), r.transcript, vocab));
  }
  return out;
}

// ---- data sets ------------------------------------------------------------------

data::Corpus build_mct_dataset(const data::Corpus& clean, const data::NoiseBank& bank, std::uint64_t seed,
                               double fraction, double snr_lo_db, double snr_hi_db) {
  const auto& recs = clean.manifest.records;
  if (recs.empty()) throw DataError("mct: empty manifest");
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw DataError("mct: fraction must be in [0, 1]");
  if (!(snr_lo_db <= snr_hi_db)) throw DataError("mct: SNR range is empty");
  const auto families = bank.matched();
  if (families.empty()) throw DataError("mct: no matched noise families in the bank");
  for (const auto& r : recs) {
    if (r.condition != data::Condition::kClean) throw DataError("mct: record '" + r.id + "' is not clean");
  }

  const std::size_t n = recs.size();
  const auto k = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  std::mt19937_64 rng(data::derive_seed(seed, "mct"));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<bool> noisy(n, false);
  for (std::size_t i = 0; i < k; ++i) noisy[order[i]] = true;

  data::Corpus out;
  out.manifest.vocab = clean.manifest.vocab;
  out.manifest.provenance = clean.manifest.provenance;
  out.manifest.provenance["mct"] = {{"seed", seed}, {"fraction", fraction}, {"noisy", k},
                                    {"snr_db", {snr_lo_db, snr_hi_db}}};
  std::uniform_int_distribution<std::size_t> pick(0, families.size() - 1);
  std::uniform_real_distribution<double> snr(snr_lo_db, snr_hi_db);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = recs[i];
    if (!noisy[i]) {
      out.manifest.records.push_back(r);
      out.audio[r.id] = clean.wave(r.id);
      continue;
    }
    const auto& fam = families[pick(rng)];
    const double s = snr(rng);
    data::Corruption c = data::corrupt_record(r, clean.wave(r.id), fam, data::Condition::kMatch, s, seed);
    out.clean[c.record.id] = clean.wave(r.id);
    out.audio[c.record.id] = std::move(c.noisy);
    out.manifest.records.push_back(std::move(c.record));
  }
  return out;
}

std::vector<segan::ChunkPair> make_segan_pairs(const data::Corpus& corpus, const segan::SeganConfig& cfg,
                                               double overlap) {
  std::vector<signal::Waveform> clean, noisy;
  for (const auto& r : corpus.manifest.records) {
    if (r.condition == data::Condition::kClean) continue;
    clean.push_back(corpus.clean_wave(r.id));
    noisy.push_back(corpus.wave(r.id));
  }
  if (clean.empty()) throw DataError("segan pairs: corpus has no noisy records");
  return segan::make_chunk_pairs(clean, noisy, cfg.chunk, overlap, cfg.preemph);
}

// ---- evaluation -----------------------------------------------------------------

double CerTable::at(const std::string& condition) const {
  auto it = cer.find(condition);
  if (it == cer.end()) throw ContractError("cer table: no condition '" + condition + "'");
  return it->second;
}

template <typename T>
CerTable evaluate_pipeline(const segan::Generator<T>* g, asr::AsrModel<T>& model, const FeatureFrontEnd& frontend,
                           const asr::TokenVocab& vocab, const std::map<std::string, const data::Corpus*>& tests,
                           const DecodeOptions& opts, std::uint64_t z_seed) {
  if (tests.empty()) throw DataError("evaluate: no test sets");
  if (frontend.dim() != model.config().input_dim) {
    throw ContractError("evaluate: front-end dim " + std::to_string(frontend.dim()) + " does not match model input " +
                        std::to_string(model.config().input_dim));
  }
  CerTable table;
  for (const auto& [cond, corpus] : tests) {
    if (corpus == nullptr || corpus->manifest.records.empty()) {
      throw DataError("evaluate: test set '" + cond + "' has an empty manifest");
    }
    double edits = 0.0, chars = 0.0;
    for (const auto& r : corpus->manifest.records) {
      const signal::Waveform& noisy = corpus->wave(r.id);
      const std::vector<double> feats =
          g ? frontend.features(segan::enhance_waveform(noisy, *g, data::derive_seed(z_seed, r.id)))
            : frontend.features(noisy);
      const std::size_t frames = feats.size() / frontend.dim();
      const auto x = Tensor<T>::from({frames, frontend.dim()}, std::vector<T>(feats.begin(), feats.end()));
      const asr::DecodeResult d = asr::transcribe(model, x, opts.beam, opts.length_alpha, opts.max_len);
      CerRow row;
      row.condition = cond;
      row.id = r.id;
      row.ref = r.transcript;
      row.hyp = vocab.decode(d.tokens);
      row.cer = asr::cer(row.hyp, row.ref);
      const double n = static_cast<double>(asr::utf8_chars(row.ref).size());
      edits += std::round(row.cer * n);
      chars += n;
      table.rows.push_back(std::move(row));
    }
    table.cer[cond] = edits / chars;
  }
  return table;
}

template <typename T>
double mean_ssnr(const data::Corpus& noisy, const segan::Generator<T>* g, std::uint64_t z_seed) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& r : noisy.manifest.records) {
    if (r.condition == data::Condition::kClean) continue;
    const auto& clean = noisy.clean_wave(r.id).samples;
    if (g) {
      total += signal::ssnr(clean, segan::enhance_waveform(noisy.wave(r.id), *g, data::derive_seed(z_seed, r.id)).samples);
    } else {
      total += signal::ssnr(clean, noisy.wave(r.id).samples);
    }
    ++count;
  }
  if (count == 0) throw DataError("ssnr: corpus has no noisy records");
  return total / static_cast<double>(count);
}

// ---- checkpoints ----------------------------------------------------------------

namespace {

void require_meta(const data::Checkpoint& c, const std::string& key, const std::string& expected) {
  if (!c.metadata.contains(key)) {
    throw CheckpointError(CheckpointError::Kind::kMissing, "checkpoint: no '" + key + "' descriptor");
  }
  const std::string got = c.metadata.at(key).get<std::string>();
  if (got != expected) {
    throw CheckpointError(CheckpointError::Kind::kArchitecture,
                          "checkpoint: " + key + " architecture mismatch: stored '" + got + "', expected '" +
                              expected + "'");
  }
}

}  // namespace

std::string pipeline_fingerprint(const segan::SeganConfig& s, const asr::AsrConfig& a, const FeatureFrontEnd& f) {
  return s.fingerprint() + "|" + a.fingerprint() + "|" + f.fingerprint();
}

void store_frontend(data::Checkpoint& c, const FeatureFrontEnd& f) {
  const auto& b = f.fbank;
  c.metadata["frontend"] = {{"sample_rate", b.sample_rate}, {"win_ms", b.win_ms},       {"hop_ms", b.hop_ms},
                            {"n_fft", b.n_fft},             {"n_mels", b.n_mels},       {"fmin", b.fmin},
                            {"fmax", b.fmax},               {"log_floor", b.log_floor}, {"with_deltas", b.with_deltas},
                            {"delta_window", b.delta_window}};
  c.put<double>("frontend/mean", {f.stats.mean.size()}, f.stats.mean);
  c.put<double>("frontend/var", {f.stats.var.size()}, f.stats.var);
}

FeatureFrontEnd load_frontend(const data::Checkpoint& c) {
  if (!c.metadata.contains("frontend")) {
    throw CheckpointError(CheckpointError::Kind::kMissing, "checkpoint: no feature front-end");
  }
  const json& j = c.metadata.at("frontend");
  FeatureFrontEnd f;
  try {
    f.fbank.sample_rate = j.at("sample_rate").get<int>();
    f.fbank.win_ms = j.at("win_ms").get<double>();
    f.fbank.hop_ms = j.at("hop_ms").get<double>();
    f.fbank.n_fft = j.at("n_fft").get<std::size_t>();
    f.fbank.n_mels = j.at("n_mels").get<std::size_t>();
    f.fbank.fmin = j.at("fmin").get<double>();
    f.fbank.fmax = j.at("fmax").get<double>();
    f.fbank.log_floor = j.at("log_floor").get<double>();
    f.fbank.with_deltas = j.at("with_deltas").get<bool>();
    f.fbank.delta_window = j.at("delta_window").get<int>();
  } catch (const json::exception& e) {
    throw CheckpointError(CheckpointError::Kind::kFormat, std::string("checkpoint: bad front-end record: ") + e.what());
  }
  f.stats.mean = c.get<double>("frontend/mean", f.fbank.dim());
  f.stats.var = c.get<double>("frontend/var", f.fbank.dim());
  return f;
}

template <typename T>
data::Checkpoint segan_checkpoint(const segan::Generator<T>& g, const segan::Discriminator<T>& d,
                                  const diff::Optimizer<T>* g_opt, const diff::Optimizer<T>* d_opt) {
  data::Checkpoint c;
  c.arch = "segan";
  c.fingerprint = g.config().fingerprint();
  c.metadata["segan"] = c.fingerprint;
  data::store_params(c, "g.", g.params());
  data::store_params(c, "d.", d.params());
  if (g_opt) data::store_optimizer(c, "g.", *g_opt);
  if (d_opt) data::store_optimizer(c, "d.", *d_opt);
  return c;
}

template <typename T>
void restore_segan(const data::Checkpoint& c, segan::Generator<T>& g, segan::Discriminator<T>* d) {
  require_meta(c, "segan", g.config().fingerprint());
  data::restore_params(c, "g.", g.params());
  if (d) data::restore_params(c, "d.", d->params());
}

template <typename T>
data::Checkpoint asr_checkpoint(const asr::AsrModel<T>& m, const FeatureFrontEnd& f, const diff::Optimizer<T>* opt) {
  data::Checkpoint c;
  c.arch = "asr";
  c.fingerprint = m.config().fingerprint() + "|" + f.fingerprint();
  c.metadata["asr"] = m.config().fingerprint();
  data::store_params(c, "asr.", m.params());
  store_frontend(c, f);
  if (opt) data::store_optimizer(c, "asr.", *opt);
  return c;
}

template <typename T>
FeatureFrontEnd restore_asr(const data::Checkpoint& c, asr::AsrModel<T>& m, diff::Optimizer<T>* opt) {
  require_meta(c, "asr", m.config().fingerprint());
  FeatureFrontEnd f = load_frontend(c);
  if (f.dim() != m.config().input_dim) {
    throw CheckpointError(CheckpointError::Kind::kArchitecture, "checkpoint: front-end dim does not match the model");
  }
  data::restore_params(c, "asr.", m.params());
  if (opt) data::restore_optimizer(c, "asr.", *opt);
  return f;
}

template <typename T>
data::Checkpoint pipeline_checkpoint(const segan::Generator<T>& g, const segan::Discriminator<T>& d,
                                     const asr::AsrModel<T>& m, const FeatureFrontEnd& f, std::int64_t step) {
  data::Checkpoint c;
  c.arch = "pipeline";
  c.fingerprint = pipeline_fingerprint(g.config(), m.config(), f);
  c.metadata["segan"] = g.config().fingerprint();
  c.metadata["asr"] = m.config().fingerprint();
  c.metadata["step"] = step;
  data::store_params(c, "g.", g.params());
  data::store_params(c, "d.", d.params());
  data::store_params(c, "asr.", m.params());
  store_frontend(c, f);
  return c;
}

template <typename T>
std::pair<FeatureFrontEnd, std::int64_t> restore_pipeline(const data::Checkpoint& c, segan::Generator<T>& g,
                                                          segan::Discriminator<T>& d, asr::AsrModel<T>& m) {
  if (c.arch != "pipeline") {
    throw CheckpointError(CheckpointError::Kind::kArchitecture, "checkpoint: expected a pipeline, found '" + c.arch + "'");
  }
  FeatureFrontEnd f = load_frontend(c);
  data::require_fingerprint(c, pipeline_fingerprint(g.config(), m.config(), f));
  data::restore_params(c, "g.", g.params());
  data::restore_params(c, "d.", d.params());
  data::restore_params(c, "asr.", m.params());
  return {f, c.metadata.value("step", std::int64_t{0})};
}

#define ADVJOINT_INSTANTIATE_PIPELINE(T)                                                                             \
  template std::vector<asr::FeatureUtterance> make_enhanced_feature_set<T>(                                         \
      const data::Corpus&, const segan::Generator<T>&, const FeatureFrontEnd&, const asr::TokenVocab&, std::uint64_t); \
  template CerTable evaluate_pipeline<T>(const segan::Generator<T>*, asr::AsrModel<T>&, const FeatureFrontEnd&,      \
                                         const asr::TokenVocab&, const std::map<std::string, const data::Corpus*>&, \
                                         const DecodeOptions&, std::uint64_t);                                      \
  template double mean_ssnr<T>(const data::Corpus&, const segan::Generator<T>*, std::uint64_t);                      \
  template data::Checkpoint segan_checkpoint<T>(const segan::Generator<T>&, const segan::Discriminator<T>&,          \
                                                const diff::Optimizer<T>*, const diff::Optimizer<T>*);              \
  template void restore_segan<T>(const data::Checkpoint&, segan::Generator<T>&, segan::Discriminator<T>*);           \
  template data::Checkpoint asr_checkpoint<T>(const asr::AsrModel<T>&, const FeatureFrontEnd&,                       \
                                              const diff::Optimizer<T>*);                                           \
  template FeatureFrontEnd restore_asr<T>(const data::Checkpoint&, asr::AsrModel<T>&, diff::Optimizer<T>*);          \
  template data::Checkpoint pipeline_checkpoint<T>(const segan::Generator<T>&, const segan::Discriminator<T>&,       \
                                                   const asr::AsrModel<T>&, const FeatureFrontEnd&, std::int64_t);  \
  template std::pair<FeatureFrontEnd, std::int64_t> restore_pipeline<T>(                                            \
      const data::Checkpoint&, segan::Generator<T>&, segan::Discriminator<T>&, asr::AsrModel<T>&);

ADVJOINT_INSTANTIATE_PIPELINE(float)
ADVJOINT_INSTANTIATE_PIPELINE(double)

}  // namespace advjoint::joint
