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

#include "advjoint/joint/experiment.hpp"

#include <chrono>
#include <cstdio>
#include <sstream>

namespace advjoint::joint {

using diff::ConfigurationError;

ExperimentConfig ExperimentConfig::make(const std::string& preset, asr::EncoderKind kind) {
  ExperimentConfig c;
  c.preset = preset;
  const int vocab = asr::TokenVocab::toy().size();
  const std::size_t dim = c.fbank.dim();
  if (preset == "paper") {
    c.segan = segan::SeganConfig::paper();
    c.segan_train = segan::SeganTrainConfig{};
    c.asr = kind == asr::EncoderKind::kConformer ? asr::AsrConfig::paper_conformer(dim, vocab)
                                                 : asr::AsrConfig::paper_transformer(dim, vocab);
    c.asr_train.epochs = 50;
    c.asr_train.batch = 8;
    c.asr_train.schedule = {10.0, static_cast<int>(c.asr.d_model), 25000};
    c.joint.asr_schedule = c.asr_train.schedule;
    c.joint.batch = 8;
    c.joint.epochs = 10;
    c.decode = {12, 1.0, 64};
    return c;
  }
  if (preset != "toy") throw ConfigurationError("unknown preset '" + preset + "' (expected toy or paper)");
  c.segan = segan::SeganConfig::toy();
  c.segan_train.batch = 16;
  c.segan_train.epochs = 6;
  c.asr = asr::AsrConfig::toy(kind, dim, vocab);
  c.asr_train.epochs = 60;
  c.asr_train.batch = 4;
  c.asr_train.schedule = {0.5, static_cast<int>(c.asr.d_model), 200};
  c.joint.asr_schedule = c.asr_train.schedule;
  c.joint.batch = 4;
  c.joint.epochs = 2;
  c.decode = {12, 1.0, 16};
  return c;
}

void ExperimentConfig::validate() const {
  if (data.n_train < 1 || data.n_test < 1) throw ConfigurationError("experiment: data sizes must be positive");
  if (!(data.mct_fraction >= 0.0 && data.mct_fraction <= 1.0)) {
    throw ConfigurationError("experiment: mct fraction must be in [0, 1]");
  }
  if (!(data.snr_lo_db <= data.snr_hi_db)) throw ConfigurationError("experiment: empty SNR range");
  if (fbank.dim() != asr.input_dim) {
    throw ConfigurationError("experiment: fbank dim " + std::to_string(fbank.dim()) + " != asr input_dim " +
                             std::to_string(asr.input_dim));
  }
  if (decode.beam < 1 || decode.max_len < 1) throw ConfigurationError("experiment: bad decode options");
  segan.validate();
  segan_train.validate();
  asr.validate();
  asr_train.validate();
  joint.validate();
}

ToyData make_toy_data(const DataConfig& cfg, std::uint64_t seed) {
  const auto bank = data::NoiseBank::standard(data::derive_seed(seed, "noise"));
  ToyData d;
  d.train_clean = data::synth_toy_corpus(cfg.n_train, data::derive_seed(seed, "train"), data::Split::kTrain, "tr",
                                         cfg.corpus);
  d.train_mct = build_mct_dataset(d.train_clean, bank, data::derive_seed(seed, "mct"), cfg.mct_fraction,
                                  cfg.snr_lo_db, cfg.snr_hi_db);
  d.test_clean =
      data::synth_toy_corpus(cfg.n_test, data::derive_seed(seed, "test"), data::Split::kTest, "te", cfg.corpus);
  d.test_match = data::corrupt_split(d.test_clean, bank, data::Condition::kMatch, cfg.snr_lo_db, cfg.snr_hi_db,
                                     data::derive_seed(seed, "match"));
  d.test_unmatch = data::corrupt_split(d.test_clean, bank, data::Condition::kUnmatch, cfg.snr_lo_db, cfg.snr_hi_db,
                                       data::derive_seed(seed, "unmatch"));
  d.test_probe = data::corrupt_split(d.test_clean, bank, data::Condition::kMatch, cfg.probe_snr_db, cfg.probe_snr_db,
                                     data::derive_seed(seed, "probe"));
  return d;
}

std::vector<const signal::Waveform*> waveforms(const data::Corpus& corpus) {
  std::vector<const signal::Waveform*> out;
  for (const auto& r : corpus.manifest.records) out.push_back(&corpus.wave(r.id));
  return out;
}

namespace {

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

}  // namespace

template <typename T>
segan::PretrainResult<T> pretrain_segan(const data::Corpus& noisy_train, const ExperimentConfig& cfg,
                                        const Logger& log) {
  const auto pairs = make_segan_pairs(noisy_train, cfg.segan, cfg.segan_train.chunk_overlap);
  if (log) log("segan: " + std::to_string(pairs.size()) + " chunk pairs");
  segan::SeganTrainConfig tc = cfg.segan_train;
  tc.seed = data::derive_seed(cfg.seed, "segan");
  return segan::segan_pretrain<T>(pairs, cfg.segan, tc, [&](const segan::EpochLoss& e) {
    if (log) log("segan epoch " + std::to_string(e.epoch) + fmt(": d %.4f adv %.4f l1 %.4f", e.d_loss, e.g_loss_adv, e.g_loss_l1));
  });
}

template <typename T>
TrainedAsr<T> train_asr(const data::Corpus& train, const ExperimentConfig& cfg, const Logger& log) {
  TrainedAsr<T> out;
  out.frontend = FeatureFrontEnd::fit(waveforms(train), cfg.fbank);
  const auto feats = make_feature_set(train, out.frontend, asr::TokenVocab(train.manifest.vocab));
  asr::AsrTrainConfig tc = cfg.asr_train;
  tc.seed = data::derive_seed(cfg.seed, "asr");
  out.trainer = std::make_unique<asr::AsrTrainer<T>>(cfg.asr, tc, tc.seed);
  for (int e = 1; e <= tc.epochs; ++e) {
    out.history.push_back(out.trainer->train_epoch(feats));
    if (log && (e % 10 == 0 || e == tc.epochs)) log("asr epoch " + std::to_string(e) + fmt(": loss %.4f", out.history.back()));
  }
  return out;
}

template <typename T>
std::unique_ptr<JointTrainer<T>> train_joint(const data::Checkpoint& segan_ckpt, const data::Checkpoint& asr_ckpt,
                                             const data::Corpus& train, const ExperimentConfig& cfg,
                                             const JointConfig& joint, const Logger& log) {
  const FeatureFrontEnd frontend = load_frontend(asr_ckpt);
  JointConfig jc = joint;
  jc.seed = data::derive_seed(cfg.seed, "joint");
  auto tr = std::make_unique<JointTrainer<T>>(cfg.segan, cfg.asr, frontend, jc);
  restore_segan(segan_ckpt, tr->generator(), &tr->discriminator());
  restore_asr(asr_ckpt, tr->asr(), &tr->asr_optimizer());
  const auto samples = make_joint_samples(train, asr::TokenVocab(train.manifest.vocab));
  for (int e = 1; e <= jc.epochs; ++e) {
    const JointLosses l = tr->run_epoch(samples);
    if (log) {
      log("joint(gamma=" + fmt("%g", jc.gamma) + ") epoch " + std::to_string(e) +
          fmt(": asr %.4f enh %.4f", l.asr, l.enh) + fmt(" gan %.4f d %.4f", l.gan, l.d));
    }
  }
  return tr;
}

const ArmResult& ExperimentResult::arm(const std::string& name, const std::string& training) const {
  for (const auto& a : arms)
    if (a.arm == name && a.training == training) return a;
  throw diff::ContractError("experiment: no arm '" + name + "/" + training + "'");
}

template <typename T>
ExperimentResult run_experiment(const ExperimentConfig& cfg, const Logger& log) {
  cfg.validate();
  const ToyData d = make_toy_data(cfg.data, cfg.seed);
  const asr::TokenVocab vocab(d.train_clean.manifest.vocab);
  const std::map<std::string, const data::Corpus*> tests{
      {"clean", &d.test_clean}, {"match", &d.test_match}, {"unmatch", &d.test_unmatch}};
  const std::uint64_t z_seed = data::derive_seed(cfg.seed, "eval-z");
  ExperimentResult res;
  auto add = [&](const std::string& arm, const std::string& training, const segan::Generator<T>* g,
                 asr::AsrModel<T>& m, const FeatureFrontEnd& fe) {
    ArmResult a{arm, training, evaluate_pipeline(g, m, fe, vocab, tests, cfg.decode, z_seed)};
    if (log) {
      log("eval " + arm + "/" + training +
          fmt(": clean %.4f match %.4f unmatch %.4f", a.table.at("clean"), a.table.at("match"), a.table.at("unmatch")));
    }
    res.arms.push_back(std::move(a));
  };

  const auto t0 = std::chrono::steady_clock::now();
  auto segan = pretrain_segan<T>(d.train_mct, cfg, log);
  res.segan_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  auto& g = segan.trainer->generator();
  res.ssnr_noisy = mean_ssnr<T>(d.test_match, nullptr, z_seed);
  res.ssnr_enhanced = mean_ssnr<T>(d.test_match, &g, z_seed);
  res.probe_ssnr_noisy = mean_ssnr<T>(d.test_probe, nullptr, z_seed);
  res.probe_ssnr_enhanced = mean_ssnr<T>(d.test_probe, &g, z_seed);
  if (log) {
    log(fmt("ssnr matched test: noisy %.3f dB, enhanced %.3f dB", res.ssnr_noisy, res.ssnr_enhanced));
    log(fmt("ssnr matched test at %g dB: noisy %.3f dB, enhanced %.3f dB", cfg.data.probe_snr_db,
            res.probe_ssnr_noisy, res.probe_ssnr_enhanced));
  }
  const data::Checkpoint segan_ckpt = segan_checkpoint<T>(g, segan.trainer->discriminator());

  auto clean_asr = train_asr<T>(d.train_clean, cfg, log);
  add("clean", "clean", nullptr, clean_asr.trainer->model(), clean_asr.frontend);
  add("enhanced", "clean", &g, clean_asr.trainer->model(), clean_asr.frontend);
  clean_asr.trainer.reset();

  auto mct_asr = train_asr<T>(d.train_mct, cfg, log);
  add("mct", "mct", nullptr, mct_asr.trainer->model(), mct_asr.frontend);
  add("enhanced", "mct", &g, mct_asr.trainer->model(), mct_asr.frontend);
  const data::Checkpoint asr_ckpt =
      asr_checkpoint<T>(mct_asr.trainer->model(), mct_asr.frontend, &mct_asr.trainer->optimizer());
  mct_asr.trainer.reset();

  JointConfig no_gan = cfg.joint;
  no_gan.gamma = 0.0;
  auto j0 = train_joint<T>(segan_ckpt, asr_ckpt, d.train_mct, cfg, no_gan, log);
  add("joint", "mct", &j0->generator(), j0->asr(), j0->frontend());
  j0.reset();

  auto j1 = train_joint<T>(segan_ckpt, asr_ckpt, d.train_mct, cfg, cfg.joint, log);
  add("joint+gan", "mct", &j1->generator(), j1->asr(), j1->frontend());
  return res;
}

std::string cer_csv(const std::vector<ArmResult>& arms) {
  std::ostringstream os;
  os.precision(6);
  os << "arm,training,clean,match,unmatch\n";
  for (const auto& a : arms) {
    os << a.arm << ',' << a.training;
    for (const char* c : {"clean", "match", "unmatch"}) {
      os << ',';
      auto it = a.table.cer.find(c);
      if (it != a.table.cer.end()) os << std::fixed << it->second << std::defaultfloat;
    }
    os << '\n';
  }
  return os.str();
}

#define ADVJOINT_INSTANTIATE_EXPERIMENT(T)                                                                        \
  template segan::PretrainResult<T> pretrain_segan<T>(const data::Corpus&, const ExperimentConfig&,              \
                                                      const Logger&);                                            \
  template TrainedAsr<T> train_asr<T>(const data::Corpus&, const ExperimentConfig&, const Logger&);              \
  template std::unique_ptr<JointTrainer<T>> train_joint<T>(const data::Checkpoint&, const data::Checkpoint&,     \
                                                           const data::Corpus&, const ExperimentConfig&,         \
                                                           const JointConfig&, const Logger&);                   \
  template ExperimentResult run_experiment<T>(const ExperimentConfig&, const Logger&);

ADVJOINT_INSTANTIATE_EXPERIMENT(float)
ADVJOINT_INSTANTIATE_EXPERIMENT(double)

}  // namespace advjoint::joint
