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

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <set>

#include "advjoint/data/corpus.hpp"
#include "advjoint/joint/joint.hpp"
#include "advjoint/joint/pipeline.hpp"
#include "joint_fixtures.hpp"

namespace advjoint::joint {
namespace {

using namespace advjoint::testing;  // NOLINT
// ---- joint loss ----------------------------------------------------------------

TEST(JointLossTest, DefaultWeightsExample) {
  const JointConfig cfg;
  EXPECT_DOUBLE_EQ(cfg.kappa, 6.0);
  EXPECT_DOUBLE_EQ(cfg.gamma, 3.0);
  EXPECT_NEAR(joint_loss(1.0, 0.5, 0.2, cfg), 4.6, 1e-12);
}

TEST(JointLossTest, ZeroWeightsLeaveAsrAlone) {
  JointConfig cfg;
  cfg.kappa = 0.0;
  cfg.gamma = 0.0;
  EXPECT_EQ(joint_loss(1.75, 123.0, -4.0, cfg), 1.75);
}

TEST(JointLossTest, LinearInEachComponent) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int trial = 0; trial < 50; ++trial) {
    JointConfig cfg;
    cfg.kappa = std::abs(u(rng));
    cfg.gamma = std::abs(u(rng));
    const double a = u(rng), e = u(rng), g = u(rng), d = u(rng), s = u(rng);
    const double base = joint_loss(a, e, g, cfg);
    EXPECT_NEAR(joint_loss(a + d, e, g, cfg) - base, d, 1e-9);
    EXPECT_NEAR(joint_loss(a, e + d, g, cfg) - base, cfg.kappa * d, 1e-9);
    EXPECT_NEAR(joint_loss(a, e, g + d, cfg) - base, cfg.gamma * d, 1e-9);
    EXPECT_NEAR(joint_loss(s * a, s * e, s * g, cfg), s * base, 1e-9);
  }
}

TEST(JointLossTest, NonFiniteComponentIsNamed) {
  const JointConfig cfg;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const std::vector<std::pair<std::array<double, 3>, std::string>> cases{
      {{nan, 0.1, 0.1}, "l_asr"}, {{0.1, nan, 0.1}, "l_enh"}, {{0.1, 0.1, INFINITY}, "l_gan"}};
  for (const auto& [v, name] : cases) {
    try {
      joint_loss(v[0], v[1], v[2], cfg);
      ADD_FAILURE() << "no error for " << name;
    } catch (const diff::NonFiniteError& e) {
      EXPECT_NE(std::string(e.what()).find(name), std::string::npos) << e.what();
    }
  }
}

TEST(JointLossTest, TensorFormMatchesAndDifferentiates) {
  const JointConfig cfg;
  TensorD a = TensorD::scalar(1.0, true), e = TensorD::scalar(0.5, true), g = TensorD::scalar(0.2, true);
  TensorD t = joint_loss(a, e, g, cfg);
  EXPECT_NEAR(t.item(), 4.6, 1e-12);
  t.backward();
  EXPECT_DOUBLE_EQ(a.grad()[0], 1.0);
  EXPECT_DOUBLE_EQ(e.grad()[0], 6.0);
  EXPECT_DOUBLE_EQ(g.grad()[0], 3.0);
}

TEST(JointConfigTest, RejectsNegativeWeights) {
  JointConfig c;
  c.kappa = -1.0;
  EXPECT_THROW(c.validate(), diff::ConfigurationError);
  c = JointConfig{};
  c.gamma = -0.1;
  EXPECT_THROW(c.validate(), diff::ConfigurationError);
  c = JointConfig{};
  c.batch = 0;
  EXPECT_THROW(c.validate(), diff::ConfigurationError);
  EXPECT_NO_THROW(JointConfig{}.validate());
}

// ---- joint step ----------------------------------------------------------------


TEST(JointStepTest, ZeroWeightsEqualPureAsrFineTuningGradient) {
  const auto samples = tiny_samples();
  const auto fe = tiny_frontend(samples);
  const JointConfig cfg = quiet_config(0.0, 0.0);
  JointTrainer<double> tr(tiny_segan(), tiny_asr(), fe, cfg);
  const std::vector<JointSample> batch{samples[0], samples[2]};

  // Same initial weights and latent draws as the trainer.
  segan::Generator<double> g(tiny_segan(), cfg.seed);
  asr::AsrModel<double> m(tiny_asr(), cfg.seed + 2);
  ASSERT_EQ(values_of(g.params()), values_of(tr.generator().params()));
  ASSERT_EQ(values_of(m.params()), values_of(tr.asr().params()));
  diff::Rng z_rng = tr.rng();
  std::vector<TensorD> zs;
  for (const auto& s : batch) zs.push_back(g.sample_z((s.noisy.size() + 255) / 256, z_rng));

  const auto d_before = values_of(tr.discriminator().params());
  const JointLosses l = tr.step(batch);
  double ref = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) ref += reference_asr_loss(g, m, fe, batch[i], zs[i], 0.5) / 2.0;
  EXPECT_NEAR(l.total, ref, 1e-9);
  EXPECT_NEAR(l.asr, ref, 1e-9);

  const auto pairs = {std::pair{grads_of(g.params()), grads_of(tr.generator().params())},
                      std::pair{grads_of(m.params()), grads_of(tr.asr().params())}};
  for (const auto& [want, got] : pairs) {
    ASSERT_EQ(want.size(), got.size());
    double norm = 0.0;
    for (std::size_t i = 0; i < want.size(); ++i) {
      EXPECT_NEAR(got[i], want[i], 1e-9 * std::max(1.0, std::abs(want[i]))) << i;
      norm += want[i] * want[i];
    }
    EXPECT_GT(norm, 0.0);
  }
  EXPECT_EQ(values_of(tr.discriminator().params()), d_before);
  EXPECT_FALSE(tr.discriminator().has_reference());
}

TEST(JointStepTest, GammaZeroIgnoresDiscriminatorEntirely) {
  const auto samples = tiny_samples();
  const auto fe = tiny_frontend(samples);
  const JointConfig cfg = quiet_config(6.0, 0.0);
  JointTrainer<double> a(tiny_segan(), tiny_asr(), fe, cfg);
  JointTrainer<double> b(tiny_segan(), tiny_asr(), fe, cfg);
  // b's discriminator differs; the trajectory of G and ASR must not notice.
  segan::Discriminator<double> other(tiny_segan(), 999);
  b.discriminator().params().copy_from(other.params());
  const auto d_a = values_of(a.discriminator().params());
  const auto d_b = values_of(b.discriminator().params());
  ASSERT_NE(d_a, d_b);
  for (int s = 0; s < 2; ++s) {
    const JointLosses la = a.step({samples[0], samples[1]});
    const JointLosses lb = b.step({samples[0], samples[1]});
    EXPECT_EQ(la.total, lb.total);
    EXPECT_EQ(la.gan, 0.0);
    EXPECT_EQ(la.d, 0.0);
  }
  EXPECT_EQ(values_of(a.generator().params()), values_of(b.generator().params()));
  EXPECT_EQ(values_of(a.asr().params()), values_of(b.asr().params()));
  EXPECT_EQ(values_of(a.discriminator().params()), d_a);
  EXPECT_EQ(values_of(b.discriminator().params()), d_b);
  EXPECT_EQ(a.d_optimizer().steps(), 0);
}

TEST(JointStepTest, AsrGradientReachesFirstGeneratorConv) {
  const auto samples = tiny_samples();
  const auto fe = tiny_frontend(samples);
  for (auto kind : {asr::EncoderKind::kTransformer, asr::EncoderKind::kConformer}) {
    JointTrainer<double> tr(tiny_segan(), tiny_asr(kind), fe, quiet_config(0.0, 0.0));
    auto& gp = tr.generator().params();
    gp.zero_grad();
    const auto& s = samples[1];
    const TensorD z = tr.generator().sample_z((s.noisy.size() + 255) / 256, tr.rng());
    auto f = tr.forward(s, z, true);
    f.asr.backward();
    const TensorD w = gp.get("g.enc1.w");
    ASSERT_TRUE(w.has_grad());
    double norm = 0.0;
    for (double v : w.grad()) {
      ASSERT_TRUE(std::isfinite(v));
      norm += v * v;
    }
    EXPECT_GT(std::sqrt(norm), 1e-12) << asr::to_string(kind);
  }
}

TEST(JointStepTest, OneStepAtSmallLearningRateDescends) {
  const auto samples = tiny_samples();
  const auto fe = tiny_frontend(samples);
  JointConfig cfg = quiet_config(6.0, 3.0);
  cfg.lr_g = 1e-5;
  cfg.lr_d = 1e-5;
  cfg.asr_schedule = {1e-5 * std::sqrt(8.0), 8, 1};  // lr(1) = 1e-5
  ASSERT_NEAR(cfg.asr_schedule.lr_at(1), 1e-5, 1e-15);
  JointTrainer<double> tr(tiny_segan(), tiny_asr(), fe, cfg);
  const std::vector<JointSample> batch{samples[0], samples[1], samples[2]};

  diff::Rng z_rng = tr.rng();
  std::vector<TensorD> zs;
  for (const auto& s : batch) zs.push_back(tr.generator().sample_z((s.noisy.size() + 255) / 256, z_rng));
  auto objective = [&] {
    diff::NoGradGuard ng;
    double v = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) v += tr.forward(batch[i], zs[i], true).total.item();
    return v / batch.size();
  };
  const double before = objective();
  tr.step(batch);
  const double after = objective();
  EXPECT_LT(after, before);
  EXPECT_EQ(tr.d_optimizer().steps(), 1);
  EXPECT_EQ(tr.g_optimizer().steps(), 1);
  EXPECT_EQ(tr.asr_optimizer().steps(), 1);
}

TEST(JointStepTest, FreezeFlagsHoldComponentsFixed) {
  const auto samples = tiny_samples();
  const auto fe = tiny_frontend(samples);
  JointConfig cfg = quiet_config(6.0, 3.0);
  cfg.freeze_g = true;
  cfg.freeze_d = true;
  JointTrainer<double> tr(tiny_segan(), tiny_asr(), fe, cfg);
  const auto g0 = values_of(tr.generator().params());
  const auto d0 = values_of(tr.discriminator().params());
  const auto a0 = values_of(tr.asr().params());
  const JointLosses l = tr.step({samples[0]});
  EXPECT_GT(l.gan, 0.0);
  EXPECT_EQ(values_of(tr.generator().params()), g0);
  EXPECT_EQ(values_of(tr.discriminator().params()), d0);
  EXPECT_NE(values_of(tr.asr().params()), a0);
}

TEST(JointStepTest, EmptyBatchAndMismatchedPairsRejected) {
  const auto samples = tiny_samples();
  JointTrainer<double> tr(tiny_segan(), tiny_asr(), tiny_frontend(samples), quiet_config(6.0, 3.0));
  EXPECT_THROW(tr.step({}), diff::ContractError);
  JointSample bad = samples[0];
  bad.clean.pop_back();
  EXPECT_THROW(tr.step({bad}), diff::DimensionError);
}

TEST(JointStepTest, RunEpochIsSeedDeterministic) {
  const auto samples = tiny_samples();
  const auto fe = tiny_frontend(samples);
  JointConfig cfg = quiet_config(6.0, 3.0);
  cfg.batch = 2;
  JointTrainer<double> a(tiny_segan(), tiny_asr(), fe, cfg);
  JointTrainer<double> b(tiny_segan(), tiny_asr(), fe, cfg);
  const JointLosses la = a.run_epoch(samples);
  const JointLosses lb = b.run_epoch(samples);
  EXPECT_EQ(la.total, lb.total);
  EXPECT_EQ(la.d, lb.d);
  EXPECT_EQ(values_of(a.generator().params()), values_of(b.generator().params()));
  EXPECT_EQ(values_of(a.discriminator().params()), values_of(b.discriminator().params()));
  EXPECT_EQ(a.steps(), 2);
}

// ---- data sets -----------------------------------------------------------------

TEST(MctTest, NinetyOfHundredCorruptedWithinRange) {
  const auto clean = data::synth_toy_corpus(100, 21, data::Split::kTrain);
  const auto bank = data::NoiseBank::standard(4);
  const auto mct = build_mct_dataset(clean, bank, 8);
  ASSERT_EQ(mct.manifest.records.size(), 100u);
  std::set<std::string> matched;
  for (const auto& s : bank.matched()) matched.insert(s.name);
  std::size_t noisy = 0;
  for (std::size_t i = 0; i < 100; ++i) {
    const auto& r = mct.manifest.records[i];
    if (r.condition == data::Condition::kClean) {
      EXPECT_EQ(r, clean.manifest.records[i]);
      EXPECT_EQ(mct.wave(r.id).samples, clean.wave(r.id).samples);
      continue;
    }
    ++noisy;
    EXPECT_EQ(r.condition, data::Condition::kMatch);
    ASSERT_TRUE(r.snr_db.has_value());
    EXPECT_GE(*r.snr_db, 0.0);
    EXPECT_LE(*r.snr_db, 20.0);
    ASSERT_TRUE(r.noise.has_value());
    EXPECT_TRUE(matched.count(*r.noise)) << *r.noise;
    EXPECT_EQ(mct.clean_wave(r.id).samples, clean.wave(clean.manifest.records[i].id).samples);
  }
  EXPECT_EQ(noisy, 90u);
  EXPECT_NO_THROW(mct.manifest.validate());
}

TEST(MctTest, DeterministicPerSeed) {
  const auto clean = data::synth_toy_corpus(20, 2, data::Split::kTrain);
  const auto bank = data::NoiseBank::standard(4);
  const auto a = build_mct_dataset(clean, bank, 8);
  const auto b = build_mct_dataset(clean, bank, 8);
  const auto c = build_mct_dataset(clean, bank, 9);
  EXPECT_EQ(a.manifest.records, b.manifest.records);
  for (const auto& r : a.manifest.records) EXPECT_EQ(a.wave(r.id).samples, b.wave(r.id).samples);
  EXPECT_NE(a.manifest.records, c.manifest.records);
  EXPECT_EQ(build_mct_dataset(data::synth_toy_corpus(10, 2, data::Split::kTrain), bank, 1).clean.size(), 9u);
}

TEST(MctTest, RejectsEmptyInputs) {
  const auto bank = data::NoiseBank::standard(4);
  EXPECT_THROW(build_mct_dataset(data::Corpus{}, bank, 1), data::DataError);
  data::NoiseBank unmatched_only;
  unmatched_only.specs = bank.unmatched();
  EXPECT_THROW(build_mct_dataset(data::synth_toy_corpus(3, 1, data::Split::kTrain), unmatched_only, 1),
               data::DataError);
}

TEST(FrontEndTest, TrainingFeaturesAreStandardized) {
  const auto corpus = data::synth_toy_corpus(6, 3, data::Split::kTrain);
  std::vector<const signal::Waveform*> waves;
  for (const auto& r : corpus.manifest.records) waves.push_back(&corpus.wave(r.id));
  const auto fe = FeatureFrontEnd::fit(waves, tiny_fbank());
  const auto set = make_feature_set(corpus, fe, asr::TokenVocab::toy());
  const std::size_t dim = fe.dim();
  std::vector<double> sum(dim, 0.0), sq(dim, 0.0);
  std::size_t rows = 0;
  for (const auto& u : set) {
    ASSERT_EQ(u.dim, dim);
    EXPECT_EQ(asr::TokenVocab::toy().decode(u.tokens), u.text);
    for (std::size_t t = 0; t < u.frames; ++t) {
      for (std::size_t d = 0; d < dim; ++d) {
        sum[d] += u.feats[t * dim + d];
        sq[d] += u.feats[t * dim + d] * u.feats[t * dim + d];
      }
    }
    rows += u.frames;
  }
  for (std::size_t d = 0; d < dim; ++d) {
    EXPECT_NEAR(sum[d] / rows, 0.0, 1e-9);
    EXPECT_NEAR(sq[d] / rows, 1.0, 1e-6);
  }
}

// ---- evaluation ----------------------------------------------------------------

TEST(EvaluateTest, RepeatableTableWithCorpusLevelCer) {
  const auto clean = data::synth_toy_corpus(3, 5, data::Split::kTest, "t");
  const auto bank = data::NoiseBank::standard(4);
  const auto match = data::corrupt_split(clean, bank, data::Condition::kMatch, 0, 20, 3);
  std::vector<const signal::Waveform*> waves;
  for (const auto& r : clean.manifest.records) waves.push_back(&clean.wave(r.id));
  const auto fe = FeatureFrontEnd::fit(waves, tiny_fbank());
  asr::AsrModel<double> m(tiny_asr(), 1);
  segan::Generator<double> g(tiny_segan(), 2);
  const std::map<std::string, const data::Corpus*> tests{{"clean", &clean}, {"match", &match}};
  const DecodeOptions opts{2, 1.0, 6};
  const auto vocab = asr::TokenVocab::toy();
  for (const segan::Generator<double>* gp : std::vector<const segan::Generator<double>*>{nullptr, &g}) {
    const CerTable a = evaluate_pipeline(gp, m, fe, vocab, tests, opts, 7);
    const CerTable b = evaluate_pipeline(gp, m, fe, vocab, tests, opts, 7);
    ASSERT_EQ(a.rows.size(), 6u);
    ASSERT_EQ(a.rows.size(), b.rows.size());
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
      EXPECT_EQ(a.rows[i].hyp, b.rows[i].hyp);
      EXPECT_EQ(a.rows[i].cer, b.rows[i].cer);
    }
    EXPECT_EQ(a.cer, b.cer);
    for (const std::string cond : {"clean", "match"}) {
      double edits = 0, chars = 0;
      for (const auto& r : a.rows) {
        if (r.condition != cond) continue;
        edits += asr::edit_distance(asr::utf8_chars(r.hyp), asr::utf8_chars(r.ref));
        chars += r.ref.size();
      }
      EXPECT_DOUBLE_EQ(a.at(cond), edits / chars);
    }
  }
}

TEST(EvaluateTest, EmptyManifestIsAnError) {
  const auto clean = data::synth_toy_corpus(2, 5, data::Split::kTest);
  std::vector<const signal::Waveform*> waves{&clean.wave(clean.manifest.records[0].id)};
  const auto fe = FeatureFrontEnd::fit(waves, tiny_fbank());
  asr::AsrModel<double> m(tiny_asr(), 1);
  const data::Corpus empty;
  const std::map<std::string, const data::Corpus*> tests{{"clean", &empty}};
  EXPECT_THROW(evaluate_pipeline<double>(nullptr, m, fe, asr::TokenVocab::toy(), tests, {}, 1), data::DataError);
  EXPECT_THROW(evaluate_pipeline<double>(nullptr, m, fe, asr::TokenVocab::toy(), {}, {}, 1), data::DataError);
}

// ---- checkpoints ---------------------------------------------------------------

TEST(PipelineCheckpointTest, InitializationIsBitExact) {
  const auto samples = tiny_samples();
  const auto fe = tiny_frontend(samples);
  // "Pretrained" components: distinct seeds and a reference batch in D.
  segan::Generator<double> g(tiny_segan(), 41);
  segan::Discriminator<double> d(tiny_segan(), 42);
  const auto chunk = TensorD::from({1, 256, 1}, std::vector<double>(samples[0].clean.begin(), samples[0].clean.begin() + 256));
  d.set_reference(chunk, chunk);
  asr::AsrModel<double> m(tiny_asr(), 43);
  diff::Adam<double> opt(m.params(), 1e-3);
  m.params().zero_grad();
  for (auto e : m.params().entries()) std::fill(e.tensor.mutable_grad().begin(), e.tensor.mutable_grad().end(), 0.01);
  opt.step();

  const auto sc = data::parse_checkpoint(data::serialize_checkpoint(segan_checkpoint(g, d)));
  const auto ac = data::parse_checkpoint(data::serialize_checkpoint(asr_checkpoint(m, fe, &opt)));
  JointTrainer<double> tr(tiny_segan(), tiny_asr(), fe, quiet_config(6.0, 3.0));
  restore_segan(sc, tr.generator(), &tr.discriminator());
  const FeatureFrontEnd fe2 = restore_asr(ac, tr.asr(), &tr.asr_optimizer());

  EXPECT_EQ(values_of(tr.generator().params()), values_of(g.params()));
  EXPECT_EQ(values_of(tr.discriminator().params()), values_of(d.params()));
  EXPECT_EQ(tr.discriminator().params().buffers(), d.params().buffers());
  EXPECT_TRUE(tr.discriminator().has_reference());
  EXPECT_EQ(values_of(tr.asr().params()), values_of(m.params()));
  EXPECT_EQ(tr.asr_optimizer().steps(), 1);
  EXPECT_EQ(tr.asr_optimizer().state(), opt.state());
  EXPECT_EQ(fe2.stats.mean, fe.stats.mean);
  EXPECT_EQ(fe2.stats.var, fe.stats.var);
  EXPECT_EQ(fe2.fingerprint(), fe.fingerprint());
}

TEST(PipelineCheckpointTest, RoundTripIsByteIdenticalAndFingerprintChecked) {
  const auto samples = tiny_samples();
  const auto fe = tiny_frontend(samples);
  JointTrainer<double> tr(tiny_segan(), tiny_asr(), fe, quiet_config(6.0, 3.0));
  tr.step({samples[0]});
  const std::string bytes =
      data::serialize_checkpoint(pipeline_checkpoint(tr.generator(), tr.discriminator(), tr.asr(), fe, tr.steps()));

  segan::Generator<double> g(tiny_segan(), 1);
  segan::Discriminator<double> d(tiny_segan(), 2);
  asr::AsrModel<double> m(tiny_asr(), 3);
  const auto [fe2, step] = restore_pipeline(data::parse_checkpoint(bytes), g, d, m);
  EXPECT_EQ(step, 1);
  EXPECT_EQ(data::serialize_checkpoint(pipeline_checkpoint(g, d, m, fe2, step)), bytes);

  auto other = tiny_asr();
  other.d_model = 16;
  asr::AsrModel<double> wrong(other, 3);
  try {
    restore_pipeline(data::parse_checkpoint(bytes), g, d, wrong);
    ADD_FAILURE() << "mismatched architecture accepted";
  } catch (const data::CheckpointError& e) {
    EXPECT_EQ(e.kind(), data::CheckpointError::Kind::kArchitecture);
  }
  segan::Generator<double> wrong_g(segan::SeganConfig::toy(), 1);
  EXPECT_THROW(restore_segan(data::parse_checkpoint(bytes), wrong_g), data::CheckpointError);
}

}  // namespace
}  // namespace advjoint::joint
