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

// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "advjoint/asr/ctc.hpp"
#include "advjoint/asr/decode.hpp"
#include "advjoint/cli/config.hpp"
#include "advjoint/cli/stages.hpp"
#include "advjoint/joint/experiment.hpp"
#include "gradient_suite.hpp"
#include "joint_fixtures.hpp"

namespace {

using namespace advjoint;            // NOLINT
using namespace advjoint::testing;   // NOLINT
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

// ---- tolerances ------------------------------------------------------------------

constexpr double kFdRelTol = 1e-4;
constexpr double kFdSeconds = 120.0;
constexpr double kOracleTol = 1e-9;
constexpr double kLossTol = 1e-12;
constexpr double kGradTol = 1e-9;
constexpr double kMemorizeCer = 0.02;
constexpr std::size_t kMemorizeUtts = 32;
constexpr double kSsnrGainDb = 3.0;
constexpr double kRunSeconds = 15 * 60.0;
constexpr double kNoiseRatio = 2.0;
constexpr std::uint64_t kSeeds[] = {1, 2, 3};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

/// Collects the outcome of one criterion; `check` records the first failure.
struct Verdict {
  bool pass = true;
  std::vector<std::string> notes;
  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      notes.push_back("FAILED " + what);
    }
  }
  void note(const std::string& s) { notes.push_back(s); }
};

// ---- 1: gradient suite -----------------------------------------------------------

Verdict gradient_suite() {
  Verdict v;
  const auto t0 = Clock::now();
  std::size_t n = 0;
  double worst = 0.0;
  std::string worst_name;
  auto cases = primitive_cases();
  for (auto& c : composite_cases()) cases.push_back(std::move(c));
  for (const auto& c : cases) {
    std::mt19937_64 rng(1234);
    const auto r = gradcheck(c.f, c.make(rng), 1e-5, 1e-4, c.max_per_input);
    v.check(r.checked > 0, c.name + ": nothing checked");
    v.check(r.max_rel_error < kFdRelTol, c.name + " rel err " + fmt("%.3g", r.max_rel_error));
    if (r.max_rel_error >= worst) {
      worst = r.max_rel_error;
      worst_name = c.name;
    }
    ++n;
  }
  const double secs = seconds_since(t0);
  v.check(secs < kFdSeconds, "runtime " + fmt("%.1f s", secs));
  v.note(std::to_string(n) + " cases, worst " + worst_name + " " + fmt("%.2e", worst) + ", " + fmt("%.1f s", secs));
  return v;
}

// ---- 2: shapes -------------------------------------------------------------------

Verdict shapes() {
  Verdict v;
  {
    const auto cfg = segan::SeganConfig::paper();
    segan::Generator<float> g(cfg, 1);
    diff::NoGradGuard ng;
    std::mt19937_64 rng(2);
    std::vector<diff::Shape> ladder;
    const auto out = g.forward(diff::Tensor<float>::zeros({cfg.chunk}), g.sample_z(1, rng), &ladder);
    const std::vector<diff::Shape> expect = {{8192, 16}, {4096, 32}, {2048, 32}, {1024, 64}, {512, 64}, {256, 128},
                                             {128, 128}, {64, 256},  {32, 256},  {16, 512},  {8, 1024}};
    v.check(cfg.chunk == 16384, "paper chunk " + std::to_string(cfg.chunk));
    v.check(ladder == expect, "generator ladder");
    v.check(out.shape() == diff::Shape{1, 16384, 1}, "generator output shape");
    v.note("ladder of " + std::to_string(ladder.size()) + " encoder outputs");
  }
  {
    diff::ParameterSet<double> ps;
    diff::Rng rng(3);
    segan::SelfAttention<double> sa(ps, "sa", 6, 2, 3, rng);
    std::mt19937_64 g(4);
    TensorD a;
    const auto out = sa.forward(random_tensor({1, 9, 6}, g), &a);
    v.check(a.shape() == diff::Shape{1, 9, 3}, "attention map shape");
    v.check(out.shape() == diff::Shape{1, 9, 6}, "attention output shape");
    v.note("attention map " + std::to_string(a.dim(1)) + "x" + std::to_string(a.dim(2)));
  }
  return v;
}

// ---- 3: oracles ------------------------------------------------------------------

double enumerated_ctc(const TensorD& lp, const std::vector<int>& ref) {
  const std::size_t T = lp.dim(0), V = lp.dim(1);
  std::vector<int> path(T, 0);
  double total = 0.0;
  std::function<void(std::size_t, double)> rec = [&](std::size_t t, double p) {
    if (t == T) {
      std::vector<int> out;
      int prev = -1;
      for (int s : path) {
        if (s != prev && s != 0) out.push_back(s);
        prev = s;
      }
      if (out == ref) total += p;
      return;
    }
    for (std::size_t k = 0; k < V; ++k) {
      path[t] = static_cast<int>(k);
      rec(t + 1, p * std::exp(lp.values()[t * V + k]));
    }
  };
  rec(0, 1.0);
  return -std::log(total);
}

// All label strings over {1, 2} of length <= 3.
std::vector<std::vector<int>> small_refs() {
  std::vector<std::vector<int>> out{{}};
  for (std::size_t len = 1; len <= 3; ++len)
    for (int code = 0; code < (1 << len); ++code) {
      std::vector<int> r;
      for (std::size_t i = 0; i < len; ++i) r.push_back(1 + ((code >> i) & 1));
      out.push_back(r);
    }
  return out;
}

// Q from the frames, K and V from max-pooled frames, softmax(Q K^T) V, output projection.
std::pair<std::vector<double>, std::vector<double>> dense_attention(const std::vector<double>& f, std::size_t len,
                                                                    std::size_t c, std::size_t p,
                                                                    const diff::ParameterSet<double>& ps) {
  auto mat = [&](const char* name) {
    const auto t = ps.get(name);
    return std::vector<double>(t.values().begin(), t.values().end());
  };
  const std::size_t r = ps.get("sa.wq").shape()[1];
  const auto wq = mat("sa.wq"), wk = mat("sa.wk"), wv = mat("sa.wv"), wo = mat("sa.wo");
  const double beta = ps.get("sa.beta").values()[0];
  const std::size_t keys = (len + p - 1) / p;
  std::vector<double> pooled(keys * c, -std::numeric_limits<double>::infinity());
  for (std::size_t t = 0; t < len; ++t)
    for (std::size_t j = 0; j < c; ++j) pooled[(t / p) * c + j] = std::max(pooled[(t / p) * c + j], f[t * c + j]);
  auto matmul = [](const std::vector<double>& a, const std::vector<double>& b, std::size_t n, std::size_t k,
                   std::size_t m) {
    std::vector<double> y(n * m, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t l = 0; l < k; ++l)
        for (std::size_t j = 0; j < m; ++j) y[i * m + j] += a[i * k + l] * b[l * m + j];
    return y;
  };
  const auto q = matmul(f, wq, len, c, r), kk = matmul(pooled, wk, keys, c, r), vv = matmul(pooled, wv, keys, c, r);
  std::vector<double> kt(r * keys);
  for (std::size_t i = 0; i < keys; ++i)
    for (std::size_t j = 0; j < r; ++j) kt[j * keys + i] = kk[i * r + j];
  auto s = matmul(q, kt, len, r, keys);
  for (std::size_t t = 0; t < len; ++t) {
    double mx = -std::numeric_limits<double>::infinity(), z = 0.0;
    for (std::size_t m = 0; m < keys; ++m) mx = std::max(mx, s[t * keys + m]);
    for (std::size_t m = 0; m < keys; ++m) z += (s[t * keys + m] = std::exp(s[t * keys + m] - mx));
    for (std::size_t m = 0; m < keys; ++m) s[t * keys + m] /= z;
  }
  const auto o = matmul(matmul(s, vv, len, keys, r), wo, len, r, c);
  std::vector<double> out(f);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += beta * o[i];
  return {out, s};
}

std::vector<std::string> code_points(const std::string& s) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < s.size();) {
    const auto b = static_cast<unsigned char>(s[i]);
    const std::size_t n = b < 0x80 ? 1 : b < 0xE0 ? 2 : b < 0xF0 ? 3 : 4;
    out.push_back(s.substr(i, n));
    i += n;
  }
  return out;
}

std::size_t levenshtein(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::vector<std::size_t>> d(a.size() + 1, std::vector<std::size_t>(b.size() + 1, 0));
  for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i)
    for (std::size_t j = 1; j <= b.size(); ++j)
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
  return d[a.size()][b.size()];
}

TensorD swap_channels(const TensorD& w) {
  const std::size_t k = w.dim(0), a = w.dim(1), b = w.dim(2);
  std::vector<double> out(w.numel());
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t p = 0; p < a; ++p)
      for (std::size_t q = 0; q < b; ++q) out[(i * b + q) * a + p] = w.values()[(i * a + p) * b + q];
  return TensorD::from({k, b, a}, out);
}

double dot(const TensorD& a, const TensorD& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) s += a.values()[i] * b.values()[i];
  return s;
}

Verdict oracles() {
  Verdict v;
  diff::NoGradGuard ng;
  {
    std::mt19937_64 rng(31);
    std::size_t cases = 0;
    double worst = 0.0;
    for (std::size_t T = 1; T <= 6; ++T)
      for (std::size_t V = 2; V <= 3; ++V)
        for (const auto& ref : small_refs()) {
          if (std::any_of(ref.begin(), ref.end(), [&](int s) { return s >= static_cast<int>(V); })) continue;
          if (asr::ctc_min_frames(ref) > T) continue;
          const auto lp = diff::log_softmax_lastdim(random_tensor({T, V}, rng, -2.0, 2.0, false));
          const double err = std::abs(asr::ctc_loss(lp, ref).item() - enumerated_ctc(lp, ref));
          worst = std::max(worst, err);
          ++cases;
        }
    v.check(worst < kOracleTol, "ctc vs enumeration " + fmt("%.3g", worst));
    v.note("ctc " + std::to_string(cases) + " cases, max err " + fmt("%.2e", worst));
  }
  {
    std::mt19937_64 g(32);
    double worst = 0.0;
    for (std::size_t len : {9u, 10u, 16u}) {
      diff::ParameterSet<double> ps;
      diff::Rng rng(33 + len);
      segan::SelfAttention<double> sa(ps, "sa", 6, 2, 3, rng);
      sa.beta().mutable_values()[0] = 0.7;
      const auto f = random_tensor({1, len, 6}, g, -1.0, 1.0, false);
      TensorD a;
      const auto out = sa.forward(f, &a);
      const auto [want, want_a] = dense_attention(std::vector<double>(f.values().begin(), f.values().end()), len, 6,
                                                  3, ps);
      for (std::size_t i = 0; i < want.size(); ++i) worst = std::max(worst, std::abs(out.values()[i] - want[i]));
      v.check(a.numel() == want_a.size(), "attention map size at L=" + std::to_string(len));
      for (std::size_t i = 0; i < std::min(a.numel(), want_a.size()); ++i)
        worst = std::max(worst, std::abs(a.values()[i] - want_a[i]));
    }
    v.check(worst < kOracleTol, "attention vs dense " + fmt("%.3g", worst));
    v.note("attention max err " + fmt("%.2e", worst));
  }
  {
    std::mt19937_64 rng(34);
    const std::vector<std::string> alphabet = {"a", "b", "c", "\xe4\xbd\xa0", "\xe5\xa5\xbd", " "};
    std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1), len(0, 9);
    std::size_t mismatches = 0;
    for (int trial = 0; trial < 500; ++trial) {
      std::string hyp, ref;
      for (std::size_t i = 0, n = len(rng); i < n; ++i) hyp += alphabet[pick(rng)];
      for (std::size_t i = 0, n = len(rng) + 1; i < n; ++i) ref += alphabet[pick(rng)];
      const auto h = code_points(hyp), r = code_points(ref);
      const double want = static_cast<double>(levenshtein(h, r)) / static_cast<double>(r.size());
      if (asr::cer(hyp, ref) != want) ++mismatches;
    }
    v.check(mismatches == 0, "cer mismatches " + std::to_string(mismatches));
    v.note("cer 500 pairs, " + std::to_string(mismatches) + " mismatches");
  }
  {
    std::mt19937_64 rng(35);
    double worst = 0.0;
    struct Geometry {
      std::size_t len, kernel, stride, pad, cin, cout;
    };
    for (const auto& geo : {Geometry{10, 5, 2, 2, 2, 3}, Geometry{32, 31, 2, 15, 3, 4}, Geometry{64, 31, 2, 15, 1, 2}}) {
      const auto w = random_tensor({geo.kernel, geo.cin, geo.cout}, rng, -1.0, 1.0, false);
      const auto x = random_tensor({2, geo.len, geo.cin}, rng, -1.0, 1.0, false);
      const auto ax = diff::conv1d(x, w, TensorD(), geo.stride, geo.pad);
      const auto y = random_tensor(ax.shape(), rng, -1.0, 1.0, false);
      const auto aty = diff::conv1d_transposed(y, swap_channels(w), TensorD(), geo.stride, geo.pad, 1);
      v.check(aty.shape() == x.shape(), "adjoint shape at len " + std::to_string(geo.len));
      if (aty.shape() != x.shape()) continue;
      const double lhs = dot(ax, y), rhs = dot(x, aty);
      worst = std::max(worst, std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs)));
    }
    v.check(worst < kOracleTol, "conv adjoint " + fmt("%.3g", worst));
    v.note("conv adjoint max err " + fmt("%.2e", worst));
  }
  return v;
}

// ---- 4: loss algebra -------------------------------------------------------------

// Runs one trainer step and the test-side reference on the same weights and
// latents; returns the worst relative gradient difference.
double degeneration_gap(double kappa, Verdict& v) {
  const auto samples = tiny_samples();
  const auto fe = tiny_frontend(samples);
  const joint::JointConfig cfg = quiet_config(kappa, 0.0);
  joint::JointTrainer<double> tr(tiny_segan(), tiny_asr(), fe, cfg);
  const std::vector<joint::JointSample> batch{samples[0], samples[2]};
  segan::Generator<double> g(tiny_segan(), cfg.seed);
  asr::AsrModel<double> m(tiny_asr(), cfg.seed + 2);
  diff::Rng z_rng = tr.rng();
  std::vector<TensorD> zs;
  for (const auto& s : batch) zs.push_back(g.sample_z((s.noisy.size() + 255) / 256, z_rng));

  const auto d_before = values_of(tr.discriminator().params());
  const auto l = tr.step(batch);
  double ref = 0.0;
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i)
    ref += reference_joint_loss(g, m, fe, batch[i], zs[i], kappa, cfg.lambda_l1, inv) * inv;
  const std::string tag = "kappa=" + fmt("%g", kappa) + " gamma=0";
  v.check(std::abs(l.total - ref) <= kGradTol * std::max(1.0, std::abs(ref)), tag + " loss");
  v.check(l.gan == 0.0 && l.d == 0.0, tag + " adversarial terms");
  v.check(values_of(tr.discriminator().params()) == d_before, tag + " discriminator untouched");
  if (kappa == 0.0) v.check(l.total == l.asr, tag + " total equals l_asr");

  double worst = 0.0;
  for (const auto& [want, got] : {std::pair{grads_of(g.params()), grads_of(tr.generator().params())},
                                  std::pair{grads_of(m.params()), grads_of(tr.asr().params())}}) {
    v.check(want.size() == got.size(), tag + " gradient count");
    double norm = 0.0;
    for (double w : want) norm += w * w;
    v.check(norm > 0.0, tag + " reference gradient is zero");
    for (std::size_t i = 0; i < std::min(want.size(), got.size()); ++i)
      worst = std::max(worst, std::abs(got[i] - want[i]) / std::max(1.0, std::abs(want[i])));
  }
  v.check(worst <= kGradTol, tag + " gradient gap " + fmt("%.3g", worst));
  return worst;
}

Verdict loss_algebra() {
  Verdict v;
  {
    diff::NoGradGuard ng;
    const auto ones = TensorD::from({4, 1}, std::vector<double>(4, 1.0));
    const auto zeros = TensorD::zeros({4, 1});
    std::mt19937_64 rng(41);
    const auto clean = random_tensor({2, 64, 1}, rng, -1.0, 1.0, false);
    const double d = segan::d_loss(ones, zeros).item();
    const double gl = segan::g_loss(ones, clean, clean, 100.0).item();
    v.check(d == 0.0, "d_loss(1, 0) = " + fmt("%.3g", d));
    v.check(gl == 0.0, "g_loss(1, clean, clean) = " + fmt("%.3g", gl));
  }
  joint::JointConfig cfg;
  v.check(cfg.kappa == 6.0 && cfg.gamma == 3.0, "default weights");
  const double total = joint::joint_loss(1.0, 0.5, 0.2, cfg);
  v.check(std::abs(total - 4.6) < kLossTol, "joint loss " + fmt("%.17g", total));
  v.note("joint loss (1, 0.5, 0.2) = " + fmt("%.12g", total));
  const double g0 = degeneration_gap(0.0, v);
  const double g6 = degeneration_gap(6.0, v);
  v.note("gradient gap kappa=gamma=0 " + fmt("%.2e", g0) + ", gamma=0 " + fmt("%.2e", g6));
  return v;
}

// ---- 5 and 6: trainability and trends -------------------------------------------

struct Memorized {
  double cer = 1.0, seconds = 0.0;
  int epochs = 0;
};

Memorized memorize(std::uint64_t seed, const joint::ExperimentConfig& base) {
  const auto t0 = Clock::now();
  const auto corpus = data::synth_toy_corpus(kMemorizeUtts, data::derive_seed(seed, "memorize"));
  const auto fe = joint::FeatureFrontEnd::fit(joint::waveforms(corpus), base.fbank);
  const asr::TokenVocab vocab(corpus.manifest.vocab);
  const auto feats = joint::make_feature_set(corpus, fe, vocab);
  auto tc = base.asr_train;
  tc.seed = data::derive_seed(seed, "asr");
  asr::AsrTrainer<float> tr(base.asr, tc, tc.seed);
  Memorized m;
  while (seconds_since(t0) < kRunSeconds) {
    tr.train_epoch(feats);
    ++m.epochs;
    if (m.epochs % 5 == 0) {
      m.cer = tr.corpus_cer(feats, vocab);
      if (m.cer <= kMemorizeCer) break;
    }
  }
  m.seconds = seconds_since(t0);
  return m;
}

struct Trends {
  std::vector<joint::ExperimentResult> runs;
  std::vector<double> run_seconds;
  std::vector<Memorized> memorized;
};

Verdict trainability(const Trends& t) {
  Verdict v;
  for (std::size_t i = 0; i < t.memorized.size(); ++i) {
    const auto& m = t.memorized[i];
    const std::string s = "seed " + std::to_string(kSeeds[i]);
    v.check(m.cer <= kMemorizeCer, s + " memorization cer " + fmt("%.4f", m.cer));
    v.check(m.seconds <= kRunSeconds, s + " memorization time " + fmt("%.0f s", m.seconds));
    v.note(s + ": memorized cer " + fmt("%.4f", m.cer) + " after " + std::to_string(m.epochs) + " epochs in " +
           fmt("%.0f s", m.seconds));
  }
  for (std::size_t i = 0; i < t.runs.size(); ++i) {
    const auto& r = t.runs[i];
    const std::string s = "seed " + std::to_string(kSeeds[i]);
    const double gain = r.probe_ssnr_enhanced - r.probe_ssnr_noisy;
    v.check(gain >= kSsnrGainDb, s + " ssnr gain " + fmt("%.2f dB", gain));
    v.check(r.segan_seconds <= kRunSeconds, s + " segan time " + fmt("%.0f s", r.segan_seconds));
    v.note(s + ": ssnr at 5 dB " + fmt("%.2f", r.probe_ssnr_noisy) + " -> " + fmt("%.2f dB", r.probe_ssnr_enhanced) +
           " (gain " + fmt("%.2f", gain) + "), segan " + fmt("%.0f s", r.segan_seconds));
  }
  return v;
}

double seed_mean(const Trends& t, const std::string& arm, const std::string& training, const std::string& cond) {
  double s = 0.0;
  for (const auto& r : t.runs) s += r.arm(arm, training).table.at(cond);
  return s / static_cast<double>(t.runs.size());
}

Verdict trends(const Trends& t) {
  Verdict v;
  const double clean = seed_mean(t, "clean", "clean", "clean");
  const double match = seed_mean(t, "clean", "clean", "match");
  const double ratio = match / std::max(clean, 1e-12);
  v.check(ratio >= kNoiseRatio, "(a) match/clean ratio " + fmt("%.2f", ratio));
  v.note("(a) clean-trained cer clean " + fmt("%.4f", clean) + " match " + fmt("%.4f", match) + " ratio " +
         fmt("%.2f", ratio));

  const double enh_match = seed_mean(t, "enhanced", "clean", "match");
  v.check(enh_match < match, "(b) enhanced front-end " + fmt("%.4f", enh_match) + " vs " + fmt("%.4f", match));
  v.note("(b) matched cer with enhancement " + fmt("%.4f", enh_match) + " vs without " + fmt("%.4f", match));

  auto pooled = [&](const std::string& arm, const std::string& training) {
    return 0.5 * (seed_mean(t, arm, training, "match") + seed_mean(t, arm, training, "unmatch"));
  };
  const double gan = pooled("joint+gan", "mct"), sep = pooled("enhanced", "mct");
  v.check(gan <= sep, "(c) joint+gan " + fmt("%.4f", gan) + " vs separate " + fmt("%.4f", sep));
  v.note("(c) mean(match, unmatch) joint+gan " + fmt("%.4f", gan) + " vs separately trained " + fmt("%.4f", sep) +
         " (difference " + fmt("%+.4f", gan - sep) + ")");
  return v;
}

// ---- 7: determinism and persistence ---------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<cli::Assignment> tiny_run() {
  return {{"data.n_train", "4"},       {"data.n_test", "2"},          {"segan.chunk", "256"},
          {"segan.filters", "4,8"},    {"segan.kernel", "5"},         {"segan.attention", "1"},
          {"segan.b", "2"},            {"segan.epochs", "1"},         {"segan.batch", "8"},
          {"fbank.n_mels", "8"},       {"asr.d_model", "8"},          {"asr.heads", "2"},
          {"asr.d_ff", "16"},          {"asr.enc_layers", "1"},       {"asr.dec_layers", "1"},
          {"asr.conv_kernel", "3"},    {"asr.subsample_channels", "4"}, {"asr.epochs", "2"},
          {"joint.epochs", "1"},       {"decode.beam", "2"},          {"decode.max_len", "4"}};
}

cli::Run full_run(const fs::path& root, const joint::ExperimentConfig& cfg) {
  const cli::Run run = cli::open_run(root, cfg);
  cli::synth_data(run);
  cli::train_segan(run);
  cli::train_asr(run, {"clean", "mct"});
  cli::joint_train(run, {"joint", "joint+gan"});
  cli::evaluate(run);
  return run;
}

Verdict determinism(const fs::path& scratch) {
  Verdict v;
  const auto cfg = cli::resolve_config(tiny_run());
  fs::remove_all(scratch);
  const cli::Run a = full_run(scratch / "a", cfg);
  const cli::Run b = full_run(scratch / "b", cli::resolve_config(cli::read_config_file(a.dir / "config.txt")));
  for (const char* f : {"cer.csv", "decodes.csv", "ssnr.csv", "segan.ckpt", "asr_mct.ckpt", "joint_gan.ckpt"}) {
    const std::string x = slurp(a.dir / f);
    v.check(!x.empty() && x == slurp(b.dir / f), std::string("rerun differs in ") + f);
  }
  v.note("two runs identical in cer.csv, decodes.csv, ssnr.csv and checkpoints");

  for (const char* f : {"segan.ckpt", "asr_mct.ckpt", "joint.ckpt", "joint_gan.ckpt"}) {
    const std::string bytes = slurp(a.dir / f);
    v.check(data::serialize_checkpoint(data::parse_checkpoint(bytes)) == bytes, std::string("round trip of ") + f);
  }
  {
    auto jc = a.cfg;
    segan::Generator<float> g(jc.segan, 1);
    segan::Discriminator<float> d(jc.segan, 2);
    asr::AsrModel<float> m(jc.asr, 3);
    const auto [fe, step] = joint::restore_pipeline(data::parse_checkpoint(slurp(a.dir / "joint_gan.ckpt")), g, d, m);
    const std::string again = data::serialize_checkpoint(joint::pipeline_checkpoint(g, d, m, fe, step));
    v.check(again == slurp(a.dir / "joint_gan.ckpt"), "restore then save of joint_gan.ckpt");
  }
  v.note("checkpoint parse/serialize and restore/save are byte-identical");

  auto other = tiny_run();
  other.emplace_back("asr.d_ff", "32");
  cli::Run mismatched = b;
  mismatched.cfg = cli::resolve_config(other);
  int rc = cli::kExitOk;
  try {
    cli::evaluate(mismatched);
  } catch (...) {
    rc = cli::exit_code_for(std::current_exception());
  }
  v.check(rc == cli::kExitIncompatible, "mismatched architecture exit " + std::to_string(rc));
  v.note("mismatched architecture refused with exit " + std::to_string(rc));
  fs::remove_all(scratch);
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"advjoint acceptance run"};
  std::string report_path = "acceptance_report.txt";
  std::vector<int> only;
  bool verbose = false;
  app.add_option("--report", report_path, "detailed report file")->capture_default_str();
  app.add_option("--only", only, "run only these criteria")->delimiter(',');
  app.add_flag("-v,--verbose", verbose, "echo training progress");
  CLI11_PARSE(app, argc, argv);
  const std::set<int> wanted(only.begin(), only.end());
  auto enabled = [&](int c) { return wanted.empty() || wanted.count(c) > 0; };

  std::ofstream report(report_path);
  auto detail = [&](const std::string& s) {
    report << s << "\n";
    report.flush();
    if (verbose) std::cerr << s << "\n";
  };
  bool all = true;
  auto emit = [&](int id, const std::string& name, const Verdict& v) {
    const std::string line = "criterion " + std::to_string(id) + " (" + name + "): " + (v.pass ? "PASS" : "FAIL");
    std::cout << line << std::endl;
    detail(line);
    for (const auto& n : v.notes) detail("  " + n);
    all = all && v.pass;
  };
  auto guarded = [&](int id, const std::string& name, const std::function<Verdict()>& f) {
    if (!enabled(id)) return;
    Verdict v;
    try {
      v = f();
    } catch (const std::exception& e) {
      v.check(false, std::string("exception: ") + e.what());
    }
    emit(id, name, v);
  };

  guarded(1, "gradient suite", gradient_suite);
  guarded(2, "shape ladder", shapes);
  guarded(3, "oracle equivalences", oracles);
  guarded(4, "loss algebra", loss_algebra);

  if (enabled(5) || enabled(6)) {
    Trends t;
    std::string failure;
    try {
      const auto base = joint::ExperimentConfig::make("toy");
      for (std::uint64_t seed : kSeeds) {
        auto cfg = base;
        cfg.seed = seed;
        const auto t0 = Clock::now();
        t.runs.push_back(joint::run_experiment<float>(cfg, [&](const std::string& s) {
          detail("[seed " + std::to_string(seed) + " " + fmt("%.0fs", seconds_since(t0)) + "] " + s);
        }));
        t.run_seconds.push_back(seconds_since(t0));
        detail("seed " + std::to_string(seed) + " cer table:\n" + joint::cer_csv(t.runs.back().arms));
        if (enabled(5)) {
          t.memorized.push_back(memorize(seed, cfg));
          detail("seed " + std::to_string(seed) + " memorization " + fmt("%.4f", t.memorized.back().cer));
        }
      }
    } catch (const std::exception& e) {
      failure = e.what();
    }
    auto finish = [&](int id, const std::string& name, const std::function<Verdict(const Trends&)>& f) {
      if (!enabled(id)) return;
      Verdict v;
      if (failure.empty()) {
        v = f(t);
      } else {
        v.check(false, "exception: " + failure);
      }
      emit(id, name, v);
    };
    finish(5, "toy trainability", trainability);
    finish(6, "directional trends", trends);
  }

  guarded(7, "determinism and persistence",
          [] { return determinism(fs::temp_directory_path() / "advjoint_acceptance_runs"); });

  std::cout << (all ? "acceptance: all selected criteria passed" : "acceptance: FAILURES") << std::endl;
  return all ? 0 : 1;
}
