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

#include "advjoint/cli/stages.hpp"

#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include "advjoint/cli/config.hpp"

namespace advjoint::cli {

using joint::ExperimentConfig;

int exit_code_for(const std::exception_ptr& e) {
  try {
    std::rethrow_exception(e);
  } catch (const diff::ConfigurationError&) {
    return kExitConfig;
  } catch (const MissingInputError&) {
    return kExitMissingInput;
  } catch (const diff::NonFiniteError&) {
    return kExitNonFinite;
  } catch (const SchemaError&) {
    return kExitIncompatible;
  } catch (const data::CheckpointError& c) {
    return c.kind() == data::CheckpointError::Kind::kIo ? kExitMissingInput : kExitIncompatible;
  } catch (...) {
    return kExitFailure;
  }
}

namespace {

const std::vector<std::string>& split_names() {
  static const std::vector<std::string> names{"train_clean", "train_mct", "test_clean", "test_match", "test_unmatch",
                                              "test_probe"};
  return names;
}

fs::path manifest_path(const Run& run, const std::string& split) { return run.dir / "data" / split / "manifest.jsonl"; }

data::Corpus load_split(const Run& run, const std::string& split) {
  const fs::path p = manifest_path(run, split);
  require_inputs({p});
  return data::load_corpus(p);
}

std::string asr_ckpt_name(const std::string& training) { return "asr_" + training + ".ckpt"; }
std::string joint_ckpt_name(const std::string& arm) { return arm == "joint" ? "joint.ckpt" : "joint_gan.ckpt"; }

void check_choice(const std::string& what, const std::string& v, const std::vector<std::string>& allowed) {
  for (const auto& a : allowed)
    if (a == v) return;
  std::string msg = what + " '" + v + "' is not one of:";
  for (const auto& a : allowed) msg += " " + a;
  throw diff::ConfigurationError(msg);
}

std::string fmt6(double v) {
  std::ostringstream os;
  os.precision(6);
  os << std::fixed << v;
  return os.str();
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string f;
  while (std::getline(ss, f, ',')) out.push_back(f);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::vector<std::string> read_lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

// A generator (and optionally the ASR model) from one of the stage outputs.
struct LoadedPipeline {
  std::unique_ptr<segan::Generator<float>> g;
  std::unique_ptr<segan::Discriminator<float>> d;
  std::unique_ptr<asr::AsrModel<float>> asr;
  joint::FeatureFrontEnd frontend;
};

LoadedPipeline load_generator(const Run& run, const std::string& from) {
  LoadedPipeline p;
  p.g = std::make_unique<segan::Generator<float>>(run.cfg.segan, 0);
  p.d = std::make_unique<segan::Discriminator<float>>(run.cfg.segan, 0);
  if (from == "segan") {
    require_inputs({run.dir / "segan.ckpt"});
    joint::restore_segan(data::load_checkpoint(run.dir / "segan.ckpt"), *p.g, p.d.get());
    return p;
  }
  const fs::path path = run.dir / joint_ckpt_name(from);
  require_inputs({path});
  p.asr = std::make_unique<asr::AsrModel<float>>(run.cfg.asr, 0);
  p.frontend = joint::restore_pipeline(data::load_checkpoint(path), *p.g, *p.d, *p.asr).first;
  return p;
}

}  // namespace

void require_inputs(const std::vector<fs::path>& paths) {
  std::vector<std::string> missing;
  for (const auto& p : paths)
    if (!fs::exists(p)) missing.push_back(p.string());
  if (missing.empty()) return;
  std::string msg = "missing input" + std::string(missing.size() > 1 ? "s" : "") + ":";
  for (const auto& m : missing) msg += "\n  " + m;
  throw MissingInputError(msg);
}

Run open_run(const fs::path& out_root, const ExperimentConfig& cfg, std::ostream* echo) {
  Run run;
  run.cfg = cfg;
  run.dir = out_root / config_hash(cfg);
  fs::create_directories(run.dir);
  const std::string text = serialize_config(cfg);
  const fs::path cfg_path = run.dir / "config.txt";
  if (!fs::exists(cfg_path)) data::atomic_write(cfg_path, text);
  const fs::path log_path = run.dir / "log.txt";
  run.log = [log_path, echo](const std::string& msg) {
    std::ofstream(log_path, std::ios::app) << msg << '\n';
    if (echo) *echo << msg << std::endl;
  };
  return run;
}

void synth_data(const Run& run) {
  const joint::ToyData d = joint::make_toy_data(run.cfg.data, run.cfg.seed);
  const data::Corpus* corpora[] = {&d.train_clean, &d.train_mct, &d.test_clean, &d.test_match, &d.test_unmatch,
                                   &d.test_probe};
  for (std::size_t i = 0; i < split_names().size(); ++i) {
    const auto& c = *corpora[i];
    std::size_t clipped = 0;
    for (const auto& r : c.manifest.records) clipped += r.clipped ? 1 : 0;
    data::save_corpus(run.dir / "data" / split_names()[i], c);
    run.log("synth-data: " + split_names()[i] + " " + std::to_string(c.manifest.records.size()) + " records, " +
            std::to_string(clipped) + " clipped");
  }
}

void train_segan(const Run& run) {
  const data::Corpus train = load_split(run, "train_mct");
  auto res = joint::pretrain_segan<float>(train, run.cfg, run.log);
  std::string csv = "epoch,d_loss,g_loss_adv,g_loss_l1\n";
  for (const auto& e : res.history) {
    csv += std::to_string(e.epoch) + "," + fmt6(e.d_loss) + "," + fmt6(e.g_loss_adv) + "," + fmt6(e.g_loss_l1) + "\n";
  }
  data::atomic_write(run.dir / "segan_history.csv", csv);
  data::save_checkpoint(run.dir / "segan.ckpt",
                        joint::segan_checkpoint<float>(res.trainer->generator(), res.trainer->discriminator()));
  run.log("train-segan: wrote " + (run.dir / "segan.ckpt").string());
}

void train_asr(const Run& run, const std::vector<std::string>& trainings) {
  for (const auto& t : trainings) check_choice("training", t, {"clean", "mct"});
  for (const auto& t : trainings) {
    const data::Corpus train = load_split(run, "train_" + t);
    auto res = joint::train_asr<float>(train, run.cfg, run.log);
    std::string csv = "epoch,loss\n";
    for (std::size_t e = 0; e < res.history.size(); ++e) csv += std::to_string(e + 1) + "," + fmt6(res.history[e]) + "\n";
    data::atomic_write(run.dir / ("asr_" + t + "_history.csv"), csv);
    const fs::path out = run.dir / asr_ckpt_name(t);
    data::save_checkpoint(out, joint::asr_checkpoint<float>(res.trainer->model(), res.frontend,
                                                            &res.trainer->optimizer()));
    run.log("train-asr: wrote " + out.string());
  }
}

void joint_train(const Run& run, const std::vector<std::string>& arms) {
  for (const auto& a : arms) check_choice("arm", a, {"joint", "joint+gan"});
  require_inputs({run.dir / "segan.ckpt", run.dir / asr_ckpt_name("mct"), manifest_path(run, "train_mct")});
  const data::Checkpoint segan_ckpt = data::load_checkpoint(run.dir / "segan.ckpt");
  const data::Checkpoint asr_ckpt = data::load_checkpoint(run.dir / asr_ckpt_name("mct"));
  const data::Corpus train = load_split(run, "train_mct");
  for (const auto& a : arms) {
    joint::JointConfig jc = run.cfg.joint;
    if (a == "joint") jc.gamma = 0.0;
    auto tr = joint::train_joint<float>(segan_ckpt, asr_ckpt, train, run.cfg, jc, run.log);
    const fs::path out = run.dir / joint_ckpt_name(a);
    data::save_checkpoint(out, joint::pipeline_checkpoint<float>(tr->generator(), tr->discriminator(), tr->asr(),
                                                                 tr->frontend(), tr->steps()));
    run.log("joint-train: wrote " + out.string());
  }
}

std::vector<fs::path> enhance(const Run& run, const std::string& from, const std::vector<fs::path>& inputs,
                              const fs::path& out_dir) {
  check_choice("generator", from, {"segan", "joint", "joint+gan"});
  require_inputs(inputs);
  const LoadedPipeline p = load_generator(run, from);
  const std::uint64_t z_seed = data::derive_seed(run.cfg.seed, "eval-z");
  const fs::path dir = out_dir.empty() ? run.dir / "enhanced" / from : out_dir;
  fs::create_directories(dir);
  std::vector<fs::path> written;
  if (!inputs.empty()) {
    for (const auto& in : inputs) {
      const signal::Waveform w = signal::read_wav(in);
      const fs::path out = dir / in.filename();
      signal::write_wav(out, segan::enhance_waveform(w, *p.g, data::derive_seed(z_seed, in.filename().string())));
      written.push_back(out);
    }
  } else {
    for (const std::string split : {"test_match", "test_unmatch"}) {
      data::Corpus c = load_split(run, split);
      for (const auto& r : c.manifest.records) {
        c.audio[r.id] = segan::enhance_waveform(c.wave(r.id), *p.g, data::derive_seed(z_seed, r.id));
      }
      c.manifest.provenance["enhanced_by"] = from;
      data::save_corpus(dir / split, c);
      for (const auto& r : c.manifest.records) written.push_back(dir / split / r.audio);
    }
  }
  run.log("enhance: " + std::to_string(written.size()) + " files under " + dir.string());
  return written;
}

std::vector<joint::ArmResult> evaluate(const Run& run) {
  const data::Corpus test_clean = load_split(run, "test_clean");
  const data::Corpus test_match = load_split(run, "test_match");
  const data::Corpus test_unmatch = load_split(run, "test_unmatch");
  const std::map<std::string, const data::Corpus*> tests{
      {"clean", &test_clean}, {"match", &test_match}, {"unmatch", &test_unmatch}};
  const asr::TokenVocab vocab(test_clean.manifest.vocab);
  const std::uint64_t z_seed = data::derive_seed(run.cfg.seed, "eval-z");
  const bool have_segan = fs::exists(run.dir / "segan.ckpt");

  std::vector<joint::ArmResult> arms;
  std::string decodes = "arm,training,condition,id,ref,hyp,cer\n";
  std::string ssnr = "arm,ssnr_db\n";
  auto add = [&](const std::string& arm, const std::string& training, const segan::Generator<float>* g,
                 asr::AsrModel<float>& m, const joint::FeatureFrontEnd& fe) {
    joint::ArmResult a{arm, training, joint::evaluate_pipeline<float>(g, m, fe, vocab, tests, run.cfg.decode, z_seed)};
    for (const auto& r : a.table.rows) {
      decodes += arm + "," + training + "," + r.condition + "," + r.id + "," + r.ref + "," + r.hyp + "," + fmt6(r.cer) + "\n";
    }
    run.log("evaluate: " + arm + "/" + training + " clean " + fmt6(a.table.at("clean")) + " match " +
            fmt6(a.table.at("match")) + " unmatch " + fmt6(a.table.at("unmatch")));
    arms.push_back(std::move(a));
  };

  ssnr += "noisy," + fmt6(joint::mean_ssnr<float>(test_match, nullptr, z_seed)) + "\n";
  std::unique_ptr<LoadedPipeline> segan;
  if (have_segan) {
    segan = std::make_unique<LoadedPipeline>(load_generator(run, "segan"));
    ssnr += "segan," + fmt6(joint::mean_ssnr<float>(test_match, segan->g.get(), z_seed)) + "\n";
  }
  for (const std::string t : {"clean", "mct"}) {
    const fs::path path = run.dir / asr_ckpt_name(t);
    if (!fs::exists(path)) {
      run.log("evaluate: no " + path.filename().string() + ", skipping " + t + "-trained arms");
      continue;
    }
    asr::AsrModel<float> m(run.cfg.asr, 0);
    const joint::FeatureFrontEnd fe = joint::restore_asr(data::load_checkpoint(path), m);
    add(t, t, nullptr, m, fe);
    if (segan) add("enhanced", t, segan->g.get(), m, fe);
  }
  for (const std::string a : {"joint", "joint+gan"}) {
    if (!fs::exists(run.dir / joint_ckpt_name(a))) continue;
    LoadedPipeline p = load_generator(run, a);
    ssnr += a + "," + fmt6(joint::mean_ssnr<float>(test_match, p.g.get(), z_seed)) + "\n";
    add(a, "mct", p.g.get(), *p.asr, p.frontend);
  }
  if (arms.empty()) {
    throw MissingInputError("evaluate: no trained model in " + run.dir.string() + " (expected " + asr_ckpt_name("clean") +
                            " or " + asr_ckpt_name("mct") + ")");
  }
  data::atomic_write(run.dir / "cer.csv", joint::cer_csv(arms));
  data::atomic_write(run.dir / "decodes.csv", decodes);
  data::atomic_write(run.dir / "ssnr.csv", ssnr);
  run.log("evaluate: wrote " + (run.dir / "cer.csv").string());
  return arms;
}

std::vector<ReportRow> report(const std::vector<fs::path>& run_dirs, const fs::path& out_dir) {
  if (run_dirs.empty()) throw diff::ConfigurationError("report: no run directories given");
  std::vector<ReportRow> rows;
  std::vector<std::pair<std::string, std::pair<double, int>>> ssnr;
  auto row_for = [&](const std::string& arm, const std::string& training) -> ReportRow& {
    for (auto& r : rows)
      if (r.arm == arm && r.training == training) return r;
    rows.push_back(ReportRow{arm, training});
    return rows.back();
  };
  std::vector<std::string> missing;
  for (const auto& dir : run_dirs)
    if (!fs::exists(dir / "cer.csv")) missing.push_back(dir.string());
  if (!missing.empty()) {
    std::string msg = "report: no cer.csv in run director" + std::string(missing.size() > 1 ? "ies" : "y") + ":";
    for (const auto& m : missing) msg += "\n  " + m;
    throw MissingInputError(msg);
  }
  for (const auto& dir : run_dirs) {
    const fs::path csv = dir / "cer.csv";
    const auto lines = read_lines(csv);
    if (lines.empty() || lines.front() != kCerHeader) {
      throw SchemaError("report: " + csv.string() + " does not start with '" + kCerHeader + "'");
    }
    for (std::size_t i = 1; i < lines.size(); ++i) {
      const auto f = split_csv(lines[i]);
      if (f.size() != 5) throw SchemaError("report: " + csv.string() + ":" + std::to_string(i + 1) + ": expected 5 fields");
      ReportRow& r = row_for(f[0], f[1]);
      try {
        r.clean += std::stod(f[2]);
        r.match += std::stod(f[3]);
        r.unmatch += std::stod(f[4]);
      } catch (const std::exception&) {
        throw SchemaError("report: " + csv.string() + ":" + std::to_string(i + 1) + ": non-numeric CER");
      }
      ++r.runs;
    }
    const fs::path sp = dir / "ssnr.csv";
    if (!fs::exists(sp)) continue;
    const auto sl = read_lines(sp);
    if (sl.empty() || sl.front() != "arm,ssnr_db") throw SchemaError("report: " + sp.string() + " has an unknown header");
    for (std::size_t i = 1; i < sl.size(); ++i) {
      const auto f = split_csv(sl[i]);
      if (f.size() != 2) throw SchemaError("report: " + sp.string() + ":" + std::to_string(i + 1) + ": expected 2 fields");
      auto it = std::find_if(ssnr.begin(), ssnr.end(), [&](const auto& p) { return p.first == f[0]; });
      if (it == ssnr.end()) it = ssnr.insert(ssnr.end(), {f[0], {0.0, 0}});
      it->second.first += std::stod(f[1]);
      ++it->second.second;
    }
  }
  for (auto& r : rows) {
    r.clean /= static_cast<double>(r.runs);
    r.match /= static_cast<double>(r.runs);
    r.unmatch /= static_cast<double>(r.runs);
  }

  fs::create_directories(out_dir);
  std::string merged = "arm,training,runs,clean,match,unmatch\n";
  for (const auto& r : rows) {
    merged += r.arm + "," + r.training + "," + std::to_string(r.runs) + "," + fmt6(r.clean) + "," + fmt6(r.match) +
              "," + fmt6(r.unmatch) + "\n";
  }
  data::atomic_write(out_dir / "merged.csv", merged);

  std::string cer = "# condition";
  for (const auto& r : rows) cer += " " + r.arm + "/" + r.training;
  cer += "\n";
  for (const char* c : {"clean", "match", "unmatch"}) {
    cer += c;
    for (const auto& r : rows) cer += " " + fmt6(std::string(c) == "clean" ? r.clean : std::string(c) == "match" ? r.match : r.unmatch);
    cer += "\n";
  }
  data::atomic_write(out_dir / "cer_per_condition.dat", cer);

  std::string s = "# arm ssnr_db\n";
  for (const auto& [arm, acc] : ssnr) s += arm + " " + fmt6(acc.first / acc.second) + "\n";
  data::atomic_write(out_dir / "ssnr_per_arm.dat", s);
  return rows;
}

}  // namespace advjoint::cli
