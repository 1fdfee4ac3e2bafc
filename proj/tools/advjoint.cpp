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

// advjoint: experiment runner.
//
// Exit status: 0 ok, 1 other failure, 2 bad configuration or usage,
// 3 missing input, 4 non-finite training abort, 5 incompatible artifact.

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "advjoint/cli/config.hpp"
#include "advjoint/cli/stages.hpp"

extern char** environ;

namespace {

namespace ac = advjoint::cli;

struct Options {
  std::string config_file;
  std::string preset, model;
  std::string seed;
  std::string out = "runs";
  std::vector<std::string> sets;
  bool quiet = false;
};

std::vector<ac::Assignment> collect(const Options& o) {
  std::vector<ac::Assignment> a;
  if (!o.config_file.empty()) a = ac::read_config_file(o.config_file);
  for (auto& kv : ac::env_assignments(environ)) a.push_back(kv);
  if (!o.preset.empty()) a.emplace_back("run.preset", o.preset);
  if (!o.model.empty()) a.emplace_back("run.model", o.model);
  if (!o.seed.empty()) a.emplace_back("run.seed", o.seed);
  for (const auto& s : o.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw advjoint::diff::ConfigurationError("--set expects key=value, got '" + s + "'");
    a.emplace_back(s.substr(0, eq), s.substr(eq + 1));
  }
  return a;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"advjoint: adversarial joint training of speech enhancement and recognition"};
  app.require_subcommand(1);
  app.fallthrough();
  app.footer(
      "Configuration: defaults of --preset, then --config FILE (key = value lines), then ADVJOINT_<KEY>\n"
      "environment variables (segan.lambda_l1 -> ADVJOINT_SEGAN_LAMBDA_L1), then flags and --set.\n"
      "Exit status: 0 ok, 1 failure, 2 bad configuration, 3 missing input, 4 non-finite abort,\n"
      "5 incompatible checkpoint or CSV schema.");

  Options o;
  app.add_option("--config", o.config_file, "flat key = value configuration file");
  app.add_option("--preset", o.preset, "toy or paper");
  app.add_option("--model", o.model, "transformer or conformer");
  app.add_option("--seed", o.seed, "master seed");
  app.add_option("--out", o.out, "root directory for run directories")->capture_default_str();
  app.add_option("--set", o.sets, "override one key, e.g. --set joint.gamma=0");
  app.add_flag("-q,--quiet", o.quiet, "log to the run directory only");

  auto* synth = app.add_subcommand("synth-data", "synthesize the toy train/test corpora");
  auto* segan = app.add_subcommand("train-segan", "pretrain the enhancement GAN on the multi-condition set");
  std::string trainings = "clean,mct";
  auto* asr = app.add_subcommand("train-asr", "train ASR models on clean and/or multi-condition data");
  asr->add_option("--training", trainings, "comma list of clean, mct")->capture_default_str();
  std::string arms = "joint,joint+gan";
  auto* jt = app.add_subcommand("joint-train", "fine-tune enhancement and ASR jointly");
  jt->add_option("--arm", arms, "comma list of joint, joint+gan")->capture_default_str();
  std::string from = "segan", enhance_out;
  std::vector<std::string> inputs;
  auto* enh = app.add_subcommand("enhance", "enhance WAV files or the noisy test sets");
  enh->add_option("--from", from, "segan, joint or joint+gan")->capture_default_str();
  enh->add_option("--output", enhance_out, "output directory (default <run>/enhanced/<from>)");
  enh->add_option("inputs", inputs, "WAV files");
  auto* eval = app.add_subcommand("evaluate", "decode the test sets for every trained arm, write cer.csv");
  std::vector<std::string> runs;
  std::string report_out = "report";
  auto* rep = app.add_subcommand("report", "merge run directories into tables and plot data");
  rep->add_option("runs", runs, "run directories")->required();
  rep->add_option("--output", report_out, "output directory")->capture_default_str();
  auto* show = app.add_subcommand("show-config", "print the resolved configuration and run directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? ac::kExitOk : ac::kExitConfig;
  }

  try {
    if (rep->parsed()) {
      std::vector<std::filesystem::path> dirs(runs.begin(), runs.end());
      const auto rows = ac::report(dirs, report_out);
      std::cout << "report: " << rows.size() << " rows from " << dirs.size() << " runs -> " << report_out << "\n";
      return ac::kExitOk;
    }
    const auto cfg = ac::resolve_config(collect(o));
    if (show->parsed()) {
      std::cout << ac::serialize_config(cfg) << "# run directory: "
                << (std::filesystem::path(o.out) / ac::config_hash(cfg)).string() << "\n";
      return ac::kExitOk;
    }
    const ac::Run run = ac::open_run(o.out, cfg, o.quiet ? nullptr : &std::cout);
    run.log("run directory " + run.dir.string());
    if (synth->parsed()) ac::synth_data(run);
    if (segan->parsed()) ac::train_segan(run);
    if (asr->parsed()) ac::train_asr(run, split_list(trainings));
    if (jt->parsed()) ac::joint_train(run, split_list(arms));
    if (enh->parsed()) {
      ac::enhance(run, from, std::vector<std::filesystem::path>(inputs.begin(), inputs.end()), enhance_out);
    }
    if (eval->parsed()) {
      ac::evaluate(run);
      std::cout << std::ifstream(run.dir / "cer.csv").rdbuf();
    }
  } catch (...) {
    const int rc = ac::exit_code_for(std::current_exception());
    try {
      throw;
    } catch (const std::exception& e) {
      std::cerr << "advjoint: error: " << e.what() << "\n";
    }
    return rc;
  }
  return ac::kExitOk;
}
