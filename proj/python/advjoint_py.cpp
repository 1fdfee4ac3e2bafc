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

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "advjoint/asr/decode.hpp"
#include "advjoint/cli/config.hpp"
#include "advjoint/cli/stages.hpp"
#include "advjoint/signal/fbank.hpp"
#include "advjoint/signal/waveform.hpp"

namespace py = pybind11;
namespace aj = advjoint;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<double> to_vec(const Array& a) {
  if (a.ndim() != 1) throw aj::diff::DimensionError("expected a 1-D array");
  return {a.data(), a.data() + a.size()};
}

Array to_array(const std::vector<double>& v) { return Array(static_cast<py::ssize_t>(v.size()), v.data()); }

std::vector<aj::cli::Assignment> assignments(const std::map<std::string, std::string>& overrides) {
  return {overrides.begin(), overrides.end()};
}

aj::cli::Run run_for(const std::filesystem::path& out, const std::map<std::string, std::string>& overrides) {
  return aj::cli::open_run(out, aj::cli::resolve_config(assignments(overrides)));
}

// Generator restored from a stage output of a run directory.
class Enhancer {
 public:
  Enhancer(const std::filesystem::path& run_dir, const std::string& from) {
    const auto cfg = aj::cli::resolve_config(aj::cli::read_config_file(run_dir / "config.txt"));
    run_ = aj::cli::Run{run_dir, cfg, {}};
    from_ = from;
  }
  std::vector<std::filesystem::path> enhance_files(const std::vector<std::filesystem::path>& inputs,
                                                   const std::filesystem::path& out_dir) {
    return aj::cli::enhance(run_, from_, inputs, out_dir);
  }

 private:
  aj::cli::Run run_;
  std::string from_;
};

}  // namespace

PYBIND11_MODULE(_advjoint, m) {
  m.doc() = "advjoint: adversarial joint training of speech enhancement and recognition";
  m.attr("SAMPLE_RATE") = aj::signal::kSampleRate;

  py::register_exception<aj::diff::ConfigurationError>(m, "ConfigurationError", PyExc_ValueError);
  py::register_exception<aj::diff::DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<aj::diff::NonFiniteError>(m, "NonFiniteError", PyExc_FloatingPointError);
  py::register_exception<aj::cli::MissingInputError>(m, "MissingInputError", PyExc_FileNotFoundError);
  py::register_exception<aj::cli::SchemaError>(m, "SchemaError", PyExc_ValueError);

  m.def(
      "joint_loss",
      [](double l_asr, double l_enh, double l_gan, double kappa, double gamma) {
        aj::joint::JointConfig c;
        c.kappa = kappa;
        c.gamma = gamma;
        return aj::joint::joint_loss(l_asr, l_enh, l_gan, c);
      },
      py::arg("l_asr"), py::arg("l_enh"), py::arg("l_gan"), py::arg("kappa") = 6.0, py::arg("gamma") = 3.0);
  m.def("cer", &aj::asr::cer, py::arg("hyp"), py::arg("ref"), "character error rate of one hypothesis");
  m.def(
      "ssnr", [](const Array& clean, const Array& processed) { return aj::signal::ssnr(to_vec(clean), to_vec(processed)); },
      py::arg("clean"), py::arg("processed"));
  m.def(
      "preemphasis", [](const Array& x, double c) { return to_array(aj::signal::preemphasis(to_vec(x), c)); },
      py::arg("x"), py::arg("coeff") = 0.95);
  m.def(
      "deemphasis", [](const Array& x, double c) { return to_array(aj::signal::deemphasis(to_vec(x), c)); },
      py::arg("x"), py::arg("coeff") = 0.95);
  m.def(
      "mix_at_snr",
      [](const Array& clean, const Array& noise, double snr_db, std::uint64_t seed) {
        const auto r = aj::signal::mix_at_snr({to_vec(clean)}, {to_vec(noise)}, snr_db, seed);
        return py::make_tuple(to_array(r.mixed.samples), r.clipped);
      },
      py::arg("clean"), py::arg("noise"), py::arg("snr_db"), py::arg("seed") = 0,
      "returns (mixture, clipped)");
  m.def(
      "fbank",
      [](const Array& x, std::size_t n_mels, bool with_deltas) {
        aj::signal::FbankConfig cfg;
        cfg.n_mels = n_mels;
        cfg.with_deltas = with_deltas;
        const aj::signal::FbankExtractor<double> ex(cfg);
        auto v = to_vec(x);
        const std::size_t n = v.size();
        const auto t = ex.raw(aj::diff::Tensor<double>::from({n}, std::move(v)));
        py::array_t<double> out({static_cast<py::ssize_t>(t.dim(0)), static_cast<py::ssize_t>(t.dim(1))});
        std::copy(t.values().begin(), t.values().end(), out.mutable_data());
        return out;
      },
      py::arg("x"), py::arg("n_mels") = 80, py::arg("with_deltas") = true, "unnormalized log-mel features [frames, dim]");

  m.def("config_keys", &aj::cli::config_keys);
  m.def(
      "resolve_config",
      [](const std::map<std::string, std::string>& overrides) {
        const auto cfg = aj::cli::resolve_config(assignments(overrides));
        std::map<std::string, std::string> out;
        for (const auto& k : aj::cli::config_keys()) out[k] = aj::cli::get_value(cfg, k);
        return out;
      },
      py::arg("overrides") = std::map<std::string, std::string>{}, "every key with its resolved value");
  m.def(
      "config_hash",
      [](const std::map<std::string, std::string>& overrides) {
        return aj::cli::config_hash(aj::cli::resolve_config(assignments(overrides)));
      },
      py::arg("overrides") = std::map<std::string, std::string>{});

  m.def(
      "run_stage",
      [](const std::string& stage, const std::filesystem::path& out, const std::map<std::string, std::string>& overrides) {
        py::gil_scoped_release release;
        const auto run = run_for(out, overrides);
        if (stage == "synth-data") {
          aj::cli::synth_data(run);
        } else if (stage == "train-segan") {
          aj::cli::train_segan(run);
        } else if (stage == "train-asr") {
          aj::cli::train_asr(run, {"clean", "mct"});
        } else if (stage == "joint-train") {
          aj::cli::joint_train(run, {"joint", "joint+gan"});
        } else if (stage == "evaluate") {
          aj::cli::evaluate(run);
        } else {
          throw aj::diff::ConfigurationError("unknown stage '" + stage + "'");
        }
        return run.dir;
      },
      py::arg("stage"), py::arg("out"), py::arg("overrides") = std::map<std::string, std::string>{},
      "runs one pipeline stage and returns the run directory");
  m.def(
      "report",
      [](const std::vector<std::filesystem::path>& runs, const std::filesystem::path& out) {
        py::list rows;
        for (const auto& r : aj::cli::report(runs, out)) {
          py::dict d;
          d["arm"] = r.arm;
          d["training"] = r.training;
          d["runs"] = r.runs;
          d["clean"] = r.clean;
          d["match"] = r.match;
          d["unmatch"] = r.unmatch;
          rows.append(d);
        }
        return rows;
      },
      py::arg("runs"), py::arg("out"));

  py::class_<Enhancer>(m, "Enhancer")
      .def(py::init<const std::filesystem::path&, const std::string&>(), py::arg("run_dir"), py::arg("source") = "segan")
      .def("enhance_files", &Enhancer::enhance_files, py::arg("inputs"), py::arg("out_dir"));
}
