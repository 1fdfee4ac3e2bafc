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

#include "advjoint/cli/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

namespace advjoint::cli {

using diff::ConfigurationError;
using joint::ExperimentConfig;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& v, const char* what) {
  throw ConfigurationError("config key '" + key + "': cannot parse '" + v + "' as " + what);
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || r.ec != std::errc() || r.ptr != v.data() + v.size()) bad_value(key, v, "a number");
  return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || r.ec != std::errc() || r.ptr != v.data() + v.size()) bad_value(key, v, "a non-negative integer");
  return out;
}

int to_int(const std::string& key, const std::string& v) {
  const std::uint64_t u = to_u64(key, v);
  if (u > 1u << 30) bad_value(key, v, "a small integer");
  return static_cast<int>(u);
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad_value(key, v, "a boolean");
}

std::vector<std::uint64_t> to_list(const std::string& key, const std::string& v) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_u64(key, trim(item)));
  if (!v.empty() && v.back() == ',') bad_value(key, v, "a comma separated list");
  return out;
}

std::string num(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

template <typename C>
std::string join(const C& c) {
  std::string out;
  for (const auto& x : c) {
    if (!out.empty()) out += ',';
    out += std::to_string(x);
  }
  return out;
}

struct Key {
  std::string name;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

#define ADVJOINT_DOUBLE_KEY(NAME, FIELD)                                      \
  Key {                                                                       \
    NAME, [](const ExperimentConfig& c) { return num(c.FIELD); },             \
        [](ExperimentConfig& c, const std::string& v) { c.FIELD = to_double(NAME, v); } \
  }
#define ADVJOINT_SIZE_KEY(NAME, FIELD)                                        \
  Key {                                                                       \
    NAME, [](const ExperimentConfig& c) { return std::to_string(c.FIELD); },  \
        [](ExperimentConfig& c, const std::string& v) { c.FIELD = to_u64(NAME, v); } \
  }
#define ADVJOINT_INT_KEY(NAME, FIELD)                                         \
  Key {                                                                       \
    NAME, [](const ExperimentConfig& c) { return std::to_string(c.FIELD); },  \
        [](ExperimentConfig& c, const std::string& v) { c.FIELD = to_int(NAME, v); } \
  }
#define ADVJOINT_BOOL_KEY(NAME, FIELD)                                                \
  Key {                                                                               \
    NAME, [](const ExperimentConfig& c) { return std::string(c.FIELD ? "true" : "false"); }, \
        [](ExperimentConfig& c, const std::string& v) { c.FIELD = to_bool(NAME, v); }  \
  }

const std::vector<Key>& registry() {
  static const std::vector<Key> keys = {
      Key{"run.preset", [](const ExperimentConfig& c) { return c.preset; }, [](ExperimentConfig&, const std::string&) {}},
      Key{"run.model", [](const ExperimentConfig& c) { return asr::to_string(c.asr.kind); },
          [](ExperimentConfig&, const std::string&) {}},
      ADVJOINT_SIZE_KEY("run.seed", seed),

      ADVJOINT_SIZE_KEY("data.n_train", data.n_train),
      ADVJOINT_SIZE_KEY("data.n_test", data.n_test),
      ADVJOINT_DOUBLE_KEY("data.mct_fraction", data.mct_fraction),
      ADVJOINT_DOUBLE_KEY("data.snr_lo_db", data.snr_lo_db),
      ADVJOINT_DOUBLE_KEY("data.snr_hi_db", data.snr_hi_db),
      ADVJOINT_DOUBLE_KEY("data.probe_snr_db", data.probe_snr_db),

      ADVJOINT_SIZE_KEY("segan.chunk", segan.chunk),
      Key{"segan.filters", [](const ExperimentConfig& c) { return join(c.segan.filters); },
          [](ExperimentConfig& c, const std::string& v) {
            const auto l = to_list("segan.filters", v);
            c.segan.filters.assign(l.begin(), l.end());
          }},
      ADVJOINT_SIZE_KEY("segan.kernel", segan.kernel),
      Key{"segan.attention", [](const ExperimentConfig& c) { return join(c.segan.attention_layers); },
          [](ExperimentConfig& c, const std::string& v) {
            c.segan.attention_layers.clear();
            for (auto x : to_list("segan.attention", v)) c.segan.attention_layers.insert(static_cast<int>(x));
          }},
      ADVJOINT_SIZE_KEY("segan.b", segan.b),
      ADVJOINT_SIZE_KEY("segan.p", segan.p),
      ADVJOINT_DOUBLE_KEY("segan.leaky_alpha", segan.leaky_alpha),
      ADVJOINT_DOUBLE_KEY("segan.preemph", segan.preemph),
      ADVJOINT_DOUBLE_KEY("segan.lambda_l1", segan_train.lambda_l1),
      ADVJOINT_DOUBLE_KEY("segan.lr", segan_train.lr),
      ADVJOINT_SIZE_KEY("segan.batch", segan_train.batch),
      ADVJOINT_INT_KEY("segan.epochs", segan_train.epochs),
      ADVJOINT_DOUBLE_KEY("segan.chunk_overlap", segan_train.chunk_overlap),

      ADVJOINT_SIZE_KEY("fbank.n_mels", fbank.n_mels),
      ADVJOINT_BOOL_KEY("fbank.with_deltas", fbank.with_deltas),

      ADVJOINT_SIZE_KEY("asr.d_model", asr.d_model),
      ADVJOINT_SIZE_KEY("asr.heads", asr.heads),
      ADVJOINT_SIZE_KEY("asr.enc_layers", asr.enc_layers),
      ADVJOINT_SIZE_KEY("asr.dec_layers", asr.dec_layers),
      ADVJOINT_SIZE_KEY("asr.d_ff", asr.d_ff),
      ADVJOINT_DOUBLE_KEY("asr.dropout", asr.dropout),
      ADVJOINT_DOUBLE_KEY("asr.ctc_weight", asr.ctc_weight),
      ADVJOINT_DOUBLE_KEY("asr.label_smoothing", asr.label_smoothing),
      ADVJOINT_SIZE_KEY("asr.conv_kernel", asr.conv_kernel),
      ADVJOINT_SIZE_KEY("asr.subsample_channels", asr.subsample_channels),
      ADVJOINT_INT_KEY("asr.epochs", asr_train.epochs),
      ADVJOINT_SIZE_KEY("asr.batch", asr_train.batch),
      ADVJOINT_DOUBLE_KEY("asr.k_prime", asr_train.schedule.k_prime),
      ADVJOINT_INT_KEY("asr.warmup", asr_train.schedule.warmup_n),
      ADVJOINT_DOUBLE_KEY("asr.clip_norm", asr_train.clip_norm),

      ADVJOINT_DOUBLE_KEY("joint.kappa", joint.kappa),
      ADVJOINT_DOUBLE_KEY("joint.gamma", joint.gamma),
      ADVJOINT_DOUBLE_KEY("joint.lambda_l1", joint.lambda_l1),
      ADVJOINT_DOUBLE_KEY("joint.lr_g", joint.lr_g),
      ADVJOINT_DOUBLE_KEY("joint.lr_d", joint.lr_d),
      ADVJOINT_DOUBLE_KEY("joint.clip_norm", joint.clip_norm),
      ADVJOINT_SIZE_KEY("joint.batch", joint.batch),
      ADVJOINT_INT_KEY("joint.epochs", joint.epochs),

      ADVJOINT_SIZE_KEY("decode.beam", decode.beam),
      ADVJOINT_DOUBLE_KEY("decode.alpha", decode.length_alpha),
      ADVJOINT_SIZE_KEY("decode.max_len", decode.max_len),
  };
  return keys;
}

#undef ADVJOINT_DOUBLE_KEY
#undef ADVJOINT_SIZE_KEY
#undef ADVJOINT_INT_KEY
#undef ADVJOINT_BOOL_KEY

const Key& find_key(const std::string& name) {
  for (const auto& k : registry())
    if (k.name == name) return k;
  throw ConfigurationError("unknown config key '" + name + "'");
}

}  // namespace

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& k : registry()) out.push_back(k.name);
  return out;
}

std::string env_name(const std::string& key) {
  std::string out = kEnvPrefix;
  for (char ch : key) out += ch == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return out;
}

std::vector<Assignment> parse_config_text(const std::string& text, const std::string& origin) {
  std::vector<Assignment> out;
  std::istringstream in(text);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos || trim(line.substr(0, eq)).empty()) {
      throw ConfigurationError(origin + ":" + std::to_string(n) + ": expected 'key = value'");
    }
    out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return out;
}

std::vector<Assignment> read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data::DataError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path.string());
}

std::vector<Assignment> env_assignments(char** envp) {
  std::vector<Assignment> out;
  if (envp == nullptr) return out;
  const std::string prefix = kEnvPrefix;
  for (char** e = envp; *e != nullptr; ++e) {
    const std::string entry = *e;
    if (entry.rfind(prefix, 0) != 0) continue;
    const auto eq = entry.find('=');
    const std::string name = entry.substr(0, eq);
    const std::string value = eq == std::string::npos ? "" : entry.substr(eq + 1);
    bool found = false;
    for (const auto& k : registry()) {
      if (env_name(k.name) == name) {
        out.emplace_back(k.name, value);
        found = true;
        break;
      }
    }
    if (!found) throw ConfigurationError("unknown config environment variable '" + name + "'");
  }
  std::sort(out.begin(), out.end());
  return out;
}

ExperimentConfig resolve_config(const std::vector<Assignment>& assignments) {
  std::string preset = "toy", model = "conformer";
  for (const auto& [k, v] : assignments) {
    find_key(k);
    if (k == "run.preset") preset = v;
    if (k == "run.model") model = v;
  }
  asr::EncoderKind kind;
  try {
    kind = asr::encoder_kind_from_string(model);
  } catch (const std::exception&) {
    throw ConfigurationError("config key 'run.model': expected transformer or conformer, got '" + model + "'");
  }
  ExperimentConfig cfg = ExperimentConfig::make(preset, kind);
  for (const auto& [k, v] : assignments) find_key(k).set(cfg, v);
  cfg.asr.input_dim = cfg.fbank.dim();
  cfg.asr_train.schedule.d_model = static_cast<int>(cfg.asr.d_model);
  cfg.joint.asr_schedule = cfg.asr_train.schedule;
  cfg.asr_train.beam = cfg.decode.beam;
  cfg.asr_train.length_alpha = cfg.decode.length_alpha;
  cfg.asr_train.max_decode_len = cfg.decode.max_len;
  cfg.validate();
  return cfg;
}

std::string get_value(const ExperimentConfig& cfg, const std::string& key) { return find_key(key).get(cfg); }

std::string serialize_config(const ExperimentConfig& cfg) {
  std::string out = "# advjoint resolved configuration\n";
  for (const auto& k : registry()) out += k.name + " = " + k.get(cfg) + "\n";
  return out;
}

std::string config_hash(const ExperimentConfig& cfg) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : serialize_config(cfg)) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace advjoint::cli
