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

#include "advjoint/data/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "advjoint/data/manifest.hpp"

namespace advjoint::data {

static_assert(std::endian::native == std::endian::little, "checkpoint buffers are stored little-endian");

namespace {

using Kind = CheckpointError::Kind;
using nlohmann::json;

constexpr char kMagic[8] = {'A', 'D', 'V', 'J', 'C', 'K', 'P', 'T'};

template <typename T>
const char* dtype_of() {
  return sizeof(T) == 4 ? "f32" : "f64";
}

std::size_t dtype_size(const std::string& dtype) {
  if (dtype == "f32") return 4;
  if (dtype == "f64") return 8;
  throw CheckpointError(Kind::kFormat, "checkpoint: unknown dtype '" + dtype + "'");
}

template <typename U>
void append_pod(std::string& out, U v) {
  char buf[sizeof(U)];
  std::memcpy(buf, &v, sizeof(U));
  out.append(buf, sizeof(U));
}

template <typename U>
U read_pod(const std::string& in, std::size_t at) {
  U v;
  std::memcpy(&v, in.data() + at, sizeof(U));
  return v;
}

std::uint32_t crc_of(const char* data, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  while (n > 0) {
    const uInt chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    crc = crc32(crc, reinterpret_cast<const Bytef*>(data), chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace

template <typename T>
void Checkpoint::put(const std::string& name, const diff::Shape& shape, const std::vector<T>& values) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  if (n != values.size()) throw CheckpointError(Kind::kFormat, "checkpoint: '" + name + "' shape does not match its data");
  if (has(name)) throw CheckpointError(Kind::kFormat, "checkpoint: duplicate tensor '" + name + "'");
  TensorRecord r{name, dtype_of<T>(), shape, std::vector<std::uint8_t>(values.size() * sizeof(T))};
  std::memcpy(r.bytes.data(), values.data(), r.bytes.size());
  tensors.push_back(std::move(r));
}

template <typename T>
std::vector<T> Checkpoint::get(const std::string& name, std::size_t expected_size) const {
  const TensorRecord& r = record(name);
  const std::size_t width = dtype_size(r.dtype);
  const std::size_t n = r.bytes.size() / width;
  if (n != expected_size) {
    throw CheckpointError(Kind::kFormat, "checkpoint: '" + name + "' holds " + std::to_string(n) +
                                             " values, expected " + std::to_string(expected_size));
  }
  std::vector<T> out(n);
  if (width == sizeof(T)) {
    std::memcpy(out.data(), r.bytes.data(), r.bytes.size());
  } else if (width == 4) {
    for (std::size_t i = 0; i < n; ++i) {
      float v;
      std::memcpy(&v, r.bytes.data() + i * 4, 4);
      out[i] = static_cast<T>(v);
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      double v;
      std::memcpy(&v, r.bytes.data() + i * 8, 8);
      out[i] = static_cast<T>(v);
    }
  }
  return out;
}

bool Checkpoint::has(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return true;
  return false;
}

const TensorRecord& Checkpoint::record(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return t;
  throw CheckpointError(Kind::kMissing, "checkpoint: missing tensor '" + name + "'");
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  json index = json::array();
  std::size_t offset = 0;
  for (const auto& t : ckpt.tensors) {
    index.push_back({{"name", t.name}, {"dtype", t.dtype}, {"shape", t.shape}, {"offset", offset},
                     {"bytes", t.bytes.size()}});
    offset += t.bytes.size();
  }
  const json header{{"arch", ckpt.arch}, {"fingerprint", ckpt.fingerprint}, {"metadata", ckpt.metadata},
                    {"tensors", index}};
  const std::string text = header.dump();
  std::string out(kMagic, sizeof kMagic);
  append_pod<std::uint32_t>(out, kCheckpointVersion);
  append_pod<std::uint64_t>(out, text.size());
  out += text;
  for (const auto& t : ckpt.tensors) out.append(reinterpret_cast<const char*>(t.bytes.data()), t.bytes.size());
  append_pod<std::uint32_t>(out, crc_of(out.data(), out.size()));
  return out;
}

Checkpoint parse_checkpoint(const std::string& in) {
  constexpr std::size_t kFixed = sizeof kMagic + 4 + 8;
  if (in.size() < sizeof kMagic || std::memcmp(in.data(), kMagic, sizeof kMagic) != 0) {
    throw CheckpointError(Kind::kFormat, "checkpoint: bad magic (not an advjoint checkpoint)");
  }
  if (in.size() < kFixed + 4) throw CheckpointError(Kind::kChecksum, "checkpoint: file is truncated");
  const std::uint32_t stored = read_pod<std::uint32_t>(in, in.size() - 4);
  if (stored != crc_of(in.data(), in.size() - 4)) {
    throw CheckpointError(Kind::kChecksum, "checkpoint: checksum mismatch (file is corrupt or truncated)");
  }
  const auto version = read_pod<std::uint32_t>(in, sizeof kMagic);
  if (version != kCheckpointVersion) {
    throw CheckpointError(Kind::kVersion, "checkpoint: format version " + std::to_string(version) +
                                              " is not supported (expected " + std::to_string(kCheckpointVersion) +
                                              ")");
  }
  const auto header_len = read_pod<std::uint64_t>(in, sizeof kMagic + 4);
  if (header_len > in.size() - kFixed - 4) throw CheckpointError(Kind::kFormat, "checkpoint: header overruns file");
  Checkpoint c;
  try {
    const json header = json::parse(in.substr(kFixed, header_len));
    c.arch = header.at("arch").get<std::string>();
    c.fingerprint = header.at("fingerprint").get<std::string>();
    c.metadata = header.at("metadata");
    const std::size_t data_start = kFixed + header_len, data_len = in.size() - 4 - data_start;
    for (const auto& e : header.at("tensors")) {
      TensorRecord t;
      t.name = e.at("name").get<std::string>();
      t.dtype = e.at("dtype").get<std::string>();
      t.shape = e.at("shape").get<diff::Shape>();
      const auto off = e.at("offset").get<std::size_t>(), len = e.at("bytes").get<std::size_t>();
      std::size_t n = 1;
      for (auto d : t.shape) n *= d;
      if (off + len > data_len || len != n * dtype_size(t.dtype)) {
        throw CheckpointError(Kind::kFormat, "checkpoint: tensor '" + t.name + "' has an inconsistent extent");
      }
      t.bytes.assign(in.begin() + static_cast<std::ptrdiff_t>(data_start + off),
                     in.begin() + static_cast<std::ptrdiff_t>(data_start + off + len));
      c.tensors.push_back(std::move(t));
    }
  } catch (const json::exception& e) {
    throw CheckpointError(Kind::kFormat, std::string("checkpoint: malformed header: ") + e.what());
  }
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  try {
    atomic_write(path, serialize_checkpoint(ckpt));
  } catch (const DataError& e) {
    throw CheckpointError(Kind::kIo, e.what());
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError(Kind::kIo, "checkpoint '" + path.string() + "' not found");
  const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  try {
    return parse_checkpoint(bytes);
  } catch (const CheckpointError& e) {
    throw CheckpointError(e.kind(), path.string() + ": " + e.what());
  }
}

void require_fingerprint(const Checkpoint& ckpt, const std::string& expected) {
  if (ckpt.fingerprint != expected) {
    throw CheckpointError(Kind::kArchitecture, "checkpoint architecture mismatch: file has '" + ckpt.fingerprint +
                                                   "', model expects '" + expected + "'");
  }
}

template <typename T>
void store_params(Checkpoint& ckpt, const std::string& prefix, const diff::ParameterSet<T>& ps) {
  for (const auto& e : ps.entries()) {
    ckpt.put(prefix + "p/" + e.name, e.tensor.shape(), std::vector<T>(e.tensor.values().begin(), e.tensor.values().end()));
  }
  for (const auto& [name, buf] : ps.buffers()) ckpt.put(prefix + "b/" + name, {buf.size()}, buf);
}

template <typename T>
void restore_params(const Checkpoint& ckpt, const std::string& prefix, diff::ParameterSet<T>& ps) {
  // Validate everything before touching the model.
  std::vector<std::vector<T>> values;
  for (const auto& e : ps.entries()) {
    const TensorRecord& r = ckpt.record(prefix + "p/" + e.name);
    if (r.shape != e.tensor.shape()) {
      throw CheckpointError(Kind::kArchitecture, "checkpoint: parameter '" + e.name + "' has a different shape");
    }
    values.push_back(ckpt.get<T>(r.name, e.tensor.numel()));
  }
  for (auto& [name, buf] : ps.buffers()) ckpt.record(prefix + "b/" + name);
  // Stored buffers the model lacks (e.g. a reference batch) are adopted.
  std::vector<std::pair<std::string, std::vector<T>>> buffers;
  for (const auto& t : ckpt.tensors) {
    if (t.name.rfind(prefix + "b/", 0) != 0) continue;
    buffers.emplace_back(t.name.substr(prefix.size() + 2), ckpt.get<T>(t.name, t.shape.empty() ? 0 : t.shape[0]));
  }
  std::size_t stored = 0;
  for (const auto& t : ckpt.tensors) {
    if (t.name.rfind(prefix + "p/", 0) == 0) ++stored;
  }
  if (stored != ps.entries().size()) {
    throw CheckpointError(Kind::kArchitecture, "checkpoint: " + std::to_string(stored) + " parameters under '" + prefix +
                                                   "', model has " + std::to_string(ps.entries().size()));
  }
  std::size_t i = 0;
  for (auto e : ps.entries()) {
    auto dst = e.tensor.mutable_values();
    std::copy(values[i].begin(), values[i].end(), dst.begin());
    ++i;
  }
  for (auto& [name, buf] : buffers) ps.buffer(name) = std::move(buf);
}

template <typename T>
void store_optimizer(Checkpoint& ckpt, const std::string& prefix, const diff::Optimizer<T>& opt) {
  for (const auto& [name, acc] : opt.state()) ckpt.put(prefix + "o/" + name, {acc.size()}, acc);
  ckpt.metadata[prefix + "optimizer"] = {{"kind", opt.kind()}, {"steps", opt.steps()}, {"lr", opt.lr()}};
}

template <typename T>
void restore_optimizer(const Checkpoint& ckpt, const std::string& prefix, diff::Optimizer<T>& opt) {
  const std::string key = prefix + "optimizer";
  if (!ckpt.metadata.contains(key)) throw CheckpointError(Kind::kMissing, "checkpoint: no optimizer state '" + key + "'");
  const auto& meta = ckpt.metadata[key];
  if (meta.at("kind").get<std::string>() != opt.kind()) {
    throw CheckpointError(Kind::kArchitecture, "checkpoint: optimizer kind '" + meta.at("kind").get<std::string>() +
                                                   "' differs from '" + opt.kind() + "'");
  }
  std::map<std::string, std::vector<T>> state;
  for (const auto& [name, acc] : opt.state()) state[name] = ckpt.get<T>(prefix + "o/" + name, acc.size());
  opt.load_state(state, meta.at("steps").get<std::int64_t>());
  opt.set_lr(meta.at("lr").get<double>());
}

template void Checkpoint::put<float>(const std::string&, const diff::Shape&, const std::vector<float>&);
template void Checkpoint::put<double>(const std::string&, const diff::Shape&, const std::vector<double>&);
template std::vector<float> Checkpoint::get<float>(const std::string&, std::size_t) const;
template std::vector<double> Checkpoint::get<double>(const std::string&, std::size_t) const;
template void store_params<float>(Checkpoint&, const std::string&, const diff::ParameterSet<float>&);
template void store_params<double>(Checkpoint&, const std::string&, const diff::ParameterSet<double>&);
template void restore_params<float>(const Checkpoint&, const std::string&, diff::ParameterSet<float>&);
template void restore_params<double>(const Checkpoint&, const std::string&, diff::ParameterSet<double>&);
template void store_optimizer<float>(Checkpoint&, const std::string&, const diff::Optimizer<float>&);
template void store_optimizer<double>(Checkpoint&, const std::string&, const diff::Optimizer<double>&);
template void restore_optimizer<float>(const Checkpoint&, const std::string&, diff::Optimizer<float>&);
template void restore_optimizer<double>(const Checkpoint&, const std::string&, diff::Optimizer<double>&);

}  // namespace advjoint::data
