// Copyright 2026 The percept Authors
// SPDX-License-Identifier: Apache-2.0

#include "percept/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace percept {
namespace {

using nlohmann::json;
using Kind = CheckpointError::Kind;

struct Entry {
  std::string name;
  std::string role;
  const Tensor* tensor;
};

std::vector<Entry> manifest_entries(const Checkpoint& ckpt) {
  std::vector<Entry> entries;
  for (const Parameter& p : ckpt.network.parameters()) {
    entries.push_back({p.name, "parameter", &p.value});
  }
  for (const auto& [name, state] : ckpt.network.batch_norm_states()) {
    if (!state.initialized) continue;
    entries.push_back({name + ".running_mean", "buffer", &state.running_mean});
    entries.push_back({name + ".running_var", "buffer", &state.running_var});
  }
  for (const auto& [name, t] : ckpt.extra_tensors) entries.push_back({name, "extra", &t});
  return entries;
}

template <typename T>
void put_le(std::string& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>((value >> (8 * i)) & 0xff));
  }
}

template <typename T>
T get_le(const unsigned char* p) {
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(p[i]) << (8 * i);
  return value;
}

Tensor read_tensor(const std::vector<unsigned char>& buf, std::size_t payload_start,
                   const json& entry, const Shape& expected, const std::filesystem::path& path) {
  const std::string name = entry.at("name").get<std::string>();
  const Shape shape = entry.at("shape").get<Shape>();
  if (shape != expected) {
    throw CheckpointError(Kind::shape_mismatch, path.string() + ": parameter '" + name +
                                                    "' has shape " + to_string(shape) +
                                                    ", network expects " + to_string(expected));
  }
  const std::size_t offset = entry.at("offset").get<std::size_t>();
  const std::size_t count = numel(shape);
  if (payload_start + offset + count * 4 > buf.size()) {
    throw CheckpointError(Kind::truncated, path.string() + ": payload for '" + name +
                                               "' extends past end of file");
  }
  Tensor t(shape);
  const unsigned char* p = buf.data() + payload_start + offset;
  for (std::size_t i = 0; i < count; ++i) {
    const auto bits = get_le<std::uint32_t>(p + 4 * i);
    t[i] = static_cast<double>(std::bit_cast<float>(bits));
  }
  return t;
}

}  // namespace

json checkpoint_metadata(const Checkpoint& ckpt) {
  json meta;
  meta["spec"] = ckpt.network.spec().to_json();
  meta["training"] = {{"iteration", ckpt.meta.iteration},
                      {"seed", ckpt.meta.seed},
                      {"objective_digest", ckpt.meta.objective_digest},
                      {"extra", ckpt.meta.extra}};
  json manifest = json::array();
  std::size_t offset = 0;
  for (const Entry& e : manifest_entries(ckpt)) {
    manifest.push_back({{"name", e.name},
                        {"role", e.role},
                        {"shape", e.tensor->shape()},
                        {"offset", offset},
                        {"dtype", "float32"}});
    offset += e.tensor->size() * 4;
  }
  meta["parameters"] = std::move(manifest);
  meta["payload_bytes"] = offset;
  return meta;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const std::string meta = checkpoint_metadata(ckpt).dump();
  std::string out(kCheckpointMagic, 4);
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint64_t>(out, meta.size());
  out += meta;
  for (const Entry& e : manifest_entries(ckpt)) {
    for (double v : e.tensor->data()) put_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw CheckpointError(Kind::io, path.string() + ": cannot open for writing");
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) throw CheckpointError(Kind::io, path.string() + ": write failed");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw CheckpointError(Kind::io, path.string() + ": cannot open checkpoint");
  const std::vector<unsigned char> buf{std::istreambuf_iterator<char>(file),
                                       std::istreambuf_iterator<char>()};
  if (buf.size() < 4 || std::memcmp(buf.data(), kCheckpointMagic, 4) != 0) {
    throw CheckpointError(Kind::not_a_checkpoint, path.string() + ": not a checkpoint (bad magic)");
  }
  if (buf.size() < 16) {
    throw CheckpointError(Kind::truncated, path.string() + ": truncated header");
  }
  const auto version = get_le<std::uint32_t>(buf.data() + 4);
  if (version != kCheckpointVersion) {
    throw CheckpointError(Kind::version_mismatch, path.string() + ": unsupported version " +
                                                      std::to_string(version));
  }
  const auto meta_len = get_le<std::uint64_t>(buf.data() + 8);
  if (16 + meta_len > buf.size()) {
    throw CheckpointError(Kind::truncated, path.string() + ": truncated metadata");
  }
  json meta;
  try {
    meta = json::parse(buf.begin() + 16, buf.begin() + 16 + static_cast<long>(meta_len));
  } catch (const json::exception& ex) {
    throw CheckpointError(Kind::malformed, path.string() + ": bad metadata: " + ex.what());
  }
  const std::size_t payload_start = 16 + meta_len;

  Checkpoint ckpt;
  try {
    ckpt.network = Network(NetworkSpec::from_json(meta.at("spec")));
    const json& tr = meta.at("training");
    ckpt.meta.iteration = tr.at("iteration").get<std::uint64_t>();
    ckpt.meta.seed = tr.at("seed").get<std::uint64_t>();
    ckpt.meta.objective_digest = tr.at("objective_digest").get<std::string>();
    ckpt.meta.extra = tr.at("extra");

    std::map<std::string, const json*> by_name;
    for (const json& e : meta.at("parameters")) by_name[e.at("name").get<std::string>()] = &e;

    for (Parameter& p : ckpt.network.parameters()) {
      auto it = by_name.find(p.name);
      if (it == by_name.end()) {
        throw CheckpointError(Kind::missing_parameter,
                              path.string() + ": missing parameter '" + p.name + "'");
      }
      p.value = read_tensor(buf, payload_start, *it->second, p.value.shape(), path);
      p.zero_grad();
    }
    for (auto& [name, state] : ckpt.network.batch_norm_states()) {
      auto m = by_name.find(name + ".running_mean");
      auto v = by_name.find(name + ".running_var");
      if (m == by_name.end() || v == by_name.end()) continue;
      const std::size_t c = ckpt.network.parameter(name + ".gamma").value.size();
      state.running_mean = read_tensor(buf, payload_start, *m->second, Shape{c}, path);
      state.running_var = read_tensor(buf, payload_start, *v->second, Shape{c}, path);
      state.initialized = true;
    }
    for (const json& e : meta.at("parameters")) {
      if (e.at("role").get<std::string>() != "extra") continue;
      const std::string name = e.at("name").get<std::string>();
      ckpt.extra_tensors[name] =
          read_tensor(buf, payload_start, e, e.at("shape").get<Shape>(), path);
    }
  } catch (const json::exception& ex) {
    throw CheckpointError(Kind::malformed, path.string() + ": bad metadata: " + ex.what());
  } catch (const CheckpointError&) {
    throw;
  } catch (const Error& ex) {
    throw CheckpointError(Kind::malformed, path.string() + ": " + ex.what());
  }
  return ckpt;
}

}  // namespace percept
