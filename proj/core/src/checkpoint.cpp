// Copyright 2026 The acp authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "acp/checkpoint.h"

#include <cstring>
#include <fstream>

#include <json.hpp>

#include "acp/common.h"

namespace acp {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'A', 'C', 'P', 'T', '0', '0', '0', '1'};
constexpr uint32_t kVersion = 1;

struct TensorTableEntry {
  std::string name;
  std::array<size_t, 4> dims;
  uint64_t offset;
};

}  // namespace

const NamedTensorF* Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

void save_checkpoint(Network<float>& net, const Adam<float>* opt,
                     const CheckpointMeta& meta,
                     const std::filesystem::path& path) {
  if (meta.phase != "pretrain" && meta.phase != "maintrain") {
    throw ContractError("checkpoint phase must be pretrain or maintrain");
  }

  // Collect tensors in a fixed order: parameters, running stats, then
  // optimizer moments.
  struct Pending {
    std::string name;
    std::array<size_t, 4> dims;
    const float* data;
    size_t count;
  };
  std::vector<Pending> pending;
  auto params = net.params();
  auto stats = net.stats();
  for (const auto& p : params) {
    pending.push_back({p.name, p.value->dims, p.value->data(),
                       p.value->size()});
  }
  for (const auto& s : stats) {
    pending.push_back({s.name, s.value->dims, s.value->data(),
                       s.value->size()});
  }
  if (opt != nullptr) {
    const auto& m = opt->moments_m();
    const auto& v = opt->moments_v();
    if (m.size() != params.size()) {
      throw ContractError("optimizer state does not match the network");
    }
    for (size_t i = 0; i < params.size(); ++i) {
      pending.push_back({"adam.m." + params[i].name, m[i].dims, m[i].data(),
                         m[i].size()});
      pending.push_back({"adam.v." + params[i].name, v[i].dims, v[i].data(),
                         v[i].size()});
    }
  }

  json header;
  header["netspec"] = json::parse(net.spec().to_json());
  header["meta"] = {{"phase", meta.phase},
                    {"seed", meta.seed},
                    {"epoch", meta.epoch}};
  if (opt != nullptr) {
    const AdamConfig& c = opt->config();
    header["adam"] = {{"t", opt->step_count()},
                      {"lr", c.lr},
                      {"beta1", c.beta1},
                      {"beta2", c.beta2},
                      {"eps", c.eps}};
  } else {
    header["adam"] = nullptr;
  }
  header["tensors"] = json::array();
  uint64_t offset = 0;
  for (const auto& t : pending) {
    header["tensors"].push_back(
        {{"name", t.name},
         {"dtype", "f32"},
         {"dims", {t.dims[0], t.dims[1], t.dims[2], t.dims[3]}},
         {"offset", offset}});
    offset += t.count * sizeof(float);
  }
  const std::string header_text = header.dump();

  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write checkpoint: " + tmp.string());
    f.write(kMagic, sizeof(kMagic));
    const uint32_t version = kVersion;
    f.write(reinterpret_cast<const char*>(&version), sizeof(version));
    const uint64_t hlen = header_text.size();
    f.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    f.write(header_text.data(), static_cast<std::streamsize>(hlen));
    for (const auto& t : pending) {
      f.write(reinterpret_cast<const char*>(t.data),
              static_cast<std::streamsize>(t.count * sizeof(float)));
    }
    if (!f) {
      f.close();
      std::filesystem::remove(tmp);
      throw DataError("short write: " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw DataError("cannot move checkpoint into place: " + ec.message());
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open checkpoint: " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(f)),
                          std::istreambuf_iterator<char>());
  if (bytes.size() < sizeof(kMagic) + sizeof(uint32_t) + sizeof(uint64_t)) {
    throw FormatError("checkpoint truncated: " + path.string());
  }
  if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw FormatError("bad checkpoint magic: " + path.string());
  }
  uint32_t version;
  std::memcpy(&version, bytes.data() + 8, sizeof(version));
  if (version != kVersion) {
    throw UnsupportedError("unsupported checkpoint version " +
                           std::to_string(version) + ": " + path.string());
  }
  uint64_t hlen;
  std::memcpy(&hlen, bytes.data() + 12, sizeof(hlen));
  const size_t header_start = 20;
  if (header_start + hlen > bytes.size()) {
    throw FormatError("checkpoint header overruns file: " + path.string());
  }

  json header;
  try {
    header = json::parse(bytes.begin() + header_start,
                         bytes.begin() + header_start + hlen);
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad checkpoint header: ") + e.what());
  }

  Checkpoint ckpt;
  ckpt.version = version;
  try {
    ckpt.spec = NetSpec::from_json(header.at("netspec").dump());
    ckpt.meta.phase = header.at("meta").at("phase").get<std::string>();
    ckpt.meta.seed = header.at("meta").at("seed").get<uint64_t>();
    ckpt.meta.epoch = header.at("meta").at("epoch").get<int>();
    if (!header.at("adam").is_null()) {
      ckpt.has_adam = true;
      ckpt.adam_t = header["adam"].at("t").get<int64_t>();
      ckpt.adam_cfg.lr = header["adam"].at("lr").get<double>();
      ckpt.adam_cfg.beta1 = header["adam"].at("beta1").get<double>();
      ckpt.adam_cfg.beta2 = header["adam"].at("beta2").get<double>();
      ckpt.adam_cfg.eps = header["adam"].at("eps").get<double>();
    }
    const size_t payload_start = header_start + hlen;
    for (const json& jt : header.at("tensors")) {
      NamedTensorF t;
      t.name = jt.at("name").get<std::string>();
      if (jt.at("dtype").get<std::string>() != "f32") {
        throw UnsupportedError("unsupported tensor dtype in " + path.string());
      }
      const auto& dims = jt.at("dims");
      for (int d = 0; d < 4; ++d) t.dims[d] = dims[d].get<size_t>();
      const uint64_t offset = jt.at("offset").get<uint64_t>();
      const size_t count = t.dims[0] * t.dims[1] * t.dims[2] * t.dims[3];
      const size_t begin = payload_start + offset;
      if (begin + count * sizeof(float) > bytes.size()) {
        throw FormatError("checkpoint payload truncated at tensor " + t.name +
                          ": " + path.string());
      }
      t.data.resize(count);
      std::memcpy(t.data.data(), bytes.data() + begin, count * sizeof(float));
      ckpt.tensors.push_back(std::move(t));
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad checkpoint header: ") + e.what());
  }

  // The embedded spec fixes the expected tensor names and shapes.
  Network<float> probe = Network<float>::build(ckpt.spec, 0);
  auto expect = [&](const std::string& name,
                    const std::array<size_t, 4>& dims) {
    const NamedTensorF* t = ckpt.find(name);
    if (t == nullptr) {
      throw FormatError("checkpoint misses tensor " + name + ": " +
                        path.string());
    }
    if (t->dims != dims) {
      throw FormatError("checkpoint shape mismatch for " + name + ": " +
                        path.string());
    }
  };
  for (const auto& p : probe.params()) expect(p.name, p.value->dims);
  for (const auto& s : probe.stats()) expect(s.name, s.value->dims);

  return ckpt;
}

Network<float> restore_network(const Checkpoint& ckpt) {
  Network<float> net = Network<float>::build(ckpt.spec, 0);
  for (auto& p : net.params()) {
    const NamedTensorF* t = ckpt.find(p.name);
    std::memcpy(p.value->data(), t->data.data(),
                t->data.size() * sizeof(float));
  }
  for (auto& s : net.stats()) {
    const NamedTensorF* t = ckpt.find(s.name);
    std::memcpy(s.value->data(), t->data.data(),
                t->data.size() * sizeof(float));
  }
  return net;
}

std::unique_ptr<Adam<float>> restore_adam(const Checkpoint& ckpt,
                                          Network<float>& net) {
  if (!ckpt.has_adam) return nullptr;
  auto adam = std::make_unique<Adam<float>>(net, ckpt.adam_cfg);
  adam->restore_step_count(ckpt.adam_t);
  auto params = net.params();
  for (size_t i = 0; i < params.size(); ++i) {
    const NamedTensorF* m = ckpt.find("adam.m." + params[i].name);
    const NamedTensorF* v = ckpt.find("adam.v." + params[i].name);
    if (m == nullptr || v == nullptr) {
      throw FormatError("checkpoint misses Adam moments for " +
                        params[i].name);
    }
    std::memcpy(adam->moments_m()[i].data(), m->data.data(),
                m->data.size() * sizeof(float));
    std::memcpy(adam->moments_v()[i].data(), v->data.data(),
                v->data.size() * sizeof(float));
  }
  return adam;
}

void transfer_weights(const Checkpoint& ckpt, Network<float>& target,
                      int freeze_upto) {
  const NetSpec& src = ckpt.spec;
  const NetSpec& dst = target.spec();
  if (src.embedding_layer_index != dst.embedding_layer_index) {
    throw DataError("transfer: embedding layer index differs (" +
                    std::to_string(src.embedding_layer_index) + " vs " +
                    std::to_string(dst.embedding_layer_index) + ")");
  }
  const int prefix_end = dst.embedding_layer_index;
  if (static_cast<int>(src.layers.size()) <= prefix_end - 1 ||
      static_cast<int>(src.layers.size()) < prefix_end + 1) {
    throw DataError("transfer: checkpoint has fewer layers than the prefix");
  }
  for (int i = 0; i <= prefix_end; ++i) {
    if (!(src.layers[i] == dst.layers[i])) {
      throw DataError("transfer: architectures diverge at layer " +
                      std::to_string(i) + " (" + to_string(dst.layers[i].kind) +
                      ")");
    }
  }
  if (src.input_channels != dst.input_channels) {
    throw DataError("transfer: input channel count differs");
  }

  // Copy the shared prefix; the head (anything past the embedding layer)
  // keeps its fresh initialization.
  for (auto& p : target.params()) {
    if (p.spec_index > prefix_end) continue;
    const NamedTensorF* t = ckpt.find(p.name);
    if (t == nullptr || t->dims != p.value->dims) {
      throw DataError("transfer: checkpoint misses tensor " + p.name);
    }
    std::memcpy(p.value->data(), t->data.data(),
                t->data.size() * sizeof(float));
  }
  for (auto& s : target.stats()) {
    if (s.spec_index > prefix_end) continue;
    const NamedTensorF* t = ckpt.find(s.name);
    if (t == nullptr || t->dims != s.value->dims) {
      throw DataError("transfer: checkpoint misses tensor " + s.name);
    }
    std::memcpy(s.value->data(), t->data.data(),
                t->data.size() * sizeof(float));
  }

  target.set_freeze_upto(freeze_upto);
}

}  // namespace acp
