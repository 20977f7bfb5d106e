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

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "acp/network.h"
#include "acp/optim.h"

namespace acp {

struct CheckpointMeta {
  std::string phase = "pretrain";  // "pretrain" or "maintrain"
  uint64_t seed = 0;
  int epoch = 0;
};

struct NamedTensorF {
  std::string name;
  std::array<size_t, 4> dims{};
  std::vector<float> data;
};

// In-memory image of a checkpoint file.
//
// On disk: magic "ACPT0001", uint32 LE version, uint64 LE header length,
// UTF-8 JSON header (net spec, meta, optional Adam hyperparameters, and
// the tensor table name -> dtype/dims/offset), then the raw tensor
// payloads as float32 little-endian, row-major, in table order. Offsets
// are relative to the start of the payload section.
struct Checkpoint {
  uint32_t version = 1;
  NetSpec spec;
  CheckpointMeta meta;
  std::vector<NamedTensorF> tensors;
  bool has_adam = false;
  int64_t adam_t = 0;
  AdamConfig adam_cfg;

  const NamedTensorF* find(const std::string& name) const;
};

// Atomic save (temp file + rename): a failed write leaves no partial
// checkpoint behind. Passing an optimizer also persists its moments.
void save_checkpoint(Network<float>& net, const Adam<float>* opt,
                     const CheckpointMeta& meta,
                     const std::filesystem::path& path);

// Validates magic, version, header and the tensor shape table against
// the embedded net spec. Throws FormatError / UnsupportedError.
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Rebuilds the network (and optimizer state, when present) bit-exactly.
Network<float> restore_network(const Checkpoint& ckpt);
std::unique_ptr<Adam<float>> restore_adam(const Checkpoint& ckpt,
                                          Network<float>& net);

// Phase-1 to phase-2 weight transfer: copies all parameters and running
// stats for the layer prefix up to and including the embedding layer;
// the class head keeps its fresh initialization. Layers with index
// <= freeze_upto are marked non-trainable (-1 freezes nothing). Throws
// DataError naming the first divergent layer on an architecture
// mismatch.
void transfer_weights(const Checkpoint& ckpt, Network<float>& target,
                      int freeze_upto = -1);

}  // namespace acp
