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
#include <string>
#include <vector>

#include "acp/dsp.h"
#include "acp/netspec.h"
#include "acp/pairs.h"
#include "acp/synthcorpus.h"

namespace acp {

struct FeatureConfig {
  FrameParams frame{512, 50.0, 30.0, "hann"};
  bool log_compress = false;
};

// Architecture knobs for the stack: conv + BN + leaky ReLU, a chain of
// stride-2 residual blocks, concatenated global max/avg pooling, the
// embedding dense and the 2-class head.
struct NetConfig {
  int conv1_channels = 8;
  std::vector<int> block_channels = {8, 16, 16};
  std::array<int, 2> block_stride = {2, 2};
  int embedding_dim = 64;
  double leaky_slope = 0.3;

  NetSpec to_netspec() const;
};

struct TrainConfig {
  double pre_lr = 1e-4;
  double main_lr = 5e-4;
  int pre_batch = 16;
  int main_batch = 32;
  int pre_epochs = 6;
  int main_epochs = 3;
  int pre_crop_frames = 200;
  int main_crop_frames = 120;
  int freeze_upto = -1;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  bool resample_pairs_each_epoch = false;
  bool save_epoch_checkpoints = false;
};

// One experiment: a JSON document with complete defaults; every CLI run
// is a pure function of this struct.
struct ExperimentConfig {
  uint64_t seed = 1;
  std::string out_dir = "runs/default";
  CorpusSpec corpus;
  FeatureConfig features;
  PairBudget pairs;
  bool resample_pairs_each_epoch = false;  // mirrored into TrainConfig use
  NetConfig net;
  TrainConfig train;

  // Throws ConfigError on any inconsistency; called before any work.
  void validate() const;

  std::string to_json() const;
  static ExperimentConfig defaults();
  static ExperimentConfig from_json(const std::string& text);
  static ExperimentConfig from_json_file(const std::filesystem::path& path);

  // Dotted-path override, e.g. "train.pre_lr=5e-4" or
  // "net.block_channels=[4,8,8]". Unknown keys are rejected.
  void apply_override(const std::string& key_eq_value);
};

}  // namespace acp
