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

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "acp/config.h"
#include "acp/manifest.h"

namespace acp {

// Canonical layout under an experiment's out_dir.
struct RunPaths {
  std::filesystem::path root;
  std::filesystem::path corpus_dir;     // corpus/   wavs + manifests
  std::filesystem::path pretrain_dir;   // pretrain/ checkpoints + pair lists
  std::filesystem::path maintrain_dir;  // maintrain/ checkpoints
  std::filesystem::path eval_dir;       // eval/     score + DET files
  std::filesystem::path log_file;       // log.txt   (the only timestamps)

  static RunPaths under(const std::filesystem::path& out_dir);
  void create() const;
};

struct PretrainResult {
  std::filesystem::path best_checkpoint;
  std::filesystem::path last_checkpoint;
  std::vector<double> train_losses;  // per epoch, mean pair loss
  std::vector<double> dev_losses;
  int best_epoch = 0;
};

struct MaintrainResult {
  std::filesystem::path best_checkpoint;
  std::filesystem::path last_checkpoint;
  std::vector<double> train_losses;  // per epoch, mean cross-entropy
  std::vector<double> dev_eers;
  int best_epoch = 0;
  double best_dev_eer = 1.0;
};

struct EvalOutcome {
  double eer = 1.0;
  double threshold = 0.0;
  int n_failures = 0;
  std::filesystem::path score_file;
  std::filesystem::path det_file;
};

// Phase 0: synthesize the corpus into <out_dir>/corpus.
void run_gen_data(const ExperimentConfig& cfg);

// Phase 1: self-supervised pair training on the embedding prefix.
// Writes best/last checkpoints plus the sampled pair lists.
PretrainResult run_pretrain(const ExperimentConfig& cfg);

// Phase 2: supervised spoofing classification, optionally initialized
// from a phase-1 checkpoint (with cfg.train.freeze_upto applied).
MaintrainResult run_maintrain(
    const ExperimentConfig& cfg,
    const std::optional<std::filesystem::path>& init_checkpoint);

// Scores one split with a saved checkpoint and reports its EER.
EvalOutcome run_eval(const ExperimentConfig& cfg,
                     const std::filesystem::path& checkpoint, Split split);

struct GridOutcome {
  int n_cells = 0;
  int n_failed = 0;
  std::filesystem::path csv_file;
  std::filesystem::path table_file;
};

// Experiment grids over one axis: "lr-grid", "data-scale",
// "pair-doubling" or "init-mode". Cell failures are recorded and the
// grid continues.
GridOutcome run_grid(const ExperimentConfig& cfg, const std::string& axis);

}  // namespace acp
