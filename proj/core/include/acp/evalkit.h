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
#include <string>
#include <vector>

#include "acp/dsp.h"
#include "acp/manifest.h"
#include "acp/network.h"

namespace acp {

// One scored trial. Higher scores mean "more bona-fide".
struct ScoreRecord {
  std::string trial_id;
  TrialClass truth = TrialClass::bonafide;
  double score = 0.0;
};

struct ScoreSet {
  std::vector<ScoreRecord> records;

  // Throws on duplicate ids, non-finite scores, or a missing class.
  void validate() const;
};

struct EerResult {
  double eer = 0.0;       // fraction in [0, 1]
  double threshold = 0.0;
};

// Equal error rate with FAR(t) = fraction of spoof scores >= t and
// FRR(t) = fraction of bona-fide scores < t, swept over score midpoints
// and linearly interpolated at the FAR/FRR crossing. Ties at the
// threshold count as accept. Throws NumericError when only one class is
// present.
EerResult compute_eer(const ScoreSet& s);

struct ScoringOptions {
  FrameParams frame;
  bool log_compress = false;
};

struct ScoringResult {
  ScoreSet scores;
  int n_failures = 0;  // utterances shorter than one analysis window
};

// Scores every utterance of the split on its full (uncropped)
// spectrogram with an infer-mode forward pass:
// score = logit(bonafide) - logit(spoof).
ScoringResult score_trials(Network<float>& net, const Manifest& m, Split split,
                           const std::filesystem::path& corpus_root,
                           const ScoringOptions& opts);

// UTF-8 lines "trial_id \t truth \t score", score at 9 significant
// digits.
void write_scores(const std::filesystem::path& path, const ScoreSet& s);
ScoreSet read_scores(const std::filesystem::path& path);

// DET curve dump: one "threshold,far,frr" CSV row per operating point.
void write_det_csv(const std::filesystem::path& path, const ScoreSet& s);

}  // namespace acp
