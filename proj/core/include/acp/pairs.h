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

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "acp/manifest.h"

namespace acp {

// A pair of fixed-length segment crops with its self-supervision label.
// Pairs are stored as indices (utterance ids plus frame offsets), never
// as copied audio. label is +1 iff both crops come from one utterance;
// both utterances always share a speaker.
struct SegmentPair {
  std::string utt_a;
  std::string utt_b;
  size_t offset_a = 0;
  size_t offset_b = 0;
  int label = 0;  // +1 or -1
  std::string speaker_id;
};

struct PairBudget {
  int pairs_per_speaker = 100;
  double target_fraction = 0.5;
  uint64_t seed = 1;

  void validate() const;
};

// +1 iff the two ids name the same utterance. Throws ContractError when
// the utterances belong to different speakers: cross-speaker pairs would
// leak speaker identity into the pretext task.
int pair_label(const Manifest& m, const std::string& utt_a_id,
               const std::string& utt_b_id);

// Frame count per utterance id, supplied by the caller (normally the
// length of the cached spectrogram).
using FrameCountFn = std::function<size_t(const std::string& utt_id)>;

// Balanced per-speaker sampling over one split of the manifest. Exactly
// pairs_per_speaker pairs per speaker, of which
// round(target_fraction * pairs_per_speaker) are positives; positives use
// two distinct offsets within one utterance. Throws DataError, naming the
// speaker, when a speaker has fewer than two utterances.
std::vector<SegmentPair> sample_pairs(const Manifest& m, Split split,
                                      const PairBudget& budget,
                                      const FrameCountFn& frame_count,
                                      size_t crop_frames);

// UTF-8 lines: utt_a \t offset_a \t utt_b \t offset_b \t label
void write_pairs(const std::filesystem::path& path,
                 const std::vector<SegmentPair>& pairs);
std::vector<SegmentPair> read_pairs(const std::filesystem::path& path);

}  // namespace acp
