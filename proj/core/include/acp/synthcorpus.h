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
#include <optional>
#include <string>
#include <vector>

#include "acp/manifest.h"
#include "acp/wav.h"

namespace acp {

// One simulated recording channel: impulse response, additive noise at a
// target SNR, optional band limit, and gain. These are the knobs behind
// every "acoustic configuration" in the corpus.
struct AcousticConfig {
  std::string id;
  std::vector<double> impulse_response;  // <= 256 taps, non-empty
  std::optional<double> noise_db;        // SNR in [0, 60]; nullopt = clean
  std::optional<double> lowpass_hz;      // must stay below Nyquist
  double gain_db = 0.0;

  void validate(int sample_rate) const;
};

// Scale knobs for the generated corpus. n_speakers controls the
// pre-training side: n_speakers * configs_per_speaker *
// utterances_per_config utterances, split train/dev by speaker. The
// main_* fields size the spoofing-detection side, whose speakers are
// disjoint from the pre-training ones and from each other across splits.
struct CorpusSpec {
  int n_speakers = 20;
  int configs_per_speaker = 4;
  int utterances_per_config = 4;
  double utt_seconds_min = 1.6;
  double utt_seconds_max = 3.2;
  int sample_rate = 8000;
  uint64_t seed = 1;

  double pretrain_dev_fraction = 0.2;

  int main_train_speakers = 10;
  int main_dev_speakers = 4;
  int main_eval_speakers = 6;
  int bonafide_per_speaker = 4;
  int spoofs_per_bonafide = 9;

  void validate() const;
};

// Deterministic per (speaker_id, seed). The speaker's base pitch and
// spectral tilt depend only on speaker_id; jitter, vibrato and the
// amplitude envelope come from the seed, so distinct utterances of one
// speaker differ. Output RMS is normalized to 0.1.
Waveform make_source_utterance(uint64_t speaker_id, double seconds,
                               int sample_rate, uint64_t seed);

// One simulated recording pass: convolution with the impulse response
// (tail truncated to the input length), optional linear-phase lowpass,
// gain, then noise drawn from Rng(seed) and scaled so that the
// signal-to-noise ratio equals noise_db exactly.
Waveform apply_channel(const Waveform& w, const AcousticConfig& c,
                       uint64_t seed);

// Replay spoofing as two sequential channel passes (playback device,
// then re-recording channel).
Waveform simulate_replay(const Waveform& w, const AcousticConfig& playback,
                         const AcousticConfig& rerecord, uint64_t seed);

struct GeneratedCorpus {
  Manifest pretrain;
  Manifest main;
  std::vector<AcousticConfig> configs;  // every channel used, by id
  std::filesystem::path root;
};

// Writes WAV files plus pretrain.tsv, main.tsv and configs.tsv under
// out_dir. Fully deterministic from spec.seed: regenerating into a fresh
// directory yields byte-identical files.
GeneratedCorpus generate_corpus(const CorpusSpec& spec,
                                const std::filesystem::path& out_dir);

}  // namespace acp
