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
#include <vector>

namespace acp {

// Mono audio. Samples live in [-1, 1]; integer PCM is normalized by the
// full scale of its type on read (PCM16 by 32768, PCM32 by 2^31).
struct Waveform {
  std::vector<double> samples;
  int sample_rate = 0;

  double duration_seconds() const {
    return sample_rate > 0
               ? static_cast<double>(samples.size()) / sample_rate
               : 0.0;
  }
};

// Reads a RIFF/WAVE file. PCM16 and PCM32 little-endian are accepted;
// stereo is downmixed by averaging the two channels.
Waveform read_wav(const std::filesystem::path& path);

// Writes mono PCM16 little-endian. Samples are clipped to [-1, 1] and
// quantized with round-to-nearest at full scale 32767.
void write_wav(const std::filesystem::path& path, const Waveform& w);

}  // namespace acp
