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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "acp/wav.h"

namespace acp {

// Magnitude-spectrogram framing parameters.
//
// Frames are laid out without edge padding: frame t covers samples
// [t*shift, t*shift + window), the window is tapered and zero-padded to
// fft_size, and the frame count is floor((len - window) / shift) + 1.
struct FrameParams {
  int fft_size = 2048;
  double window_ms = 50.0;
  double shift_ms = 30.0;
  std::string window_fn = "hann";  // "hann" (periodic), "hamming", "rect"

  int window_samples(int sample_rate) const;
  int shift_samples(int sample_rate) const;
  int bins() const { return fft_size / 2 + 1; }

  // Throws ConfigError unless: fft_size is a power of two, at least one
  // window fits in it, and 1 <= shift <= window.
  void validate(int sample_rate) const;
};

// frames x bins matrix of non-negative magnitudes, row-major by frame.
struct Spectrogram {
  size_t frames = 0;
  size_t bins = 0;
  std::vector<float> data;

  Spectrogram() = default;
  Spectrogram(size_t n_frames, size_t n_bins)
      : frames(n_frames), bins(n_bins), data(n_frames * n_bins, 0.0f) {}

  float& at(size_t t, size_t b) { return data[t * bins + b]; }
  float at(size_t t, size_t b) const { return data[t * bins + b]; }
};

// |DFT| of tapered, zero-padded frames. Throws DataError when the
// waveform is shorter than one window.
Spectrogram stft_magnitude(const Waveform& w, const FrameParams& p);

enum class CropMode { random, center, tile };

// Fixed-length crop along the frame axis. Sources shorter than n_frames
// are tiled cyclically regardless of the requested mode. Random mode
// draws the start offset from Rng(seed).
Spectrogram crop_frames(const Spectrogram& s, size_t n_frames, CropMode mode,
                        uint64_t seed = 0);

// Crop at an explicit start offset; wraps cyclically past the end.
Spectrogram crop_at(const Spectrogram& s, size_t n_frames, size_t start);

// In-place log(1 + x) compression, optional feature post-processing.
void log_compress(Spectrogram& s);

// Binary spectrogram dump: magic "ACSPEC1", then frames and bins as
// 64-bit unsigned little-endian, then row-major float32 little-endian.
void write_spectrogram(const std::filesystem::path& path,
                       const Spectrogram& s);
Spectrogram read_spectrogram(const std::filesystem::path& path);

}  // namespace acp
