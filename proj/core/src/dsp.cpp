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

#include "acp/dsp.h"

#include <cmath>
#include <complex>
#include <cstring>
#include <fstream>

#include "acp/common.h"
#include "acp/rng.h"

namespace acp {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

// In-place iterative radix-2 FFT, decimation in time.
void fft(std::vector<std::complex<double>>& a) {
  const size_t n = a.size();
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const double ang = -kTwoPi / static_cast<double>(len);
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (size_t k = 0; k < len / 2; ++k) {
        std::complex<double> u = a[i + k];
        std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

std::vector<double> make_window(const std::string& name, int len) {
  std::vector<double> w(len, 1.0);
  if (name == "rect") return w;
  if (name == "hann") {
    for (int i = 0; i < len; ++i) {
      w[i] = 0.5 - 0.5 * std::cos(kTwoPi * i / len);  // periodic
    }
    return w;
  }
  if (name == "hamming") {
    for (int i = 0; i < len; ++i) {
      w[i] = 0.54 - 0.46 * std::cos(kTwoPi * i / len);
    }
    return w;
  }
  throw ConfigError("unknown window function: " + name);
}

}  // namespace

int FrameParams::window_samples(int sample_rate) const {
  return static_cast<int>(std::llround(window_ms * 1e-3 * sample_rate));
}

int FrameParams::shift_samples(int sample_rate) const {
  return static_cast<int>(std::llround(shift_ms * 1e-3 * sample_rate));
}

void FrameParams::validate(int sample_rate) const {
  if (sample_rate <= 0) throw ConfigError("sample rate must be positive");
  if (!is_pow2(fft_size)) {
    throw ConfigError("fft_size must be a power of two, got " +
                      std::to_string(fft_size));
  }
  const int win = window_samples(sample_rate);
  const int shift = shift_samples(sample_rate);
  if (win <= 0 || shift <= 0) {
    throw ConfigError("window and shift must be at least one sample");
  }
  if (shift > win) throw ConfigError("shift_ms must not exceed window_ms");
  if (fft_size < win) {
    throw ConfigError("fft_size " + std::to_string(fft_size) +
                      " is smaller than the window of " + std::to_string(win) +
                      " samples");
  }
  make_window(window_fn, win);  // rejects unknown names
}

Spectrogram stft_magnitude(const Waveform& w, const FrameParams& p) {
  p.validate(w.sample_rate);
  const int win = p.window_samples(w.sample_rate);
  const int shift = p.shift_samples(w.sample_rate);
  const size_t len = w.samples.size();
  if (len < static_cast<size_t>(win)) {
    throw DataError("waveform shorter than one window (" +
                    std::to_string(len) + " < " + std::to_string(win) + ")");
  }
  const size_t n_frames = (len - win) / shift + 1;
  const size_t n_bins = static_cast<size_t>(p.bins());
  const std::vector<double> taper = make_window(p.window_fn, win);

  Spectrogram out(n_frames, n_bins);
  std::vector<std::complex<double>> buf(static_cast<size_t>(p.fft_size));
  for (size_t t = 0; t < n_frames; ++t) {
    const double* src = w.samples.data() + t * shift;
    for (int i = 0; i < win; ++i) buf[i] = src[i] * taper[i];
    std::fill(buf.begin() + win, buf.end(), std::complex<double>(0.0, 0.0));
    fft(buf);
    float* row = out.data.data() + t * n_bins;
    for (size_t b = 0; b < n_bins; ++b) {
      row[b] = static_cast<float>(std::abs(buf[b]));
    }
  }
  return out;
}

Spectrogram crop_at(const Spectrogram& s, size_t n_frames, size_t start) {
  if (s.frames == 0) throw ContractError("crop_at: empty spectrogram");
  if (n_frames == 0) throw ContractError("crop_at: n_frames must be positive");
  Spectrogram out(n_frames, s.bins);
  for (size_t i = 0; i < n_frames; ++i) {
    const size_t src = (start + i) % s.frames;
    std::memcpy(out.data.data() + i * s.bins, s.data.data() + src * s.bins,
                s.bins * sizeof(float));
  }
  return out;
}

Spectrogram crop_frames(const Spectrogram& s, size_t n_frames, CropMode mode,
                        uint64_t seed) {
  if (s.frames == 0) throw ContractError("crop_frames: empty spectrogram");
  if (n_frames == 0) {
    throw ContractError("crop_frames: n_frames must be positive");
  }
  if (s.frames < n_frames) mode = CropMode::tile;  // tiling is forced

  size_t start = 0;
  switch (mode) {
    case CropMode::center:
      start = (s.frames - n_frames) / 2;
      break;
    case CropMode::random: {
      Rng rng(seed);
      // With a longer source the crop stays inside [0, frames); with a
      // shorter one any cyclic rotation is a valid start.
      const size_t span =
          s.frames >= n_frames ? s.frames - n_frames + 1 : s.frames;
      start = rng.below(span);
      break;
    }
    case CropMode::tile:
      start = 0;
      break;
  }
  return crop_at(s, n_frames, start);
}

void log_compress(Spectrogram& s) {
  for (float& v : s.data) v = std::log1p(v);
}

void write_spectrogram(const std::filesystem::path& path,
                       const Spectrogram& s) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write spectrogram: " + path.string());
  f.write("ACSPEC1", 7);
  uint64_t dims[2] = {s.frames, s.bins};
  f.write(reinterpret_cast<const char*>(dims), sizeof(dims));
  f.write(reinterpret_cast<const char*>(s.data.data()),
          static_cast<std::streamsize>(s.data.size() * sizeof(float)));
  if (!f) throw DataError("short write: " + path.string());
}

Spectrogram read_spectrogram(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open spectrogram: " + path.string());
  char magic[7];
  if (!f.read(magic, 7) || std::memcmp(magic, "ACSPEC1", 7) != 0) {
    throw FormatError("bad spectrogram magic: " + path.string());
  }
  uint64_t dims[2];
  if (!f.read(reinterpret_cast<char*>(dims), sizeof(dims))) {
    throw FormatError("truncated spectrogram header: " + path.string());
  }
  Spectrogram s(dims[0], dims[1]);
  if (!f.read(reinterpret_cast<char*>(s.data.data()),
              static_cast<std::streamsize>(s.data.size() * sizeof(float)))) {
    throw FormatError("truncated spectrogram payload: " + path.string());
  }
  return s;
}

}  // namespace acp
