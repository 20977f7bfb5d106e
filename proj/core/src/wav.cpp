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

#include "acp/wav.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "acp/common.h"

namespace acp {

namespace {

uint32_t read_u32(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | static_cast<uint32_t>(p[1]) << 8 |
         static_cast<uint32_t>(p[2]) << 16 | static_cast<uint32_t>(p[3]) << 24;
}

uint16_t read_u16(const uint8_t* p) {
  return static_cast<uint16_t>(p[0] | p[1] << 8);
}

void put_u32(std::string& out, uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_u16(std::string& out, uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

}  // namespace

Waveform read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open wav file: " + path.string());
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  if (bytes.size() < 44) throw FormatError("wav too short: " + path.string());
  if (std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw FormatError("not a RIFF/WAVE file: " + path.string());
  }

  // Walk chunks; require one fmt and one data chunk.
  bool have_fmt = false;
  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t sample_rate = 0;
  const uint8_t* data_ptr = nullptr;
  uint32_t data_len = 0;

  size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const uint8_t* hdr = bytes.data() + pos;
    uint32_t chunk_len = read_u32(hdr + 4);
    size_t body = pos + 8;
    if (body + chunk_len > bytes.size()) {
      throw FormatError("truncated wav chunk: " + path.string());
    }
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (chunk_len < 16) throw FormatError("short fmt chunk: " + path.string());
      format = read_u16(bytes.data() + body);
      channels = read_u16(bytes.data() + body + 2);
      sample_rate = read_u32(bytes.data() + body + 4);
      bits = read_u16(bytes.data() + body + 14);
      have_fmt = true;
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      data_ptr = bytes.data() + body;
      data_len = chunk_len;
    }
    pos = body + chunk_len + (chunk_len & 1);  // chunks are word-aligned
  }

  if (!have_fmt || data_ptr == nullptr) {
    throw FormatError("missing fmt or data chunk: " + path.string());
  }
  if (format != 1) {
    throw UnsupportedError("unsupported wav codec (want PCM): " +
                           path.string());
  }
  if (bits != 16 && bits != 32) {
    throw UnsupportedError("unsupported PCM bit depth " + std::to_string(bits) +
                           ": " + path.string());
  }
  if (channels != 1 && channels != 2) {
    throw UnsupportedError("unsupported channel count " +
                           std::to_string(channels) + ": " + path.string());
  }
  if (sample_rate == 0) throw FormatError("zero sample rate: " + path.string());

  const uint32_t bytes_per_sample = bits / 8;
  const uint32_t frame_size = bytes_per_sample * channels;
  if (frame_size == 0 || data_len < frame_size) {
    throw DataError("empty wav data: " + path.string());
  }
  const size_t n = data_len / frame_size;

  Waveform w;
  w.sample_rate = static_cast<int>(sample_rate);
  w.samples.resize(n);
  for (size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (uint16_t c = 0; c < channels; ++c) {
      const uint8_t* sp = data_ptr + i * frame_size + c * bytes_per_sample;
      if (bits == 16) {
        int16_t v;
        std::memcpy(&v, sp, 2);
        acc += static_cast<double>(v) / 32768.0;
      } else {
        int32_t v;
        std::memcpy(&v, sp, 4);
        acc += static_cast<double>(v) / 2147483648.0;
      }
    }
    w.samples[i] = acc / channels;
  }
  return w;
}

void write_wav(const std::filesystem::path& path, const Waveform& w) {
  if (w.samples.empty() || w.sample_rate <= 0) {
    throw ContractError("write_wav: empty waveform or bad sample rate");
  }
  const uint32_t n = static_cast<uint32_t>(w.samples.size());
  const uint32_t data_len = n * 2;

  std::string out;
  out.reserve(44 + data_len);
  out.append("RIFF");
  put_u32(out, 36 + data_len);
  out.append("WAVE");
  out.append("fmt ");
  put_u32(out, 16);
  put_u16(out, 1);  // PCM
  put_u16(out, 1);  // mono
  put_u32(out, static_cast<uint32_t>(w.sample_rate));
  put_u32(out, static_cast<uint32_t>(w.sample_rate) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out.append("data");
  put_u32(out, data_len);
  for (double x : w.samples) {
    double clipped = std::clamp(x, -1.0, 1.0);
    int16_t q = static_cast<int16_t>(std::lround(clipped * 32767.0));
    put_u16(out, static_cast<uint16_t>(q));
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write wav file: " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw DataError("short write: " + path.string());
}

}  // namespace acp
