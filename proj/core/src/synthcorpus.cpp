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

#include "acp/synthcorpus.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "acp/common.h"
#include "acp/rng.h"

namespace acp {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kSourceRms = 0.1;

double rms(const std::vector<double>& x) {
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return std::sqrt(acc / static_cast<double>(x.size()));
}

double mean_power(const std::vector<double>& x) {
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return acc / static_cast<double>(x.size());
}

// Linear-phase windowed-sinc lowpass, applied centered so the output is
// time-aligned with the input.
std::vector<double> fir_lowpass(const std::vector<double>& x, double cutoff_hz,
                                int sample_rate) {
  constexpr int kTaps = 101;
  constexpr int kHalf = kTaps / 2;
  const double fc = cutoff_hz / sample_rate;
  std::vector<double> h(kTaps);
  double sum = 0.0;
  for (int i = 0; i < kTaps; ++i) {
    const double t = i - kHalf;
    double v;
    if (t == 0.0) {
      v = 2.0 * fc;
    } else {
      v = std::sin(kTwoPi * fc * t) / (M_PI * t);
    }
    v *= 0.5 - 0.5 * std::cos(kTwoPi * i / (kTaps - 1));
    h[i] = v;
    sum += v;
  }
  for (double& v : h) v /= sum;  // unit DC gain

  std::vector<double> y(x.size(), 0.0);
  const ptrdiff_t n = static_cast<ptrdiff_t>(x.size());
  for (ptrdiff_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int j = 0; j < kTaps; ++j) {
      const ptrdiff_t k = i + j - kHalf;
      if (k >= 0 && k < n) acc += h[j] * x[k];
    }
    y[i] = acc;
  }
  return y;
}

struct SpeakerTraits {
  double f0;
  double tilt;
};

// Pitch and spectral tilt are a pure function of the speaker id, so every
// utterance of a speaker shares them while utterance-level randomness
// (jitter, vibrato, envelope, phases) comes from the per-call seed.
SpeakerTraits speaker_traits(uint64_t speaker_id) {
  Rng rng(mix_seed(speaker_id, 0x5eedULL));
  SpeakerTraits t;
  t.f0 = rng.uniform(95.0, 230.0);
  t.tilt = rng.uniform(0.8, 1.6);
  return t;
}

}  // namespace

void AcousticConfig::validate(int sample_rate) const {
  if (impulse_response.empty() || impulse_response.size() > 256) {
    throw ConfigError("impulse response must have 1..256 taps: " + id);
  }
  for (double tap : impulse_response) {
    if (!std::isfinite(tap)) {
      throw ConfigError("non-finite impulse response tap: " + id);
    }
  }
  if (noise_db && (*noise_db < 0.0 || *noise_db > 60.0)) {
    throw ConfigError("noise_db outside [0, 60]: " + id);
  }
  if (lowpass_hz && *lowpass_hz >= 0.5 * sample_rate) {
    throw ConfigError("lowpass cutoff at or above Nyquist: " + id);
  }
  if (!std::isfinite(gain_db)) throw ConfigError("non-finite gain: " + id);
}

void CorpusSpec::validate() const {
  if (n_speakers < 1 || configs_per_speaker < 1 || utterances_per_config < 1) {
    throw ConfigError("corpus counts must be at least 1");
  }
  if (utt_seconds_min <= 0.0 || utt_seconds_max < utt_seconds_min) {
    throw ConfigError("bad utterance duration range");
  }
  if (sample_rate <= 0) throw ConfigError("sample rate must be positive");
  if (pretrain_dev_fraction < 0.0 || pretrain_dev_fraction >= 1.0) {
    throw ConfigError("pretrain_dev_fraction must lie in [0, 1)");
  }
  if (main_train_speakers < 1 || main_dev_speakers < 1 ||
      main_eval_speakers < 1) {
    throw ConfigError("each main split needs at least one speaker");
  }
  if (bonafide_per_speaker < 1 || spoofs_per_bonafide < 0) {
    throw ConfigError("bad main-corpus utterance counts");
  }
}

Waveform make_source_utterance(uint64_t speaker_id, double seconds,
                               int sample_rate, uint64_t seed) {
  if (seconds <= 0.0 || sample_rate <= 0) {
    throw ContractError("make_source_utterance: bad duration or rate");
  }
  const SpeakerTraits spk = speaker_traits(speaker_id);
  Rng rng(seed);

  const double f0 = spk.f0 * (1.0 + 0.01 * rng.normal());  // utterance jitter
  const double vib_rate = rng.uniform(3.0, 7.0);
  const double vib_depth = rng.uniform(0.004, 0.02);
  const double vib_phase = rng.uniform(0.0, kTwoPi);
  const double am_rate = rng.uniform(1.8, 3.5);
  const double am_phase = rng.uniform(0.0, kTwoPi);
  const double am_power = rng.uniform(0.5, 2.0);

  const int n_harm =
      std::max(1, std::min(12, static_cast<int>(0.46 * sample_rate / f0)));
  std::vector<double> amp(n_harm), phase(n_harm);
  for (int k = 0; k < n_harm; ++k) {
    amp[k] = std::pow(static_cast<double>(k + 1), -spk.tilt);
    phase[k] = rng.uniform(0.0, kTwoPi);
  }

  const size_t n = static_cast<size_t>(std::llround(seconds * sample_rate));
  Waveform w;
  w.sample_rate = sample_rate;
  w.samples.resize(n);

  double inst_phase = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sample_rate;
    const double f =
        f0 * (1.0 + vib_depth * std::sin(kTwoPi * vib_rate * t + vib_phase));
    inst_phase += kTwoPi * f / sample_rate;
    double v = 0.0;
    for (int k = 0; k < n_harm; ++k) {
      v += amp[k] * std::sin((k + 1) * inst_phase + phase[k]);
    }
    const double env =
        0.25 + 0.75 * std::pow(0.5 + 0.5 * std::sin(kTwoPi * am_rate * t +
                                                    am_phase),
                               am_power);
    w.samples[i] = v * env;
  }

  const double scale = kSourceRms / rms(w.samples);
  for (double& v : w.samples) v *= scale;
  return w;
}

Waveform apply_channel(const Waveform& w, const AcousticConfig& c,
                       uint64_t seed) {
  c.validate(w.sample_rate);
  const size_t n = w.samples.size();
  const std::vector<double>& h = c.impulse_response;

  Waveform out;
  out.sample_rate = w.sample_rate;
  out.samples.assign(n, 0.0);
  // Convolution with the tail truncated to the input length.
  for (size_t i = 0; i < n; ++i) {
    const size_t k_max = std::min(h.size() - 1, i);
    double acc = 0.0;
    for (size_t k = 0; k <= k_max; ++k) acc += h[k] * w.samples[i - k];
    out.samples[i] = acc;
  }

  if (c.lowpass_hz) {
    out.samples = fir_lowpass(out.samples, *c.lowpass_hz, w.sample_rate);
  }

  const double gain = std::pow(10.0, c.gain_db / 20.0);
  if (gain != 1.0) {
    for (double& v : out.samples) v *= gain;
  }

  if (c.noise_db) {
    const double p_sig = mean_power(out.samples);
    if (p_sig > 0.0) {
      std::vector<double> noise(n);
      Rng rng(seed);
      for (double& v : noise) v = rng.normal();
      const double p_noise = mean_power(noise);
      const double target = p_sig / std::pow(10.0, *c.noise_db / 10.0);
      const double scale = std::sqrt(target / p_noise);
      for (size_t i = 0; i < n; ++i) out.samples[i] += scale * noise[i];
    }
  }
  return out;
}

Waveform simulate_replay(const Waveform& w, const AcousticConfig& playback,
                         const AcousticConfig& rerecord, uint64_t seed) {
  Waveform played = apply_channel(w, playback, mix_seed(seed, 1));
  return apply_channel(played, rerecord, mix_seed(seed, 2));
}

namespace {

std::string format_speaker(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "spk%04d", index);
  return buf;
}

AcousticConfig draw_recording_config(Rng& rng, std::string id,
                                     int sample_rate) {
  AcousticConfig c;
  c.id = std::move(id);
  const int n_taps = 4 + static_cast<int>(rng.below(45));
  const double rho = rng.uniform(0.45, 0.85);
  const double sigma = rng.uniform(0.15, 0.6);
  c.impulse_response.resize(n_taps);
  c.impulse_response[0] = 1.0;
  double decay = 1.0;
  for (int i = 1; i < n_taps; ++i) {
    decay *= rho;
    c.impulse_response[i] = sigma * decay * rng.normal();
  }
  double energy = 0.0;
  for (double t : c.impulse_response) energy += t * t;
  const double norm = 1.0 / std::sqrt(energy);
  for (double& t : c.impulse_response) t *= norm;

  c.noise_db = rng.uniform(30.0, 52.0);
  if (rng.bernoulli(0.5)) {
    c.lowpass_hz = rng.uniform(0.55, 0.95) * 0.5 * sample_rate;
  }
  c.gain_db = rng.uniform(-4.0, 4.0);
  return c;
}

// Playback devices are deliberately band-limited and noisier than the
// recording channels.
AcousticConfig draw_playback_config(Rng& rng, std::string id,
                                    int sample_rate) {
  AcousticConfig c;
  c.id = std::move(id);
  const int n_taps = 2 + static_cast<int>(rng.below(15));
  const double rho = rng.uniform(0.3, 0.7);
  const double sigma = rng.uniform(0.2, 0.7);
  c.impulse_response.resize(n_taps);
  c.impulse_response[0] = 1.0;
  double decay = 1.0;
  for (int i = 1; i < n_taps; ++i) {
    decay *= rho;
    c.impulse_response[i] = sigma * decay * rng.normal();
  }
  double energy = 0.0;
  for (double t : c.impulse_response) energy += t * t;
  const double norm = 1.0 / std::sqrt(energy);
  for (double& t : c.impulse_response) t *= norm;

  c.noise_db = rng.uniform(20.0, 38.0);
  c.lowpass_hz = rng.uniform(0.40, 0.80) * 0.5 * sample_rate;
  c.gain_db = rng.uniform(-6.0, 2.0);
  return c;
}

void write_configs_tsv(const std::filesystem::path& path,
                       const std::vector<AcousticConfig>& configs) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write configs file: " + path.string());
  char buf[64];
  for (const auto& c : configs) {
    f << c.id << '\t';
    for (size_t i = 0; i < c.impulse_response.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", c.impulse_response[i]);
      f << (i ? "," : "") << buf;
    }
    f << '\t';
    if (c.noise_db) {
      std::snprintf(buf, sizeof(buf), "%.17g", *c.noise_db);
      f << buf;
    } else {
      f << "none";
    }
    f << '\t';
    if (c.lowpass_hz) {
      std::snprintf(buf, sizeof(buf), "%.17g", *c.lowpass_hz);
      f << buf;
    } else {
      f << "none";
    }
    std::snprintf(buf, sizeof(buf), "%.17g", c.gain_db);
    f << '\t' << buf << '\n';
  }
  if (!f) throw DataError("short write: " + path.string());
}

}  // namespace

GeneratedCorpus generate_corpus(const CorpusSpec& spec,
                                const std::filesystem::path& out_dir) {
  spec.validate();
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "wav", ec);
  if (ec) {
    throw DataError("cannot create corpus directory " + out_dir.string() +
                    ": " + ec.message());
  }

  GeneratedCorpus corpus;
  corpus.root = out_dir;

  auto utt_seed = [&](const std::string& utt_id) {
    return mix_seed(spec.seed, hash_str(utt_id));
  };
  auto speaker_uid = [&](int global_index) {
    return mix_seed(spec.seed, 0x500 + static_cast<uint64_t>(global_index));
  };

  auto synth_and_write = [&](const ManifestEntry& e, const Waveform& wav) {
    write_wav(out_dir / e.path, wav);
  };

  // --- pre-training corpus ---------------------------------------------
  int dev_speakers = 0;
  if (spec.n_speakers >= 2) {
    dev_speakers = std::clamp(
        static_cast<int>(std::lround(spec.pretrain_dev_fraction *
                                     spec.n_speakers)),
        spec.pretrain_dev_fraction > 0.0 ? 1 : 0, spec.n_speakers - 1);
  }
  const int train_speakers = spec.n_speakers - dev_speakers;

  for (int s = 0; s < spec.n_speakers; ++s) {
    const uint64_t uid = speaker_uid(s);
    const std::string spk = format_speaker(s);
    const Split split = s < train_speakers ? Split::train : Split::dev;

    Rng cfg_rng(mix_seed(spec.seed, 0xC0F000 + static_cast<uint64_t>(s)));
    std::vector<std::string> config_ids;
    for (int j = 0; j < spec.configs_per_speaker; ++j) {
      char cid[32];
      std::snprintf(cid, sizeof(cid), "cfg_s%04d_%d", s, j);
      corpus.configs.push_back(
          draw_recording_config(cfg_rng, cid, spec.sample_rate));
      config_ids.push_back(cid);
    }

    for (int j = 0; j < spec.configs_per_speaker; ++j) {
      const AcousticConfig& cfg =
          corpus.configs[corpus.configs.size() - spec.configs_per_speaker + j];
      for (int u = 0; u < spec.utterances_per_config; ++u) {
        char uttbuf[48];
        std::snprintf(uttbuf, sizeof(uttbuf), "p_s%04d_c%d_u%02d", s, j, u);
        ManifestEntry e;
        e.utt_id = uttbuf;
        e.speaker_id = spk;
        e.config_id = config_ids[j];
        e.cls = TrialClass::bonafide;
        e.split = split;
        e.path = "wav/" + e.utt_id + ".wav";

        const uint64_t us = utt_seed(e.utt_id);
        const double dur = Rng(mix_seed(us, 1))
                               .uniform(spec.utt_seconds_min,
                                        spec.utt_seconds_max);
        Waveform src = make_source_utterance(uid, dur, spec.sample_rate,
                                             mix_seed(us, 2));
        Waveform rec = apply_channel(src, cfg, mix_seed(us, 3));
        synth_and_write(e, rec);
        corpus.pretrain.entries.push_back(std::move(e));
      }
    }
  }

  // --- playback-device pool for replay simulation ----------------------
  constexpr int kPlaybackPool = 6;
  Rng pb_rng(mix_seed(spec.seed, hash_str("playback-pool")));
  std::vector<AcousticConfig> playback;
  for (int i = 0; i < kPlaybackPool; ++i) {
    char pid[16];
    std::snprintf(pid, sizeof(pid), "pb%d", i);
    playback.push_back(draw_playback_config(pb_rng, pid, spec.sample_rate));
    corpus.configs.push_back(playback.back());
  }

  // --- main (spoofing detection) corpus --------------------------------
  const int main_total = spec.main_train_speakers + spec.main_dev_speakers +
                         spec.main_eval_speakers;
  for (int ms = 0; ms < main_total; ++ms) {
    const int global_index = spec.n_speakers + ms;
    const uint64_t uid = speaker_uid(global_index);
    const std::string spk = format_speaker(global_index);
    Split split = Split::train;
    if (ms >= spec.main_train_speakers) split = Split::dev;
    if (ms >= spec.main_train_speakers + spec.main_dev_speakers) {
      split = Split::eval;
    }

    char mic_id[32];
    std::snprintf(mic_id, sizeof(mic_id), "mic_s%04d", global_index);
    Rng cfg_rng(
        mix_seed(spec.seed, 0x31C000 + static_cast<uint64_t>(global_index)));
    AcousticConfig mic =
        draw_recording_config(cfg_rng, mic_id, spec.sample_rate);
    corpus.configs.push_back(mic);

    Rng spoof_rng(
        mix_seed(spec.seed, 0x0DD000 + static_cast<uint64_t>(global_index)));

    for (int u = 0; u < spec.bonafide_per_speaker; ++u) {
      char uttbuf[48];
      std::snprintf(uttbuf, sizeof(uttbuf), "m_s%04d_u%02d", global_index, u);
      const std::string utt = uttbuf;

      const uint64_t us = utt_seed(utt);
      const double dur = Rng(mix_seed(us, 1))
                             .uniform(spec.utt_seconds_min,
                                      spec.utt_seconds_max);
      Waveform src =
          make_source_utterance(uid, dur, spec.sample_rate, mix_seed(us, 2));

      ManifestEntry bona;
      bona.utt_id = utt;
      bona.speaker_id = spk;
      bona.config_id = mic_id;
      bona.cls = TrialClass::bonafide;
      bona.split = split;
      bona.path = "wav/" + utt + ".wav";
      synth_and_write(bona, apply_channel(src, mic, mix_seed(us, 3)));
      corpus.main.entries.push_back(std::move(bona));

      // Replays of the same source speech: the class signal is purely
      // the extra playback channel.
      for (int r = 0; r < spec.spoofs_per_bonafide; ++r) {
        const auto& pb = playback[spoof_rng.below(playback.size())];
        ManifestEntry sp;
        char spoofbuf[64];
        std::snprintf(spoofbuf, sizeof(spoofbuf), "%s_r%02d", utt.c_str(), r);
        sp.utt_id = spoofbuf;
        sp.speaker_id = spk;
        sp.config_id = pb.id + "+" + mic_id;
        sp.cls = TrialClass::spoof;
        sp.split = split;
        sp.path = "wav/" + sp.utt_id + ".wav";
        synth_and_write(
            sp, simulate_replay(src, pb, mic, mix_seed(utt_seed(sp.utt_id), 4)));
        corpus.main.entries.push_back(std::move(sp));
      }
    }
  }

  corpus.pretrain.validate();
  corpus.main.validate();
  write_manifest(out_dir / "pretrain.tsv", corpus.pretrain);
  write_manifest(out_dir / "main.tsv", corpus.main);
  write_configs_tsv(out_dir / "configs.tsv", corpus.configs);
  return corpus;
}

}  // namespace acp
