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

#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "acp/common.h"
#include "acp/dsp.h"
#include "acp/synthcorpus.h"
#include "test_util.h"

using namespace acp;

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

double rms(const std::vector<double>& x) {
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return std::sqrt(acc / x.size());
}

double mean_power(const std::vector<double>& x) {
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return acc / x.size();
}

AcousticConfig identity_config(std::optional<double> noise_db = {}) {
  AcousticConfig c;
  c.id = "identity";
  c.impulse_response = {1.0};
  c.noise_db = noise_db;
  return c;
}

// Harmonic-rich test source with energy across the whole band.
Waveform broadband_source(int rate, double seconds) {
  Waveform w;
  w.sample_rate = rate;
  const size_t n = static_cast<size_t>(seconds * rate);
  w.samples.assign(n, 0.0);
  for (int k = 1; k <= 18; ++k) {
    const double f = 200.0 * k;
    if (f >= 0.49 * rate) break;
    for (size_t i = 0; i < n; ++i) {
      w.samples[i] += std::sin(kTwoPi * f * i / rate + 0.3 * k) / k;
    }
  }
  const double scale = 0.1 / rms(w.samples);
  for (double& v : w.samples) v *= scale;
  return w;
}

}  // namespace

TEST_CASE("source utterances are deterministic and speaker-specific") {
  Waveform a = make_source_utterance(1, 1.5, 8000, 42);
  Waveform b = make_source_utterance(1, 1.5, 8000, 42);
  REQUIRE(a.samples == b.samples);

  Waveform c = make_source_utterance(2, 1.5, 8000, 42);
  CHECK(a.samples != c.samples);

  Waveform d = make_source_utterance(1, 1.5, 8000, 43);
  CHECK(a.samples != d.samples);  // same speaker, new utterance seed
}

TEST_CASE("source utterance RMS is normalized to 0.1") {
  for (uint64_t spk : {1ull, 9ull, 77ull}) {
    Waveform w = make_source_utterance(spk, 2.0, 8000, spk * 31);
    CHECK(std::fabs(rms(w.samples) - 0.1) < 1e-6);
  }
}

TEST_CASE("identity channel at 60 dB SNR stays within the noise floor") {
  Waveform src = broadband_source(8000, 1.0);
  Waveform out = apply_channel(src, identity_config(60.0), 5);
  REQUIRE(out.samples.size() == src.samples.size());
  // Noise RMS is 1e-3 of signal RMS (0.1), so deviations stay well
  // under 1e-3.
  double max_dev = 0.0;
  for (size_t i = 0; i < src.samples.size(); ++i) {
    max_dev = std::max(max_dev, std::fabs(out.samples[i] - src.samples[i]));
  }
  CHECK(max_dev > 0.0);
  CHECK(max_dev < 1e-3);
}

TEST_CASE("noiseless identity channel is exact and gain halves amplitudes") {
  Waveform src = broadband_source(8000, 0.7);
  Waveform same = apply_channel(src, identity_config(), 1);
  REQUIRE(same.samples == src.samples);

  AcousticConfig gain = identity_config();
  gain.gain_db = -6.0206;  // 10^(-6.0206/20) = 0.5 to within 2.4e-9
  Waveform half = apply_channel(src, gain, 1);
  double max_dev = 0.0;
  for (size_t i = 0; i < src.samples.size(); ++i) {
    max_dev =
        std::max(max_dev, std::fabs(half.samples[i] - 0.5 * src.samples[i]));
  }
  CHECK(max_dev < 1e-9);
}

TEST_CASE("injected noise realizes the requested SNR") {
  Waveform src = broadband_source(8000, 1.0);
  for (double snr : {10.0, 20.0, 40.0}) {
    Waveform out = apply_channel(src, identity_config(snr), 99);
    std::vector<double> noise(out.samples.size());
    for (size_t i = 0; i < noise.size(); ++i) {
      noise[i] = out.samples[i] - src.samples[i];
    }
    const double measured =
        10.0 * std::log10(mean_power(src.samples) / mean_power(noise));
    CHECK(std::fabs(measured - snr) < 0.5);
  }
}

TEST_CASE("replay through identity channels is the identity") {
  Waveform src = broadband_source(8000, 0.5);
  Waveform out = simulate_replay(src, identity_config(), identity_config(), 7);
  double max_dev = 0.0;
  for (size_t i = 0; i < src.samples.size(); ++i) {
    max_dev = std::max(max_dev, std::fabs(out.samples[i] - src.samples[i]));
  }
  CHECK(max_dev < 1e-9);

  Waveform again =
      simulate_replay(src, identity_config(), identity_config(), 7);
  REQUIRE(out.samples == again.samples);
}

TEST_CASE("a band-limited playback device leaves less high-band energy") {
  const int rate = 8000;
  Waveform src = broadband_source(rate, 1.2);

  AcousticConfig playback = identity_config();
  playback.lowpass_hz = 1500.0;
  Waveform bona = apply_channel(src, identity_config(), 3);
  Waveform spoof = simulate_replay(src, playback, identity_config(), 3);

  FrameParams p;
  p.fft_size = 512;
  Spectrogram sb = stft_magnitude(bona, p);
  Spectrogram ss = stft_magnitude(spoof, p);
  // Energy above the cutoff: bin b covers b * rate / fft_size Hz.
  const size_t first_bin =
      static_cast<size_t>(std::ceil(1500.0 * p.fft_size / rate)) + 1;
  double eb = 0.0, es = 0.0;
  for (size_t t = 0; t < sb.frames; ++t) {
    for (size_t b = first_bin; b < sb.bins; ++b) {
      eb += static_cast<double>(sb.at(t, b)) * sb.at(t, b);
      es += static_cast<double>(ss.at(t, b)) * ss.at(t, b);
    }
  }
  CHECK(es < eb);
  CHECK(es < 0.05 * eb);
}

TEST_CASE("acoustic configs are validated") {
  AcousticConfig c = identity_config();
  c.impulse_response.clear();
  CHECK_THROWS_AS(c.validate(8000), ConfigError);

  c = identity_config(70.0);  // SNR above 60
  CHECK_THROWS_AS(c.validate(8000), ConfigError);

  c = identity_config();
  c.lowpass_hz = 4000.0;  // at Nyquist
  CHECK_THROWS_AS(c.validate(8000), ConfigError);

  c = identity_config();
  c.lowpass_hz = 3000.0;
  CHECK_NOTHROW(c.validate(8000));
}

namespace {

CorpusSpec small_spec() {
  CorpusSpec spec;
  spec.n_speakers = 10;
  spec.configs_per_speaker = 4;
  spec.utterances_per_config = 5;
  spec.utt_seconds_min = 0.6;
  spec.utt_seconds_max = 1.0;
  spec.sample_rate = 8000;
  spec.seed = 77;
  spec.main_train_speakers = 2;
  spec.main_dev_speakers = 1;
  spec.main_eval_speakers = 1;
  spec.bonafide_per_speaker = 2;
  spec.spoofs_per_bonafide = 9;
  return spec;
}

}  // namespace

TEST_CASE("generated corpus has the specified structure") {
  acptest::TempDir tmp("corpus_struct");
  GeneratedCorpus c = generate_corpus(small_spec(), tmp.path());

  // 10 speakers x 4 configs x 5 utterances.
  CHECK(c.pretrain.entries.size() == 200);

  // Every utterance maps to exactly one config; each pretrain speaker
  // uses exactly 4 configs with 5 utterances each.
  std::map<std::string, std::map<std::string, int>> per_speaker;
  for (const auto& e : c.pretrain.entries) {
    per_speaker[e.speaker_id][e.config_id]++;
    CHECK(e.cls == TrialClass::bonafide);
  }
  CHECK(per_speaker.size() == 10);
  for (const auto& [spk, configs] : per_speaker) {
    CHECK(configs.size() == 4);
    for (const auto& [cfg, count] : configs) REQUIRE(count == 5);
  }

  // Main corpus: 4 speakers x 2 bona-fide x (1 + 9).
  size_t bona = 0, spoof = 0;
  for (const auto& e : c.main.entries) {
    (e.cls == TrialClass::bonafide ? bona : spoof)++;
  }
  CHECK(bona == 8);
  CHECK(spoof == 72);  // exactly 9:1

  // Files exist and are readable.
  Waveform w = read_wav(tmp.path() / c.pretrain.entries[0].path);
  CHECK(w.sample_rate == 8000);
  CHECK(w.samples.size() >= 4800);
}

TEST_CASE("splits never share a speaker") {
  acptest::TempDir tmp("corpus_disjoint");
  GeneratedCorpus c = generate_corpus(small_spec(), tmp.path());

  auto speakers_of = [](const Manifest& m, Split s) {
    std::set<std::string> out;
    for (const auto& e : m.entries) {
      if (e.split == s) out.insert(e.speaker_id);
    }
    return out;
  };
  auto disjoint = [](const std::set<std::string>& a,
                     const std::set<std::string>& b) {
    for (const auto& x : a) {
      if (b.count(x)) return false;
    }
    return true;
  };

  auto pre_train = speakers_of(c.pretrain, Split::train);
  auto pre_dev = speakers_of(c.pretrain, Split::dev);
  CHECK(!pre_train.empty());
  CHECK(!pre_dev.empty());
  CHECK(disjoint(pre_train, pre_dev));

  auto m_train = speakers_of(c.main, Split::train);
  auto m_dev = speakers_of(c.main, Split::dev);
  auto m_eval = speakers_of(c.main, Split::eval);
  CHECK(disjoint(m_train, m_dev));
  CHECK(disjoint(m_train, m_eval));
  CHECK(disjoint(m_dev, m_eval));

  // Pre-training speakers are disjoint from spoofing-task speakers.
  std::set<std::string> all_pre;
  for (const auto& e : c.pretrain.entries) all_pre.insert(e.speaker_id);
  std::set<std::string> all_main;
  for (const auto& e : c.main.entries) all_main.insert(e.speaker_id);
  CHECK(disjoint(all_pre, all_main));
}

TEST_CASE("same config means same impulse response, different means different") {
  acptest::TempDir tmp("corpus_configs");
  GeneratedCorpus c = generate_corpus(small_spec(), tmp.path());

  std::map<std::string, const AcousticConfig*> by_id;
  for (const auto& cfg : c.configs) by_id[cfg.id] = &cfg;

  std::map<std::string, std::set<std::string>> speaker_configs;
  for (const auto& e : c.pretrain.entries) {
    REQUIRE(by_id.count(e.config_id) == 1);
    speaker_configs[e.speaker_id].insert(e.config_id);
  }
  for (const auto& [spk, ids] : speaker_configs) {
    std::vector<const AcousticConfig*> cfgs;
    for (const auto& id : ids) cfgs.push_back(by_id[id]);
    for (size_t i = 0; i < cfgs.size(); ++i) {
      for (size_t j = i + 1; j < cfgs.size(); ++j) {
        REQUIRE(cfgs[i]->impulse_response != cfgs[j]->impulse_response);
      }
    }
  }
}

TEST_CASE("regenerating a corpus from one seed is byte-identical") {
  acptest::TempDir tmp_a("corpus_det_a");
  acptest::TempDir tmp_b("corpus_det_b");
  generate_corpus(small_spec(), tmp_a.path());
  generate_corpus(small_spec(), tmp_b.path());

  auto pre_a = acptest::read_all_bytes(tmp_a.path() / "pretrain.tsv");
  auto pre_b = acptest::read_all_bytes(tmp_b.path() / "pretrain.tsv");
  REQUIRE(!pre_a.empty());
  REQUIRE(pre_a == pre_b);
  REQUIRE(acptest::read_all_bytes(tmp_a.path() / "main.tsv") ==
          acptest::read_all_bytes(tmp_b.path() / "main.tsv"));
  REQUIRE(acptest::read_all_bytes(tmp_a.path() / "configs.tsv") ==
          acptest::read_all_bytes(tmp_b.path() / "configs.tsv"));

  Manifest m = read_manifest(tmp_a.path() / "main.tsv");
  for (size_t i = 0; i < 5; ++i) {
    const auto& path = m.entries[i].path;
    REQUIRE(acptest::read_all_bytes(tmp_a.path() / path) ==
            acptest::read_all_bytes(tmp_b.path() / path));
  }

  // A different seed keeps the manifest structure but changes the audio
  // and channel draws.
  CorpusSpec other = small_spec();
  other.seed = 78;
  acptest::TempDir tmp_c("corpus_det_c");
  generate_corpus(other, tmp_c.path());
  CHECK(acptest::read_all_bytes(tmp_c.path() / "configs.tsv") !=
        acptest::read_all_bytes(tmp_a.path() / "configs.tsv"));
  CHECK(acptest::read_all_bytes(tmp_c.path() / m.entries[0].path) !=
        acptest::read_all_bytes(tmp_a.path() / m.entries[0].path));
}

TEST_CASE("manifest round trips through its TSV form") {
  acptest::TempDir tmp("manifest_rt");
  GeneratedCorpus c = generate_corpus(small_spec(), tmp.path());
  Manifest m = read_manifest(tmp.path() / "pretrain.tsv");
  REQUIRE(m.entries.size() == c.pretrain.entries.size());
  for (size_t i = 0; i < m.entries.size(); ++i) {
    REQUIRE(m.entries[i].utt_id == c.pretrain.entries[i].utt_id);
    REQUIRE(m.entries[i].speaker_id == c.pretrain.entries[i].speaker_id);
    REQUIRE(m.entries[i].config_id == c.pretrain.entries[i].config_id);
    REQUIRE(m.entries[i].split == c.pretrain.entries[i].split);
    REQUIRE(m.entries[i].path == c.pretrain.entries[i].path);
  }
}
