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

#include "acp/evalkit.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "acp/common.h"

namespace acp {

void ScoreSet::validate() const {
  if (records.empty()) throw DataError("empty score set");
  std::unordered_set<std::string> ids;
  bool have_bona = false, have_spoof = false;
  for (const auto& r : records) {
    if (!ids.insert(r.trial_id).second) {
      throw DataError("duplicate trial id: " + r.trial_id);
    }
    if (!std::isfinite(r.score)) {
      throw DataError("non-finite score for trial " + r.trial_id);
    }
    (r.truth == TrialClass::bonafide ? have_bona : have_spoof) = true;
  }
  if (!have_bona || !have_spoof) {
    throw NumericError("EER undefined: need both classes in the score set");
  }
}

namespace {

struct OperatingPoint {
  double threshold;
  double far;
  double frr;
};

// FAR/FRR at every candidate threshold: the minimum score, all midpoints
// between adjacent distinct scores, and one point past the maximum.
std::vector<OperatingPoint> operating_points(const ScoreSet& s) {
  size_t n_bona = 0, n_spoof = 0;
  std::vector<std::pair<double, TrialClass>> sorted;
  sorted.reserve(s.records.size());
  for (const auto& r : s.records) {
    sorted.emplace_back(r.score, r.truth);
    (r.truth == TrialClass::bonafide ? n_bona : n_spoof)++;
  }
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  std::vector<OperatingPoint> pts;
  size_t bona_below = 0, spoof_below = 0;
  size_t i = 0;
  double prev_value = 0.0;
  bool first = true;
  while (i < sorted.size()) {
    const double value = sorted[i].first;
    const double threshold = first ? value : 0.5 * (prev_value + value);
    pts.push_back({threshold,
                   static_cast<double>(n_spoof - spoof_below) / n_spoof,
                   static_cast<double>(bona_below) / n_bona});
    while (i < sorted.size() && sorted[i].first == value) {
      (sorted[i].second == TrialClass::bonafide ? bona_below : spoof_below)++;
      ++i;
    }
    prev_value = value;
    first = false;
  }
  pts.push_back({prev_value + 1.0, 0.0, 1.0});
  return pts;
}

}  // namespace

EerResult compute_eer(const ScoreSet& s) {
  s.validate();
  const std::vector<OperatingPoint> pts = operating_points(s);

  // far - frr falls monotonically from +1 to -1 as the threshold rises.
  for (size_t j = 0; j < pts.size(); ++j) {
    const double d = pts[j].far - pts[j].frr;
    if (d == 0.0) return {pts[j].far, pts[j].threshold};
    if (d < 0.0) {
      const OperatingPoint& lo = pts[j - 1];
      const OperatingPoint& hi = pts[j];
      const double d_lo = lo.far - lo.frr;
      const double d_hi = hi.far - hi.frr;
      const double lambda = d_lo / (d_lo - d_hi);
      return {lo.far + lambda * (hi.far - lo.far),
              lo.threshold + lambda * (hi.threshold - lo.threshold)};
    }
  }
  throw NumericError("EER crossing not found");  // unreachable
}

ScoringResult score_trials(Network<float>& net, const Manifest& m, Split split,
                           const std::filesystem::path& corpus_root,
                           const ScoringOptions& opts) {
  const auto entries = m.in_split(split);
  if (entries.empty()) {
    throw DataError("score_trials: split " + to_string(split) + " is empty");
  }

  ScoringResult result;
  for (const ManifestEntry* e : entries) {
    Waveform w = read_wav(corpus_root / e->path);
    if (w.samples.size() <
        static_cast<size_t>(opts.frame.window_samples(w.sample_rate))) {
      ++result.n_failures;
      continue;
    }
    Spectrogram spec = stft_magnitude(w, opts.frame);
    if (opts.log_compress) log_compress(spec);

    Tensor4<float> batch(1, spec.frames, spec.bins, 1);
    std::copy(spec.data.begin(), spec.data.end(), batch.v.begin());
    auto fwd = net.forward(batch, Mode::infer);
    if (fwd.output.dims[3] != 2) {
      throw ContractError("score_trials needs a 2-logit network head");
    }
    const double score = static_cast<double>(fwd.output.v[0]) -
                         static_cast<double>(fwd.output.v[1]);
    result.scores.records.push_back({e->utt_id, e->cls, score});
  }
  result.scores.validate();
  return result;
}

void write_scores(const std::filesystem::path& path, const ScoreSet& s) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write score file: " + path.string());
  char buf[40];
  for (const auto& r : s.records) {
    std::snprintf(buf, sizeof(buf), "%.9g", r.score);
    f << r.trial_id << '\t' << to_string(r.truth) << '\t' << buf << '\n';
  }
  if (!f) throw DataError("short write: " + path.string());
}

ScoreSet read_scores(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open score file: " + path.string());
  ScoreSet s;
  std::string line;
  size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    ScoreRecord r;
    std::string truth, score;
    if (!std::getline(ss, r.trial_id, '\t') || !std::getline(ss, truth, '\t') ||
        !std::getline(ss, score)) {
      throw FormatError("bad score line " + std::to_string(lineno) + " in " +
                        path.string());
    }
    r.truth = trial_class_from_string(truth);
    r.score = std::stod(score);
    s.records.push_back(std::move(r));
  }
  s.validate();
  return s;
}

void write_det_csv(const std::filesystem::path& path, const ScoreSet& s) {
  s.validate();
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write DET curve: " + path.string());
  f << "threshold,far,frr\n";
  char buf[128];
  for (const OperatingPoint& p : operating_points(s)) {
    std::snprintf(buf, sizeof(buf), "%.9g,%.9g,%.9g\n", p.threshold, p.far,
                  p.frr);
    f << buf;
  }
  if (!f) throw DataError("short write: " + path.string());
}

}  // namespace acp
