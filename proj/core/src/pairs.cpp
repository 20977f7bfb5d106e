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

#include "acp/pairs.h"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

#include "acp/common.h"
#include "acp/rng.h"

namespace acp {

namespace {

// Number of distinct crop start offsets for a source of src frames: a
// longer source slides the window, a shorter (or equal) one rotates
// cyclically.
size_t offset_span(size_t src_frames, size_t crop) {
  return src_frames > crop ? src_frames - crop + 1 : src_frames;
}

}  // namespace

void PairBudget::validate() const {
  if (pairs_per_speaker < 2) {
    throw ConfigError("pairs_per_speaker must be at least 2");
  }
  if (target_fraction <= 0.0 || target_fraction >= 1.0) {
    throw ConfigError("target_fraction must lie strictly between 0 and 1");
  }
}

int pair_label(const Manifest& m, const std::string& utt_a_id,
               const std::string& utt_b_id) {
  const ManifestEntry* a = nullptr;
  const ManifestEntry* b = nullptr;
  for (const auto& e : m.entries) {
    if (e.utt_id == utt_a_id) a = &e;
    if (e.utt_id == utt_b_id) b = &e;
  }
  if (a == nullptr || b == nullptr) {
    throw DataError("pair_label: unknown utterance id");
  }
  if (a->speaker_id != b->speaker_id) {
    throw ContractError("pair_label: utterances " + utt_a_id + " and " +
                        utt_b_id + " belong to different speakers");
  }
  return utt_a_id == utt_b_id ? 1 : -1;
}

std::vector<SegmentPair> sample_pairs(const Manifest& m, Split split,
                                      const PairBudget& budget,
                                      const FrameCountFn& frame_count,
                                      size_t crop_frames) {
  budget.validate();
  if (crop_frames == 0) throw ContractError("sample_pairs: zero crop length");

  // Group utterances by speaker, preserving manifest order.
  std::vector<std::string> speaker_order;
  std::unordered_map<std::string, std::vector<const ManifestEntry*>> by_spk;
  for (const auto& e : m.entries) {
    if (e.split != split) continue;
    auto [it, inserted] = by_spk.try_emplace(e.speaker_id);
    if (inserted) speaker_order.push_back(e.speaker_id);
    it->second.push_back(&e);
  }
  if (speaker_order.empty()) {
    throw DataError("sample_pairs: no utterances in split " + to_string(split));
  }

  const int n_pos = static_cast<int>(
      std::lround(budget.target_fraction * budget.pairs_per_speaker));
  const int n_neg = budget.pairs_per_speaker - n_pos;

  std::vector<SegmentPair> pairs;
  pairs.reserve(speaker_order.size() *
                static_cast<size_t>(budget.pairs_per_speaker));

  for (const auto& spk : speaker_order) {
    const auto& utts = by_spk[spk];
    if (utts.size() < 2) {
      throw DataError("sample_pairs: speaker " + spk +
                      " has fewer than two utterances");
    }
    Rng rng(mix_seed(budget.seed, hash_str(spk)));

    // Positives need at least two distinct offsets within one utterance.
    std::vector<size_t> eligible;
    for (size_t i = 0; i < utts.size(); ++i) {
      if (offset_span(frame_count(utts[i]->utt_id), crop_frames) >= 2) {
        eligible.push_back(i);
      }
    }
    if (eligible.empty()) {
      throw DataError("sample_pairs: speaker " + spk +
                      " has no utterance long enough for two distinct crops");
    }

    for (int p = 0; p < n_pos; ++p) {
      const ManifestEntry* u = utts[eligible[rng.below(eligible.size())]];
      const size_t span = offset_span(frame_count(u->utt_id), crop_frames);
      const size_t off_a = rng.below(span);
      size_t off_b = rng.below(span - 1);
      if (off_b >= off_a) ++off_b;
      pairs.push_back({u->utt_id, u->utt_id, off_a, off_b, +1, spk});
    }
    for (int q = 0; q < n_neg; ++q) {
      const size_t i = rng.below(utts.size());
      size_t j = rng.below(utts.size() - 1);
      if (j >= i) ++j;
      const ManifestEntry* a = utts[i];
      const ManifestEntry* b = utts[j];
      const size_t off_a =
          rng.below(offset_span(frame_count(a->utt_id), crop_frames));
      const size_t off_b =
          rng.below(offset_span(frame_count(b->utt_id), crop_frames));
      pairs.push_back({a->utt_id, b->utt_id, off_a, off_b, -1, spk});
    }
  }
  return pairs;
}

void write_pairs(const std::filesystem::path& path,
                 const std::vector<SegmentPair>& pairs) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write pair list: " + path.string());
  for (const auto& p : pairs) {
    f << p.utt_a << '\t' << p.offset_a << '\t' << p.utt_b << '\t' << p.offset_b
      << '\t' << p.label << '\n';
  }
  if (!f) throw DataError("short write: " + path.string());
}

std::vector<SegmentPair> read_pairs(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open pair list: " + path.string());
  std::vector<SegmentPair> pairs;
  std::string line;
  size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    SegmentPair p;
    std::string off_a, off_b, label;
    if (!std::getline(ss, p.utt_a, '\t') || !std::getline(ss, off_a, '\t') ||
        !std::getline(ss, p.utt_b, '\t') || !std::getline(ss, off_b, '\t') ||
        !std::getline(ss, label)) {
      throw FormatError("bad pair line " + std::to_string(lineno) + " in " +
                        path.string());
    }
    p.offset_a = std::stoull(off_a);
    p.offset_b = std::stoull(off_b);
    p.label = std::stoi(label);
    if (p.label != 1 && p.label != -1) {
      throw FormatError("pair label must be +1 or -1 at line " +
                        std::to_string(lineno));
    }
    pairs.push_back(std::move(p));
  }
  return pairs;
}

}  // namespace acp
