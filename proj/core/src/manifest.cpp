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

#include "acp/manifest.h"

#include <fstream>
#include <sstream>
#include <unordered_set>

#include "acp/common.h"

namespace acp {

std::string to_string(TrialClass c) {
  return c == TrialClass::bonafide ? "bonafide" : "spoof";
}

std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::dev: return "dev";
    case Split::eval: return "eval";
  }
  return "train";
}

TrialClass trial_class_from_string(const std::string& s) {
  if (s == "bonafide") return TrialClass::bonafide;
  if (s == "spoof") return TrialClass::spoof;
  throw FormatError("unknown trial class: " + s);
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "dev") return Split::dev;
  if (s == "eval") return Split::eval;
  throw FormatError("unknown split: " + s);
}

std::vector<const ManifestEntry*> Manifest::in_split(Split s) const {
  std::vector<const ManifestEntry*> out;
  for (const auto& e : entries) {
    if (e.split == s) out.push_back(&e);
  }
  return out;
}

void Manifest::validate() const {
  if (entries.empty()) throw DataError("empty manifest");
  std::unordered_set<std::string> ids;
  for (const auto& e : entries) {
    if (!ids.insert(e.utt_id).second) {
      throw DataError("duplicate utterance id: " + e.utt_id);
    }
  }
}

void write_manifest(const std::filesystem::path& path, const Manifest& m) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write manifest: " + path.string());
  for (const auto& e : m.entries) {
    f << e.utt_id << '\t' << e.speaker_id << '\t' << e.config_id << '\t'
      << to_string(e.cls) << '\t' << to_string(e.split) << '\t' << e.path
      << '\n';
  }
  if (!f) throw DataError("short write: " + path.string());
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open manifest: " + path.string());
  Manifest m;
  std::string line;
  size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    ManifestEntry e;
    std::string cls, split;
    if (!std::getline(ss, e.utt_id, '\t') ||
        !std::getline(ss, e.speaker_id, '\t') ||
        !std::getline(ss, e.config_id, '\t') || !std::getline(ss, cls, '\t') ||
        !std::getline(ss, split, '\t') || !std::getline(ss, e.path)) {
      throw FormatError("bad manifest line " + std::to_string(lineno) + " in " +
                        path.string());
    }
    e.cls = trial_class_from_string(cls);
    e.split = split_from_string(split);
    m.entries.push_back(std::move(e));
  }
  m.validate();
  return m;
}

}  // namespace acp
