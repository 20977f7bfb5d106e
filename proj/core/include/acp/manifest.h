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
#include <string>
#include <vector>

namespace acp {

enum class TrialClass { bonafide, spoof };
enum class Split { train, dev, eval };

std::string to_string(TrialClass c);
std::string to_string(Split s);
TrialClass trial_class_from_string(const std::string& s);
Split split_from_string(const std::string& s);

struct ManifestEntry {
  std::string utt_id;
  std::string speaker_id;
  std::string config_id;
  TrialClass cls = TrialClass::bonafide;
  Split split = Split::train;
  std::string path;  // relative to the manifest's directory
};

// One record per line, tab-separated:
//   utterance_id \t speaker_id \t config_id \t class \t split \t path
struct Manifest {
  std::vector<ManifestEntry> entries;

  std::vector<const ManifestEntry*> in_split(Split s) const;

  // Throws DataError on duplicate utterance ids or an empty manifest.
  void validate() const;
};

void write_manifest(const std::filesystem::path& path, const Manifest& m);
Manifest read_manifest(const std::filesystem::path& path);

}  // namespace acp
