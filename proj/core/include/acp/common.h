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

#include <stdexcept>
#include <string>

namespace acp {

// Error categories. The CLI maps them onto exit codes:
// ConfigError -> 1, DataError (and subclasses) -> 2, NumericError -> 3.
// ContractError signals caller misuse rather than bad external input.

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed file contents (bad magic, truncated payload, garbled header).
struct FormatError : DataError {
  using DataError::DataError;
};

// Well-formed file we deliberately do not handle (codec, version).
struct UnsupportedError : DataError {
  using DataError::DataError;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

}  // namespace acp
