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

#include <array>
#include <cstddef>
#include <numeric>
#include <vector>

#include "acp/common.h"

namespace acp {

// Dense rank-4 tensor, row-major over (batch, frames, bins, channels).
// The same layout carries parameters: conv weights are
// (kernel_t, kernel_f, in_channels, out_channels), dense weights
// (1, 1, in_features, units), per-channel vectors (1, 1, 1, c).
template <typename T>
struct Tensor4 {
  std::array<size_t, 4> dims{0, 0, 0, 0};
  std::vector<T> v;

  Tensor4() = default;
  Tensor4(size_t n, size_t t, size_t f, size_t c)
      : dims{n, t, f, c}, v(n * t * f * c, T(0)) {}

  size_t size() const { return v.size(); }
  T* data() { return v.data(); }
  const T* data() const { return v.data(); }

  T& at(size_t n, size_t t, size_t f, size_t c) {
    return v[((n * dims[1] + t) * dims[2] + f) * dims[3] + c];
  }
  T at(size_t n, size_t t, size_t f, size_t c) const {
    return v[((n * dims[1] + t) * dims[2] + f) * dims[3] + c];
  }

  void fill(T value) { std::fill(v.begin(), v.end(), value); }

  bool same_shape(const Tensor4& o) const { return dims == o.dims; }

  template <typename U>
  Tensor4<U> cast() const {
    Tensor4<U> out(dims[0], dims[1], dims[2], dims[3]);
    for (size_t i = 0; i < v.size(); ++i) out.v[i] = static_cast<U>(v[i]);
    return out;
  }
};

}  // namespace acp
