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
#include <cmath>
#include <span>
#include <vector>

#include "acp/common.h"

namespace acp {

namespace detail {

// Norms below this are treated as degenerate embeddings rather than
// divided through.
constexpr double kNormFloor = 1e-12;

template <typename T>
double dot64(std::span<const T> a, std::span<const T> b) {
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  }
  return acc;
}

}  // namespace detail

// cos(x1, x2), clamped to [-1, 1] against rounding. Throws NumericError
// on a zero-norm vector.
template <typename T>
double cosine(std::span<const T> x1, std::span<const T> x2) {
  if (x1.size() != x2.size() || x1.empty()) {
    throw ContractError("cosine: dimension mismatch");
  }
  const double n1 = std::sqrt(detail::dot64(x1, x1));
  const double n2 = std::sqrt(detail::dot64(x2, x2));
  if (n1 <= detail::kNormFloor || n2 <= detail::kNormFloor) {
    throw NumericError("cosine: degenerate (zero-norm) embedding");
  }
  const double c = detail::dot64(x1, x2) / (n1 * n2);
  return std::clamp(c, -1.0, 1.0);
}

template <typename T>
struct PairLossOutput {
  double loss = 0.0;
  std::vector<T> d_x1, d_x2;
};

// Cosine pair loss:
//   y == +1:  1 - cos(x1, x2)
//   y == -1:  max(0, cos(x1, x2)), subgradient 0 at the hinge point.
template <typename T>
PairLossOutput<T> pair_loss(std::span<const T> x1, std::span<const T> x2,
                            int y) {
  if (y != 1 && y != -1) throw ContractError("pair_loss: label must be +/-1");
  const size_t d = x1.size();
  if (x2.size() != d || d == 0) {
    throw ContractError("pair_loss: dimension mismatch");
  }

  const double n1sq = detail::dot64(x1, x1);
  const double n2sq = detail::dot64(x2, x2);
  const double n1 = std::sqrt(n1sq), n2 = std::sqrt(n2sq);
  if (n1 <= detail::kNormFloor || n2 <= detail::kNormFloor) {
    throw NumericError("pair_loss: degenerate (zero-norm) embedding");
  }
  const double dot = detail::dot64(x1, x2);
  const double c = std::clamp(dot / (n1 * n2), -1.0, 1.0);

  PairLossOutput<T> out;
  out.d_x1.assign(d, T(0));
  out.d_x2.assign(d, T(0));

  double sign;  // d(loss)/d(cos)
  if (y == 1) {
    out.loss = 1.0 - c;
    sign = -1.0;
  } else {
    out.loss = std::max(0.0, c);
    if (c <= 0.0) return out;  // hinge inactive, gradients stay zero
    sign = 1.0;
  }

  // d(cos)/d(x1) = x2/(n1 n2) - cos * x1/n1^2, and symmetrically for x2.
  const double inv12 = 1.0 / (n1 * n2);
  const double c_over_n1sq = c / n1sq;
  const double c_over_n2sq = c / n2sq;
  for (size_t i = 0; i < d; ++i) {
    out.d_x1[i] = static_cast<T>(
        sign * (static_cast<double>(x2[i]) * inv12 -
                c_over_n1sq * static_cast<double>(x1[i])));
    out.d_x2[i] = static_cast<T>(
        sign * (static_cast<double>(x1[i]) * inv12 -
                c_over_n2sq * static_cast<double>(x2[i])));
  }
  return out;
}

template <typename T>
struct CrossEntropyOutput {
  double loss = 0.0;
  std::array<T, 2> d_logits{T(0), T(0)};
};

// Two-class softmax cross-entropy in log-sum-exp-stable form;
// gradient is softmax minus one-hot.
template <typename T>
CrossEntropyOutput<T> cross_entropy(std::span<const T, 2> logits, int cls) {
  if (cls != 0 && cls != 1) throw ContractError("cross_entropy: bad class");
  const double a = logits[0], b = logits[1];
  if (!std::isfinite(a) || !std::isfinite(b)) {
    throw NumericError("cross_entropy: non-finite logits");
  }
  const double m = std::max(a, b);
  const double lse = m + std::log(std::exp(a - m) + std::exp(b - m));
  const double p0 = std::exp(a - lse);
  const double p1 = std::exp(b - lse);

  CrossEntropyOutput<T> out;
  out.loss = lse - (cls == 0 ? a : b);
  out.d_logits[0] = static_cast<T>(p0 - (cls == 0 ? 1.0 : 0.0));
  out.d_logits[1] = static_cast<T>(p1 - (cls == 1 ? 1.0 : 0.0));
  return out;
}

}  // namespace acp
