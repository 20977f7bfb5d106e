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

#include <span>
#include <string>
#include <vector>

#include "acp/network.h"

namespace acp {

enum class CheckLoss {
  cosine_pair,    // needs the embedding-prefix network (no class head)
  cross_entropy,  // needs the full network with its 2-logit head
};

struct GradCheckEntry {
  std::string param;
  double rel_err = 0.0;
};

struct GradCheckReport {
  bool pass = false;
  double max_rel_err = 0.0;
  std::string worst_param;
  std::vector<GradCheckEntry> per_param;
};

// Central finite differences over every parameter of the network,
// compared against the analytic backward pass, both in 64-bit.
//
// cosine_pair: the batch holds 2B items, item i pairing with item B+i,
// labels (+/-1) per pair. cross_entropy: one class label (0/1) per item.
// Relative error uses max(|analytic|, |numeric|, 1e-4) as denominator.
GradCheckReport grad_check(Network<double>& net, const Tensor4<double>& batch,
                           CheckLoss loss, std::span<const int> labels,
                           double tolerance, double fd_epsilon = 1e-5);

}  // namespace acp
