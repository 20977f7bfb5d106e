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

#include <cmath>
#include <cstdint>
#include <vector>

#include "acp/network.h"

namespace acp {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam over a network's parameter list. Moments are kept
// for every parameter in parameter order; frozen layers are skipped
// entirely, leaving both the parameter and its moments untouched.
template <typename T>
class Adam {
 public:
  Adam(Network<T>& net, const AdamConfig& cfg) : cfg_(cfg) {
    for (const auto& ref : net.params()) {
      const auto& d = ref.value->dims;
      m_.emplace_back(d[0], d[1], d[2], d[3]);
      v_.emplace_back(d[0], d[1], d[2], d[3]);
    }
  }

  const AdamConfig& config() const { return cfg_; }
  int64_t step_count() const { return t_; }

  // m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2;
  // theta <- theta - lr * m_hat / (sqrt(v_hat) + eps).
  void step(Network<T>& net) {
    auto params = net.params();
    if (params.size() != m_.size()) {
      throw ContractError("Adam state does not match the network");
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (size_t p = 0; p < params.size(); ++p) {
      if (!net.layer_trainable(params[p].spec_index)) continue;
      Tensor4<T>& theta = *params[p].value;
      const Tensor4<T>& g = *params[p].grad;
      Tensor4<T>& m = m_[p];
      Tensor4<T>& v = v_[p];
      if (!theta.same_shape(g) || !theta.same_shape(m)) {
        throw ContractError("Adam: shape mismatch for " + params[p].name);
      }
      for (size_t i = 0; i < theta.size(); ++i) {
        const double gi = g.v[i];
        const double mi = cfg_.beta1 * m.v[i] + (1.0 - cfg_.beta1) * gi;
        const double vi = cfg_.beta2 * v.v[i] + (1.0 - cfg_.beta2) * gi * gi;
        m.v[i] = static_cast<T>(mi);
        v.v[i] = static_cast<T>(vi);
        const double m_hat = mi / bc1;
        const double v_hat = vi / bc2;
        theta.v[i] = static_cast<T>(theta.v[i] -
                                    cfg_.lr * m_hat /
                                        (std::sqrt(v_hat) + cfg_.eps));
      }
    }
  }

  // Serialization hooks for checkpoints.
  std::vector<Tensor4<T>>& moments_m() { return m_; }
  std::vector<Tensor4<T>>& moments_v() { return v_; }
  const std::vector<Tensor4<T>>& moments_m() const { return m_; }
  const std::vector<Tensor4<T>>& moments_v() const { return v_; }
  void restore_step_count(int64_t t) { t_ = t; }

 private:
  AdamConfig cfg_;
  int64_t t_ = 0;
  std::vector<Tensor4<T>> m_, v_;
};

}  // namespace acp
