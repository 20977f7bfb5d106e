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

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "acp/netspec.h"
#include "acp/tensor.h"

namespace acp {

enum class Mode { train, infer };

// Per-layer data saved by a train-mode forward pass for the backward
// pass: batch-norm statistics, pool argmax positions, and the nested
// activation chains of residual blocks.
template <typename T>
struct LayerAux {
  std::vector<T> bn_mean, bn_inv_std;
  std::vector<size_t> pool_argmax;
  std::vector<Tensor4<T>> sub_acts;
  std::vector<LayerAux<T>> sub_aux;
};

template <typename T>
struct Cache {
  Mode mode = Mode::infer;
  bool valid = false;
  std::vector<Tensor4<T>> acts;  // acts[0] = input, acts[i+1] = layer i out
  std::vector<LayerAux<T>> aux;  // one per runtime layer
};

template <typename T>
struct ParamRef {
  std::string name;
  int spec_index = 0;  // NetSpec layer this parameter belongs to
  Tensor4<T>* value = nullptr;
  Tensor4<T>* grad = nullptr;
};

template <typename T>
struct StatRef {
  std::string name;
  int spec_index = 0;
  Tensor4<T>* value = nullptr;
};

template <typename T>
class LayerImpl;

// A built network: parameters plus forward/backward over the runtime
// layer chain. Instantiated for float (training, f64 reductions inside)
// and double (gradient checking runs the whole engine in 64-bit).
template <typename T>
class Network {
 public:
  // He-initialized parameters drawn in layer order from Rng(init_seed);
  // batch-norm starts at gamma=1, beta=0, running mean 0, variance 1.
  static Network build(const NetSpec& spec, uint64_t init_seed);

  Network(Network&&) noexcept;
  Network& operator=(Network&&) noexcept;
  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;
  ~Network();

  const NetSpec& spec() const { return spec_; }

  struct ForwardResult {
    Tensor4<T> output;     // final layer activation (logits when a head exists)
    Tensor4<T> embedding;  // activation at embedding_layer_index
  };

  // Train mode normalizes with batch statistics and updates running
  // stats; infer mode reads running stats and saves nothing. Throws
  // NumericError naming the layer on a non-finite activation.
  ForwardResult forward(const Tensor4<T>& batch, Mode mode,
                        Cache<T>* cache = nullptr);

  // Accumulates parameter gradients (call zero_grads first) and returns
  // the gradient w.r.t. the input batch. Requires a train-mode cache.
  Tensor4<T> backward(const Cache<T>& cache, const Tensor4<T>& d_output);

  void zero_grads();

  std::vector<ParamRef<T>> params();
  std::vector<StatRef<T>> stats();
  size_t n_parameters();

  // Layers with spec index <= freeze_upto become non-trainable (-1 thaws
  // everything). Backward still flows through frozen layers; the
  // optimizer consults layer_trainable.
  void set_freeze_upto(int spec_index);
  int freeze_upto() const { return freeze_upto_; }
  bool layer_trainable(int spec_index) const {
    return spec_index > freeze_upto_;
  }

 private:
  Network() = default;

  NetSpec spec_;
  std::vector<std::unique_ptr<LayerImpl<T>>> layers_;
  int embedding_runtime_index_ = -1;
  int freeze_upto_ = -1;
};

using NetworkF = Network<float>;
using NetworkD = Network<double>;

}  // namespace acp
