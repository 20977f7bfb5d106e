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
#include <string>
#include <vector>

namespace acp {

enum class LayerKind {
  conv2d,
  batchnorm,
  leaky_relu,
  residual_block,
  maxpool_global,
  avgpool_global,
  dense,
};

std::string to_string(LayerKind k);
LayerKind layer_kind_from_string(const std::string& s);

// One architecture element. Fields are meaningful per kind:
//   conv2d          out_channels, kernel, stride, pad, in_channels (0=infer)
//   batchnorm       (channels follow from the input)
//   leaky_relu      slope
//   residual_block  out_channels, stride, in_channels (0=infer); two 3x3
//                   convs in pre-activation order with a 1x1 projection on
//                   the skip when channels or stride change
//   maxpool_global / avgpool_global
//                   no fields; an adjacent max->avg pair reads the same
//                   input and concatenates to (1, 1, 2c)
//   dense           units, in_features (0=infer)
struct LayerSpec {
  LayerKind kind = LayerKind::conv2d;
  int out_channels = 0;
  int in_channels = 0;
  std::array<int, 2> kernel{3, 3};
  std::array<int, 2> stride{1, 1};
  std::array<int, 2> pad{1, 1};
  double slope = 0.3;
  int units = 0;
  int in_features = 0;

  bool operator==(const LayerSpec&) const = default;
};

// Ordered architecture plus which activation is the pre-training
// embedding. A full network ends in an n_classes dense head; the
// pre-training network is the prefix through the embedding layer.
struct NetSpec {
  std::vector<LayerSpec> layers;
  int embedding_layer_index = -1;
  int input_channels = 1;
  int n_classes = 2;

  bool operator==(const NetSpec&) const = default;

  // Prefix through the embedding layer (inclusive): the phase-1 network.
  NetSpec embedding_prefix() const;

  bool has_head() const {
    return embedding_layer_index >= 0 &&
           static_cast<size_t>(embedding_layer_index) + 1 < layers.size();
  }

  // Throws ConfigError on structural problems (bad embedding index,
  // non-dense embedding layer, missing layer fields).
  void validate() const;

  std::string to_json() const;
  static NetSpec from_json(const std::string& json_text);
};

// Per-layer output shape. t/f are -1 when they depend on the (dynamic)
// input extent; after a global pool or dense layer the shape is flat.
struct LayerShape {
  bool flat = false;
  long t = -1;
  long f = -1;
  long c = 0;        // channels (or flat feature count)
};

// Composes shapes layer by layer, throwing ConfigError that names both
// offending layers on any mismatch. frames/bins of 0 mean "dynamic".
std::vector<LayerShape> infer_shapes(const NetSpec& spec, long frames,
                                     long bins);

}  // namespace acp
