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

#include "acp/netspec.h"

#include <json.hpp>

#include "acp/common.h"

namespace acp {

using nlohmann::json;

std::string to_string(LayerKind k) {
  switch (k) {
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::batchnorm: return "batchnorm";
    case LayerKind::leaky_relu: return "leaky_relu";
    case LayerKind::residual_block: return "residual_block";
    case LayerKind::maxpool_global: return "maxpool_global";
    case LayerKind::avgpool_global: return "avgpool_global";
    case LayerKind::dense: return "dense";
  }
  return "conv2d";
}

LayerKind layer_kind_from_string(const std::string& s) {
  if (s == "conv2d") return LayerKind::conv2d;
  if (s == "batchnorm") return LayerKind::batchnorm;
  if (s == "leaky_relu") return LayerKind::leaky_relu;
  if (s == "residual_block") return LayerKind::residual_block;
  if (s == "maxpool_global") return LayerKind::maxpool_global;
  if (s == "avgpool_global") return LayerKind::avgpool_global;
  if (s == "dense") return LayerKind::dense;
  throw ConfigError("unknown layer kind: " + s);
}

NetSpec NetSpec::embedding_prefix() const {
  validate();
  NetSpec p = *this;
  p.layers.resize(static_cast<size_t>(embedding_layer_index) + 1);
  return p;
}

void NetSpec::validate() const {
  if (layers.empty()) throw ConfigError("net spec has no layers");
  if (input_channels < 1) throw ConfigError("input_channels must be >= 1");
  if (n_classes != 2) throw ConfigError("n_classes must be 2");
  if (embedding_layer_index < 0 ||
      static_cast<size_t>(embedding_layer_index) >= layers.size()) {
    throw ConfigError("embedding_layer_index out of range");
  }
  if (layers[embedding_layer_index].kind != LayerKind::dense) {
    throw ConfigError("embedding layer must be a dense layer");
  }
  for (size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& l = layers[i];
    const std::string where = "layer " + std::to_string(i) + " (" +
                              to_string(l.kind) + ")";
    switch (l.kind) {
      case LayerKind::conv2d:
      case LayerKind::residual_block:
        if (l.out_channels < 1) {
          throw ConfigError(where + ": out_channels must be >= 1");
        }
        if (l.kernel[0] < 1 || l.kernel[1] < 1 || l.stride[0] < 1 ||
            l.stride[1] < 1 || l.pad[0] < 0 || l.pad[1] < 0) {
          throw ConfigError(where + ": bad kernel/stride/pad");
        }
        break;
      case LayerKind::dense:
        if (l.units < 1) throw ConfigError(where + ": units must be >= 1");
        break;
      case LayerKind::leaky_relu:
        if (l.slope < 0.0 || l.slope >= 1.0) {
          throw ConfigError(where + ": slope must lie in [0, 1)");
        }
        break;
      default:
        break;
    }
  }
  if (has_head()) {
    const LayerSpec& last = layers.back();
    if (last.kind != LayerKind::dense || last.units != n_classes) {
      throw ConfigError("final layer must be a dense head with " +
                        std::to_string(n_classes) + " units");
    }
  }
}

std::string NetSpec::to_json() const {
  json j;
  j["input_channels"] = input_channels;
  j["n_classes"] = n_classes;
  j["embedding_layer_index"] = embedding_layer_index;
  j["layers"] = json::array();
  for (const LayerSpec& l : layers) {
    json jl;
    jl["kind"] = to_string(l.kind);
    switch (l.kind) {
      case LayerKind::conv2d:
        jl["out_channels"] = l.out_channels;
        if (l.in_channels > 0) jl["in_channels"] = l.in_channels;
        jl["kernel"] = {l.kernel[0], l.kernel[1]};
        jl["stride"] = {l.stride[0], l.stride[1]};
        jl["pad"] = {l.pad[0], l.pad[1]};
        break;
      case LayerKind::residual_block:
        jl["out_channels"] = l.out_channels;
        if (l.in_channels > 0) jl["in_channels"] = l.in_channels;
        jl["stride"] = {l.stride[0], l.stride[1]};
        break;
      case LayerKind::leaky_relu:
        jl["slope"] = l.slope;
        break;
      case LayerKind::dense:
        jl["units"] = l.units;
        if (l.in_features > 0) jl["in_features"] = l.in_features;
        break;
      default:
        break;
    }
    j["layers"].push_back(jl);
  }
  return j.dump();
}

NetSpec NetSpec::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad net spec json: ") + e.what());
  }
  NetSpec spec;
  try {
    spec.input_channels = j.at("input_channels").get<int>();
    spec.n_classes = j.at("n_classes").get<int>();
    spec.embedding_layer_index = j.at("embedding_layer_index").get<int>();
    for (const json& jl : j.at("layers")) {
      LayerSpec l;
      l.kind = layer_kind_from_string(jl.at("kind").get<std::string>());
      if (jl.contains("out_channels")) l.out_channels = jl["out_channels"];
      if (jl.contains("in_channels")) l.in_channels = jl["in_channels"];
      if (jl.contains("kernel")) {
        l.kernel = {jl["kernel"][0].get<int>(), jl["kernel"][1].get<int>()};
      }
      if (jl.contains("stride")) {
        l.stride = {jl["stride"][0].get<int>(), jl["stride"][1].get<int>()};
      }
      if (jl.contains("pad")) {
        l.pad = {jl["pad"][0].get<int>(), jl["pad"][1].get<int>()};
      }
      if (jl.contains("slope")) l.slope = jl["slope"];
      if (jl.contains("units")) l.units = jl["units"];
      if (jl.contains("in_features")) l.in_features = jl["in_features"];
      spec.layers.push_back(l);
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad net spec json: ") + e.what());
  }
  spec.validate();
  return spec;
}

std::vector<LayerShape> infer_shapes(const NetSpec& spec, long frames,
                                     long bins) {
  spec.validate();
  auto conv_extent = [](long in, int kernel, int stride, int pad) -> long {
    if (in < 0) return -1;
    const long span = in + 2L * pad - kernel;
    if (span < 0) return 0;  // caught below as a too-small extent
    return span / stride + 1;
  };

  std::vector<LayerShape> shapes;
  LayerShape cur;
  cur.flat = false;
  cur.t = frames > 0 ? frames : -1;
  cur.f = bins > 0 ? bins : -1;
  cur.c = spec.input_channels;

  for (size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    const std::string here = "layer " + std::to_string(i) + " (" +
                             to_string(l.kind) + ")";
    const std::string prev =
        i == 0 ? std::string("network input")
               : "layer " + std::to_string(i - 1) + " (" +
                     to_string(spec.layers[i - 1].kind) + ")";
    LayerShape next = cur;
    switch (l.kind) {
      case LayerKind::conv2d: {
        if (cur.flat) {
          throw ConfigError(here + " cannot follow flat output of " + prev);
        }
        if (l.in_channels > 0 && l.in_channels != cur.c) {
          throw ConfigError(here + " expects " +
                            std::to_string(l.in_channels) + " channels but " +
                            prev + " produces " + std::to_string(cur.c));
        }
        next.t = conv_extent(cur.t, l.kernel[0], l.stride[0], l.pad[0]);
        next.f = conv_extent(cur.f, l.kernel[1], l.stride[1], l.pad[1]);
        if (next.t == 0 || next.f == 0) {
          throw ConfigError(here + ": input from " + prev +
                            " is smaller than the kernel");
        }
        next.c = l.out_channels;
        break;
      }
      case LayerKind::residual_block: {
        if (cur.flat) {
          throw ConfigError(here + " cannot follow flat output of " + prev);
        }
        if (l.in_channels > 0 && l.in_channels != cur.c) {
          throw ConfigError(here + " expects " +
                            std::to_string(l.in_channels) + " channels but " +
                            prev + " produces " + std::to_string(cur.c));
        }
        next.t = conv_extent(cur.t, 3, l.stride[0], 1);
        next.f = conv_extent(cur.f, 3, l.stride[1], 1);
        next.c = l.out_channels;
        break;
      }
      case LayerKind::batchnorm:
      case LayerKind::leaky_relu:
        if (cur.flat) {
          throw ConfigError(here + " cannot follow flat output of " + prev);
        }
        break;
      case LayerKind::maxpool_global: {
        if (cur.flat) {
          throw ConfigError(here + " cannot follow flat output of " + prev);
        }
        next.t = 1;
        next.f = 1;
        break;
      }
      case LayerKind::avgpool_global: {
        if (cur.flat) {
          throw ConfigError(here + " cannot follow flat output of " + prev);
        }
        next.t = 1;
        next.f = 1;
        // An avg pool directly after a max pool forms the concatenating
        // pair: both read the pre-pool map and stack to 2c channels.
        if (i > 0 && spec.layers[i - 1].kind == LayerKind::maxpool_global) {
          next.c = 2 * cur.c;
        }
        break;
      }
      case LayerKind::dense: {
        long in_feat;
        if (cur.flat) {
          in_feat = cur.c;
        } else if (cur.t >= 0 && cur.f >= 0) {
          in_feat = cur.t * cur.f * cur.c;
        } else if (l.in_features > 0) {
          in_feat = l.in_features;  // dynamic extent, checked at runtime
        } else {
          throw ConfigError(here + ": input extent from " + prev +
                            " is dynamic; use a global pool before dense "
                            "or give in_features explicitly");
        }
        if (l.in_features > 0 && l.in_features != in_feat) {
          throw ConfigError(here + " expects " +
                            std::to_string(l.in_features) + " features but " +
                            prev + " produces " + std::to_string(in_feat));
        }
        next.flat = true;
        next.t = 1;
        next.f = 1;
        next.c = l.units;
        break;
      }
    }
    shapes.push_back(next);
    cur = next;
  }
  return shapes;
}

}  // namespace acp
