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

#include "acp/config.h"

#include <fstream>

#include <json.hpp>

#include "acp/common.h"

namespace acp {

using nlohmann::json;

NetSpec NetConfig::to_netspec() const {
  NetSpec s;
  LayerSpec conv;
  conv.kind = LayerKind::conv2d;
  conv.out_channels = conv1_channels;
  s.layers.push_back(conv);
  LayerSpec bn;
  bn.kind = LayerKind::batchnorm;
  s.layers.push_back(bn);
  LayerSpec act;
  act.kind = LayerKind::leaky_relu;
  act.slope = leaky_slope;
  s.layers.push_back(act);
  for (int ch : block_channels) {
    LayerSpec block;
    block.kind = LayerKind::residual_block;
    block.out_channels = ch;
    block.stride = block_stride;
    block.slope = leaky_slope;
    s.layers.push_back(block);
  }
  LayerSpec mx;
  mx.kind = LayerKind::maxpool_global;
  s.layers.push_back(mx);
  LayerSpec av;
  av.kind = LayerKind::avgpool_global;
  s.layers.push_back(av);
  LayerSpec emb;
  emb.kind = LayerKind::dense;
  emb.units = embedding_dim;
  s.layers.push_back(emb);
  s.embedding_layer_index = static_cast<int>(s.layers.size()) - 1;
  LayerSpec head;
  head.kind = LayerKind::dense;
  head.units = 2;
  s.layers.push_back(head);
  return s;
}

void ExperimentConfig::validate() const {
  if (out_dir.empty()) throw ConfigError("out_dir must not be empty");
  corpus.validate();
  features.frame.validate(corpus.sample_rate);
  pairs.validate();
  if (net.conv1_channels < 1 || net.embedding_dim < 1) {
    throw ConfigError("net channels and embedding_dim must be positive");
  }
  if (net.block_channels.empty()) {
    throw ConfigError("net needs at least one residual block");
  }
  if (net.leaky_slope < 0.0 || net.leaky_slope >= 1.0) {
    throw ConfigError("leaky_slope must lie in [0, 1)");
  }
  if (train.pre_lr <= 0.0 || train.main_lr <= 0.0) {
    throw ConfigError("learning rates must be positive");
  }
  if (train.pre_batch < 1 || train.main_batch < 1) {
    throw ConfigError("batch sizes must be at least 1");
  }
  if (train.pre_epochs < 1 || train.main_epochs < 1) {
    throw ConfigError("epoch counts must be at least 1");
  }
  if (train.pre_epochs > 100) {
    throw ConfigError("pre_epochs is capped at 100");
  }
  if (train.pre_crop_frames < 1 || train.main_crop_frames < 1) {
    throw ConfigError("crop lengths must be positive");
  }
  const int n_layers = static_cast<int>(net.to_netspec().layers.size());
  if (train.freeze_upto >= n_layers) {
    throw ConfigError("freeze_upto beyond the last layer");
  }
  net.to_netspec().validate();
}

namespace {

json to_json_tree(const ExperimentConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["out_dir"] = c.out_dir;
  j["corpus"] = {{"n_speakers", c.corpus.n_speakers},
                 {"configs_per_speaker", c.corpus.configs_per_speaker},
                 {"utterances_per_config", c.corpus.utterances_per_config},
                 {"utt_seconds", {c.corpus.utt_seconds_min,
                                  c.corpus.utt_seconds_max}},
                 {"sample_rate", c.corpus.sample_rate},
                 {"pretrain_dev_fraction", c.corpus.pretrain_dev_fraction},
                 {"main_train_speakers", c.corpus.main_train_speakers},
                 {"main_dev_speakers", c.corpus.main_dev_speakers},
                 {"main_eval_speakers", c.corpus.main_eval_speakers},
                 {"bonafide_per_speaker", c.corpus.bonafide_per_speaker},
                 {"spoofs_per_bonafide", c.corpus.spoofs_per_bonafide}};
  j["features"] = {{"fft_size", c.features.frame.fft_size},
                   {"window_ms", c.features.frame.window_ms},
                   {"shift_ms", c.features.frame.shift_ms},
                   {"window_fn", c.features.frame.window_fn},
                   {"log_compress", c.features.log_compress}};
  j["pairs"] = {{"pairs_per_speaker", c.pairs.pairs_per_speaker},
                {"target_fraction", c.pairs.target_fraction},
                {"resample_each_epoch", c.resample_pairs_each_epoch}};
  j["net"] = {{"conv1_channels", c.net.conv1_channels},
              {"block_channels", c.net.block_channels},
              {"block_stride", {c.net.block_stride[0], c.net.block_stride[1]}},
              {"embedding_dim", c.net.embedding_dim},
              {"leaky_slope", c.net.leaky_slope}};
  j["train"] = {{"pre_lr", c.train.pre_lr},
                {"main_lr", c.train.main_lr},
                {"pre_batch", c.train.pre_batch},
                {"main_batch", c.train.main_batch},
                {"pre_epochs", c.train.pre_epochs},
                {"main_epochs", c.train.main_epochs},
                {"pre_crop_frames", c.train.pre_crop_frames},
                {"main_crop_frames", c.train.main_crop_frames},
                {"freeze_upto", c.train.freeze_upto},
                {"adam_beta1", c.train.adam_beta1},
                {"adam_beta2", c.train.adam_beta2},
                {"adam_eps", c.train.adam_eps},
                {"save_epoch_checkpoints", c.train.save_epoch_checkpoints}};
  return j;
}

ExperimentConfig from_json_tree(const json& j) {
  ExperimentConfig c;
  try {
    c.seed = j.at("seed").get<uint64_t>();
    c.out_dir = j.at("out_dir").get<std::string>();
    const json& jc = j.at("corpus");
    c.corpus.n_speakers = jc.at("n_speakers");
    c.corpus.configs_per_speaker = jc.at("configs_per_speaker");
    c.corpus.utterances_per_config = jc.at("utterances_per_config");
    c.corpus.utt_seconds_min = jc.at("utt_seconds")[0];
    c.corpus.utt_seconds_max = jc.at("utt_seconds")[1];
    c.corpus.sample_rate = jc.at("sample_rate");
    c.corpus.pretrain_dev_fraction = jc.at("pretrain_dev_fraction");
    c.corpus.main_train_speakers = jc.at("main_train_speakers");
    c.corpus.main_dev_speakers = jc.at("main_dev_speakers");
    c.corpus.main_eval_speakers = jc.at("main_eval_speakers");
    c.corpus.bonafide_per_speaker = jc.at("bonafide_per_speaker");
    c.corpus.spoofs_per_bonafide = jc.at("spoofs_per_bonafide");
    const json& jf = j.at("features");
    c.features.frame.fft_size = jf.at("fft_size");
    c.features.frame.window_ms = jf.at("window_ms");
    c.features.frame.shift_ms = jf.at("shift_ms");
    c.features.frame.window_fn = jf.at("window_fn");
    c.features.log_compress = jf.at("log_compress");
    const json& jp = j.at("pairs");
    c.pairs.pairs_per_speaker = jp.at("pairs_per_speaker");
    c.pairs.target_fraction = jp.at("target_fraction");
    c.resample_pairs_each_epoch = jp.at("resample_each_epoch");
    const json& jn = j.at("net");
    c.net.conv1_channels = jn.at("conv1_channels");
    c.net.block_channels = jn.at("block_channels").get<std::vector<int>>();
    c.net.block_stride = {jn.at("block_stride")[0].get<int>(),
                          jn.at("block_stride")[1].get<int>()};
    c.net.embedding_dim = jn.at("embedding_dim");
    c.net.leaky_slope = jn.at("leaky_slope");
    const json& jt = j.at("train");
    c.train.pre_lr = jt.at("pre_lr");
    c.train.main_lr = jt.at("main_lr");
    c.train.pre_batch = jt.at("pre_batch");
    c.train.main_batch = jt.at("main_batch");
    c.train.pre_epochs = jt.at("pre_epochs");
    c.train.main_epochs = jt.at("main_epochs");
    c.train.pre_crop_frames = jt.at("pre_crop_frames");
    c.train.main_crop_frames = jt.at("main_crop_frames");
    c.train.freeze_upto = jt.at("freeze_upto");
    c.train.adam_beta1 = jt.at("adam_beta1");
    c.train.adam_beta2 = jt.at("adam_beta2");
    c.train.adam_eps = jt.at("adam_eps");
    c.train.save_epoch_checkpoints = jt.at("save_epoch_checkpoints");
    c.train.resample_pairs_each_epoch = c.resample_pairs_each_epoch;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad experiment config: ") + e.what());
  }
  return c;
}

// Every key in `doc` must exist in `schema` (same shape); values from
// doc win.
void merge_strict(json& schema, const json& doc, const std::string& prefix) {
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    const std::string where = prefix.empty() ? it.key() : prefix + "." +
                                                              it.key();
    if (!schema.contains(it.key())) {
      throw ConfigError("unknown config key: " + where);
    }
    if (schema[it.key()].is_object() && it.value().is_object()) {
      merge_strict(schema[it.key()], it.value(), where);
    } else {
      schema[it.key()] = it.value();
    }
  }
}

}  // namespace

std::string ExperimentConfig::to_json() const {
  return to_json_tree(*this).dump(2) + "\n";
}

ExperimentConfig ExperimentConfig::defaults() { return ExperimentConfig{}; }

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  json schema = to_json_tree(ExperimentConfig{});
  merge_strict(schema, doc, "");
  ExperimentConfig c = from_json_tree(schema);
  return c;
}

ExperimentConfig ExperimentConfig::from_json_file(
    const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file: " + path.string());
  std::string text((std::istreambuf_iterator<char>(f)),
                   std::istreambuf_iterator<char>());
  return from_json(text);
}

void ExperimentConfig::apply_override(const std::string& key_eq_value) {
  const size_t eq = key_eq_value.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("--set expects key=value, got: " + key_eq_value);
  }
  const std::string key = key_eq_value.substr(0, eq);
  const std::string value = key_eq_value.substr(eq + 1);

  json tree = to_json_tree(*this);
  json* node = &tree;
  size_t pos = 0;
  std::vector<std::string> parts;
  while (pos != std::string::npos) {
    const size_t dot = key.find('.', pos);
    parts.push_back(key.substr(pos, dot == std::string::npos ? dot
                                                             : dot - pos));
    pos = dot == std::string::npos ? dot : dot + 1;
  }
  for (size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->contains(parts[i]) || !(*node)[parts[i]].is_object()) {
      throw ConfigError("unknown config key: " + key);
    }
    node = &(*node)[parts[i]];
  }
  const std::string& leaf = parts.back();
  if (!node->contains(leaf)) throw ConfigError("unknown config key: " + key);

  json parsed;
  try {
    parsed = json::parse(value);
  } catch (const json::exception&) {
    parsed = value;  // bare strings need no quoting on the command line
  }
  (*node)[leaf] = parsed;
  *this = from_json_tree(tree);
}

}  // namespace acp
