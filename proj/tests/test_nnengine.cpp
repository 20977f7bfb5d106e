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

#include <doctest.h>

#include <cmath>
#include <string>

#include "acp/gradcheck.h"
#include "acp/losses.h"
#include "acp/network.h"
#include "acp/rng.h"
#include "fd_util.h"

using namespace acp;

namespace {

LayerSpec conv(int out_c, std::array<int, 2> stride = {1, 1}) {
  LayerSpec l;
  l.kind = LayerKind::conv2d;
  l.out_channels = out_c;
  l.stride = stride;
  return l;
}
LayerSpec bn() {
  LayerSpec l;
  l.kind = LayerKind::batchnorm;
  return l;
}
LayerSpec lrelu(double slope = 0.3) {
  LayerSpec l;
  l.kind = LayerKind::leaky_relu;
  l.slope = slope;
  return l;
}
LayerSpec res(int out_c, std::array<int, 2> stride = {2, 2}) {
  LayerSpec l;
  l.kind = LayerKind::residual_block;
  l.out_channels = out_c;
  l.stride = stride;
  return l;
}
LayerSpec maxpool() {
  LayerSpec l;
  l.kind = LayerKind::maxpool_global;
  return l;
}
LayerSpec avgpool() {
  LayerSpec l;
  l.kind = LayerKind::avgpool_global;
  return l;
}
LayerSpec dense(int units, int in_features = 0) {
  LayerSpec l;
  l.kind = LayerKind::dense;
  l.units = units;
  l.in_features = in_features;
  return l;
}

// Tiny spec exercising every layer kind; ~250 parameters.
NetSpec tiny_full_spec() {
  NetSpec s;
  s.layers = {conv(2), bn(),     lrelu(),  res(3),  maxpool(),
              avgpool(), dense(6), dense(2)};
  s.embedding_layer_index = 6;
  return s;
}

Tensor4<double> random_batch(Rng& rng, size_t n, size_t t, size_t f,
                             size_t c) {
  Tensor4<double> x(n, t, f, c);
  for (double& v : x.v) v = rng.normal();
  return x;
}

Tensor4<float> random_batch_f(Rng& rng, size_t n, size_t t, size_t f,
                              size_t c) {
  Tensor4<float> x(n, t, f, c);
  for (float& v : x.v) v = static_cast<float>(rng.normal());
  return x;
}

// Sets a dense layer to the identity map so the preceding layer's
// activations become directly observable at the network output.
void make_identity_dense(Network<double>& net, const std::string& w_name) {
  for (auto& p : net.params()) {
    if (p.name == w_name) {
      const size_t in = p.value->dims[2], units = p.value->dims[3];
      REQUIRE(in == units);
      p.value->fill(0.0);
      for (size_t i = 0; i < in; ++i) p.value->at(0, 0, i, i) = 1.0;
      return;
    }
  }
  FAIL("dense weight not found: ", w_name);
}

double mean_cross_entropy(Network<double>& net, const Tensor4<double>& batch,
                          const std::vector<int>& labels) {
  auto out = net.forward(batch, Mode::train).output;
  double total = 0.0;
  for (size_t i = 0; i < out.dims[0]; ++i) {
    std::span<const double, 2> logits(out.data() + 2 * i, 2);
    total += cross_entropy<double>(logits, labels[i]).loss;
  }
  return total / static_cast<double>(out.dims[0]);
}

}  // namespace

TEST_CASE("desk-scale spec builds and forward-propagates") {
  NetSpec s;
  s.layers = {conv(8), bn(), lrelu(), res(16), res(32), res(64),
              maxpool(), avgpool(), dense(64), dense(2)};
  s.embedding_layer_index = 8;
  auto net = Network<float>::build(s, 42);

  Rng rng(1);
  auto batch = random_batch_f(rng, 2, 120, 257, 1);
  auto fwd = net.forward(batch, Mode::train);
  CHECK(fwd.output.dims == std::array<size_t, 4>{2, 1, 1, 2});
  CHECK(fwd.embedding.dims == std::array<size_t, 4>{2, 1, 1, 64});

  // 120 -> 60 -> 30 -> 15 over the three stride-2 blocks.
  auto shapes = infer_shapes(s, 120, 257);
  CHECK(shapes[5].t == 15);
  CHECK(shapes[5].f == 33);
  CHECK(shapes[5].c == 64);
  CHECK(shapes[7].c == 128);  // concatenated max+avg pools
}

TEST_CASE("full-scale first conv reproduces the (120, 1025, 16) map") {
  NetSpec s;
  s.layers = {conv(16), bn(), lrelu(), res(32), res(48), res(64), res(96),
              res(128), maxpool(), avgpool(), dense(64), dense(2)};
  s.embedding_layer_index = 10;
  auto shapes = infer_shapes(s, 120, 1025);
  CHECK(shapes[0].t == 120);
  CHECK(shapes[0].f == 1025);
  CHECK(shapes[0].c == 16);
  CHECK(shapes[1].t == 120);  // batchnorm preserves the map
  CHECK(shapes[1].c == 16);
  CHECK(shapes[9].c == 256);
  CHECK(shapes[10].c == 64);
  CHECK(shapes[11].c == 2);
  // Buildable at full scale too.
  auto net = Network<float>::build(s, 0);
  CHECK(net.n_parameters() > 100000);
}

TEST_CASE("building twice from one seed gives identical parameters") {
  auto a = Network<float>::build(tiny_full_spec(), 77);
  auto b = Network<float>::build(tiny_full_spec(), 77);
  auto pa = a.params();
  auto pb = b.params();
  REQUIRE(pa.size() == pb.size());
  for (size_t i = 0; i < pa.size(); ++i) {
    REQUIRE(pa[i].name == pb[i].name);
    REQUIRE(pa[i].value->v == pb[i].value->v);
  }
  auto c = Network<float>::build(tiny_full_spec(), 78);
  CHECK(c.params()[0].value->v != pa[0].value->v);
}

TEST_CASE("shape mismatches are rejected naming both layers") {
  NetSpec s;
  s.layers = {conv(4), dense(5, 999), dense(2)};
  s.embedding_layer_index = 1;
  try {
    infer_shapes(s, 8, 8);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("layer 1 (dense)") != std::string::npos);
    CHECK(msg.find("layer 0 (conv2d)") != std::string::npos);
  }

  NetSpec chan;
  chan.layers = {conv(4), conv(8), dense(10, 0), dense(2)};
  chan.layers[1].in_channels = 7;  // actual input has 4 channels
  chan.embedding_layer_index = 2;
  CHECK_THROWS_AS(infer_shapes(chan, 8, 8), ConfigError);
}

TEST_CASE("train-mode batchnorm output has zero mean and unit variance") {
  // batchnorm feeding an identity dense: the output is the normalized
  // activation itself.
  NetSpec s;
  s.input_channels = 2;
  s.layers = {bn(), dense(4, 4)};
  s.embedding_layer_index = 1;
  auto net = Network<double>::build(s, 3);
  make_identity_dense(net, "dense1.w");

  Rng rng(5);
  Tensor4<double> x(6, 2, 1, 2);  // 4 features when flattened
  for (double& v : x.v) v = 3.0 + 2.0 * rng.normal();
  auto out = net.forward(x, Mode::train).output;

  // Channel c holds positions {..., 2k + c}; statistics over (n, t, f).
  for (int ch = 0; ch < 2; ++ch) {
    double mean = 0.0, var = 0.0;
    int count = 0;
    for (size_t n = 0; n < 6; ++n) {
      for (size_t t = 0; t < 2; ++t) {
        mean += out.v[n * 4 + t * 2 + ch];
        ++count;
      }
    }
    mean /= count;
    for (size_t n = 0; n < 6; ++n) {
      for (size_t t = 0; t < 2; ++t) {
        const double d = out.v[n * 4 + t * 2 + ch] - mean;
        var += d * d;
      }
    }
    var /= count;
    CHECK(std::fabs(mean) < 1e-5);
    CHECK(std::fabs(var - 1.0) < 1e-3);  // 1e-5 epsilon in the denominator
  }
}

TEST_CASE("leaky relu follows its definition") {
  NetSpec s;
  s.input_channels = 4;
  s.layers = {lrelu(0.3), dense(4, 4)};
  s.embedding_layer_index = 1;
  auto net = Network<double>::build(s, 0);
  make_identity_dense(net, "dense1.w");

  Tensor4<double> x(1, 1, 1, 4);
  x.v = {-1.0, 2.0, 0.0, -10.0};
  auto out = net.forward(x, Mode::train).output;
  CHECK(out.v[0] == doctest::Approx(-0.3).epsilon(1e-12));
  CHECK(out.v[1] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(out.v[2] == 0.0);
  CHECK(out.v[3] == doctest::Approx(-3.0).epsilon(1e-12));
}

TEST_CASE("global pools collapse any spatial extent to (1, 1, c)") {
  NetSpec s3;
  s3.input_channels = 3;
  s3.layers = {maxpool(), avgpool(), dense(6, 6)};
  s3.embedding_layer_index = 2;
  auto net3 = Network<double>::build(s3, 0);
  make_identity_dense(net3, "dense2.w");

  for (size_t t : {1u, 4u, 9u}) {
    for (size_t f : {1u, 5u}) {
      Rng rng(t * 10 + f);
      auto x = random_batch(rng, 2, t, f, 3);
      auto out = net3.forward(x, Mode::train).output;
      REQUIRE(out.dims == std::array<size_t, 4>{2, 1, 1, 6});
      for (size_t n = 0; n < 2; ++n) {
        for (size_t c = 0; c < 3; ++c) {
          double mx = -1e300, avg = 0.0;
          for (size_t i = 0; i < t; ++i) {
            for (size_t j = 0; j < f; ++j) {
              mx = std::max(mx, x.at(n, i, j, c));
              avg += x.at(n, i, j, c);
            }
          }
          avg /= static_cast<double>(t * f);
          REQUIRE(out.at(n, 0, 0, c) == doctest::Approx(mx).epsilon(1e-12));
          REQUIRE(out.at(n, 0, 0, 3 + c) ==
                  doctest::Approx(avg).epsilon(1e-12));
        }
      }
    }
  }
}

TEST_CASE("residual block with zero second conv is identity plus projection") {
  // Same channels, stride 1: no projection, output equals the input.
  NetSpec same;
  same.input_channels = 3;
  same.layers = {res(3, {1, 1}), dense(2, 60)};  // 5*4*3 flattened
  same.embedding_layer_index = 1;
  auto net = Network<double>::build(same, 9);
  for (auto& p : net.params()) {
    if (p.name == "res0.conv2.w" || p.name == "res0.conv2.b") {
      p.value->fill(0.0);
    }
  }
  Rng rng(2);
  auto x = random_batch(rng, 2, 5, 4, 3);
  Cache<double> cache;
  auto fwd = net.forward(x, Mode::train, &cache);
  // cache.acts[1] is the block output.
  REQUIRE(cache.acts[1].v == x.v);

  // Channel growth: output equals the 1x1 projection of the input.
  NetSpec grow;
  grow.input_channels = 2;
  grow.layers = {res(5, {2, 2}), dense(2, 45)};  // 3*3*5 flattened
  grow.embedding_layer_index = 1;
  auto net2 = Network<double>::build(grow, 9);
  Tensor4<double>* proj_w = nullptr;
  for (auto& p : net2.params()) {
    if (p.name == "res0.conv2.w" || p.name == "res0.conv2.b") {
      p.value->fill(0.0);
    }
    if (p.name == "res0.proj.w") proj_w = p.value;
  }
  REQUIRE(proj_w != nullptr);

  auto x2 = random_batch(rng, 1, 6, 6, 2);
  Cache<double> cache2;
  net2.forward(x2, Mode::train, &cache2);
  const Tensor4<double>& y = cache2.acts[1];
  REQUIRE(y.dims == std::array<size_t, 4>{1, 3, 3, 5});
  for (size_t t = 0; t < 3; ++t) {
    for (size_t f = 0; f < 3; ++f) {
      for (size_t oc = 0; oc < 5; ++oc) {
        double expect = 0.0;  // proj bias is zero-initialized
        for (size_t ic = 0; ic < 2; ++ic) {
          expect += x2.at(0, 2 * t, 2 * f, ic) * proj_w->at(0, 0, ic, oc);
        }
        REQUIRE(y.at(0, t, f, oc) == doctest::Approx(expect).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("forward is deterministic and infer mode ignores batch composition") {
  auto net = Network<float>::build(tiny_full_spec(), 31);
  Rng rng(8);
  auto batch = random_batch_f(rng, 8, 10, 11, 1);

  auto a = net.forward(batch, Mode::infer).output;
  auto b = net.forward(batch, Mode::infer).output;
  REQUIRE(a.v == b.v);

  // Scoring one item at a time gives bit-identical logits.
  for (size_t n = 0; n < 8; ++n) {
    Tensor4<float> one(1, 10, 11, 1);
    std::copy(batch.v.begin() + n * 110, batch.v.begin() + (n + 1) * 110,
              one.v.begin());
    auto single = net.forward(one, Mode::infer).output;
    REQUIRE(single.v[0] == a.at(n, 0, 0, 0));
    REQUIRE(single.v[1] == a.at(n, 0, 0, 1));
  }
}

TEST_CASE("batchnorm running stats converge to the batch statistics") {
  // Pooled summaries of the normalized map: large batches from a fixed
  // bounded distribution make train-mode (batch stats) and infer-mode
  // (running stats) agree within the stated tolerance.
  NetSpec s;
  s.input_channels = 2;
  s.layers = {bn(), maxpool(), avgpool(), dense(4, 4)};
  s.embedding_layer_index = 3;
  auto net = Network<double>::build(s, 1);
  make_identity_dense(net, "dense3.w");

  Rng rng(77);
  auto draw = [&](size_t n, size_t t, size_t f) {
    Tensor4<double> x(n, t, f, 2);
    for (size_t i = 0; i < x.v.size(); ++i) {
      const double ch = static_cast<double>(i % 2);
      x.v[i] = 2.0 * (ch + 1.0) + (ch + 1.0) * rng.uniform(-1.0, 1.0);
    }
    return x;
  };
  for (int step = 0; step < 200; ++step) {
    net.forward(draw(4, 50, 50), Mode::train);
  }

  auto probe = draw(48, 80, 80);
  auto train_out = net.forward(probe, Mode::train).output;
  auto infer_out = net.forward(probe, Mode::infer).output;
  double worst = 0.0;
  for (size_t i = 0; i < train_out.v.size(); ++i) {
    worst = std::max(worst, std::fabs(train_out.v[i] - infer_out.v[i]));
  }
  CHECK(worst < 1e-2);
}

TEST_CASE("non-finite activations raise a numeric error naming the layer") {
  auto net = Network<float>::build(tiny_full_spec(), 12);
  Tensor4<float> bad(1, 6, 6, 1);
  bad.fill(1.0f);
  bad.v[7] = std::numeric_limits<float>::quiet_NaN();
  try {
    net.forward(bad, Mode::train);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("conv0") != std::string::npos);
  }
}

TEST_CASE("zero upstream gradient produces all-zero parameter gradients") {
  auto net = Network<double>::build(tiny_full_spec(), 21);
  Rng rng(3);
  auto batch = random_batch(rng, 2, 7, 6, 1);
  Cache<double> cache;
  auto fwd = net.forward(batch, Mode::train, &cache);
  net.zero_grads();
  Tensor4<double> dy(fwd.output.dims[0], 1, 1, fwd.output.dims[3]);
  net.backward(cache, dy);
  for (auto& p : net.params()) {
    for (double g : p.grad->v) REQUIRE(g == 0.0);
  }
}

TEST_CASE("dense gradient is the outer product of input and upstream grad") {
  NetSpec s;
  s.input_channels = 4;
  s.layers = {dense(3, 4)};
  s.embedding_layer_index = 0;
  auto net = Network<double>::build(s, 6);

  Rng rng(10);
  auto x = random_batch(rng, 5, 1, 1, 4);
  Cache<double> cache;
  net.forward(x, Mode::train, &cache);
  net.zero_grads();
  Tensor4<double> dy(5, 1, 1, 3);
  for (double& v : dy.v) v = rng.normal();
  auto dx = net.backward(cache, dy);

  auto params = net.params();
  const Tensor4<double>& w = *params[0].value;
  const Tensor4<double>& gw = *params[0].grad;
  const Tensor4<double>& gb = *params[1].grad;
  for (size_t i = 0; i < 4; ++i) {
    for (size_t u = 0; u < 3; ++u) {
      double expect = 0.0;
      for (size_t n = 0; n < 5; ++n) {
        expect += x.at(n, 0, 0, i) * dy.at(n, 0, 0, u);
      }
      REQUIRE(gw.at(0, 0, i, u) == doctest::Approx(expect).epsilon(1e-12));
    }
  }
  for (size_t u = 0; u < 3; ++u) {
    double expect = 0.0;
    for (size_t n = 0; n < 5; ++n) expect += dy.at(n, 0, 0, u);
    REQUIRE(gb.v[u] == doctest::Approx(expect).epsilon(1e-12));
  }
  // dx = dy W^T
  for (size_t n = 0; n < 5; ++n) {
    for (size_t i = 0; i < 4; ++i) {
      double expect = 0.0;
      for (size_t u = 0; u < 3; ++u) {
        expect += dy.at(n, 0, 0, u) * w.at(0, 0, i, u);
      }
      REQUIRE(dx.at(n, 0, 0, i) == doctest::Approx(expect).epsilon(1e-12));
    }
  }
}

TEST_CASE("backward rejects an infer-mode cache") {
  auto net = Network<double>::build(tiny_full_spec(), 2);
  Rng rng(4);
  auto batch = random_batch(rng, 2, 6, 6, 1);
  Cache<double> cache;
  auto fwd = net.forward(batch, Mode::infer, &cache);
  Tensor4<double> dy(2, 1, 1, 2);
  CHECK_THROWS_AS(net.backward(cache, dy), ContractError);
}

TEST_CASE("grad_check passes for every layer type under both losses") {
  Rng rng(123);
  {
    auto net = Network<double>::build(tiny_full_spec(), 55);
    auto batch = random_batch(rng, 3, 8, 9, 1);
    std::vector<int> labels = {0, 1, 0};
    auto report =
        grad_check(net, batch, CheckLoss::cross_entropy, labels, 1e-4);
    INFO("worst: ", report.worst_param, " rel ", report.max_rel_err);
    CHECK(report.pass);
  }
  {
    auto net =
        Network<double>::build(tiny_full_spec().embedding_prefix(), 56);
    auto batch = random_batch(rng, 4, 8, 9, 1);  // two pairs
    std::vector<int> labels = {+1, -1};
    auto report = grad_check(net, batch, CheckLoss::cosine_pair, labels, 1e-4);
    INFO("worst: ", report.worst_param, " rel ", report.max_rel_err);
    CHECK(report.pass);
  }
}

TEST_CASE("independent finite-difference oracle agrees with backward") {
  auto net = Network<double>::build(tiny_full_spec(), 91);
  Rng rng(14);
  auto batch = random_batch(rng, 3, 7, 8, 1);
  std::vector<int> labels = {1, 0, 1};

  // Analytic gradients via the engine.
  net.zero_grads();
  Cache<double> cache;
  auto fwd = net.forward(batch, Mode::train, &cache);
  Tensor4<double> dy(3, 1, 1, 2);
  for (size_t i = 0; i < 3; ++i) {
    std::span<const double, 2> logits(fwd.output.data() + 2 * i, 2);
    auto ce = cross_entropy<double>(logits, labels[i]);
    dy.v[2 * i] = ce.d_logits[0] / 3.0;
    dy.v[2 * i + 1] = ce.d_logits[1] / 3.0;
  }
  net.backward(cache, dy);
  std::vector<std::vector<double>> analytic;
  for (auto& p : net.params()) analytic.push_back(p.grad->v);

  auto numeric = acptest::numeric_grads(
      net, [&](Network<double>& n) { return mean_cross_entropy(n, batch, labels); });

  auto params = net.params();
  double worst = 0.0;
  for (size_t p = 0; p < analytic.size(); ++p) {
    for (size_t i = 0; i < analytic[p].size(); ++i) {
      worst = std::max(worst, acptest::rel_err(analytic[p][i], numeric[p][i]));
    }
  }
  CHECK(worst < 1e-4);

  // Fault injection: doubling one healthy analytic gradient must be
  // flagged by the same comparison.
  size_t pi = 0, ii = 0;
  double best_mag = 0.0;
  for (size_t p = 0; p < analytic.size(); ++p) {
    for (size_t i = 0; i < analytic[p].size(); ++i) {
      if (std::fabs(analytic[p][i]) > best_mag) {
        best_mag = std::fabs(analytic[p][i]);
        pi = p;
        ii = i;
      }
    }
  }
  REQUIRE(best_mag > 1e-3);
  const double corrupted = 2.0 * analytic[pi][ii];
  CHECK(acptest::rel_err(corrupted, numeric[pi][ii]) > 1e-4);
}

TEST_CASE("grad_check flags nets against a corrupted tolerance contract") {
  // A deliberately tightened tolerance fails, proving the report carries
  // the measured maximum rather than a constant verdict.
  auto net = Network<double>::build(tiny_full_spec(), 17);
  Rng rng(91);
  auto batch = random_batch(rng, 2, 6, 7, 1);
  std::vector<int> labels = {0, 1};
  auto report = grad_check(net, batch, CheckLoss::cross_entropy, labels, 1e-4);
  CHECK(report.pass);
  CHECK(report.max_rel_err > 0.0);
  auto strict = grad_check(net, batch, CheckLoss::cross_entropy, labels,
                           report.max_rel_err * 0.5);
  CHECK_FALSE(strict.pass);
}

TEST_CASE("frozen prefixes stop the backward walk") {
  auto net = Network<double>::build(tiny_full_spec(), 66);
  net.set_freeze_upto(5);  // everything below the embedding dense
  Rng rng(6);
  auto batch = random_batch(rng, 2, 6, 6, 1);
  Cache<double> cache;
  auto fwd = net.forward(batch, Mode::train, &cache);
  net.zero_grads();
  Tensor4<double> dy(2, 1, 1, 2);
  for (double& v : dy.v) v = rng.normal();
  auto dx = net.backward(cache, dy);
  CHECK(dx.size() == 0);  // stopped inside the frozen prefix

  for (auto& p : net.params()) {
    const bool frozen = p.spec_index <= 5;
    bool all_zero = true;
    for (double g : p.grad->v) all_zero = all_zero && g == 0.0;
    if (frozen) {
      REQUIRE(all_zero);
    }
  }
}
