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

#include "acp/gradcheck.h"

#include <cmath>

#include "acp/losses.h"

namespace acp {

namespace {

// Mean loss over the batch; optionally also the gradient w.r.t. the
// network output.
double eval_loss(Network<double>& net, const Tensor4<double>& batch,
                 CheckLoss loss, std::span<const int> labels,
                 Cache<double>* cache, Tensor4<double>* d_out) {
  auto fwd = net.forward(batch, Mode::train, cache);
  const Tensor4<double>& out = fwd.output;
  const size_t n = out.dims[0];
  const size_t dim = out.dims[3];

  if (loss == CheckLoss::cosine_pair) {
    if (net.spec().has_head()) {
      throw ContractError(
          "cosine_pair check runs on the embedding-prefix network");
    }
    if (n % 2 != 0 || labels.size() != n / 2) {
      throw ContractError("cosine_pair: batch must hold 2B items, B labels");
    }
    const size_t half = n / 2;
    if (d_out != nullptr) *d_out = Tensor4<double>(n, 1, 1, dim);
    double total = 0.0;
    for (size_t i = 0; i < half; ++i) {
      std::span<const double> x1(out.data() + i * dim, dim);
      std::span<const double> x2(out.data() + (half + i) * dim, dim);
      auto pl = pair_loss(x1, x2, labels[i]);
      total += pl.loss;
      if (d_out != nullptr) {
        for (size_t k = 0; k < dim; ++k) {
          d_out->v[i * dim + k] = pl.d_x1[k] / static_cast<double>(half);
          d_out->v[(half + i) * dim + k] =
              pl.d_x2[k] / static_cast<double>(half);
        }
      }
    }
    return total / static_cast<double>(half);
  }

  // cross_entropy
  if (dim != 2) throw ContractError("cross_entropy check needs 2 logits");
  if (labels.size() != n) {
    throw ContractError("cross_entropy: one label per batch item");
  }
  if (d_out != nullptr) *d_out = Tensor4<double>(n, 1, 1, 2);
  double total = 0.0;
  for (size_t i = 0; i < n; ++i) {
    std::span<const double, 2> logits(out.data() + i * 2, 2);
    auto ce = cross_entropy(logits, labels[i]);
    total += ce.loss;
    if (d_out != nullptr) {
      d_out->v[i * 2 + 0] = ce.d_logits[0] / static_cast<double>(n);
      d_out->v[i * 2 + 1] = ce.d_logits[1] / static_cast<double>(n);
    }
  }
  return total / static_cast<double>(n);
}

}  // namespace

GradCheckReport grad_check(Network<double>& net, const Tensor4<double>& batch,
                           CheckLoss loss, std::span<const int> labels,
                           double tolerance, double fd_epsilon) {
  // Analytic gradients.
  net.zero_grads();
  Cache<double> cache;
  Tensor4<double> d_out;
  eval_loss(net, batch, loss, labels, &cache, &d_out);
  net.backward(cache, d_out);

  auto params = net.params();
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (const auto& ref : params) analytic.push_back(ref.grad->v);

  GradCheckReport report;
  report.pass = true;
  for (size_t p = 0; p < params.size(); ++p) {
    Tensor4<double>& theta = *params[p].value;
    double worst = 0.0;
    for (size_t i = 0; i < theta.size(); ++i) {
      const double saved = theta.v[i];
      theta.v[i] = saved + fd_epsilon;
      const double lp = eval_loss(net, batch, loss, labels, nullptr, nullptr);
      theta.v[i] = saved - fd_epsilon;
      const double lm = eval_loss(net, batch, loss, labels, nullptr, nullptr);
      theta.v[i] = saved;

      const double numeric = (lp - lm) / (2.0 * fd_epsilon);
      const double a = analytic[p][i];
      const double rel = std::fabs(a - numeric) /
                         std::max({std::fabs(a), std::fabs(numeric), 1e-4});
      if (rel > worst) worst = rel;
    }
    report.per_param.push_back({params[p].name, worst});
    if (worst > report.max_rel_err) {
      report.max_rel_err = worst;
      report.worst_param = params[p].name;
    }
  }
  report.pass = report.max_rel_err < tolerance;
  return report;
}

}  // namespace acp
