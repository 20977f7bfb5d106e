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

#include "acp/network.h"

#include <cmath>
#include <cstring>

#include "acp/rng.h"

namespace acp {

namespace {

constexpr double kBnEps = 1e-5;
constexpr double kBnMomentum = 0.9;  // running = m*running + (1-m)*batch

template <typename T>
void check_finite(const Tensor4<T>& t, const std::string& layer_name) {
  double acc = 0.0;
  for (const T v : t.v) acc += std::fabs(static_cast<double>(v));
  if (!std::isfinite(acc)) {
    throw NumericError("non-finite activation after layer " + layer_name);
  }
}

}  // namespace

// ---------------------------------------------------------------------
// Runtime layers
// ---------------------------------------------------------------------

template <typename T>
class LayerImpl {
 public:
  LayerImpl(std::string name, int spec_index)
      : name_(std::move(name)), spec_index_(spec_index) {}
  virtual ~LayerImpl() = default;

  virtual void forward(const Tensor4<T>& x, Tensor4<T>& y, Mode mode,
                       LayerAux<T>* aux) = 0;
  virtual void backward(const Tensor4<T>& x, const LayerAux<T>& aux,
                        const Tensor4<T>& dy, Tensor4<T>& dx) = 0;
  virtual void collect(std::vector<ParamRef<T>>& params,
                       std::vector<StatRef<T>>& stats) {
    (void)params;
    (void)stats;
  }
  virtual void init(Rng& rng) { (void)rng; }
  virtual void zero_grads() {}
  virtual bool has_params() const { return false; }

  const std::string& name() const { return name_; }
  int spec_index() const { return spec_index_; }

 private:
  std::string name_;
  int spec_index_;
};

namespace {

template <typename T>
class ConvLayer final : public LayerImpl<T> {
 public:
  ConvLayer(std::string name, int spec_index, int in_c, int out_c,
            std::array<int, 2> kernel, std::array<int, 2> stride,
            std::array<int, 2> pad)
      : LayerImpl<T>(std::move(name), spec_index),
        in_c_(in_c),
        out_c_(out_c),
        k_(kernel),
        s_(stride),
        p_(pad),
        w_(kernel[0], kernel[1], in_c, out_c),
        b_(1, 1, 1, out_c),
        gw_(kernel[0], kernel[1], in_c, out_c),
        gb_(1, 1, 1, out_c) {}

  void init(Rng& rng) override {
    const double std_dev = std::sqrt(2.0 / (k_[0] * k_[1] * in_c_));
    for (T& v : w_.v) v = static_cast<T>(std_dev * rng.normal());
    b_.fill(T(0));
  }

  void forward(const Tensor4<T>& x, Tensor4<T>& y, Mode /*mode*/,
               LayerAux<T>* /*aux*/) override {
    const size_t n = x.dims[0], it = x.dims[1], jf = x.dims[2];
    if (x.dims[3] != static_cast<size_t>(in_c_)) {
      throw ContractError(this->name() + ": channel mismatch");
    }
    const size_t ot = (it + 2 * p_[0] - k_[0]) / s_[0] + 1;
    const size_t of = (jf + 2 * p_[1] - k_[1]) / s_[1] + 1;
    y = Tensor4<T>(n, ot, of, out_c_);

    const T* wp = w_.data();
    std::vector<T> acc(out_c_);
    for (size_t b = 0; b < n; ++b) {
      for (size_t t = 0; t < ot; ++t) {
        for (size_t f = 0; f < of; ++f) {
          std::memcpy(acc.data(), b_.data(), out_c_ * sizeof(T));
          for (int kt = 0; kt < k_[0]; ++kt) {
            const ptrdiff_t xt = static_cast<ptrdiff_t>(t) * s_[0] + kt - p_[0];
            if (xt < 0 || xt >= static_cast<ptrdiff_t>(it)) continue;
            for (int kf = 0; kf < k_[1]; ++kf) {
              const ptrdiff_t xf =
                  static_cast<ptrdiff_t>(f) * s_[1] + kf - p_[1];
              if (xf < 0 || xf >= static_cast<ptrdiff_t>(jf)) continue;
              const T* xrow =
                  x.data() + ((b * it + xt) * jf + xf) * in_c_;
              const T* wrow = wp + ((kt * k_[1] + kf) * in_c_) * out_c_;
              for (int ic = 0; ic < in_c_; ++ic) {
                const T xv = xrow[ic];
                const T* wv = wrow + static_cast<size_t>(ic) * out_c_;
                for (int oc = 0; oc < out_c_; ++oc) acc[oc] += xv * wv[oc];
              }
            }
          }
          std::memcpy(y.data() + ((b * ot + t) * of + f) * out_c_, acc.data(),
                      out_c_ * sizeof(T));
        }
      }
    }
  }

  void backward(const Tensor4<T>& x, const LayerAux<T>& /*aux*/,
                const Tensor4<T>& dy, Tensor4<T>& dx) override {
    const size_t n = x.dims[0], it = x.dims[1], jf = x.dims[2];
    const size_t ot = dy.dims[1], of = dy.dims[2];
    dx = Tensor4<T>(n, it, jf, in_c_);

    const T* wp = w_.data();
    T* gwp = gw_.data();
    for (size_t b = 0; b < n; ++b) {
      for (size_t t = 0; t < ot; ++t) {
        for (size_t f = 0; f < of; ++f) {
          const T* dyrow = dy.data() + ((b * ot + t) * of + f) * out_c_;
          double bsum_unused = 0.0;
          (void)bsum_unused;
          for (int kt = 0; kt < k_[0]; ++kt) {
            const ptrdiff_t xt = static_cast<ptrdiff_t>(t) * s_[0] + kt - p_[0];
            if (xt < 0 || xt >= static_cast<ptrdiff_t>(it)) continue;
            for (int kf = 0; kf < k_[1]; ++kf) {
              const ptrdiff_t xf =
                  static_cast<ptrdiff_t>(f) * s_[1] + kf - p_[1];
              if (xf < 0 || xf >= static_cast<ptrdiff_t>(jf)) continue;
              const size_t xoff = ((b * it + xt) * jf + xf) * in_c_;
              const T* xrow = x.data() + xoff;
              T* dxrow = dx.data() + xoff;
              const size_t woff = ((kt * k_[1] + kf) * in_c_) * out_c_;
              for (int ic = 0; ic < in_c_; ++ic) {
                const T* wv = wp + woff + static_cast<size_t>(ic) * out_c_;
                T* gwv = gwp + woff + static_cast<size_t>(ic) * out_c_;
                const T xv = xrow[ic];
                T dsum = T(0);
                for (int oc = 0; oc < out_c_; ++oc) {
                  dsum += wv[oc] * dyrow[oc];
                  gwv[oc] += xv * dyrow[oc];
                }
                dxrow[ic] += dsum;
              }
            }
          }
        }
      }
    }
    // Bias gradient: plain sum of dy over batch and positions.
    std::vector<double> bacc(out_c_, 0.0);
    const size_t spatial = n * ot * of;
    for (size_t i = 0; i < spatial; ++i) {
      const T* row = dy.data() + i * out_c_;
      for (int oc = 0; oc < out_c_; ++oc) bacc[oc] += row[oc];
    }
    for (int oc = 0; oc < out_c_; ++oc) {
      gb_.v[oc] += static_cast<T>(bacc[oc]);
    }
  }

  void collect(std::vector<ParamRef<T>>& params,
               std::vector<StatRef<T>>& stats) override {
    (void)stats;
    params.push_back({this->name() + ".w", this->spec_index(), &w_, &gw_});
    params.push_back({this->name() + ".b", this->spec_index(), &b_, &gb_});
  }

  void zero_grads() override {
    gw_.fill(T(0));
    gb_.fill(T(0));
  }
  bool has_params() const override { return true; }

  Tensor4<T>& weights() { return w_; }
  Tensor4<T>& bias() { return b_; }

 private:
  int in_c_, out_c_;
  std::array<int, 2> k_, s_, p_;
  Tensor4<T> w_, b_, gw_, gb_;
};

template <typename T>
class BatchNormLayer final : public LayerImpl<T> {
 public:
  BatchNormLayer(std::string name, int spec_index, int channels)
      : LayerImpl<T>(std::move(name), spec_index),
        c_(channels),
        gamma_(1, 1, 1, channels),
        beta_(1, 1, 1, channels),
        running_mean_(1, 1, 1, channels),
        running_var_(1, 1, 1, channels),
        ggamma_(1, 1, 1, channels),
        gbeta_(1, 1, 1, channels) {
    gamma_.fill(T(1));
    running_var_.fill(T(1));
  }

  void forward(const Tensor4<T>& x, Tensor4<T>& y, Mode mode,
               LayerAux<T>* aux) override {
    if (x.dims[3] != static_cast<size_t>(c_)) {
      throw ContractError(this->name() + ": channel mismatch");
    }
    const size_t rows = x.dims[0] * x.dims[1] * x.dims[2];
    y = Tensor4<T>(x.dims[0], x.dims[1], x.dims[2], x.dims[3]);

    std::vector<double> mean(c_, 0.0), var(c_, 0.0);
    if (mode == Mode::train) {
      for (size_t i = 0; i < rows; ++i) {
        const T* row = x.data() + i * c_;
        for (int ch = 0; ch < c_; ++ch) mean[ch] += row[ch];
      }
      for (int ch = 0; ch < c_; ++ch) mean[ch] /= static_cast<double>(rows);
      for (size_t i = 0; i < rows; ++i) {
        const T* row = x.data() + i * c_;
        for (int ch = 0; ch < c_; ++ch) {
          const double d = row[ch] - mean[ch];
          var[ch] += d * d;
        }
      }
      for (int ch = 0; ch < c_; ++ch) var[ch] /= static_cast<double>(rows);
      for (int ch = 0; ch < c_; ++ch) {
        running_mean_.v[ch] = static_cast<T>(
            kBnMomentum * running_mean_.v[ch] + (1.0 - kBnMomentum) * mean[ch]);
        running_var_.v[ch] = static_cast<T>(
            kBnMomentum * running_var_.v[ch] + (1.0 - kBnMomentum) * var[ch]);
      }
    } else {
      for (int ch = 0; ch < c_; ++ch) {
        mean[ch] = running_mean_.v[ch];
        var[ch] = running_var_.v[ch];
      }
    }

    std::vector<T> scale(c_), shift(c_), inv_std(c_);
    for (int ch = 0; ch < c_; ++ch) {
      inv_std[ch] = static_cast<T>(1.0 / std::sqrt(var[ch] + kBnEps));
      scale[ch] = static_cast<T>(gamma_.v[ch] * inv_std[ch]);
      shift[ch] = static_cast<T>(beta_.v[ch] - mean[ch] * scale[ch]);
    }
    for (size_t i = 0; i < rows; ++i) {
      const T* row = x.data() + i * c_;
      T* out = y.data() + i * c_;
      for (int ch = 0; ch < c_; ++ch) out[ch] = row[ch] * scale[ch] + shift[ch];
    }

    if (aux != nullptr && mode == Mode::train) {
      aux->bn_mean.assign(mean.begin(), mean.end());
      aux->bn_inv_std.assign(inv_std.begin(), inv_std.end());
    }
  }

  void backward(const Tensor4<T>& x, const LayerAux<T>& aux,
                const Tensor4<T>& dy, Tensor4<T>& dx) override {
    const size_t rows = x.dims[0] * x.dims[1] * x.dims[2];
    const double n = static_cast<double>(rows);
    dx = Tensor4<T>(x.dims[0], x.dims[1], x.dims[2], x.dims[3]);

    std::vector<double> dbeta(c_, 0.0), dgamma(c_, 0.0);
    for (size_t i = 0; i < rows; ++i) {
      const T* xrow = x.data() + i * c_;
      const T* dyrow = dy.data() + i * c_;
      for (int ch = 0; ch < c_; ++ch) {
        const double xhat =
            (xrow[ch] - aux.bn_mean[ch]) * aux.bn_inv_std[ch];
        dbeta[ch] += dyrow[ch];
        dgamma[ch] += dyrow[ch] * xhat;
      }
    }
    for (int ch = 0; ch < c_; ++ch) {
      gbeta_.v[ch] += static_cast<T>(dbeta[ch]);
      ggamma_.v[ch] += static_cast<T>(dgamma[ch]);
    }

    std::vector<double> k1(c_), k2(c_), k3(c_);
    for (int ch = 0; ch < c_; ++ch) {
      const double g = gamma_.v[ch] * aux.bn_inv_std[ch];
      k1[ch] = g;
      k2[ch] = g * dbeta[ch] / n;
      k3[ch] = g * dgamma[ch] / n;
    }
    for (size_t i = 0; i < rows; ++i) {
      const T* xrow = x.data() + i * c_;
      const T* dyrow = dy.data() + i * c_;
      T* dxrow = dx.data() + i * c_;
      for (int ch = 0; ch < c_; ++ch) {
        const double xhat =
            (xrow[ch] - aux.bn_mean[ch]) * aux.bn_inv_std[ch];
        dxrow[ch] =
            static_cast<T>(k1[ch] * dyrow[ch] - k2[ch] - xhat * k3[ch]);
      }
    }
  }

  void collect(std::vector<ParamRef<T>>& params,
               std::vector<StatRef<T>>& stats) override {
    params.push_back(
        {this->name() + ".gamma", this->spec_index(), &gamma_, &ggamma_});
    params.push_back(
        {this->name() + ".beta", this->spec_index(), &beta_, &gbeta_});
    stats.push_back(
        {this->name() + ".running_mean", this->spec_index(), &running_mean_});
    stats.push_back(
        {this->name() + ".running_var", this->spec_index(), &running_var_});
  }

  void zero_grads() override {
    ggamma_.fill(T(0));
    gbeta_.fill(T(0));
  }
  bool has_params() const override { return true; }

 private:
  int c_;
  Tensor4<T> gamma_, beta_, running_mean_, running_var_, ggamma_, gbeta_;
};

template <typename T>
class LeakyReluLayer final : public LayerImpl<T> {
 public:
  LeakyReluLayer(std::string name, int spec_index, double slope)
      : LayerImpl<T>(std::move(name), spec_index),
        slope_(static_cast<T>(slope)) {}

  void forward(const Tensor4<T>& x, Tensor4<T>& y, Mode /*mode*/,
               LayerAux<T>* /*aux*/) override {
    y = Tensor4<T>(x.dims[0], x.dims[1], x.dims[2], x.dims[3]);
    for (size_t i = 0; i < x.size(); ++i) {
      const T v = x.v[i];
      y.v[i] = v > T(0) ? v : slope_ * v;
    }
  }

  void backward(const Tensor4<T>& x, const LayerAux<T>& /*aux*/,
                const Tensor4<T>& dy, Tensor4<T>& dx) override {
    dx = Tensor4<T>(x.dims[0], x.dims[1], x.dims[2], x.dims[3]);
    for (size_t i = 0; i < x.size(); ++i) {
      dx.v[i] = x.v[i] > T(0) ? dy.v[i] : slope_ * dy.v[i];
    }
  }

 private:
  T slope_;
};

enum class PoolType { max_only, avg_only, max_avg_concat };

template <typename T>
class GlobalPoolLayer final : public LayerImpl<T> {
 public:
  GlobalPoolLayer(std::string name, int spec_index, PoolType type)
      : LayerImpl<T>(std::move(name), spec_index), type_(type) {}

  void forward(const Tensor4<T>& x, Tensor4<T>& y, Mode /*mode*/,
               LayerAux<T>* aux) override {
    const size_t n = x.dims[0], t = x.dims[1], f = x.dims[2], c = x.dims[3];
    const size_t spatial = t * f;
    const size_t out_c = type_ == PoolType::max_avg_concat ? 2 * c : c;
    y = Tensor4<T>(n, 1, 1, out_c);
    if (aux != nullptr) aux->pool_argmax.assign(n * c, 0);

    for (size_t b = 0; b < n; ++b) {
      const T* base = x.data() + b * spatial * c;
      for (size_t ch = 0; ch < c; ++ch) {
        T best = base[ch];
        size_t best_i = 0;
        double sum = 0.0;
        for (size_t i = 0; i < spatial; ++i) {
          const T v = base[i * c + ch];
          sum += v;
          if (v > best) {
            best = v;
            best_i = i;
          }
        }
        const T avg = static_cast<T>(sum / static_cast<double>(spatial));
        switch (type_) {
          case PoolType::max_only:
            y.at(b, 0, 0, ch) = best;
            break;
          case PoolType::avg_only:
            y.at(b, 0, 0, ch) = avg;
            break;
          case PoolType::max_avg_concat:
            y.at(b, 0, 0, ch) = best;
            y.at(b, 0, 0, c + ch) = avg;
            break;
        }
        if (aux != nullptr && type_ != PoolType::avg_only) {
          aux->pool_argmax[b * c + ch] = best_i;
        }
      }
    }
  }

  void backward(const Tensor4<T>& x, const LayerAux<T>& aux,
                const Tensor4<T>& dy, Tensor4<T>& dx) override {
    const size_t n = x.dims[0], t = x.dims[1], f = x.dims[2], c = x.dims[3];
    const size_t spatial = t * f;
    dx = Tensor4<T>(n, t, f, c);
    const T inv = static_cast<T>(1.0 / static_cast<double>(spatial));

    for (size_t b = 0; b < n; ++b) {
      T* base = dx.data() + b * spatial * c;
      for (size_t ch = 0; ch < c; ++ch) {
        switch (type_) {
          case PoolType::max_only:
            base[aux.pool_argmax[b * c + ch] * c + ch] += dy.at(b, 0, 0, ch);
            break;
          case PoolType::avg_only: {
            const T g = dy.at(b, 0, 0, ch) * inv;
            for (size_t i = 0; i < spatial; ++i) base[i * c + ch] += g;
            break;
          }
          case PoolType::max_avg_concat: {
            base[aux.pool_argmax[b * c + ch] * c + ch] += dy.at(b, 0, 0, ch);
            const T g = dy.at(b, 0, 0, c + ch) * inv;
            for (size_t i = 0; i < spatial; ++i) base[i * c + ch] += g;
            break;
          }
        }
      }
    }
  }

 private:
  PoolType type_;
};

template <typename T>
class DenseLayer final : public LayerImpl<T> {
 public:
  DenseLayer(std::string name, int spec_index, int in_features, int units)
      : LayerImpl<T>(std::move(name), spec_index),
        in_(in_features),
        units_(units),
        w_(1, 1, in_features, units),
        b_(1, 1, 1, units),
        gw_(1, 1, in_features, units),
        gb_(1, 1, 1, units) {}

  void init(Rng& rng) override {
    const double std_dev = std::sqrt(2.0 / in_);
    for (T& v : w_.v) v = static_cast<T>(std_dev * rng.normal());
    b_.fill(T(0));
  }

  void forward(const Tensor4<T>& x, Tensor4<T>& y, Mode /*mode*/,
               LayerAux<T>* /*aux*/) override {
    const size_t n = x.dims[0];
    const size_t feat = x.dims[1] * x.dims[2] * x.dims[3];
    if (feat != static_cast<size_t>(in_)) {
      throw ContractError(this->name() + ": expected " + std::to_string(in_) +
                          " input features, got " + std::to_string(feat));
    }
    y = Tensor4<T>(n, 1, 1, units_);
    for (size_t b = 0; b < n; ++b) {
      const T* xrow = x.data() + b * in_;
      T* yrow = y.data() + b * units_;
      std::memcpy(yrow, b_.data(), units_ * sizeof(T));
      for (int i = 0; i < in_; ++i) {
        const T xv = xrow[i];
        const T* wrow = w_.data() + static_cast<size_t>(i) * units_;
        for (int u = 0; u < units_; ++u) yrow[u] += xv * wrow[u];
      }
    }
  }

  void backward(const Tensor4<T>& x, const LayerAux<T>& /*aux*/,
                const Tensor4<T>& dy, Tensor4<T>& dx) override {
    const size_t n = x.dims[0];
    dx = Tensor4<T>(x.dims[0], x.dims[1], x.dims[2], x.dims[3]);
    for (size_t b = 0; b < n; ++b) {
      const T* xrow = x.data() + b * in_;
      const T* dyrow = dy.data() + b * units_;
      T* dxrow = dx.data() + b * in_;
      for (int i = 0; i < in_; ++i) {
        const T* wrow = w_.data() + static_cast<size_t>(i) * units_;
        T* gwrow = gw_.data() + static_cast<size_t>(i) * units_;
        const T xv = xrow[i];
        T dsum = T(0);
        for (int u = 0; u < units_; ++u) {
          dsum += wrow[u] * dyrow[u];
          gwrow[u] += xv * dyrow[u];
        }
        dxrow[i] = dsum;
      }
      for (int u = 0; u < units_; ++u) gb_.v[u] += dyrow[u];
    }
  }

  void collect(std::vector<ParamRef<T>>& params,
               std::vector<StatRef<T>>& stats) override {
    (void)stats;
    params.push_back({this->name() + ".w", this->spec_index(), &w_, &gw_});
    params.push_back({this->name() + ".b", this->spec_index(), &b_, &gb_});
  }

  void zero_grads() override {
    gw_.fill(T(0));
    gb_.fill(T(0));
  }
  bool has_params() const override { return true; }

 private:
  int in_, units_;
  Tensor4<T> w_, b_, gw_, gb_;
};

// Pre-activation residual block: BN -> act -> conv(stride) -> BN -> act
// -> conv(1), plus a 1x1 projection on the skip path when the channel
// count or stride changes.
template <typename T>
class ResidualBlockLayer final : public LayerImpl<T> {
 public:
  ResidualBlockLayer(std::string name, int spec_index, int in_c, int out_c,
                     std::array<int, 2> stride, double slope)
      : LayerImpl<T>(std::move(name), spec_index) {
    const std::string& base = this->name();
    bn1_ = std::make_unique<BatchNormLayer<T>>(base + ".bn1", spec_index, in_c);
    act1_ = std::make_unique<LeakyReluLayer<T>>(base + ".act1", spec_index,
                                                slope);
    conv1_ = std::make_unique<ConvLayer<T>>(base + ".conv1", spec_index, in_c,
                                            out_c, std::array<int, 2>{3, 3},
                                            stride, std::array<int, 2>{1, 1});
    bn2_ = std::make_unique<BatchNormLayer<T>>(base + ".bn2", spec_index,
                                               out_c);
    act2_ = std::make_unique<LeakyReluLayer<T>>(base + ".act2", spec_index,
                                                slope);
    conv2_ = std::make_unique<ConvLayer<T>>(
        base + ".conv2", spec_index, out_c, out_c, std::array<int, 2>{3, 3},
        std::array<int, 2>{1, 1}, std::array<int, 2>{1, 1});
    if (in_c != out_c || stride[0] != 1 || stride[1] != 1) {
      proj_ = std::make_unique<ConvLayer<T>>(
          base + ".proj", spec_index, in_c, out_c, std::array<int, 2>{1, 1},
          stride, std::array<int, 2>{0, 0});
    }
  }

  void init(Rng& rng) override {
    conv1_->init(rng);
    conv2_->init(rng);
    if (proj_) proj_->init(rng);
  }

  void forward(const Tensor4<T>& x, Tensor4<T>& y, Mode mode,
               LayerAux<T>* aux) override {
    LayerImpl<T>* chain[6] = {bn1_.get(),  act1_.get(), conv1_.get(),
                              bn2_.get(),  act2_.get(), conv2_.get()};
    std::vector<Tensor4<T>> acts(6);
    std::vector<LayerAux<T>> auxs(7);

    const Tensor4<T>* cur = &x;
    for (int i = 0; i < 6; ++i) {
      chain[i]->forward(*cur, acts[i], mode, aux ? &auxs[i] : nullptr);
      cur = &acts[i];
    }

    if (proj_) {
      Tensor4<T> skip;
      proj_->forward(x, skip, mode, aux ? &auxs[6] : nullptr);
      y = std::move(skip);
    } else {
      y = x;
    }
    if (!y.same_shape(acts[5])) {
      throw ContractError(this->name() + ": skip and main path shapes differ");
    }
    for (size_t i = 0; i < y.size(); ++i) y.v[i] += acts[5].v[i];

    if (aux != nullptr) {
      aux->sub_acts = std::move(acts);
      aux->sub_aux = std::move(auxs);
    }
  }

  void backward(const Tensor4<T>& x, const LayerAux<T>& aux,
                const Tensor4<T>& dy, Tensor4<T>& dx) override {
    LayerImpl<T>* chain[6] = {bn1_.get(),  act1_.get(), conv1_.get(),
                              bn2_.get(),  act2_.get(), conv2_.get()};
    Tensor4<T> grad = dy;
    for (int i = 5; i >= 0; --i) {
      const Tensor4<T>& input = i == 0 ? x : aux.sub_acts[i - 1];
      Tensor4<T> dinput;
      chain[i]->backward(input, aux.sub_aux[i], grad, dinput);
      grad = std::move(dinput);
    }
    if (proj_) {
      Tensor4<T> dskip;
      proj_->backward(x, aux.sub_aux[6], dy, dskip);
      for (size_t i = 0; i < grad.size(); ++i) grad.v[i] += dskip.v[i];
    } else {
      for (size_t i = 0; i < grad.size(); ++i) grad.v[i] += dy.v[i];
    }
    dx = std::move(grad);
  }

  void collect(std::vector<ParamRef<T>>& params,
               std::vector<StatRef<T>>& stats) override {
    bn1_->collect(params, stats);
    conv1_->collect(params, stats);
    bn2_->collect(params, stats);
    conv2_->collect(params, stats);
    if (proj_) proj_->collect(params, stats);
  }

  void zero_grads() override {
    bn1_->zero_grads();
    conv1_->zero_grads();
    bn2_->zero_grads();
    conv2_->zero_grads();
    if (proj_) proj_->zero_grads();
  }
  bool has_params() const override { return true; }

 private:
  std::unique_ptr<BatchNormLayer<T>> bn1_, bn2_;
  std::unique_ptr<LeakyReluLayer<T>> act1_, act2_;
  std::unique_ptr<ConvLayer<T>> conv1_, conv2_, proj_;
};

}  // namespace

// ---------------------------------------------------------------------
// Network
// ---------------------------------------------------------------------

template <typename T>
Network<T>::Network(Network&&) noexcept = default;
template <typename T>
Network<T>& Network<T>::operator=(Network&&) noexcept = default;
template <typename T>
Network<T>::~Network() = default;

template <typename T>
Network<T> Network<T>::build(const NetSpec& spec, uint64_t init_seed) {
  spec.validate();
  const std::vector<LayerShape> shapes = infer_shapes(spec, 0, 0);

  Network<T> net;
  net.spec_ = spec;

  int in_c = spec.input_channels;
  for (size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    const int idx = static_cast<int>(i);
    const std::string tag = std::to_string(i);
    switch (l.kind) {
      case LayerKind::conv2d:
        net.layers_.push_back(std::make_unique<ConvLayer<T>>(
            "conv" + tag, idx, in_c, l.out_channels, l.kernel, l.stride,
            l.pad));
        break;
      case LayerKind::batchnorm:
        net.layers_.push_back(
            std::make_unique<BatchNormLayer<T>>("bn" + tag, idx, in_c));
        break;
      case LayerKind::leaky_relu:
        net.layers_.push_back(
            std::make_unique<LeakyReluLayer<T>>("act" + tag, idx, l.slope));
        break;
      case LayerKind::residual_block:
        net.layers_.push_back(std::make_unique<ResidualBlockLayer<T>>(
            "res" + tag, idx, in_c, l.out_channels, l.stride, l.slope));
        break;
      case LayerKind::maxpool_global: {
        // An immediately following avgpool forms the concatenating pair.
        if (i + 1 < spec.layers.size() &&
            spec.layers[i + 1].kind == LayerKind::avgpool_global) {
          net.layers_.push_back(std::make_unique<GlobalPoolLayer<T>>(
              "pool" + tag, static_cast<int>(i + 1),
              PoolType::max_avg_concat));
          ++i;
        } else {
          net.layers_.push_back(std::make_unique<GlobalPoolLayer<T>>(
              "pool" + tag, idx, PoolType::max_only));
        }
        break;
      }
      case LayerKind::avgpool_global:
        net.layers_.push_back(std::make_unique<GlobalPoolLayer<T>>(
            "pool" + tag, idx, PoolType::avg_only));
        break;
      case LayerKind::dense: {
        const LayerShape& prev =
            i == 0 ? LayerShape{false, 0, 0, spec.input_channels}
                   : shapes[i - 1];
        long in_feat = l.in_features;
        if (in_feat <= 0) {
          in_feat = prev.flat ? prev.c : prev.t * prev.f * prev.c;
        }
        net.layers_.push_back(std::make_unique<DenseLayer<T>>(
            "dense" + tag, idx, static_cast<int>(in_feat), l.units));
        break;
      }
    }
    in_c = static_cast<int>(shapes[i].c);
    if (net.layers_.back()->spec_index() == spec.embedding_layer_index) {
      net.embedding_runtime_index_ =
          static_cast<int>(net.layers_.size()) - 1;
    }
  }

  Rng rng(init_seed);
  for (auto& layer : net.layers_) layer->init(rng);
  return net;
}

template <typename T>
typename Network<T>::ForwardResult Network<T>::forward(const Tensor4<T>& batch,
                                                       Mode mode,
                                                       Cache<T>* cache) {
  if (batch.dims[3] != static_cast<size_t>(spec_.input_channels)) {
    throw ContractError("input batch has " + std::to_string(batch.dims[3]) +
                        " channels, spec wants " +
                        std::to_string(spec_.input_channels));
  }
  if (batch.dims[0] == 0) throw ContractError("empty batch");

  std::vector<Tensor4<T>> acts;
  std::vector<LayerAux<T>> aux;
  acts.reserve(layers_.size() + 1);
  acts.push_back(batch);
  aux.resize(layers_.size());

  ForwardResult result;
  for (size_t i = 0; i < layers_.size(); ++i) {
    Tensor4<T> out;
    layers_[i]->forward(acts.back(), out, mode,
                        cache != nullptr ? &aux[i] : nullptr);
    check_finite(out, layers_[i]->name());
    if (static_cast<int>(i) == embedding_runtime_index_) {
      result.embedding = out;
    }
    acts.push_back(std::move(out));
  }
  result.output = acts.back();

  if (cache != nullptr) {
    cache->mode = mode;
    cache->valid = true;
    cache->acts = std::move(acts);
    cache->aux = std::move(aux);
  }
  return result;
}

template <typename T>
Tensor4<T> Network<T>::backward(const Cache<T>& cache,
                                const Tensor4<T>& d_output) {
  if (!cache.valid || cache.mode != Mode::train) {
    throw ContractError("backward requires a cache from a train-mode forward");
  }
  if (cache.acts.size() != layers_.size() + 1) {
    throw ContractError("cache does not match this network");
  }

  // Stop below the lowest layer that still trains; everything under it is
  // frozen and needs neither parameter nor input gradients.
  int lowest = static_cast<int>(layers_.size());
  for (int i = 0; i < static_cast<int>(layers_.size()); ++i) {
    if (layer_trainable(layers_[i]->spec_index()) && layers_[i]->has_params()) {
      lowest = i;
      break;
    }
  }
  if (lowest == static_cast<int>(layers_.size())) return Tensor4<T>();

  Tensor4<T> grad = d_output;
  for (int i = static_cast<int>(layers_.size()) - 1; i >= lowest; --i) {
    Tensor4<T> dinput;
    layers_[i]->backward(cache.acts[i], cache.aux[i], grad, dinput);
    grad = std::move(dinput);
  }
  if (lowest > 0) return Tensor4<T>();  // stopped inside a frozen prefix
  return grad;
}

template <typename T>
void Network<T>::zero_grads() {
  for (auto& layer : layers_) layer->zero_grads();
}

template <typename T>
std::vector<ParamRef<T>> Network<T>::params() {
  std::vector<ParamRef<T>> p;
  std::vector<StatRef<T>> s;
  for (auto& layer : layers_) layer->collect(p, s);
  return p;
}

template <typename T>
std::vector<StatRef<T>> Network<T>::stats() {
  std::vector<ParamRef<T>> p;
  std::vector<StatRef<T>> s;
  for (auto& layer : layers_) layer->collect(p, s);
  return s;
}

template <typename T>
size_t Network<T>::n_parameters() {
  size_t n = 0;
  for (const auto& ref : params()) n += ref.value->size();
  return n;
}

template <typename T>
void Network<T>::set_freeze_upto(int spec_index) {
  if (spec_index >= static_cast<int>(spec_.layers.size())) {
    throw ContractError("freeze_upto beyond the last layer");
  }
  freeze_upto_ = spec_index < 0 ? -1 : spec_index;
}

template class Network<float>;
template class Network<double>;

}  // namespace acp
