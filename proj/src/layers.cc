// Copyright 2026 The FSVAE Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "fsvae/layers.h"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "fsvae/errors.h"

namespace fsvae {
namespace {

using RowMatrix =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<RowMatrix>;
using MapC = Eigen::Map<const RowMatrix>;

void RequireCache(const LayerCache& cache, const std::string& who) {
  if (!cache.valid) {
    throw Error(who + ": backward called without saved forward state");
  }
}

// Adds bias[c] to every element of channel c in [B, C, P].
void AddChannelBias(Tensor& y, const Tensor& bias) {
  const int64_t b = y.dim(0), c = y.dim(1), p = y.size() / (b * c);
  for (int64_t i = 0; i < b; ++i)
    for (int64_t j = 0; j < c; ++j) {
      float* row = y.data() + (i * c + j) * p;
      for (int64_t k = 0; k < p; ++k) row[k] += bias[j];
    }
}

void AccumulateChannelBiasGrad(const Tensor& g, Tensor& grad_bias) {
  const int64_t b = g.dim(0), c = g.dim(1), p = g.size() / (b * c);
  for (int64_t i = 0; i < b; ++i)
    for (int64_t j = 0; j < c; ++j) {
      const float* row = g.data() + (i * c + j) * p;
      double s = 0.0;
      for (int64_t k = 0; k < p; ++k) s += row[k];
      grad_bias[j] += static_cast<float>(s);
    }
}

void AddInto(Tensor& dst, const Tensor& src) {
  for (int64_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace

Tensor FanInUniform(const Shape& shape, int64_t fan_in, float gain,
                    RngStream& rng) {
  Tensor t(shape);
  const float bound = gain * std::sqrt(3.0f / static_cast<float>(fan_in));
  for (float& v : t.values()) v = (2.0f * rng.UniformFloat() - 1.0f) * bound;
  return t;
}

// ---- Linear ----

Linear::Linear(std::string name, int64_t in_features, int64_t out_features,
               bool bias, float gain, RngStream& rng)
    : in_(in_features),
      out_(out_features),
      has_bias_(bias),
      weight_(name + ".weight",
              FanInUniform({out_features, in_features}, in_features, gain, rng)),
      bias_(name + ".bias", Tensor({bias ? out_features : 0})) {}

Shape Linear::OutputShape(const Shape& input) const {
  if (input.empty() || NumElements(input) != input[0] * in_) {
    throw ShapeError("linear: input " + ShapeString(input) +
                     " does not flatten to [B," + std::to_string(in_) + "]");
  }
  return {input[0], out_};
}

Tensor Linear::Forward(const Tensor& x, LayerCache* cache) const {
  const Shape out_shape = OutputShape(x.shape());
  const int64_t b = out_shape[0];
  Tensor y(out_shape);
  MapM(y.data(), b, out_).noalias() =
      MapC(x.data(), b, in_) * MapC(weight_.value.data(), out_, in_).transpose();
  if (has_bias_) AddChannelBias(y, bias_.value);
  if (cache) {
    cache->saved = {x};
    cache->valid = true;
  }
  return y;
}

Tensor Linear::Backward(const Tensor& grad_output, const LayerCache& cache,
                        bool need_input_grad) {
  RequireCache(cache, weight_.name);
  const Tensor& x = cache.saved[0];
  const int64_t b = x.dim(0);
  if (grad_output.shape() != Shape{b, out_}) {
    throw ShapeError("linear backward: upstream grad " +
                     ShapeString(grad_output.shape()) + " vs output " +
                     ShapeString({b, out_}));
  }
  MapC g(grad_output.data(), b, out_);
  MapM(weight_.grad.data(), out_, in_).noalias() += g.transpose() * MapC(x.data(), b, in_);
  if (has_bias_) AccumulateChannelBiasGrad(grad_output, bias_.grad);
  if (!need_input_grad) return {};
  Tensor gx(x.shape());
  MapM(gx.data(), b, in_).noalias() = g * MapC(weight_.value.data(), out_, in_);
  return gx;
}

std::vector<Parameter*> Linear::Parameters() {
  if (has_bias_) return {&weight_, &bias_};
  return {&weight_};
}

// ---- Conv2d ----

Conv2dLayer::Conv2dLayer(std::string name, int64_t in_channels,
                         int64_t out_channels, int64_t kernel,
                         ConvParams params, bool bias, float gain,
                         RngStream& rng)
    : params_(params),
      has_bias_(bias),
      weight_(name + ".weight",
              FanInUniform({out_channels, in_channels, kernel, kernel},
                           in_channels * kernel * kernel, gain, rng)),
      bias_(name + ".bias", Tensor({bias ? out_channels : 0})) {}

Shape Conv2dLayer::OutputShape(const Shape& input) const {
  if (input.size() != 4 || input[1] != weight_.value.dim(1)) {
    throw ShapeError("conv2d: input " + ShapeString(input) +
                     " incompatible with weight " +
                     ShapeString(weight_.value.shape()));
  }
  const int64_t k = weight_.value.dim(2);
  return {input[0], weight_.value.dim(0), ConvOutSize(input[2], k, params_),
          ConvOutSize(input[3], k, params_)};
}

Tensor Conv2dLayer::Forward(const Tensor& x, LayerCache* cache) const {
  OutputShape(x.shape());
  Tensor y = Conv2d(x, weight_.value, params_);
  if (has_bias_) AddChannelBias(y, bias_.value);
  if (cache) {
    cache->saved = {x};
    cache->valid = true;
  }
  return y;
}

Tensor Conv2dLayer::Backward(const Tensor& grad_output, const LayerCache& cache,
                             bool need_input_grad) {
  RequireCache(cache, weight_.name);
  Tensor gw, gx;
  Conv2dBackward(cache.saved[0], weight_.value, params_, grad_output,
                 need_input_grad ? &gx : nullptr, &gw);
  AddInto(weight_.grad, gw);
  if (has_bias_) AccumulateChannelBiasGrad(grad_output, bias_.grad);
  return gx;
}

std::vector<Parameter*> Conv2dLayer::Parameters() {
  if (has_bias_) return {&weight_, &bias_};
  return {&weight_};
}

// ---- ConvTranspose2d ----

ConvTranspose2dLayer::ConvTranspose2dLayer(std::string name,
                                           int64_t in_channels,
                                           int64_t out_channels, int64_t kernel,
                                           ConvParams params, bool bias,
                                           float gain, RngStream& rng)
    : params_(params),
      has_bias_(bias),
      // Each output pixel of a stride-s transposed conv receives about
      // in*k*k/s^2 taps; scale on that effective fan-in.
      weight_(name + ".weight",
              FanInUniform({in_channels, out_channels, kernel, kernel},
                           std::max<int64_t>(1, in_channels * kernel * kernel /
                                                    (params.stride * params.stride)),
                           gain, rng)),
      bias_(name + ".bias", Tensor({bias ? out_channels : 0})) {}

Shape ConvTranspose2dLayer::OutputShape(const Shape& input) const {
  if (input.size() != 4 || input[1] != weight_.value.dim(0)) {
    throw ShapeError("conv_transpose2d: input " + ShapeString(input) +
                     " incompatible with weight " +
                     ShapeString(weight_.value.shape()));
  }
  const int64_t k = weight_.value.dim(2);
  return {input[0], weight_.value.dim(1),
          ConvTransposeOutSize(input[2], k, params_),
          ConvTransposeOutSize(input[3], k, params_)};
}

Tensor ConvTranspose2dLayer::Forward(const Tensor& x, LayerCache* cache) const {
  OutputShape(x.shape());
  Tensor y = ConvTranspose2d(x, weight_.value, params_);
  if (has_bias_) AddChannelBias(y, bias_.value);
  if (cache) {
    cache->saved = {x};
    cache->valid = true;
  }
  return y;
}

Tensor ConvTranspose2dLayer::Backward(const Tensor& grad_output,
                                      const LayerCache& cache,
                                      bool need_input_grad) {
  RequireCache(cache, weight_.name);
  Tensor gw, gx;
  ConvTranspose2dBackward(cache.saved[0], weight_.value, params_, grad_output,
                          need_input_grad ? &gx : nullptr, &gw);
  AddInto(weight_.grad, gw);
  if (has_bias_) AccumulateChannelBiasGrad(grad_output, bias_.grad);
  return gx;
}

std::vector<Parameter*> ConvTranspose2dLayer::Parameters() {
  if (has_bias_) return {&weight_, &bias_};
  return {&weight_};
}

// ---- TdBatchNorm ----

TdBatchNorm::TdBatchNorm(std::string name, int64_t channels, float v_th,
                         float momentum, float eps)
    : name_(std::move(name)),
      channels_(channels),
      v_th_(v_th),
      momentum_(momentum),
      eps_(eps),
      gamma_(name_ + ".gamma", Tensor({channels}, 1.0f)),
      beta_(name_ + ".beta", Tensor({channels}, 0.0f)),
      running_mean_({channels}, 0.0f),
      running_var_({channels}, 1.0f) {}

// cache->saved = {xhat, inv_std, mode}; mode[0] = 1 for batch statistics.
namespace {

// Row reductions with 16 independent float lanes, combined in double.
constexpr int kLanes = 16;

double LaneSum(const float* r, int64_t n) {
  float lanes[kLanes] = {};
  int64_t k = 0;
  for (; k + kLanes <= n; k += kLanes)
    for (int l = 0; l < kLanes; ++l) lanes[l] += r[k + l];
  double s = 0.0;
  for (; k < n; ++k) s += r[k];
  for (float v : lanes) s += v;
  return s;
}

double LaneSquaredDeviation(const float* r, int64_t n, float mu) {
  float lanes[kLanes] = {};
  int64_t k = 0;
  for (; k + kLanes <= n; k += kLanes)
    for (int l = 0; l < kLanes; ++l) {
      const float d = r[k + l] - mu;
      lanes[l] += d * d;
    }
  double s = 0.0;
  for (; k < n; ++k) s += static_cast<double>(r[k] - mu) * (r[k] - mu);
  for (float v : lanes) s += v;
  return s;
}

double LaneDot(const float* a, const float* b, int64_t n) {
  float lanes[kLanes] = {};
  int64_t k = 0;
  for (; k + kLanes <= n; k += kLanes)
    for (int l = 0; l < kLanes; ++l) lanes[l] += a[k + l] * b[k + l];
  double s = 0.0;
  for (; k < n; ++k) s += static_cast<double>(a[k]) * b[k];
  for (float v : lanes) s += v;
  return s;
}

}  // namespace

Tensor TdBatchNorm::Forward(const Tensor& x, bool training, LayerCache* cache) {
  if (x.rank() < 2 || x.dim(1) != channels_) {
    throw ShapeError(name_ + ": expected [B," + std::to_string(channels_) +
                     ",...], got " + ShapeString(x.shape()));
  }
  const int64_t b = x.dim(0);
  if (b == 0) throw ShapeError(name_ + ": empty batch");
  const int64_t c = channels_, p = x.size() / (b * c);
  const int64_t m = b * p;
  Tensor mean({c}), inv_std({c});
  if (training) {
    for (int64_t j = 0; j < c; ++j) {
      double s = 0.0;
      for (int64_t i = 0; i < b; ++i) s += LaneSum(x.data() + (i * c + j) * p, p);
      const double mu = s / static_cast<double>(m);
      double ss = 0.0;
      for (int64_t i = 0; i < b; ++i) {
        ss += LaneSquaredDeviation(x.data() + (i * c + j) * p, p,
                                   static_cast<float>(mu));
      }
      const double var = ss / static_cast<double>(m);
      mean[j] = static_cast<float>(mu);
      inv_std[j] = static_cast<float>(1.0 / std::sqrt(var + eps_));
      const double unbiased = m > 1 ? ss / static_cast<double>(m - 1) : var;
      running_mean_[j] = static_cast<float>((1.0 - momentum_) * running_mean_[j] +
                                            momentum_ * mu);
      running_var_[j] = static_cast<float>((1.0 - momentum_) * running_var_[j] +
                                           momentum_ * unbiased);
    }
  } else {
    for (int64_t j = 0; j < c; ++j) {
      mean[j] = running_mean_[j];
      inv_std[j] = 1.0f / std::sqrt(running_var_[j] + eps_);
    }
  }
  Tensor xhat(x.shape()), y(x.shape());
  for (int64_t i = 0; i < b; ++i)
    for (int64_t j = 0; j < c; ++j) {
      const float scale = gamma_.value[j] * v_th_;
      const float shift = beta_.value[j];
      const int64_t off = (i * c + j) * p;
      for (int64_t k = 0; k < p; ++k) {
        const float h = (x[off + k] - mean[j]) * inv_std[j];
        xhat[off + k] = h;
        y[off + k] = scale * h + shift;
      }
    }
  if (cache) {
    cache->saved = {std::move(xhat), std::move(inv_std),
                    Tensor({1}, training ? 1.0f : 0.0f)};
    cache->valid = true;
  }
  return y;
}

Tensor TdBatchNorm::Backward(const Tensor& grad_output, const LayerCache& cache) {
  RequireCache(cache, name_);
  const Tensor& xhat = cache.saved[0];
  const Tensor& inv_std = cache.saved[1];
  const bool batch_stats = cache.saved[2][0] != 0.0f;
  if (grad_output.shape() != xhat.shape()) {
    throw ShapeError(name_ + " backward: upstream grad " +
                     ShapeString(grad_output.shape()) + " vs output " +
                     ShapeString(xhat.shape()));
  }
  const int64_t b = xhat.dim(0), c = channels_, p = xhat.size() / (b * c);
  const double m = static_cast<double>(b * p);
  Tensor gx(xhat.shape());
  for (int64_t j = 0; j < c; ++j) {
    double sum_g = 0.0, sum_gh = 0.0;
    for (int64_t i = 0; i < b; ++i) {
      const int64_t off = (i * c + j) * p;
      sum_g += LaneSum(grad_output.data() + off, p);
      sum_gh += LaneDot(grad_output.data() + off, xhat.data() + off, p);
    }
    gamma_.grad[j] += static_cast<float>(sum_gh * v_th_);
    beta_.grad[j] += static_cast<float>(sum_g);
    const float scale = gamma_.value[j] * v_th_ * inv_std[j];
    if (batch_stats) {
      const float mean_g = static_cast<float>(sum_g / m);
      const float mean_gh = static_cast<float>(sum_gh / m);
      for (int64_t i = 0; i < b; ++i) {
        const int64_t off = (i * c + j) * p;
        for (int64_t k = 0; k < p; ++k) {
          gx[off + k] =
              scale * (grad_output[off + k] - mean_g - xhat[off + k] * mean_gh);
        }
      }
    } else {
      for (int64_t i = 0; i < b; ++i) {
        const int64_t off = (i * c + j) * p;
        for (int64_t k = 0; k < p; ++k) gx[off + k] = scale * grad_output[off + k];
      }
    }
  }
  return gx;
}

}  // namespace fsvae
