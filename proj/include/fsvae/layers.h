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

#ifndef FSVAE_LAYERS_H_
#define FSVAE_LAYERS_H_

#include <string>
#include <vector>

#include "fsvae/conv.h"
#include "fsvae/rng.h"
#include "fsvae/tensor.h"

namespace fsvae {

// A trainable tensor and its accumulated gradient.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string n, Tensor v)
      : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}
  void ZeroGrad() { grad.Fill(0.0f); }
};

// Whatever a forward pass must hand to the matching backward pass.
struct LayerCache {
  std::vector<Tensor> saved;
  bool valid = false;

  void Clear() {
    saved.clear();
    valid = false;
  }
};

// Differentiable map with an explicit backward. Backward accumulates into
// the parameters' `grad` fields and returns the gradient w.r.t. the input
// (an empty tensor when `need_input_grad` is false).
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor Forward(const Tensor& x, LayerCache* cache) const = 0;
  virtual Tensor Backward(const Tensor& grad_output, const LayerCache& cache,
                          bool need_input_grad) = 0;
  virtual std::vector<Parameter*> Parameters() = 0;
  virtual Shape OutputShape(const Shape& input) const = 0;
};

// Fan-in scaled uniform init: U(-b, b), b = gain * sqrt(3 / fan_in).
Tensor FanInUniform(const Shape& shape, int64_t fan_in, float gain,
                    RngStream& rng);

// y = x W^T (+ b). Input [B, ...] is flattened to [B, in_features].
class Linear : public Layer {
 public:
  Linear(std::string name, int64_t in_features, int64_t out_features,
         bool bias, float gain, RngStream& rng);

  Tensor Forward(const Tensor& x, LayerCache* cache) const override;
  Tensor Backward(const Tensor& grad_output, const LayerCache& cache,
                  bool need_input_grad) override;
  std::vector<Parameter*> Parameters() override;
  Shape OutputShape(const Shape& input) const override;

  Parameter& weight() { return weight_; }
  const Parameter& weight() const { return weight_; }
  Parameter& bias() { return bias_; }
  bool has_bias() const { return has_bias_; }
  int64_t in_features() const { return in_; }
  int64_t out_features() const { return out_; }

 private:
  int64_t in_, out_;
  bool has_bias_;
  Parameter weight_;  // [out, in]
  Parameter bias_;    // [out]
};

class Conv2dLayer : public Layer {
 public:
  Conv2dLayer(std::string name, int64_t in_channels, int64_t out_channels,
              int64_t kernel, ConvParams params, bool bias, float gain,
              RngStream& rng);

  Tensor Forward(const Tensor& x, LayerCache* cache) const override;
  Tensor Backward(const Tensor& grad_output, const LayerCache& cache,
                  bool need_input_grad) override;
  std::vector<Parameter*> Parameters() override;
  Shape OutputShape(const Shape& input) const override;

  Parameter& weight() { return weight_; }
  Parameter& bias() { return bias_; }

 private:
  ConvParams params_;
  bool has_bias_;
  Parameter weight_;  // [out, in, k, k]
  Parameter bias_;    // [out]
};

// Transposed convolution; weight laid out [in, out, k, k].
class ConvTranspose2dLayer : public Layer {
 public:
  ConvTranspose2dLayer(std::string name, int64_t in_channels,
                       int64_t out_channels, int64_t kernel, ConvParams params,
                       bool bias, float gain, RngStream& rng);

  Tensor Forward(const Tensor& x, LayerCache* cache) const override;
  Tensor Backward(const Tensor& grad_output, const LayerCache& cache,
                  bool need_input_grad) override;
  std::vector<Parameter*> Parameters() override;
  Shape OutputShape(const Shape& input) const override;

  Parameter& weight() { return weight_; }
  Parameter& bias() { return bias_; }

 private:
  ConvParams params_;
  bool has_bias_;
  Parameter weight_;
  Parameter bias_;
};

// Threshold-dependent batch norm. Statistics are per channel (axis 1) over
// every other axis of the tensor it is given, so a [T*N, C, H, W] input
// normalizes jointly over time, batch and space:
//   y = gamma * v_th * (x - mean) / sqrt(var + eps) + beta
class TdBatchNorm {
 public:
  TdBatchNorm(std::string name, int64_t channels, float v_th,
              float momentum = 0.1f, float eps = 1e-5f);

  // Training mode uses batch statistics and updates the running ones.
  Tensor Forward(const Tensor& x, bool training, LayerCache* cache);
  Tensor Backward(const Tensor& grad_output, const LayerCache& cache);
  std::vector<Parameter*> Parameters() { return {&gamma_, &beta_}; }

  Parameter& gamma() { return gamma_; }
  Parameter& beta() { return beta_; }
  Tensor& running_mean() { return running_mean_; }
  Tensor& running_var() { return running_var_; }
  const Tensor& running_mean() const { return running_mean_; }
  const Tensor& running_var() const { return running_var_; }
  const std::string& name() const { return name_; }
  int64_t channels() const { return channels_; }
  float v_th() const { return v_th_; }
  float eps() const { return eps_; }

 private:
  std::string name_;
  int64_t channels_;
  float v_th_, momentum_, eps_;
  Parameter gamma_, beta_;
  Tensor running_mean_, running_var_;
};

}  // namespace fsvae

#endif  // FSVAE_LAYERS_H_
