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

#ifndef FSVAE_CONV_H_
#define FSVAE_CONV_H_

#include <cstdint>

#include "fsvae/tensor.h"

namespace fsvae {

struct ConvParams {
  int64_t stride = 1;
  int64_t padding = 0;
  // Transposed convolution only: extra rows/cols appended to the output.
  int64_t output_padding = 0;
};

// Output extent of a convolution along one axis.
int64_t ConvOutSize(int64_t in, int64_t kernel, const ConvParams& p);
// Output extent of a transposed convolution along one axis.
int64_t ConvTransposeOutSize(int64_t in, int64_t kernel, const ConvParams& p);

// Geometry of a forward convolution from an image [c,h,w] to [oc,oh,ow].
struct ConvGeometry {
  int64_t channels, height, width;
  int64_t kernel;
  int64_t stride, padding;
  int64_t out_height, out_width;

  int64_t patch_size() const { return channels * kernel * kernel; }
  int64_t out_pixels() const { return out_height * out_width; }
};

// Unfolds `batch` images into columns laid out [c*k*k, batch*oh*ow].
void Im2Col(const float* images, const ConvGeometry& g, int64_t batch,
            float* cols);
// Adjoint of Im2Col: accumulates columns back into (zeroed) images.
void Col2Im(const float* cols, const ConvGeometry& g, int64_t batch,
            float* images);

// input [N,Cin,H,W] (or [Cin,H,W]), weight [Cout,Cin,k,k].
Tensor Conv2d(const Tensor& input, const Tensor& weight, const ConvParams& p);
// input [N,Cin,H,W] (or [Cin,H,W]), weight [Cin,Cout,k,k].
Tensor ConvTranspose2d(const Tensor& input, const Tensor& weight,
                       const ConvParams& p);

// Gradients of Conv2d. `grad_input` may be null when not needed.
void Conv2dBackward(const Tensor& input, const Tensor& weight,
                    const ConvParams& p, const Tensor& grad_output,
                    Tensor* grad_input, Tensor* grad_weight);
void ConvTranspose2dBackward(const Tensor& input, const Tensor& weight,
                             const ConvParams& p, const Tensor& grad_output,
                             Tensor* grad_input, Tensor* grad_weight);

}  // namespace fsvae

#endif  // FSVAE_CONV_H_
