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

#include "fsvae/conv.h"

#include <Eigen/Core>
#include <algorithm>
#include <string>

#include "fsvae/errors.h"

namespace fsvae {
namespace {

using RowMatrix =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<RowMatrix>;
using MapC = Eigen::Map<const RowMatrix>;

// Upper bound on the column buffer, in floats; batches are chunked to fit.
constexpr int64_t kMaxColumnFloats = int64_t{1} << 20;

int64_t ChunkSize(int64_t per_image, int64_t batch) {
  return std::clamp<int64_t>(kMaxColumnFloats / std::max<int64_t>(per_image, 1),
                             1, std::max<int64_t>(batch, 1));
}

struct Batched {
  Tensor tensor;
  bool squeezed = false;
};

Batched AsBatch(const Tensor& t, const char* op) {
  if (t.rank() == 4) return {t, false};
  if (t.rank() == 3) return {t.Reshaped({1, t.dim(0), t.dim(1), t.dim(2)}), true};
  throw ShapeError(std::string(op) + ": expected [N,C,H,W] or [C,H,W], got " +
                   ShapeString(t.shape()));
}

void CheckKernel(const Tensor& w, const char* op) {
  if (w.rank() != 4 || w.dim(2) != w.dim(3)) {
    throw ShapeError(std::string(op) + ": weight must be [*,*,k,k], got " +
                     ShapeString(w.shape()));
  }
}

// [chunk, C, P] <-> [C, chunk*P]
void BatchToChannelMajor(const float* src, int64_t n, int64_t c, int64_t p,
                         float* dst) {
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < c; ++j)
      std::copy_n(src + (i * c + j) * p, p, dst + j * n * p + i * p);
}

void ChannelMajorToBatch(const float* src, int64_t n, int64_t c, int64_t p,
                         float* dst) {
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < c; ++j)
      std::copy_n(src + j * n * p + i * p, p, dst + (i * c + j) * p);
}

}  // namespace

int64_t ConvOutSize(int64_t in, int64_t kernel, const ConvParams& p) {
  if (p.stride < 1) throw ShapeError("conv stride must be >= 1");
  const int64_t span = in + 2 * p.padding - kernel;
  if (span < 0) {
    throw ShapeError("conv kernel " + std::to_string(kernel) +
                     " larger than padded input " + std::to_string(in));
  }
  return span / p.stride + 1;
}

int64_t ConvTransposeOutSize(int64_t in, int64_t kernel, const ConvParams& p) {
  if (p.stride < 1) throw ShapeError("conv stride must be >= 1");
  return (in - 1) * p.stride - 2 * p.padding + kernel + p.output_padding;
}

namespace {

// Output columns [lo, hi) whose input column ox*stride - padding + kx lies
// inside [0, width).
void ValidRange(int64_t kx, const ConvGeometry& g, int64_t& lo, int64_t& hi) {
  const int64_t off = kx - g.padding;
  lo = off >= 0 ? 0 : (-off + g.stride - 1) / g.stride;
  hi = g.width - off <= 0 ? 0 : (g.width - off - 1) / g.stride + 1;
  hi = std::min(hi, g.out_width);
  lo = std::min(lo, hi);
}

}  // namespace

void Im2Col(const float* images, const ConvGeometry& g, int64_t batch,
            float* cols) {
  const int64_t k = g.kernel, s = g.stride, ow = g.out_width;
  const int64_t row_len = batch * g.out_pixels();
  for (int64_t c = 0; c < g.channels; ++c) {
    for (int64_t ky = 0; ky < k; ++ky) {
      for (int64_t kx = 0; kx < k; ++kx) {
        int64_t lo, hi;
        ValidRange(kx, g, lo, hi);
        const int64_t off = kx - g.padding;
        float* row = cols + ((c * k + ky) * k + kx) * row_len;
        for (int64_t b = 0; b < batch; ++b) {
          const float* img = images + (b * g.channels + c) * g.height * g.width;
          float* dst = row + b * g.out_pixels();
          for (int64_t oy = 0; oy < g.out_height; ++oy, dst += ow) {
            const int64_t iy = oy * s - g.padding + ky;
            if (iy < 0 || iy >= g.height) {
              std::fill_n(dst, ow, 0.0f);
              continue;
            }
            const float* src = img + iy * g.width + off;
            std::fill_n(dst, lo, 0.0f);
            if (s == 1) {
              std::copy(src + lo, src + hi, dst + lo);
            } else {
              for (int64_t ox = lo; ox < hi; ++ox) dst[ox] = src[ox * s];
            }
            std::fill(dst + hi, dst + ow, 0.0f);
          }
        }
      }
    }
  }
}

void Col2Im(const float* cols, const ConvGeometry& g, int64_t batch,
            float* images) {
  const int64_t k = g.kernel, s = g.stride, ow = g.out_width;
  const int64_t row_len = batch * g.out_pixels();
  for (int64_t c = 0; c < g.channels; ++c) {
    for (int64_t ky = 0; ky < k; ++ky) {
      for (int64_t kx = 0; kx < k; ++kx) {
        int64_t lo, hi;
        ValidRange(kx, g, lo, hi);
        const int64_t off = kx - g.padding;
        const float* row = cols + ((c * k + ky) * k + kx) * row_len;
        for (int64_t b = 0; b < batch; ++b) {
          float* img = images + (b * g.channels + c) * g.height * g.width;
          const float* src = row + b * g.out_pixels();
          for (int64_t oy = 0; oy < g.out_height; ++oy, src += ow) {
            const int64_t iy = oy * s - g.padding + ky;
            if (iy < 0 || iy >= g.height) continue;
            float* dst = img + iy * g.width + off;
            for (int64_t ox = lo; ox < hi; ++ox) dst[ox * s] += src[ox];
          }
        }
      }
    }
  }
}

Tensor Conv2d(const Tensor& input_any, const Tensor& weight,
              const ConvParams& p) {
  CheckKernel(weight, "conv2d");
  Batched in = AsBatch(input_any, "conv2d");
  const Tensor& x = in.tensor;
  if (x.dim(1) != weight.dim(1)) {
    throw ShapeError("conv2d: input " + ShapeString(x.shape()) +
                     " incompatible with weight " + ShapeString(weight.shape()));
  }
  const int64_t n = x.dim(0), cout = weight.dim(0), k = weight.dim(2);
  ConvGeometry g{x.dim(1), x.dim(2), x.dim(3), k, p.stride, p.padding,
                 ConvOutSize(x.dim(2), k, p), ConvOutSize(x.dim(3), k, p)};
  Tensor out({n, cout, g.out_height, g.out_width});
  const int64_t P = g.out_pixels(), K = g.patch_size();
  const int64_t chunk = ChunkSize(K * P, n);
  std::vector<float> cols(static_cast<size_t>(K * chunk * P));
  std::vector<float> res(static_cast<size_t>(cout * chunk * P));
  MapC w(weight.data(), cout, K);
  for (int64_t b0 = 0; b0 < n; b0 += chunk) {
    const int64_t nb = std::min(chunk, n - b0);
    Im2Col(x.data() + b0 * g.channels * g.height * g.width, g, nb, cols.data());
    MapM r(res.data(), cout, nb * P);
    r.noalias() = w * MapC(cols.data(), K, nb * P);
    ChannelMajorToBatch(res.data(), nb, cout, P, out.data() + b0 * cout * P);
  }
  if (in.squeezed) out.Reshape({cout, g.out_height, g.out_width});
  return out;
}

void Conv2dBackward(const Tensor& input_any, const Tensor& weight,
                    const ConvParams& p, const Tensor& grad_output_any,
                    Tensor* grad_input, Tensor* grad_weight) {
  CheckKernel(weight, "conv2d backward");
  Batched in = AsBatch(input_any, "conv2d backward");
  Batched go = AsBatch(grad_output_any, "conv2d backward");
  const Tensor& x = in.tensor;
  const int64_t n = x.dim(0), cout = weight.dim(0), k = weight.dim(2);
  ConvGeometry g{x.dim(1), x.dim(2), x.dim(3), k, p.stride, p.padding,
                 ConvOutSize(x.dim(2), k, p), ConvOutSize(x.dim(3), k, p)};
  const Shape expected{n, cout, g.out_height, g.out_width};
  if (go.tensor.shape() != expected) {
    throw ShapeError("conv2d backward: upstream grad " +
                     ShapeString(grad_output_any.shape()) + " vs output " +
                     ShapeString(expected));
  }
  const int64_t P = g.out_pixels(), K = g.patch_size();
  const int64_t img = g.channels * g.height * g.width;
  const int64_t chunk = ChunkSize(K * P, n);
  std::vector<float> cols(static_cast<size_t>(K * chunk * P));
  std::vector<float> gy(static_cast<size_t>(cout * chunk * P));
  if (grad_weight) *grad_weight = Tensor(weight.shape());
  if (grad_input) *grad_input = Tensor(x.shape());
  MapC w(weight.data(), cout, K);
  for (int64_t b0 = 0; b0 < n; b0 += chunk) {
    const int64_t nb = std::min(chunk, n - b0);
    BatchToChannelMajor(go.tensor.data() + b0 * cout * P, nb, cout, P, gy.data());
    MapC gym(gy.data(), cout, nb * P);
    if (grad_weight) {
      Im2Col(x.data() + b0 * img, g, nb, cols.data());
      MapM gw(grad_weight->data(), cout, K);
      gw.noalias() += gym * MapC(cols.data(), K, nb * P).transpose();
    }
    if (grad_input) {
      MapM gc(cols.data(), K, nb * P);
      gc.noalias() = w.transpose() * gym;
      Col2Im(cols.data(), g, nb, grad_input->data() + b0 * img);
    }
  }
  if (grad_input && in.squeezed) grad_input->Reshape(input_any.shape());
}

Tensor ConvTranspose2d(const Tensor& input_any, const Tensor& weight,
                       const ConvParams& p) {
  CheckKernel(weight, "conv_transpose2d");
  Batched in = AsBatch(input_any, "conv_transpose2d");
  const Tensor& x = in.tensor;
  if (x.dim(1) != weight.dim(0)) {
    throw ShapeError("conv_transpose2d: input " + ShapeString(x.shape()) +
                     " incompatible with weight " + ShapeString(weight.shape()));
  }
  const int64_t n = x.dim(0), cin = x.dim(1), cout = weight.dim(1),
                k = weight.dim(2);
  const int64_t oh = ConvTransposeOutSize(x.dim(2), k, p);
  const int64_t ow = ConvTransposeOutSize(x.dim(3), k, p);
  // The adjoint conv maps the output image back onto the input grid.
  ConvGeometry g{cout, oh, ow, k, p.stride, p.padding, x.dim(2), x.dim(3)};
  if (ConvOutSize(oh, k, p) != x.dim(2) || ConvOutSize(ow, k, p) != x.dim(3)) {
    throw ShapeError("conv_transpose2d: output padding " +
                     std::to_string(p.output_padding) + " inconsistent with input " +
                     ShapeString(x.shape()));
  }
  Tensor out({n, cout, oh, ow});
  const int64_t P = g.out_pixels(), K = g.patch_size();
  const int64_t chunk = ChunkSize(K * P, n);
  std::vector<float> xs(static_cast<size_t>(cin * chunk * P));
  std::vector<float> cols(static_cast<size_t>(K * chunk * P));
  MapC w(weight.data(), cin, K);
  for (int64_t b0 = 0; b0 < n; b0 += chunk) {
    const int64_t nb = std::min(chunk, n - b0);
    BatchToChannelMajor(x.data() + b0 * cin * P, nb, cin, P, xs.data());
    MapM c(cols.data(), K, nb * P);
    c.noalias() = w.transpose() * MapC(xs.data(), cin, nb * P);
    Col2Im(cols.data(), g, nb, out.data() + b0 * cout * oh * ow);
  }
  if (in.squeezed) out.Reshape({cout, oh, ow});
  return out;
}

void ConvTranspose2dBackward(const Tensor& input_any, const Tensor& weight,
                             const ConvParams& p, const Tensor& grad_output_any,
                             Tensor* grad_input, Tensor* grad_weight) {
  CheckKernel(weight, "conv_transpose2d backward");
  Batched in = AsBatch(input_any, "conv_transpose2d backward");
  Batched go = AsBatch(grad_output_any, "conv_transpose2d backward");
  const Tensor& x = in.tensor;
  const int64_t n = x.dim(0), cin = x.dim(1), cout = weight.dim(1),
                k = weight.dim(2);
  const int64_t oh = ConvTransposeOutSize(x.dim(2), k, p);
  const int64_t ow = ConvTransposeOutSize(x.dim(3), k, p);
  const Shape expected{n, cout, oh, ow};
  if (go.tensor.shape() != expected) {
    throw ShapeError("conv_transpose2d backward: upstream grad " +
                     ShapeString(grad_output_any.shape()) + " vs output " +
                     ShapeString(expected));
  }
  ConvGeometry g{cout, oh, ow, k, p.stride, p.padding, x.dim(2), x.dim(3)};
  const int64_t P = g.out_pixels(), K = g.patch_size();
  const int64_t chunk = ChunkSize(K * P, n);
  std::vector<float> cols(static_cast<size_t>(K * chunk * P));
  std::vector<float> xs(static_cast<size_t>(cin * chunk * P));
  if (grad_weight) *grad_weight = Tensor(weight.shape());
  if (grad_input) *grad_input = Tensor(x.shape());
  MapC w(weight.data(), cin, K);
  for (int64_t b0 = 0; b0 < n; b0 += chunk) {
    const int64_t nb = std::min(chunk, n - b0);
    Im2Col(go.tensor.data() + b0 * cout * oh * ow, g, nb, cols.data());
    MapC cm(cols.data(), K, nb * P);
    if (grad_weight) {
      BatchToChannelMajor(x.data() + b0 * cin * P, nb, cin, P, xs.data());
      MapM gw(grad_weight->data(), cin, K);
      gw.noalias() += MapC(xs.data(), cin, nb * P) * cm.transpose();
    }
    if (grad_input) {
      MapM gx(xs.data(), cin, nb * P);
      gx.noalias() = w * cm;
      ChannelMajorToBatch(xs.data(), nb, cin, P, grad_input->data() + b0 * cin * P);
    }
  }
  if (grad_input && in.squeezed) grad_input->Reshape(input_any.shape());
}

}  // namespace fsvae
