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

#ifndef FSVAE_METRICS_H_
#define FSVAE_METRICS_H_

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "fsvae/config.h"
#include "fsvae/data_io.h"
#include "fsvae/layers.h"
#include "fsvae/model.h"
#include "fsvae/rng.h"

namespace fsvae {

// Frechet distance between Gaussians fitted to two feature sets [N, D]:
// |mu_a - mu_b|^2 + tr(S_a + S_b - 2 (S_a S_b)^(1/2)). Covariances are
// unbiased. The matrix square root goes through symmetric
// eigendecompositions; eigenvalues down to -1e-6 (relative to the largest)
// are treated as 0, anything more negative is a NumericError.
double FrechetDistance(const Tensor& a, const Tensor& b);

// Mean squared error of `reconstruct` over `images`, in batches.
double ReconstructionLoss(const std::function<Tensor(const Tensor&)>& reconstruct,
                          const Tensor& images, int64_t batch);
double ReconstructionLoss(Fsvae& model, const Tensor& images, int64_t batch,
                          const RngStream& rng);
// MSE of predicting every image by the mean image of `reference`.
double MeanImageBaselineMse(const Tensor& reference, const Tensor& images);

// Conventional conv autoencoder whose latent code is the feature space of
// the Frechet distance: 3 stride-2 convs + FC to the latent, and the
// mirror image back, ReLU inside and tanh at the output.
class EvalAutoencoder {
 public:
  EvalAutoencoder(int64_t image_size, int64_t latent, uint64_t seed);

  // images [N, 1, S, S] -> [N, latent].
  Tensor Encode(const Tensor& images) const;
  Tensor Reconstruct(const Tensor& images) const;
  // Adam on MSE; returns the per-epoch mean training loss.
  std::vector<double> Train(const Tensor& images, int64_t epochs, int64_t batch,
                            uint64_t seed);

  Checkpoint Save() const;
  static std::unique_ptr<EvalAutoencoder> Load(const Checkpoint& ckpt);

  int64_t latent() const { return latent_; }
  int64_t image_size() const { return image_size_; }

 private:
  struct Pass;
  Tensor EncodeImpl(const Tensor& images, Pass* pass) const;
  Tensor DecodeImpl(const Tensor& code, Pass* pass) const;
  void Backward(const Tensor& grad_out, const Pass& pass);
  std::vector<Parameter*> Parameters();

  int64_t image_size_, latent_;
  std::vector<Conv2dLayer> convs_;
  std::unique_ptr<Linear> enc_fc_, dec_fc_;
  std::vector<ConvTranspose2dLayer> deconvs_;
};

// Mean spike probability per layer while reconstructing `images` and
// generating as many samples from the prior.
std::vector<std::pair<std::string, double>> FiringRateReport(
    Fsvae& model, const Tensor& images, int64_t batch, const RngStream& rng);
std::string FiringRateCsv(const std::vector<std::pair<std::string, double>>& rates);

struct EvalResult {
  double recon = 0.0;
  double baseline = 0.0;  // mean-image predictor on the same images
  double frechet = 0.0;
};

// Reconstruction loss on `test`, and Frechet distance between autoencoder
// features of `samples` prior draws and as many test images.
EvalResult EvaluateModel(Fsvae& model, const Tensor& train, const Tensor& test,
                         const EvalAutoencoder& ae, int64_t samples, int64_t batch,
                         const RngStream& rng);

// Rows of "metric,value".
std::string MetricsCsv(const std::vector<std::pair<std::string, double>>& metrics);

}  // namespace fsvae

#endif  // FSVAE_METRICS_H_
