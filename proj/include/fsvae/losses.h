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

#ifndef FSVAE_LOSSES_H_
#define FSVAE_LOSSES_H_

#include <string>

#include "fsvae/tensor.h"

namespace fsvae {

enum class LossFlavor {
  kMmdPsp,  // MMD with the PSP-filtered kernel
  kMmd,     // MMD on raw firing probabilities (identity filter)
  kKld,     // Bernoulli KL divergence
};

std::string LossFlavorName(LossFlavor f);  // "mmd-psp" | "mmd" | "kld"
LossFlavor ParseLossFlavor(const std::string& s);

struct LossBreakdown {
  float total = 0.0f;
  float recon = 0.0f;
  float dist = 0.0f;
};

// Mean squared error over every element. Optionally writes d/d x_hat.
float MseLoss(const Tensor& x, const Tensor& x_hat, Tensor* grad_x_hat);

// Firing-probability tensors are [T, N, C] (or [T, C], one sequence).
// Distances are summed over time and channels and averaged over N.

// sum_t || PSP(pi_q)_t - PSP(pi_p)_t ||^2. tau_syn == 1 disables filtering.
float MmdLoss(const Tensor& pi_q, const Tensor& pi_p, float tau_syn,
              Tensor* grad_q, Tensor* grad_p);

// Bernoulli KL(q || p) with probabilities squeezed into (0,1) as
// (pi + eps) / (1 + 2 eps).
float KldLoss(const Tensor& pi_q, const Tensor& pi_p, float eps,
              Tensor* grad_q, Tensor* grad_p);

// MSE + dist_weight * distance term of the given flavor. `dist` is reported
// unweighted.
LossBreakdown ElboLoss(const Tensor& x, const Tensor& x_hat, const Tensor& pi_q,
                       const Tensor& pi_p, LossFlavor flavor, float tau_syn,
                       Tensor* grad_x_hat, Tensor* grad_q, Tensor* grad_p,
                       float dist_weight = 1.0f);

inline constexpr float kKldEpsilon = 0.01f;

}  // namespace fsvae

#endif  // FSVAE_LOSSES_H_
