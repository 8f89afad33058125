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

#include "fsvae/losses.h"

#include <cmath>

#include "fsvae/errors.h"
#include "fsvae/snn.h"

namespace fsvae {
namespace {

void CheckProbabilities(const Tensor& pi, const char* what) {
  for (float v : pi.values()) {
    if (!(v >= 0.0f && v <= 1.0f)) {
      throw NumericError(std::string(what) + ": probability " +
                         std::to_string(v) + " outside [0,1]");
    }
  }
}

int64_t BatchOf(const Tensor& pi) { return pi.rank() >= 3 ? pi.dim(1) : 1; }

void CheckPair(const Tensor& q, const Tensor& p, const char* what) {
  if (q.shape() != p.shape() || q.rank() < 1) {
    throw ShapeError(std::string(what) + ": shape mismatch " +
                     ShapeString(q.shape()) + " vs " + ShapeString(p.shape()));
  }
  CheckProbabilities(q, what);
  CheckProbabilities(p, what);
}

}  // namespace

std::string LossFlavorName(LossFlavor f) {
  switch (f) {
    case LossFlavor::kMmdPsp: return "mmd-psp";
    case LossFlavor::kMmd: return "mmd";
    case LossFlavor::kKld: return "kld";
  }
  return "?";
}

LossFlavor ParseLossFlavor(const std::string& s) {
  if (s == "mmd-psp") return LossFlavor::kMmdPsp;
  if (s == "mmd") return LossFlavor::kMmd;
  if (s == "kld") return LossFlavor::kKld;
  throw ConfigError("unknown loss flavor '" + s + "' (mmd-psp|mmd|kld)");
}

float MseLoss(const Tensor& x, const Tensor& x_hat, Tensor* grad_x_hat) {
  if (x.shape() != x_hat.shape()) {
    throw ShapeError("mse: shape mismatch " + ShapeString(x.shape()) + " vs " +
                     ShapeString(x_hat.shape()));
  }
  if (x.size() == 0) throw ShapeError("mse: empty input");
  const double inv = 1.0 / static_cast<double>(x.size());
  double s = 0.0;
  if (grad_x_hat) *grad_x_hat = Tensor(x.shape());
  for (int64_t i = 0; i < x.size(); ++i) {
    const double d = static_cast<double>(x_hat[i]) - x[i];
    s += d * d;
    if (grad_x_hat) (*grad_x_hat)[i] = static_cast<float>(2.0 * d * inv);
  }
  return static_cast<float>(s * inv);
}

float MmdLoss(const Tensor& pi_q, const Tensor& pi_p, float tau_syn,
              Tensor* grad_q, Tensor* grad_p) {
  CheckPair(pi_q, pi_p, "mmd");
  const Tensor fq = PspFilter(pi_q, tau_syn);
  const Tensor fp = PspFilter(pi_p, tau_syn);
  const double inv_n = 1.0 / static_cast<double>(BatchOf(pi_q));
  double s = 0.0;
  Tensor g(fq.shape());
  for (int64_t i = 0; i < fq.size(); ++i) {
    const double d = static_cast<double>(fq[i]) - fp[i];
    s += d * d;
    g[i] = static_cast<float>(2.0 * d * inv_n);
  }
  if (grad_q || grad_p) {
    Tensor gq = PspFilterBackward(g, tau_syn);
    if (grad_p) *grad_p = Mul(gq, -1.0f);
    if (grad_q) *grad_q = std::move(gq);
  }
  return static_cast<float>(s * inv_n);
}

float KldLoss(const Tensor& pi_q, const Tensor& pi_p, float eps,
              Tensor* grad_q, Tensor* grad_p) {
  CheckPair(pi_q, pi_p, "kld");
  const double inv_n = 1.0 / static_cast<double>(BatchOf(pi_q));
  const double scale = 1.0 / (1.0 + 2.0 * eps);
  if (grad_q) *grad_q = Tensor(pi_q.shape());
  if (grad_p) *grad_p = Tensor(pi_p.shape());
  double s = 0.0;
  for (int64_t i = 0; i < pi_q.size(); ++i) {
    const double q = (pi_q[i] + eps) * scale;
    const double p = (pi_p[i] + eps) * scale;
    s += q * std::log(q / p) + (1.0 - q) * std::log((1.0 - q) / (1.0 - p));
    if (grad_q) {
      (*grad_q)[i] = static_cast<float>(
          (std::log(q / p) - std::log((1.0 - q) / (1.0 - p))) * scale * inv_n);
    }
    if (grad_p) {
      (*grad_p)[i] =
          static_cast<float>((-q / p + (1.0 - q) / (1.0 - p)) * scale * inv_n);
    }
  }
  return static_cast<float>(s * inv_n);
}

LossBreakdown ElboLoss(const Tensor& x, const Tensor& x_hat, const Tensor& pi_q,
                       const Tensor& pi_p, LossFlavor flavor, float tau_syn,
                       Tensor* grad_x_hat, Tensor* grad_q, Tensor* grad_p,
                       float dist_weight) {
  LossBreakdown out;
  out.recon = MseLoss(x, x_hat, grad_x_hat);
  switch (flavor) {
    case LossFlavor::kMmdPsp:
      out.dist = MmdLoss(pi_q, pi_p, tau_syn, grad_q, grad_p);
      break;
    case LossFlavor::kMmd:
      out.dist = MmdLoss(pi_q, pi_p, 1.0f, grad_q, grad_p);
      break;
    case LossFlavor::kKld:
      out.dist = KldLoss(pi_q, pi_p, kKldEpsilon, grad_q, grad_p);
      break;
  }
  if (dist_weight != 1.0f) {
    if (grad_q) *grad_q = Mul(*grad_q, dist_weight);
    if (grad_p) *grad_p = Mul(*grad_p, dist_weight);
  }
  out.total = out.recon + dist_weight * out.dist;
  return out;
}

}  // namespace fsvae
