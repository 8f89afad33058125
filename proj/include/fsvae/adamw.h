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

#ifndef FSVAE_ADAMW_H_
#define FSVAE_ADAMW_H_

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fsvae/layers.h"

namespace fsvae {

struct AdamWOptions {
  float lr = 1e-3f;
  float weight_decay = 1e-3f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
};

// AdamW with decoupled weight decay: p *= (1 - lr*wd) before the Adam delta.
class AdamW {
 public:
  AdamW(std::vector<Parameter*> params, AdamWOptions options);

  // Throws NumericError (naming the parameter) on a non-finite gradient;
  // nothing is modified in that case.
  void Step();
  void ZeroGrad();

  int64_t step_count() const { return step_; }
  const AdamWOptions& options() const { return options_; }
  const std::vector<Tensor>& first_moments() const { return m_; }
  const std::vector<Tensor>& second_moments() const { return v_; }

  // Named moment tensors plus the step count, for checkpointing.
  std::vector<std::pair<std::string, Tensor>> StateTensors() const;
  void LoadState(std::span<const std::pair<std::string, Tensor>> tensors);

 private:
  std::vector<Parameter*> params_;
  AdamWOptions options_;
  std::vector<Tensor> m_, v_;
  int64_t step_ = 0;
};

// Scales all gradients so their global L2 norm is at most `max_norm`.
// Returns the norm before clipping.
float ClipGradNorm(std::span<Parameter* const> params, float max_norm);

}  // namespace fsvae

#endif  // FSVAE_ADAMW_H_
