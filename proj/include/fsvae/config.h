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

#ifndef FSVAE_CONFIG_H_
#define FSVAE_CONFIG_H_

#include <cstdint>
#include <string>

#include "fsvae/model.h"

namespace fsvae {

struct TrainConfig {
  int64_t epochs = 150;
  float lr = 1e-3f;
  float weight_decay = 1e-3f;
  int64_t batch_size = 250;
  // Scheduled-sampling probability reached at the last epoch.
  float schedule_ceiling = 0.3f;
  bool teacher_forcing = true;
  // Global gradient-norm bound; 0 disables clipping.
  float grad_clip = 5.0f;
  uint64_t seed = 0;
  // Number of training images used; 0 means all.
  int64_t subset = 0;
  int64_t checkpoint_every = 10;

  void Validate() const;
};

struct EvalConfig {
  // Images per side for the Frechet distance.
  int64_t frechet_samples = 1000;
  int64_t ae_latent = 64;
  int64_t ae_epochs = 20;
  int64_t ae_batch = 100;
  // Held-out images used for reconstruction loss and firing rates; 0 = all.
  int64_t eval_subset = 0;

  void Validate() const;
};

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  EvalConfig eval;

  void Validate() const;
};

// Parses `key = value` lines. '#' starts a comment; blank lines are ignored.
// Unknown keys, malformed values and invalid settings are rejected with
// ConfigError messages naming the line and key. Missing keys keep defaults.
RunConfig ParseConfigText(const std::string& text);
RunConfig ParseConfigFile(const std::string& path);

// Every key with its effective value; ParseConfigText(FormatConfig(c))
// reproduces c.
std::string FormatConfig(const RunConfig& config);

}  // namespace fsvae

#endif  // FSVAE_CONFIG_H_
