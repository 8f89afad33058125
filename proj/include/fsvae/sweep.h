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

#ifndef FSVAE_SWEEP_H_
#define FSVAE_SWEEP_H_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fsvae/config.h"
#include "fsvae/metrics.h"

namespace fsvae {

struct SweepPoint {
  std::string param;  // "timesteps" or "k"
  int64_t value = 0;
};

struct SweepRow {
  SweepPoint point;
  double frechet = 0.0;
  double recon = 0.0;
  std::string note;  // failure reason; metrics are NaN then
};

// Trains and evaluates one model per point (base config with the one
// parameter replaced). A failing point yields NaN metrics and a note; the
// sweep continues. Up to `jobs` points run concurrently; rows come back in
// grid order.
std::vector<SweepRow> RunSweep(const RunConfig& base,
                               const std::vector<SweepPoint>& grid,
                               const Tensor& train, const Tensor& test,
                               const EvalAutoencoder& ae, int jobs,
                               const std::function<void(const SweepRow&)>& done = {});

// "param,value,frechet,recon" rows.
std::string SweepCsv(const std::vector<SweepRow>& rows);

}  // namespace fsvae

#endif  // FSVAE_SWEEP_H_
