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

#include "fsvae/sweep.h"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

#include "fsvae/errors.h"
#include "fsvae/training.h"

namespace fsvae {
namespace {

SweepRow RunPoint(const RunConfig& base, const SweepPoint& point, const Tensor& train,
                  const Tensor& test, const EvalAutoencoder& ae) {
  SweepRow row;
  row.point = point;
  try {
    RunConfig c = base;
    if (point.param == "timesteps") {
      c.model.latent.timesteps = point.value;
    } else if (point.param == "k") {
      c.model.latent.k = point.value;
    } else {
      throw ConfigError("sweep: unknown parameter '" + point.param + "'");
    }
    c.Validate();
    Fsvae model(c.model, c.train.seed);
    FitOptions opts;
    opts.record_time = false;
    Fit(model, train, c, opts);
    const EvalResult r = EvaluateModel(model, train, test, ae, c.eval.frechet_samples,
                                       c.train.batch_size, RngStream(c.train.seed, 0xE7A1));
    row.frechet = r.frechet;
    row.recon = r.recon;
  } catch (const std::exception& e) {
    row.frechet = row.recon = std::numeric_limits<double>::quiet_NaN();
    row.note = e.what();
  }
  return row;
}

}  // namespace

std::vector<SweepRow> RunSweep(const RunConfig& base, const std::vector<SweepPoint>& grid,
                               const Tensor& train, const Tensor& test,
                               const EvalAutoencoder& ae, int jobs,
                               const std::function<void(const SweepRow&)>& done) {
  if (jobs < 1) throw ConfigError("sweep: jobs must be >= 1");
  std::vector<SweepRow> rows(grid.size());
  std::atomic<size_t> next{0};
  std::mutex report;
  auto worker = [&] {
    for (size_t i = next++; i < grid.size(); i = next++) {
      rows[i] = RunPoint(base, grid[i], train, test, ae);
      if (done) {
        std::lock_guard<std::mutex> lock(report);
        done(rows[i]);
      }
    }
  };
  const size_t n = std::min<size_t>(static_cast<size_t>(jobs), grid.size());
  if (n <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (size_t i = 0; i < n; ++i) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  return rows;
}

std::string SweepCsv(const std::vector<SweepRow>& rows) {
  std::string s = "param,value,frechet,recon\n";
  char buf[160];
  for (const SweepRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%lld,%.9g,%.9g\n", r.point.param.c_str(),
                  static_cast<long long>(r.point.value), r.frechet, r.recon);
    s += buf;
  }
  return s;
}

}  // namespace fsvae
