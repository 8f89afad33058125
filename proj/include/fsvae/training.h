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

#ifndef FSVAE_TRAINING_H_
#define FSVAE_TRAINING_H_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fsvae/adamw.h"
#include "fsvae/config.h"
#include "fsvae/data_io.h"
#include "fsvae/model.h"

namespace fsvae {

struct EpochLog {
  int64_t epoch = 0;
  double loss = 0.0;
  double recon = 0.0;
  double dist = 0.0;
  double fire_rate_post = 0.0;  // mean of the posterior latent spikes
  double fire_rate_prior = 0.0;
  double seconds = 0.0;

  bool operator==(const EpochLog&) const = default;
};

inline constexpr const char* kTrainLogHeader =
    "epoch,loss,recon,dist,fire_rate_post,fire_rate_prior,seconds";
std::string TrainLogCsv(const std::vector<EpochLog>& log);
std::vector<EpochLog> ParseTrainLogCsv(const std::string& text);

// Scheduled-sampling probability for `epoch` (0-based): rises linearly
// from 0 at the first epoch to the ceiling at the last.
float ScheduledProbability(const TrainConfig& config, int64_t epoch);

// Copies model tensors out of / into a checkpoint. Loading checks the
// stored model configuration against the model's and names every
// differing field.
void StoreModel(Fsvae& model, Checkpoint& ckpt);
void LoadModel(Fsvae& model, const Checkpoint& ckpt);
RunConfig CheckpointConfig(const Checkpoint& ckpt);

class Trainer {
 public:
  Trainer(Fsvae& model, const RunConfig& config);

  // One pass over `data` ([N, c, H, W] in [-1,1]) in the order given by
  // the epoch's shuffle stream. The final incomplete batch is dropped.
  EpochLog TrainEpoch(const Tensor& data, int64_t epoch);

  int64_t next_epoch() const { return next_epoch_; }
  const std::vector<EpochLog>& log() const { return log_; }
  AdamW& optimizer() { return optimizer_; }
  void set_record_time(bool on) { record_time_ = on; }

  Checkpoint MakeCheckpoint();
  void Restore(const Checkpoint& ckpt);

 private:
  Fsvae& model_;
  RunConfig config_;
  std::vector<Parameter*> params_;
  AdamW optimizer_;
  std::vector<EpochLog> log_;
  int64_t next_epoch_ = 0;
  bool record_time_ = true;
};

struct FitOptions {
  // When non-empty: train_log.csv, epoch_NNNN.ckpt and final.ckpt go here.
  std::string out_dir;
  std::string resume_from;
  bool record_time = true;
  // Stop once this many epochs are complete (negative: run all).
  int64_t stop_after = -1;
  std::function<void(const EpochLog&)> on_epoch;
  std::function<void(int64_t epoch, Fsvae&)> on_checkpoint;
};

std::vector<EpochLog> Fit(Fsvae& model, const Tensor& data,
                          const RunConfig& config, const FitOptions& options);

}  // namespace fsvae

#endif  // FSVAE_TRAINING_H_
