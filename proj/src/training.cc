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

#include "fsvae/training.h"

#include <charconv>
#include <chrono>
#include <filesystem>
#include <sstream>

#include "fsvae/errors.h"

namespace fsvae {
namespace {

constexpr uint64_t kTrainStream = 0x7472;

std::string Num(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

double ParseDouble(const std::string& s) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw FormatError("train log: bad number '" + s + "'");
  }
  return v;
}

std::string EpochFile(int64_t epoch) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "epoch_%04lld.ckpt", static_cast<long long>(epoch));
  return buf;
}

}  // namespace

std::string TrainLogCsv(const std::vector<EpochLog>& log) {
  std::string s = std::string(kTrainLogHeader) + "\n";
  for (const EpochLog& e : log) {
    s += std::to_string(e.epoch) + "," + Num(e.loss) + "," + Num(e.recon) + "," +
         Num(e.dist) + "," + Num(e.fire_rate_post) + "," + Num(e.fire_rate_prior) +
         "," + Num(e.seconds) + "\n";
  }
  return s;
}

std::vector<EpochLog> ParseTrainLogCsv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kTrainLogHeader) {
    throw FormatError("train log: missing header");
  }
  std::vector<EpochLog> log;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::istringstream row(line);
    std::string cell;
    while (std::getline(row, cell, ',')) f.push_back(cell);
    if (f.size() != 7) throw FormatError("train log: bad row '" + line + "'");
    EpochLog e;
    e.epoch = static_cast<int64_t>(ParseDouble(f[0]));
    e.loss = ParseDouble(f[1]);
    e.recon = ParseDouble(f[2]);
    e.dist = ParseDouble(f[3]);
    e.fire_rate_post = ParseDouble(f[4]);
    e.fire_rate_prior = ParseDouble(f[5]);
    e.seconds = ParseDouble(f[6]);
    log.push_back(e);
  }
  return log;
}

float ScheduledProbability(const TrainConfig& config, int64_t epoch) {
  if (config.epochs <= 1) return 0.0f;
  return config.schedule_ceiling * static_cast<float>(epoch) /
         static_cast<float>(config.epochs - 1);
}

void StoreModel(Fsvae& model, Checkpoint& ckpt) {
  for (auto& [name, t] : model.StateTensors()) ckpt.tensors.emplace_back(name, *t);
}

RunConfig CheckpointConfig(const Checkpoint& ckpt) {
  return ParseConfigText(ckpt.config_text);
}

void LoadModel(Fsvae& model, const Checkpoint& ckpt) {
  const ModelConfig stored = CheckpointConfig(ckpt).model;
  const std::vector<std::string> diff = model.config().Diff(stored);
  if (!diff.empty()) {
    std::string fields;
    for (const auto& d : diff) fields += (fields.empty() ? "" : ", ") + d;
    throw ConfigError("checkpoint model config differs in: " + fields);
  }
  for (auto& [name, t] : model.StateTensors()) {
    const Tensor* src = ckpt.Find(name);
    if (!src) throw FormatError("checkpoint lacks tensor '" + name + "'");
    if (src->shape() != t->shape()) {
      throw ShapeError("checkpoint tensor '" + name + "' is " +
                       ShapeString(src->shape()) + ", model expects " +
                       ShapeString(t->shape()));
    }
    *t = *src;
  }
}

Trainer::Trainer(Fsvae& model, const RunConfig& config)
    : model_(model),
      config_(config),
      params_(model.Parameters()),
      optimizer_(params_, AdamWOptions{config.train.lr, config.train.weight_decay,
                                       0.9f, 0.999f, 1e-8f}) {
  config_.Validate();
  if (!model.config().Diff(config.model).empty()) {
    throw ConfigError("trainer: model was built from a different configuration");
  }
}

EpochLog Trainer::TrainEpoch(const Tensor& data, int64_t epoch) {
  const TrainConfig& tc = config_.train;
  const ModelConfig& mc = model_.config();
  const auto start = std::chrono::steady_clock::now();
  if (data.rank() != 4) {
    throw ShapeError("train: expected images [N,c,H,W], got " + ShapeString(data.shape()));
  }
  const int64_t n = data.dim(0), bs = tc.batch_size;
  const int64_t batches = n / bs;
  if (batches < 1) {
    throw ConfigError("train: " + std::to_string(n) + " images is less than one batch of " +
                      std::to_string(bs));
  }
  const int64_t img = data.size() / n;
  const RngStream epoch_rng = RngStream(tc.seed, kTrainStream).Child(static_cast<uint64_t>(epoch));

  std::vector<int64_t> order(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
  RngStream shuffle = epoch_rng.Child(0);
  for (int64_t i = n - 1; i > 0; --i) {
    std::swap(order[static_cast<size_t>(i)],
              order[shuffle.UniformInt(static_cast<uint64_t>(i + 1))]);
  }

  const float p_mix = ScheduledProbability(tc, epoch);
  double sum_loss = 0, sum_recon = 0, sum_dist = 0, spikes_q = 0, spikes_p = 0,
         latent_slots = 0;
  Shape batch_shape = data.shape();
  batch_shape[0] = bs;
  Tensor batch(batch_shape);
  Fsvae::TrainTrace trace;
  for (int64_t b = 0; b < batches; ++b) {
    for (int64_t i = 0; i < bs; ++i) {
      std::copy_n(data.data() + order[static_cast<size_t>(b * bs + i)] * img, img,
                  batch.data() + i * img);
    }
    try {
      optimizer_.ZeroGrad();
      const LossBreakdown l = model_.TrainForward(
          batch, p_mix, tc.teacher_forcing, epoch_rng.Child(static_cast<uint64_t>(1 + b)),
          trace);
      model_.Backward(trace);
      if (tc.grad_clip > 0.0f) ClipGradNorm(params_, tc.grad_clip);
      optimizer_.Step();
      sum_loss += l.total;
      sum_recon += l.recon;
      sum_dist += l.dist;
    } catch (const NumericError& e) {
      throw NumericError("epoch " + std::to_string(epoch) + " batch " +
                         std::to_string(b) + ": " + e.what());
    }
    spikes_q += static_cast<double>(trace.q.z.Count());
    spikes_p += static_cast<double>(trace.p.z.Count());
    latent_slots += static_cast<double>(bs * mc.latent.timesteps * mc.latent.channels);
  }
  EpochLog e;
  e.epoch = epoch;
  e.loss = sum_loss / static_cast<double>(batches);
  e.recon = sum_recon / static_cast<double>(batches);
  e.dist = sum_dist / static_cast<double>(batches);
  e.fire_rate_post = spikes_q / latent_slots;
  e.fire_rate_prior = spikes_p / latent_slots;
  e.seconds = record_time_ ? std::chrono::duration<double>(
                                 std::chrono::steady_clock::now() - start).count()
                           : 0.0;
  log_.push_back(e);
  next_epoch_ = epoch + 1;
  return e;
}

Checkpoint Trainer::MakeCheckpoint() {
  Checkpoint ckpt;
  ckpt.config_text = FormatConfig(config_);
  ckpt.meta["next_epoch"] = std::to_string(next_epoch_);
  ckpt.meta["train_log"] = TrainLogCsv(log_);
  StoreModel(model_, ckpt);
  for (auto& [name, t] : optimizer_.StateTensors()) ckpt.tensors.emplace_back(name, t);
  return ckpt;
}

void Trainer::Restore(const Checkpoint& ckpt) {
  LoadModel(model_, ckpt);
  std::vector<std::pair<std::string, Tensor>> opt;
  for (const auto& [name, t] : ckpt.tensors) {
    if (name.rfind("adamw.", 0) == 0) opt.emplace_back(name, t);
  }
  if (opt.empty()) throw FormatError("checkpoint has no optimizer state");
  optimizer_.LoadState(opt);
  auto it = ckpt.meta.find("next_epoch");
  if (it == ckpt.meta.end()) throw FormatError("checkpoint lacks next_epoch");
  next_epoch_ = std::stoll(it->second);
  auto log = ckpt.meta.find("train_log");
  log_ = log == ckpt.meta.end() ? std::vector<EpochLog>{} : ParseTrainLogCsv(log->second);
}

std::vector<EpochLog> Fit(Fsvae& model, const Tensor& data, const RunConfig& config,
                          const FitOptions& options) {
  config.Validate();
  namespace fs = std::filesystem;
  Trainer trainer(model, config);
  trainer.set_record_time(options.record_time);
  if (!options.resume_from.empty()) trainer.Restore(LoadCheckpoint(options.resume_from));
  const bool write = !options.out_dir.empty();
  if (write) {
    std::error_code ec;
    fs::create_directories(options.out_dir, ec);
    if (ec) throw Error("cannot create output directory " + options.out_dir + ": " +
                        ec.message());
  }
  const fs::path out(options.out_dir);
  const int64_t last = options.stop_after >= 0
                           ? std::min(options.stop_after, config.train.epochs)
                           : config.train.epochs;
  for (int64_t epoch = trainer.next_epoch(); epoch < last; ++epoch) {
    const EpochLog e = trainer.TrainEpoch(data, epoch);
    if (options.on_epoch) options.on_epoch(e);
    const int64_t done = epoch + 1;
    const bool periodic = config.train.checkpoint_every > 0 &&
                          done % config.train.checkpoint_every == 0;
    if (write) {
      const std::string csv = TrainLogCsv(trainer.log());
      WriteFileAtomic((out / "train_log.csv").string(), {csv.begin(), csv.end()});
      if (periodic || done == last) {
        SaveCheckpoint(trainer.MakeCheckpoint(), (out / EpochFile(done)).string());
      }
    }
    if ((periodic || done == config.train.epochs) && options.on_checkpoint) {
      options.on_checkpoint(done, model);
    }
  }
  if (write && trainer.next_epoch() >= config.train.epochs) {
    SaveCheckpoint(trainer.MakeCheckpoint(), (out / "final.ckpt").string());
  }
  return trainer.log();
}

}  // namespace fsvae
