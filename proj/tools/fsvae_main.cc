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

// Command-line front end: train, generate, reconstruct, eval, count-ops,
// sweep.

#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fsvae/config.h"
#include "fsvae/data_io.h"
#include "fsvae/errors.h"
#include "fsvae/losses.h"
#include "fsvae/metrics.h"
#include "fsvae/model.h"
#include "fsvae/op_count.h"
#include "fsvae/runtime.h"
#include "fsvae/sweep.h"
#include "fsvae/training.h"

namespace fs = std::filesystem;
using namespace fsvae;

namespace {

constexpr uint64_t kEvalStream = 0xE7A1;
constexpr uint64_t kSampleStream = 0x5A;

struct Options {
  std::string config;
  std::string data_dir;
  std::string out_dir;
  std::optional<uint64_t> seed;
  std::string ckpt;
  int64_t n = 64;
  std::vector<int64_t> timesteps;
  std::vector<int64_t> k_values;
  bool dump_latents = false;
  std::string loss;
  int jobs = 1;
  bool no_timing = false;
  std::string resume;
  std::string eval_ae;
  std::string rates;
};

void WriteText(const fs::path& path, const std::string& text) {
  WriteFileAtomic(path.string(), {text.begin(), text.end()});
}

RunConfig LoadRunConfig(const Options& o) {
  RunConfig c = o.config.empty() ? ParseConfigText("") : ParseConfigFile(o.config);
  if (o.seed) c.train.seed = *o.seed;
  if (!o.loss.empty()) c.model.loss = ParseLossFlavor(o.loss);
  c.Validate();
  return c;
}

std::string DataDir(const Options& o) {
  std::string dir = o.data_dir;
  if (dir.empty()) {
    if (const char* env = std::getenv("FSVAE_DATA_DIR")) dir = env;
  }
  if (dir.empty()) throw Error("no data directory: pass --data-dir or set FSVAE_DATA_DIR");
  if (!fs::is_directory(dir)) throw Error("data directory not found: " + dir);
  return dir;
}

fs::path PrepareOutDir(const Options& o) {
  if (o.out_dir.empty()) throw Error("--out-dir is required");
  std::error_code ec;
  fs::create_directories(o.out_dir, ec);
  if (ec) throw Error("cannot create output directory " + o.out_dir + ": " + ec.message());
  return o.out_dir;
}

void RequireFile(const std::string& path, const char* what) {
  if (path.empty()) throw Error(std::string("--") + what + " is required");
  if (!fs::is_regular_file(path)) throw Error(std::string(what) + " not found: " + path);
}

Tensor LoadImages(const std::string& dir, const std::string& split, int64_t limit,
                  int64_t image_size) {
  const IdxDataset d = LoadIdxSplit(dir, split);
  const int64_t n = limit > 0 ? std::min(limit, d.count) : d.count;
  return Preprocess(d, image_size, 0, n);
}

Tensor Slice(const Tensor& t, int64_t n) {
  n = std::min(n, t.dim(0));
  const int64_t img = t.size() / t.dim(0);
  Shape s = t.shape();
  s[0] = n;
  return Tensor(s, std::vector<float>(t.data(), t.data() + n * img));
}

std::unique_ptr<Fsvae> LoadModelFrom(const std::string& path, RunConfig& config) {
  const Checkpoint ckpt = LoadCheckpoint(path);
  config = CheckpointConfig(ckpt);
  auto model = std::make_unique<Fsvae>(config.model, config.train.seed);
  LoadModel(*model, ckpt);
  return model;
}

std::string Name(const char* stem, int64_t i, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%04lld%s", stem, static_cast<long long>(i), ext);
  return buf;
}

std::unique_ptr<EvalAutoencoder> GetEvalAutoencoder(const Options& o, const RunConfig& c,
                                                    const Tensor& train,
                                                    const fs::path& out) {
  if (!o.eval_ae.empty()) {
    RequireFile(o.eval_ae, "eval-ae");
    return EvalAutoencoder::Load(LoadCheckpoint(o.eval_ae));
  }
  std::cout << "training evaluation autoencoder (" << c.eval.ae_epochs << " epochs)\n";
  auto ae = std::make_unique<EvalAutoencoder>(c.model.image_size, c.eval.ae_latent,
                                              c.train.seed);
  const auto hist = ae->Train(train, c.eval.ae_epochs, c.eval.ae_batch, c.train.seed);
  std::cout << "  final autoencoder mse " << hist.back() << "\n";
  SaveCheckpoint(ae->Save(), (out / "eval_ae.ckpt").string());
  return ae;
}

int CmdTrain(const Options& o) {
  RunConfig c = LoadRunConfig(o);
  const std::string dir = DataDir(o);
  if (!o.resume.empty()) RequireFile(o.resume, "resume");
  const fs::path out = PrepareOutDir(o);
  WriteText(out / "effective_config.txt", FormatConfig(c));
  const Tensor train = LoadImages(dir, "train", c.train.subset, c.model.image_size);
  std::optional<Tensor> preview;
  try {
    preview = LoadImages(dir, "t10k", 16, c.model.image_size);
  } catch (const Error&) {
    preview = Slice(train, 16);
  }
  std::cout << "training on " << train.dim(0) << " images for " << c.train.epochs
            << " epochs\n";
  Fsvae model(c.model, c.train.seed);
  FitOptions f;
  f.out_dir = out.string();
  f.resume_from = o.resume;
  f.record_time = !o.no_timing;
  f.on_epoch = [](const EpochLog& e) {
    std::printf("epoch %3lld  loss %.5f  recon %.5f  dist %.5f  rate q %.3f p %.3f  %.1fs\n",
                static_cast<long long>(e.epoch + 1), e.loss, e.recon, e.dist,
                e.fire_rate_post, e.fire_rate_prior, e.seconds);
    std::fflush(stdout);
  };
  f.on_checkpoint = [&](int64_t epoch, Fsvae& m) {
    const Tensor recon = m.Reconstruct(*preview, RngStream(c.train.seed, kSampleStream));
    WriteImageGrid(recon, (out / Name("recon_epoch", epoch, ".pgm")).string());
  };
  Fit(model, train, c, f);
  std::cout << "wrote " << (out / "final.ckpt").string() << "\n";
  return 0;
}

void DumpLatents(const LatentSampleRecord& rec, int64_t first, const fs::path& out) {
  const Shape& s = rec.z.shape();  // [T, N, C]
  const int64_t T = s[0], N = s[1], C = s[2];
  for (int64_t n = 0; n < N; ++n) {
    std::string csv;
    for (int64_t c = 0; c < C; ++c) {
      for (int64_t t = 0; t < T; ++t) {
        csv += rec.z.Get((t * N + n) * C + c) ? '1' : '0';
        csv += t + 1 < T ? ',' : '\n';
      }
    }
    WriteText(out / Name("latents", first + n, ".csv"), csv);
  }
}

int CmdGenerate(const Options& o) {
  if (o.n < 1) throw Error("refusing to write an empty grid: --n must be >= 1");
  RequireFile(o.ckpt, "ckpt");
  const fs::path out = PrepareOutDir(o);
  RunConfig c;
  auto model = LoadModelFrom(o.ckpt, c);
  if (o.seed) c.train.seed = *o.seed;
  WriteText(out / "effective_config.txt", FormatConfig(c));
  const RngStream rng(c.train.seed, kSampleStream);
  const int64_t batch = c.train.batch_size;
  const int64_t img = c.model.image_channels * c.model.image_size * c.model.image_size;
  Tensor all({o.n, c.model.image_channels, c.model.image_size, c.model.image_size});
  for (int64_t b0 = 0, call = 0; b0 < o.n; b0 += batch, ++call) {
    const int64_t nb = std::min(batch, o.n - b0);
    LatentSampleRecord rec;
    Tensor x = model->Generate(nb, rng.Child(static_cast<uint64_t>(call)), &rec);
    std::copy_n(x.data(), nb * img, all.data() + b0 * img);
    if (o.dump_latents) DumpLatents(rec, b0, out);
  }
  WriteImageGrid(all, (out / "samples.pgm").string());
  for (int64_t i = 0; i < o.n; ++i) {
    const Tensor one(Shape{1, c.model.image_channels, c.model.image_size, c.model.image_size},
                     std::vector<float>(all.data() + i * img, all.data() + (i + 1) * img));
    WriteImageGrid(one, (out / Name("sample", i, ".pgm")).string());
  }
  std::cout << "wrote " << o.n << " samples to " << out.string() << "\n";
  return 0;
}

int CmdReconstruct(const Options& o) {
  if (o.n < 1) throw Error("--n must be >= 1");
  RequireFile(o.ckpt, "ckpt");
  const std::string dir = DataDir(o);
  const fs::path out = PrepareOutDir(o);
  RunConfig c;
  auto model = LoadModelFrom(o.ckpt, c);
  if (o.seed) c.train.seed = *o.seed;
  WriteText(out / "effective_config.txt", FormatConfig(c));
  const Tensor x = LoadImages(dir, "t10k", o.n, c.model.image_size);
  const RngStream rng(c.train.seed, kSampleStream);
  const int64_t img = x.size() / x.dim(0);
  Tensor recon(x.shape());
  uint64_t call = 0;
  for (int64_t b0 = 0; b0 < x.dim(0); b0 += c.train.batch_size) {
    const int64_t nb = std::min(c.train.batch_size, x.dim(0) - b0);
    Shape s = x.shape();
    s[0] = nb;
    const Tensor xb(s, std::vector<float>(x.data() + b0 * img, x.data() + (b0 + nb) * img));
    const Tensor r = model->Reconstruct(xb, rng.Child(call++));
    std::copy_n(r.data(), nb * img, recon.data() + b0 * img);
  }
  const double mse = MseLoss(x, recon, nullptr);
  WriteImageGrid(x, (out / "inputs.pgm").string());
  WriteImageGrid(recon, (out / "reconstructions.pgm").string());
  WriteText(out / "metrics.csv", MetricsCsv({{"recon_mse", mse}}));
  std::printf("reconstruction mse %.6f over %lld images\n", mse,
              static_cast<long long>(x.dim(0)));
  return 0;
}

void WarnRates(const std::vector<std::pair<std::string, double>>& rates) {
  for (const auto& [name, r] : rates) {
    if (!(r > 0.0 && r < 1.0)) {
      std::fprintf(stderr, "warning: layer %s has firing rate %.4f (dead or saturated)\n",
                   name.c_str(), r);
    }
  }
}

int CmdEval(const Options& o) {
  RequireFile(o.ckpt, "ckpt");
  const std::string dir = DataDir(o);
  const fs::path out = PrepareOutDir(o);
  RunConfig c;
  auto model = LoadModelFrom(o.ckpt, c);
  if (o.seed) c.train.seed = *o.seed;
  WriteText(out / "effective_config.txt", FormatConfig(c));
  const Tensor train = LoadImages(dir, "train", c.train.subset, c.model.image_size);
  const Tensor test = LoadImages(dir, "t10k", c.eval.eval_subset, c.model.image_size);
  auto ae = GetEvalAutoencoder(o, c, train, out);
  const RngStream rng(c.train.seed, kEvalStream);
  const EvalResult r = EvaluateModel(*model, train, test, *ae, c.eval.frechet_samples,
                                     c.train.batch_size, rng);
  const auto rates = FiringRateReport(*model, test, c.train.batch_size, rng.Child(9));
  WarnRates(rates);
  WriteText(out / "metrics.csv", MetricsCsv({{"recon_mse", r.recon},
                                             {"mean_image_mse", r.baseline},
                                             {"frechet", r.frechet}}));
  WriteText(out / "firing_rates.csv", FiringRateCsv(rates));
  std::printf("recon_mse %.6f  mean_image_mse %.6f  frechet %.4f\n", r.recon, r.baseline,
              r.frechet);
  return 0;
}

std::map<std::string, double> ReadRates(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open rates file " + path);
  std::map<std::string, double> rates;
  std::string line;
  std::getline(in, line);
  if (line != "layer,rate") throw FormatError(path + ": expected header 'layer,rate'");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw FormatError(path + ": bad row '" + line + "'");
    try {
      rates[line.substr(0, comma)] = std::stod(line.substr(comma + 1));
    } catch (const std::exception&) {
      throw FormatError(path + ": bad rate in row '" + line + "'");
    }
  }
  return rates;
}

int CmdCountOps(const Options& o) {
  const RunConfig arch = LoadRunConfig(o);
  const fs::path out = PrepareOutDir(o);
  WriteText(out / "effective_config.txt", FormatConfig(arch));
  std::map<std::string, double> rates;
  if (!o.rates.empty()) {
    rates = ReadRates(o.rates);
  } else {
    RequireFile(o.ckpt, "ckpt");
    const std::string dir = DataDir(o);
    RunConfig c;
    auto model = LoadModelFrom(o.ckpt, c);
    const Tensor test = LoadImages(dir, "t10k", c.eval.eval_subset > 0 ? c.eval.eval_subset : 1000,
                                   c.model.image_size);
    for (const auto& [name, r] :
         FiringRateReport(*model, test, c.train.batch_size, RngStream(c.train.seed, kEvalStream))) {
      rates[name] = r;
    }
  }
  const LayerGraph snn = BuildSnnGraph(arch.model);
  const LayerGraph ann = BuildAnnGraph(arch.model);
  const OpCountReport rs = CountOps(snn, CountMode::kSnn, rates);
  const OpCountReport ra = CountOps(ann, CountMode::kAnn);
  const std::string table = FormatOpTable(ra, rs);
  WriteText(out / "op_counts.txt", table);
  const std::string snn_csv = OpReportCsv(rs);
  WriteText(out / "op_counts.csv", OpReportCsv(ra) + snn_csv.substr(snn_csv.find('\n') + 1));
  std::cout << table;
  return 0;
}

int CmdSweep(const Options& o) {
  RunConfig c = LoadRunConfig(o);
  const std::string dir = DataDir(o);
  const fs::path out = PrepareOutDir(o);
  if (o.timesteps.empty() && o.k_values.empty()) {
    throw Error("sweep needs --timesteps and/or --k-values");
  }
  WriteText(out / "effective_config.txt", FormatConfig(c));
  const Tensor train = LoadImages(dir, "train", c.train.subset, c.model.image_size);
  const Tensor test = LoadImages(dir, "t10k", c.eval.eval_subset, c.model.image_size);
  auto ae = GetEvalAutoencoder(o, c, train, out);
  std::vector<SweepPoint> grid;
  for (int64_t t : o.timesteps) grid.push_back({"timesteps", t});
  for (int64_t k : o.k_values) grid.push_back({"k", k});
  const auto rows = RunSweep(c, grid, train, test, *ae, o.jobs, [](const SweepRow& r) {
    std::printf("%s=%lld  frechet %.4f  recon %.5f%s%s\n", r.point.param.c_str(),
                static_cast<long long>(r.point.value), r.frechet, r.recon,
                r.note.empty() ? "" : "  failed: ", r.note.c_str());
    std::fflush(stdout);
  });
  WriteText(out / "sweep.csv", SweepCsv(rows));
  std::string notes;
  for (const SweepRow& r : rows) {
    if (!r.note.empty()) {
      notes += r.point.param + "=" + std::to_string(r.point.value) + ": " + r.note + "\n";
    }
  }
  if (!notes.empty()) WriteText(out / "sweep_notes.txt", notes);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  TuneAllocator();
  CLI::App app{"Fully spiking variational autoencoder"};
  app.require_subcommand(1);
  Options o;
  uint64_t seed = 0;

  auto common = [&](CLI::App* cmd) {
    cmd->add_option("--config", o.config, "key = value configuration file");
    cmd->add_option("--out-dir", o.out_dir, "output directory")->required();
    cmd->add_option("--seed", seed, "random seed (overrides the config)")
        ->each([&](const std::string&) { o.seed = seed; });
  };
  auto data = [&](CLI::App* cmd) {
    cmd->add_option("--data-dir", o.data_dir,
                    "directory with IDX files (default: $FSVAE_DATA_DIR)");
  };

  auto* train = app.add_subcommand("train", "train a model");
  common(train);
  data(train);
  train->add_option("--loss", o.loss, "mmd-psp | mmd | kld");
  train->add_option("--resume", o.resume, "checkpoint to resume from");
  train->add_flag("--no-timing", o.no_timing, "write 0 in the seconds column");

  auto* gen = app.add_subcommand("generate", "sample images from the prior");
  common(gen);
  gen->add_option("--ckpt", o.ckpt, "model checkpoint")->required();
  gen->add_option("--n", o.n, "number of samples");
  gen->add_flag("--dump-latents", o.dump_latents, "write latent spike rasters as CSV");

  auto* rec = app.add_subcommand("reconstruct", "reconstruct held-out images");
  common(rec);
  data(rec);
  rec->add_option("--ckpt", o.ckpt, "model checkpoint")->required();
  rec->add_option("--n", o.n, "number of images");

  auto* ev = app.add_subcommand("eval", "reconstruction loss, Frechet distance, firing rates");
  common(ev);
  data(ev);
  ev->add_option("--ckpt", o.ckpt, "model checkpoint")->required();
  ev->add_option("--eval-ae", o.eval_ae, "pretrained evaluation autoencoder");

  auto* ops = app.add_subcommand("count-ops", "ANN vs SNN operation counts");
  common(ops);
  data(ops);
  ops->add_option("--ckpt", o.ckpt, "model whose measured firing rates are used");
  ops->add_option("--rates", o.rates, "layer,rate CSV instead of --ckpt");

  auto* sweep = app.add_subcommand("sweep", "train and evaluate over T and k");
  common(sweep);
  data(sweep);
  sweep->add_option("--loss", o.loss, "mmd-psp | mmd | kld");
  sweep->add_option("--timesteps", o.timesteps, "timestep values")->delimiter(',');
  sweep->add_option("--k-values", o.k_values, "k values")->delimiter(',');
  sweep->add_option("--jobs", o.jobs, "parallel evaluation workers")
      ->check(CLI::PositiveNumber);
  sweep->add_option("--eval-ae", o.eval_ae, "pretrained evaluation autoencoder");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  try {
    if (*train) return CmdTrain(o);
    if (*gen) return CmdGenerate(o);
    if (*rec) return CmdReconstruct(o);
    if (*ev) return CmdEval(o);
    if (*ops) return CmdCountOps(o);
    if (*sweep) return CmdSweep(o);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
