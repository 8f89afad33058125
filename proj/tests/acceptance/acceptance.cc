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


// Acceptance suite: runs every acceptance criterion and prints one PASS/FAIL
// line per criterion. Pass criterion numbers as arguments to run a subset.
// The MNIST directory defaults to the build-time data dir and can be
// overridden with FSVAE_DATA_DIR.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <thread>
#include <string>
#include <utility>
#include <vector>

#include "fsvae/config.h"
#include "fsvae/conv.h"
#include "fsvae/data_io.h"
#include "fsvae/errors.h"
#include "fsvae/latent.h"
#include "fsvae/layers.h"
#include "fsvae/losses.h"
#include "fsvae/metrics.h"
#include "fsvae/model.h"
#include "fsvae/op_count.h"
#include "fsvae/rng.h"
#include "fsvae/runtime.h"
#include "fsvae/snn.h"
#include "fsvae/training.h"

namespace fsvae {
namespace {

using Clock = std::chrono::steady_clock;

double Seconds(Clock::time_point since) {
  return std::chrono::duration<double>(Clock::now() - since).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string Fmt(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

Tensor Uniform(const Shape& shape, RngStream& rng, float lo, float hi) {
  Tensor t(shape);
  for (float& v : t.values()) v = lo + (hi - lo) * rng.UniformFloat();
  return t;
}

double Dot(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (int64_t i = 0; i < a.size(); ++i) s += double(a[i]) * double(b[i]);
  return s;
}

// ||analytic - central differences|| / max norm, coordinate by coordinate.
double GradError(const std::function<double(const Tensor&)>& loss, const Tensor& x,
                 const Tensor& analytic, double h) {
  Tensor probe = x;
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (int64_t i = 0; i < x.size(); ++i) {
    const float orig = probe[i];
    probe[i] = static_cast<float>(orig + h);
    const float hi = probe[i];
    const double up = loss(probe);
    probe[i] = static_cast<float>(orig - h);
    const float lo = probe[i];
    const double down = loss(probe);
    probe[i] = orig;
    const double n = (up - down) / (double(hi) - double(lo));
    const double a = analytic[i];
    diff += (a - n) * (a - n);
    na += a * a;
    nn += n * n;
  }
  const double scale = std::sqrt(std::max(na, nn));
  return scale == 0.0 ? 0.0 : std::sqrt(diff) / scale;
}

// State shared by the training-based criteria.
struct Shared {
  std::string data_dir;
  std::optional<RunConfig> desk;
  std::optional<Tensor> train, test;
  std::unique_ptr<Fsvae> desk_model;
  std::vector<EpochLog> desk_log;
  std::string error;
};

Shared& State() {
  static Shared s;
  return s;
}

// ---------------------------------------------------------------------------
// 1. LIF sequences against a scalar recurrence.

Outcome NeuronDynamics() {
  const auto start = Clock::now();
  const LifConfig cfg;
  int64_t spikes = 0, neurons = 0;
  double max_du = 0.0;
  for (uint64_t seq = 0; seq < 1000; ++seq) {
    RngStream rng(seq, 0xA1);
    const int64_t T = 1 + static_cast<int64_t>(rng.UniformInt(32));
    const int64_t width = 8;
    const Tensor x = Uniform({T, width}, rng, -0.5f, 1.5f);
    Tensor u, o;
    LifForwardSequence(x, T, cfg, u, o);
    NeuronState st = NeuronState::Zeros({width});
    for (int64_t j = 0; j < width; ++j) {
      float v = 0.0f;
      float fired = 0.0f;
      for (int64_t t = 0; t < T; ++t) {
        v = cfg.tau_decay * v * (1.0f - fired) + x[t * width + j];
        fired = v >= cfg.v_th ? 1.0f : 0.0f;
        if (o[t * width + j] != fired) {
          return {false, Fmt("sequence %llu neuron %lld step %lld: spike mismatch",
                             (unsigned long long)seq, (long long)j, (long long)t)};
        }
        max_du = std::max(max_du, std::abs(double(u[t * width + j]) - v));
        spikes += fired != 0.0f;
      }
      ++neurons;
    }
    // The single-step API must agree with the sequence kernel.
    for (int64_t t = 0; t < T; ++t) {
      const BitTensor step = LifStep(
          st, Tensor({width}, std::vector<float>(x.data() + t * width, x.data() + (t + 1) * width)),
          cfg);
      for (int64_t j = 0; j < width; ++j) {
        if (step.Get(j) != (o[t * width + j] != 0.0f) || st.u[j] != u[t * width + j]) {
          return {false, Fmt("sequence %llu: LifStep disagrees at t=%lld", (unsigned long long)seq,
                             (long long)t)};
        }
      }
    }
  }
  const double secs = Seconds(start);
  const bool pass = max_du <= 1e-6 && secs < 10.0;
  return {pass, Fmt("1000 sequences (%lld neuron traces, %lld spikes), spikes identical, "
                    "max |du| %.2e (<= 1e-6), %.2fs (< 10s)",
                    (long long)neurons, (long long)spikes, max_du, secs)};
}

// ---------------------------------------------------------------------------
// 2. PSP recurrence against the closed form.

Outcome PspEquivalence() {
  const auto start = Clock::now();
  double max_err = 0.0;
  for (uint64_t seq = 0; seq < 1000; ++seq) {
    RngStream rng(seq, 0xA2);
    const int64_t T = 1 + static_cast<int64_t>(rng.UniformInt(32));
    const double tau = 2.0;
    Tensor z({T, 1});
    for (float& v : z.values()) v = rng.UniformInt(2) ? 1.0f : 0.0f;
    const Tensor rec = PspFilter(z, static_cast<float>(tau));
    PspState st{Tensor({1}), static_cast<float>(tau)};
    for (int64_t t = 0; t < T; ++t) {
      double closed = 0.0;
      for (int64_t i = 0; i <= t; ++i) closed += (1.0 / tau) * std::pow(1.0 - 1.0 / tau, i) * z[t - i];
      BitTensor bit({1});
      bit.Set(0, z[t] != 0.0f);
      st = PspUpdate(st, bit);
      max_err = std::max({max_err, std::abs(rec[t] - closed), std::abs(st.psp[0] - closed)});
    }
  }
  const double secs = Seconds(start);
  return {max_err <= 1e-6 && secs < 5.0,
          Fmt("1000 binary sequences, max |recurrence - closed form| %.2e (<= 1e-6), %.2fs (< 5s)",
              max_err, secs)};
}

// ---------------------------------------------------------------------------
// 3. Random selection statistics on frozen blocks.

Outcome SamplerStatistics() {
  const auto start = Clock::now();
  const int64_t draws = 100000;
  std::string worst;
  double worst_sigmas = 0.0;
  int cases = 0;
  for (int64_t k : {2, 4, 20}) {
    std::set<int64_t> ms{1, k / 2, k - 1};
    for (int64_t m : ms) {
      RngStream layout(static_cast<uint64_t>(k * 100 + m), 0xA3);
      // Fixed block: m ones at random positions, repeated for every draw.
      std::vector<float> block(static_cast<size_t>(k), 0.0f);
      for (int64_t placed = 0; placed < m;) {
        const size_t pos = layout.UniformInt(static_cast<uint64_t>(k));
        if (block[pos] == 0.0f) {
          block[pos] = 1.0f;
          ++placed;
        }
      }
      Tensor zeta({draws, k});
      for (int64_t i = 0; i < draws; ++i) std::copy(block.begin(), block.end(), zeta.data() + i * k);
      RngStream rng(static_cast<uint64_t>(k * 100 + m), 0xA4);
      const double mean = SumAll(RandomSelect(zeta, k, rng, nullptr)) / double(draws);
      const double p = double(m) / double(k);
      const double sigma = std::sqrt(p * (1 - p) / double(draws));
      const double sigmas = std::abs(mean - p) / sigma;
      if (sigmas > worst_sigmas || worst.empty()) {
        worst_sigmas = sigmas;
        worst = Fmt("k=%lld m=%lld mean %.5f vs %.5f +- %.5f", (long long)k, (long long)m, mean, p,
                    3 * sigma);
      }
      ++cases;
    }
  }
  const double secs = Seconds(start);
  return {worst_sigmas <= 3.0 && secs < 30.0,
          Fmt("%d block layouts x 1e5 draws, worst %.2f sigma (%s), %.2fs (< 30s)", cases,
              worst_sigmas, worst.c_str(), secs)};
}

// ---------------------------------------------------------------------------
// 4. MMD identities and the kernel expectation.

double Kernel(const Tensor& a, const Tensor& b, float tau) {
  return Dot(PspFilter(a, tau), PspFilter(b, tau));
}

Outcome MmdIdentities() {
  RngStream rng(4, 0xA5);
  const Tensor pi = Uniform({8, 5, 4}, rng, 0.0f, 1.0f);
  const float self = MmdLoss(pi, pi, 2.0f, nullptr, nullptr);
  const float hand = MmdLoss(Tensor({1, 1}, 1.0f), Tensor({1, 1}, 0.0f), 2.0f, nullptr, nullptr);

  // Unbiased estimator of E k(z,z') + E k(w,w') - 2 E k(z,w) with z, z' ~ q
  // and w, w' ~ p, against the closed form in firing probabilities.
  const int64_t T = 8, C = 4, M = 100000;
  const Tensor q = Uniform({T, C}, rng, 0.0f, 1.0f), p = Uniform({T, C}, rng, 0.0f, 1.0f);
  auto draw = [&](const Tensor& probs) {
    Tensor z(probs.shape());
    for (int64_t i = 0; i < z.size(); ++i) z[i] = rng.UniformFloat() < probs[i] ? 1.0f : 0.0f;
    return z;
  };
  double sum = 0.0, sum_sq = 0.0;
  for (int64_t s = 0; s < M; ++s) {
    const Tensor z1 = draw(q), z2 = draw(q), w1 = draw(p), w2 = draw(p);
    const double h = Kernel(z1, z2, 2.0f) + Kernel(w1, w2, 2.0f) - Kernel(z1, w2, 2.0f) -
                     Kernel(z2, w1, 2.0f);
    sum += h;
    sum_sq += h * h;
  }
  const double mc = sum / M;
  const double sigma = std::sqrt((sum_sq / M - mc * mc) / M);
  const double closed = MmdLoss(q, p, 2.0f, nullptr, nullptr);
  const bool pass = self == 0.0f && std::abs(hand - 0.25f) <= 1e-7f &&
                    std::abs(mc - closed) <= 3 * sigma;
  return {pass, Fmt("mmd(pi,pi) = %g; hand case %.8f (0.25 +- 1e-7); expectation form %.5f vs "
                    "probability form %.5f, |diff| %.5f <= 3 sigma %.5f",
                    self, hand, mc, closed, std::abs(mc - closed), 3 * sigma)};
}

// ---------------------------------------------------------------------------
// 5. Finite-difference gradient checks and the spike-path oracle.

double LayerCheck(Layer& layer, const Tensor& x, RngStream& rng, double h) {
  LayerCache cache;
  const Tensor y = layer.Forward(x, &cache);
  const Tensor w = Uniform(y.shape(), rng, -1.0f, 1.0f);
  for (Parameter* p : layer.Parameters()) p->ZeroGrad();
  const Tensor gx = layer.Backward(w, cache, true);
  double worst = GradError([&](const Tensor& t) { return Dot(w, layer.Forward(t, nullptr)); }, x,
                           gx, h);
  for (Parameter* p : layer.Parameters()) {
    const Tensor saved = p->value;
    worst = std::max(worst, GradError(
                                [&](const Tensor& t) {
                                  p->value = t;
                                  const double l = Dot(w, layer.Forward(x, nullptr));
                                  p->value = saved;
                                  return l;
                                },
                                saved, p->grad, h));
  }
  return worst;
}

// Forward-mode derivative of sum_t sum_j PSP(o)_t through the LIF recurrence
// with the surrogate for do/du and the reset gate held constant.
std::vector<double> UnrolledSpikeGradient(const Tensor& x, int64_t T, int64_t n,
                                          const LifConfig& cfg, double tau_syn) {
  std::vector<double> u(static_cast<size_t>(T * n)), o(static_cast<size_t>(T * n));
  for (int64_t j = 0; j < n; ++j) {
    double v = 0.0, fired = 0.0;
    for (int64_t t = 0; t < T; ++t) {
      v = cfg.tau_decay * v * (1.0 - fired) + x[t * n + j];
      fired = v >= cfg.v_th ? 1.0 : 0.0;
      u[static_cast<size_t>(t * n + j)] = v;
      o[static_cast<size_t>(t * n + j)] = fired;
    }
  }
  std::vector<double> g(static_cast<size_t>(T * n));
  for (int64_t s = 0; s < T; ++s) {
    for (int64_t j = 0; j < n; ++j) {
      double du = 0.0, dpsp = 0.0, total = 0.0;
      for (int64_t t = 0; t < T; ++t) {
        const double gate = t ? 1.0 - o[static_cast<size_t>((t - 1) * n + j)] : 1.0;
        du = cfg.tau_decay * gate * du + (t == s ? 1.0 : 0.0);
        const double d = u[static_cast<size_t>(t * n + j)] - cfg.v_th;
        const double surrogate = std::abs(d) < cfg.surrogate_width / 2 ? 1.0 / cfg.surrogate_width : 0.0;
        dpsp = (1.0 - 1.0 / tau_syn) * dpsp + surrogate * du / tau_syn;
        total += dpsp;
      }
      g[static_cast<size_t>(s * n + j)] = total;
    }
  }
  return g;
}

Outcome GradientChecks() {
  const auto start = Clock::now();
  const int seeds = 20;
  std::map<std::string, double> worst;
  auto note = [&](const std::string& op, double e) { worst[op] = std::max(worst[op], e); };
  double spike_err = 0.0;
  for (int s = 0; s < seeds; ++s) {
    RngStream rng(static_cast<uint64_t>(s), 0xA6);
    {
      Linear fc("fc", 9, 6, true, 1.0f, rng);
      fc.bias().value = Uniform({6}, rng, -1, 1);
      note("fc", LayerCheck(fc, Uniform({4, 9}, rng, -1, 1), rng, 1e-2));
    }
    {
      Conv2dLayer conv("conv", 2, 3, 3, {.stride = 2, .padding = 1}, true, 1.0f, rng);
      conv.bias().value = Uniform({3}, rng, -1, 1);
      note("conv", LayerCheck(conv, Uniform({2, 2, 6, 6}, rng, -1, 1), rng, 1e-2));
    }
    {
      ConvTranspose2dLayer deconv("deconv", 3, 2, 3, {.stride = 2, .padding = 1, .output_padding = 1},
                                  true, 1.0f, rng);
      note("deconv", LayerCheck(deconv, Uniform({2, 3, 3, 3}, rng, -1, 1), rng, 1e-2));
    }
    {
      TdBatchNorm bn("bn", 3, 0.5f);
      bn.gamma().value = Uniform({3}, rng, 0.5f, 1.5f);
      bn.beta().value = Uniform({3}, rng, -1, 1);
      const Tensor x = Uniform({4, 3, 2, 2}, rng, -2, 2);
      LayerCache cache;
      const Tensor y = bn.Forward(x, true, &cache);
      const Tensor w = Uniform(y.shape(), rng, -1, 1);
      bn.gamma().ZeroGrad();
      bn.beta().ZeroGrad();
      const Tensor gx = bn.Backward(w, cache);
      note("tdbn", GradError([&](const Tensor& t) { return Dot(w, bn.Forward(t, true, nullptr)); },
                             x, gx, 1e-2));
      for (Parameter* p : bn.Parameters()) {
        const Tensor saved = p->value;
        note("tdbn", GradError(
                         [&](const Tensor& t) {
                           p->value = t;
                           const double l = Dot(w, bn.Forward(x, true, nullptr));
                           p->value = saved;
                           return l;
                         },
                         saved, p->grad, 1e-2));
      }
    }
    {
      const Tensor seq = Uniform({7, 3}, rng, 0, 1), w = Uniform({7, 3}, rng, -1, 1);
      note("psp", GradError([&](const Tensor& t) { return Dot(w, PspFilter(t, 2.0f)); }, seq,
                            PspFilterBackward(w, 2.0f), 1e-2));
    }
    {
      const Tensor stack = Uniform({6 * 2, 4}, rng, -0.5f, 0.5f), w = Uniform({2, 4}, rng, -1, 1);
      const Tensor img = SpikeToImage(stack, 6, 0.8f);
      note("decode tanh",
           GradError([&](const Tensor& t) { return Dot(w, SpikeToImage(t, 6, 0.8f)); }, stack,
                     SpikeToImageBackward(w, img, 6, 0.8f), 1e-2));
    }
    {
      const Tensor x = Uniform({2, 1, 4, 4}, rng, -1, 1), y = Uniform({2, 1, 4, 4}, rng, -1, 1);
      Tensor g;
      MseLoss(x, y, &g);
      note("mse", GradError([&](const Tensor& t) { return double(MseLoss(x, t, nullptr)); }, y, g,
                            1e-2));
    }
    {
      const Tensor q = Uniform({6, 2, 3}, rng, 0.05f, 0.95f), p = Uniform({6, 2, 3}, rng, 0.05f, 0.95f);
      Tensor gq, gp;
      MmdLoss(q, p, 2.0f, &gq, &gp);
      note("mmd", GradError([&](const Tensor& t) { return double(MmdLoss(t, p, 2.0f, nullptr, nullptr)); },
                            q, gq, 1e-2));
      note("mmd", GradError([&](const Tensor& t) { return double(MmdLoss(q, t, 2.0f, nullptr, nullptr)); },
                            p, gp, 1e-2));
    }
    {
      const LifConfig cfg;
      const int64_t T = 4, n = 2;
      const Tensor x = Uniform({T, n}, rng, 0.0f, 0.9f);
      Tensor u, o;
      LifForwardSequence(x, T, cfg, u, o);
      const Tensor g = LifBackwardSequence(PspFilterBackward(Tensor({T, n}, 1.0f), 2.0f), u, o, T, cfg);
      const auto oracle = UnrolledSpikeGradient(x, T, n, cfg, 2.0);
      for (int64_t i = 0; i < g.size(); ++i) {
        spike_err = std::max(spike_err, std::abs(g[i] - oracle[static_cast<size_t>(i)]));
      }
    }
  }
  const double secs = Seconds(start);
  bool pass = spike_err <= 1e-5 && secs < 120.0;
  std::string detail = Fmt("%d seeds; max rel. err:", seeds);
  for (const auto& [op, e] : worst) {
    pass = pass && e < 1e-3;
    detail += Fmt(" %s %.1e", op.c_str(), e);
  }
  detail += Fmt(" (< 1e-3); spike path vs unrolled oracle max |diff| %.1e; %.1fs (< 120s)",
                spike_err, secs);
  return {pass, detail};
}

// ---------------------------------------------------------------------------
// 6. Spike-to-image decoding of an all-ones raster.

Outcome DecodeGeometricSum() {
  const Tensor img = SpikeToImage(Tensor({16 * 3, 1, 4, 4}, 1.0f), 16, 0.8f);
  const double expected = std::tanh((1.0 - std::pow(0.8, 16)) / 0.2);
  double worst = 0.0;
  for (float v : img.values()) worst = std::max(worst, std::abs(v - expected));
  return {worst <= 1e-5 && img.shape() == Shape{3, 1, 4, 4},
          Fmt("u_T = %.5f, tanh = %.6f, max per-pixel error %.1e (<= 1e-5)",
              (1.0 - std::pow(0.8, 16)) / 0.2, expected, worst)};
}

// ---------------------------------------------------------------------------
// 7. Desk-scale training.

bool LoadDesk(std::string& why) {
  Shared& s = State();
  if (s.desk) return true;
  try {
    RunConfig c = ParseConfigFile(FSVAE_DESK_CONFIG);
    const auto& m = c.model;
    if (c.train.subset != 2000 || m.latent.channels != 32 || m.latent.k != 4 ||
        m.latent.timesteps != 8 || c.train.epochs != 20 || c.train.batch_size != 50) {
      why = "desk config does not match the criterion (2000 images, C=32, k=4, T=8, 20 epochs, "
            "batch 50)";
      return false;
    }
    const IdxDataset train = LoadIdxSplit(s.data_dir, "train");
    const IdxDataset test = LoadIdxSplit(s.data_dir, "t10k");
    s.train = Preprocess(train, m.image_size, 0, c.train.subset);
    s.test = Preprocess(test, m.image_size, 0,
                        c.eval.eval_subset > 0 ? std::min(c.eval.eval_subset, test.count) : test.count);
    s.desk = c;
    return true;
  } catch (const Error& e) {
    why = e.what();
    return false;
  }
}

std::vector<Tensor> StateCopy(Fsvae& model) {
  std::vector<Tensor> out;
  for (auto& [name, t] : model.StateTensors()) out.push_back(*t);
  return out;
}

Outcome DeskTraining() {
  Shared& s = State();
  std::string why;
  if (!LoadDesk(why)) return {false, why};
  const RunConfig& c = *s.desk;
  auto start = Clock::now();
  s.desk_model = std::make_unique<Fsvae>(c.model, c.train.seed);
  s.desk_log = Fit(*s.desk_model, *s.train, c, {.record_time = false});
  const double train_secs = Seconds(start);

  const double first = s.desk_log.front().loss, last = s.desk_log.back().loss;
  const double drop = 1.0 - last / first;
  const RngStream eval_rng(c.train.seed, 0xE7A1);
  const double recon = ReconstructionLoss(*s.desk_model, *s.test, c.train.batch_size, eval_rng);
  const double baseline = MeanImageBaselineMse(*s.train, *s.test);

  Fsvae again(c.model, c.train.seed);
  const auto again_log = Fit(again, *s.train, c, {.record_time = false});
  const bool identical = again_log == s.desk_log && StateCopy(again) == StateCopy(*s.desk_model);

  const bool pass = drop >= 0.30 && recon < baseline && train_secs < 1800.0 && identical;
  return {pass, Fmt("loss %.4f -> %.4f (-%.1f%%, need >= 30%%); held-out mse %.4f vs mean-image "
                    "%.4f on %lld images; %.0fs per run (< 1800s, %u hardware threads); rerun "
                    "%s",
                    first, last, 100 * drop, recon, baseline, (long long)s.test->dim(0), train_secs,
                    std::thread::hardware_concurrency(),
                    identical ? "bit-identical" : "DIFFERS")};
}

// ---------------------------------------------------------------------------
// 8. Loss-flavor ablation.

Outcome LossAblation() {
  Shared& s = State();
  std::string why;
  if (!LoadDesk(why)) return {false, why};
  std::string detail;
  bool pass = true;
  auto judge = [&](const char* name, const std::vector<EpochLog>& log) {
    bool finite = true;
    for (const EpochLog& e : log) finite = finite && std::isfinite(e.loss);
    const bool ok = finite && log.size() == 20 && log.back().loss <= log.front().loss;
    pass = pass && ok;
    detail += Fmt("%s %.4f -> %.4f%s; ", name, log.front().loss, log.back().loss,
                  ok ? "" : " (DIVERGED)");
  };
  for (LossFlavor f : {LossFlavor::kKld, LossFlavor::kMmd}) {
    RunConfig c = *s.desk;
    c.model.loss = f;
    Fsvae model(c.model, c.train.seed);
    try {
      judge(LossFlavorName(f).c_str(), Fit(model, *s.train, c, {.record_time = false}));
    } catch (const Error& e) {
      pass = false;
      detail += LossFlavorName(f) + " failed: " + e.what() + "; ";
    }
  }
  if (s.desk_log.empty()) {
    pass = false;
    detail += "mmd-psp run unavailable; ";
  } else {
    judge("mmd-psp", s.desk_log);
  }
  // Saturated probabilities stay finite through the epsilon guard.
  Tensor gq, gp;
  const float sat = KldLoss(Tensor({8, 2, 32}, 1.0f), Tensor({8, 2, 32}, 0.0f), kKldEpsilon, &gq, &gp);
  const bool guarded = std::isfinite(sat) && gq.AllFinite() && gp.AllFinite();
  pass = pass && guarded;
  detail += Fmt("saturated KLD %.2f with eps %.2f (%s)", sat, kKldEpsilon,
                guarded ? "finite" : "NOT FINITE");
  return {pass, detail};
}

// ---------------------------------------------------------------------------
// 9. Operation counts on the full architecture with desk firing rates.

Outcome OpCounting() {
  Shared& s = State();
  if (!s.desk_model) return {false, "desk model unavailable"};
  const auto measured =
      FiringRateReport(*s.desk_model, *s.test, s.desk->train.batch_size, RngStream(7, 0xF1));
  std::map<std::string, double> rates(measured.begin(), measured.end());
  const ModelConfig full;
  const OpCountReport ann = CountOps(BuildAnnGraph(full), CountMode::kAnn);
  const OpCountReport snn = CountOps(BuildSnnGraph(full), CountMode::kSnn, rates);
  const double ratio = ann.total_mults / snn.total_mults;
  const bool pass = ratio >= 5.0 && ann.total_adds < snn.total_adds;
  double lo = 1.0, hi = 0.0;
  for (const auto& [n, r] : measured) {
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  return {pass, Fmt("ANN %.3g add / %.3g mult, SNN %.3g add / %.3g mult; mult ratio %.1fx "
                    "(>= 5x), ANN adds %s SNN adds; desk rates %.3f..%.3f",
                    ann.total_adds, ann.total_mults, snn.total_adds, snn.total_mults, ratio,
                    ann.total_adds < snn.total_adds ? "<" : ">=", lo, hi)};
}

// ---------------------------------------------------------------------------
// 10. Frechet distance unit checks.

Outcome FrechetChecks() {
  RngStream rng(10, 0xA7);
  const Tensor a = Uniform({300, 6}, rng, -1, 1);
  const double same = FrechetDistance(a, a);
  const float c = 0.70710677f;  // {-c, c} has unbiased variance 1
  const double one = FrechetDistance(Tensor({2, 1}, {-c, c}), Tensor({2, 1}, {1 - c, 1 + c}));
  bool symmetric = true;
  for (uint64_t i = 0; i < 10; ++i) {
    RngStream r(i, 0xA8);
    const Tensor x = Uniform({80, 5}, r, -1, 1), y = Uniform({90, 5}, r, -2, 1);
    symmetric = symmetric && FrechetDistance(x, y) == FrechetDistance(y, x);
  }
  const bool pass = same <= 1e-6 && std::abs(one - 1.0) <= 1e-6 && symmetric;
  return {pass, Fmt("identical sets %.1e (<= 1e-6); 1-D unit shift %.9f (1.0); symmetric on 10 "
                    "random pairs: %s",
                    same, one, symmetric ? "yes" : "NO")};
}

// ---------------------------------------------------------------------------
// 11. I/O round trips.

Outcome IoRoundTrips() {
  Shared& s = State();
  std::vector<std::string> failures;
  auto check = [&](bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  };
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "fsvae_acceptance_io";
  fs::remove_all(dir);
  fs::create_directories(dir);

  // IDX: hand-written big-endian bytes, and the real files re-encoded.
  std::vector<uint8_t> idx{0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 4, 0, 0, 0, 4};
  for (int i = 0; i < 32; ++i) idx.push_back(static_cast<uint8_t>(i * 8));
  const IdxDataset parsed = ParseIdxImages(idx, "hand");
  check(parsed.count == 2 && parsed.rows == 4 && parsed.cols == 4 &&
            std::equal(parsed.pixels.begin(), parsed.pixels.end(), idx.begin() + 16),
        "IDX parse");
  check(EncodeIdxImages(parsed) == idx, "IDX encode");
  auto truncated = idx;
  truncated.resize(truncated.size() - 4);
  bool rejected = false;
  try {
    ParseIdxImages(truncated, "hand");
  } catch (const FormatError& e) {
    rejected = std::string(e.what()).find("expected 48 bytes, got 44") != std::string::npos;
  }
  check(rejected, "IDX truncation message");
  auto label_magic = idx;
  label_magic[3] = 1;
  bool magic_rejected = false;
  try {
    ParseIdxImages(label_magic, "hand");
  } catch (const FormatError&) {
    magic_rejected = true;
  }
  check(magic_rejected, "IDX magic check");
  try {
    for (const char* split : {"train", "t10k"}) {
      const IdxDataset real = LoadIdxSplit(s.data_dir, split);
      const fs::path gz = fs::path(s.data_dir) / (std::string(split) + "-images-idx3-ubyte.gz");
      const fs::path raw = fs::path(s.data_dir) / (std::string(split) + "-images-idx3-ubyte");
      const auto bytes = ReadFileBytes(fs::exists(gz) ? gz.string() : raw.string());
      check(EncodeIdxImages(real) == bytes, std::string("IDX re-encode of ") + split);
    }
  } catch (const Error& e) {
    check(false, std::string("MNIST load: ") + e.what());
  }

  // PGM: exact bytes both ways.
  GrayImage img{.width = 7, .height = 5, .pixels = {}};
  for (int i = 0; i < 35; ++i) img.pixels.push_back(static_cast<uint8_t>((i * 37) % 256));
  WritePgm((dir / "a.pgm").string(), img);
  const GrayImage back = ReadPgm((dir / "a.pgm").string());
  check(back.width == 7 && back.height == 5 && back.pixels == img.pixels, "PGM round trip");
  WriteImageGrid(Tensor({1, 1, 3, 3}, -1.0f), (dir / "black.pgm").string());
  WriteImageGrid(Tensor({1, 1, 3, 3}, 1.0f), (dir / "white.pgm").string());
  check(ReadPgm((dir / "black.pgm").string()).pixels == std::vector<uint8_t>(9, 0) &&
            ReadPgm((dir / "white.pgm").string()).pixels == std::vector<uint8_t>(9, 255),
        "PGM endpoint mapping");

  // Checkpoint: the trained desk model (or a fresh one) survives bit-exactly.
  RunConfig cfg = s.desk ? *s.desk : ParseConfigText("");
  std::unique_ptr<Fsvae> fresh;
  Fsvae* model = s.desk_model.get();
  if (!model) {
    fresh = std::make_unique<Fsvae>(cfg.model, 1);
    model = fresh.get();
  }
  Checkpoint ckpt;
  ckpt.config_text = FormatConfig(cfg);
  ckpt.meta["next_epoch"] = "20";
  StoreModel(*model, ckpt);
  SaveCheckpoint(ckpt, (dir / "m.ckpt").string());
  const Checkpoint loaded = LoadCheckpoint((dir / "m.ckpt").string());
  check(loaded == ckpt, "checkpoint round trip");
  Fsvae reloaded(cfg.model, 999);
  LoadModel(reloaded, loaded);
  check(StateCopy(reloaded) == StateCopy(*model), "checkpoint restores model state");
  auto bytes = ReadFileBytes((dir / "m.ckpt").string());
  bytes[bytes.size() / 2] ^= 0x01;
  bool corrupt_rejected = false;
  try {
    DecodeCheckpoint(bytes, "m");
  } catch (const FormatError& e) {
    corrupt_rejected = std::string(e.what()).find("checksum") != std::string::npos;
  }
  check(corrupt_rejected, "checkpoint corruption detection");
  RunConfig other = cfg;
  other.model.latent.k += 1;
  Fsvae mismatched(other.model, 1);
  bool guard = false;
  try {
    LoadModel(mismatched, loaded);
  } catch (const ConfigError& e) {
    guard = std::string(e.what()).find("k") != std::string::npos;
  }
  check(guard, "checkpoint config guard");

  // Config: defaults, round trip, and validation.
  const RunConfig defaults = ParseConfigText("");
  check(defaults.model.latent.timesteps == 16 && defaults.model.latent.channels == 128 &&
            defaults.model.latent.k == 20 && defaults.train.lr == 1e-3f,
        "config defaults");
  check(FormatConfig(ParseConfigText(FormatConfig(cfg))) == FormatConfig(cfg),
        "config round trip");
  bool k_rejected = false;
  try {
    ParseConfigText("k = 1\n");
  } catch (const ConfigError& e) {
    k_rejected = std::string(e.what()).find("k must be >= 2") != std::string::npos;
  }
  check(k_rejected, "config k >= 2");
  fs::remove_all(dir);

  std::string detail = "IDX parse/encode/errors, MNIST re-encode, PGM, checkpoint "
                       "(round trip, corruption, config guard), config parse";
  if (!failures.empty()) {
    detail = "failed:";
    for (const auto& f : failures) detail += " [" + f + "]";
  }
  return {failures.empty(), detail};
}

struct Criterion {
  int id;
  const char* name;
  Outcome (*run)();
};

}  // namespace
}  // namespace fsvae

int main(int argc, char** argv) {
  using namespace fsvae;
  TuneAllocator();
  const char* env = std::getenv("FSVAE_DATA_DIR");
  State().data_dir = env && *env ? env : FSVAE_DATA_DIR;

  const Criterion all[] = {
      {1, "neuron dynamics oracle", NeuronDynamics},
      {2, "PSP recurrence vs closed form", PspEquivalence},
      {3, "sampler statistics", SamplerStatistics},
      {4, "MMD identities", MmdIdentities},
      {5, "gradient checks", GradientChecks},
      {6, "spike-to-image decode", DecodeGeometricSum},
      {7, "desk-scale training", DeskTraining},
      {8, "loss-flavor ablation", LossAblation},
      {9, "operation counting", OpCounting},
      {10, "Frechet distance", FrechetChecks},
      {11, "I/O round trips", IoRoundTrips},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const Criterion& c : all) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    const auto start = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s [%d] %s: %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", c.id, c.name,
                o.detail.c_str(), Seconds(start));
    std::fflush(stdout);
  }
  std::printf("%d criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}
