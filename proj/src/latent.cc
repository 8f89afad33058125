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

#include "fsvae/latent.h"

#include <algorithm>
#include <cmath>

#include "fsvae/errors.h"

namespace fsvae {

void LatentConfig::Validate() const {
  if (k < 2) throw ConfigError("k must be >= 2, got " + std::to_string(k));
  if (channels < 1) throw ConfigError("latent channels must be >= 1");
  if (timesteps < 1) throw ConfigError("timesteps must be >= 1");
}

SamplerNet::SamplerNet(std::string name, int64_t input_width,
                       int64_t hidden_width, const LatentConfig& latent,
                       const LifConfig& lif, RngStream& init)
    : name_(std::move(name)),
      input_width_(input_width),
      hidden_width_(hidden_width),
      latent_(latent),
      lif_(lif) {
  latent_.Validate();
  lif_.Validate();
  const int64_t widths[kLayers + 1] = {input_width, hidden_width, hidden_width,
                                       latent.k * latent.channels};
  for (int i = 0; i < kLayers; ++i) {
    fc_.emplace_back(LayerName(i), widths[i], widths[i + 1], /*bias=*/false,
                     std::sqrt(2.0f), init);
    bn_.emplace_back(LayerName(i) + ".bn", widths[i + 1], lif.v_th);
  }
  Reset(1);
}

void SamplerNet::Reset(int64_t batch) {
  states_.clear();
  for (int i = 0; i < kLayers; ++i) {
    states_.push_back(NeuronState::Zeros({batch, fc_[static_cast<size_t>(i)].out_features()}));
  }
  spike_totals_.fill(0.0);
  step_totals_.fill(0.0);
}

Tensor SamplerNet::Step(const Tensor& input, bool training, StepTrace* trace) {
  if (input.rank() != 2 || input.dim(1) != input_width_) {
    throw ShapeError(name_ + ": input " + ShapeString(input.shape()) +
                     ", expected [N," + std::to_string(input_width_) + "]");
  }
  if (states_.front().u.dim(0) != input.dim(0)) {
    throw ShapeError(name_ + ": batch " + std::to_string(input.dim(0)) +
                     " does not match state batch " +
                     std::to_string(states_.front().u.dim(0)) + " (call Reset)");
  }
  Tensor h = input;
  for (int i = 0; i < kLayers; ++i) {
    const size_t li = static_cast<size_t>(i);
    Tensor pre = fc_[li].Forward(h, trace ? &trace->fc[li] : nullptr);
    Tensor y = bn_[li].Forward(pre, training, trace ? &trace->bn[li] : nullptr);
    y.CheckFinite("sampler input current");
    NeuronState& st = states_[li];
    Tensor spikes(y.shape());
    BitTensor fired(y.shape());
    double count = 0.0;
    for (int64_t j = 0; j < y.size(); ++j) {
      const bool o = LifUpdate(st.u[j], st.o_prev.Get(j), y[j], lif_);
      fired.Set(j, o);
      spikes[j] = o ? 1.0f : 0.0f;
      count += o;
    }
    st.o_prev = std::move(fired);
    spike_totals_[li] += count;
    step_totals_[li] += static_cast<double>(y.size());
    if (trace) {
      trace->u[li] = st.u;
      trace->spikes[li] = spikes;
    }
    h = std::move(spikes);
  }
  if (trace) trace->valid = true;
  return h;
}

Tensor SamplerNet::BackwardStep(const Tensor& grad_zeta, const StepTrace& trace,
                                Carry& carry, bool need_input_grad) {
  if (!trace.valid) throw Error(name_ + ": backward without saved forward state");
  Tensor g = grad_zeta;
  for (int i = kLayers - 1; i >= 0; --i) {
    const size_t li = static_cast<size_t>(i);
    const Tensor& u = trace.u[li];
    const Tensor& o = trace.spikes[li];
    if (g.shape() != u.shape()) {
      throw ShapeError(name_ + " backward: upstream grad " +
                       ShapeString(g.shape()) + " vs layer output " +
                       ShapeString(u.shape()));
    }
    Tensor& c = carry.grad_u[li];
    if (c.shape() != u.shape()) c = Tensor(u.shape());
    Tensor gy(u.shape());
    for (int64_t j = 0; j < u.size(); ++j) {
      // u_{t+1} depends on u_t through tau * (1 - o_t).
      const float gu = g[j] * SurrogateGrad(u[j], lif_) + (o[j] != 0.0f ? 0.0f : c[j]);
      gy[j] = gu;
      c[j] = gu * lif_.tau_decay;
    }
    Tensor gpre = bn_[li].Backward(gy, trace.bn[li]);
    g = fc_[li].Backward(gpre, trace.fc[li], i > 0 || need_input_grad);
  }
  return g;
}

std::vector<Parameter*> SamplerNet::Parameters() {
  std::vector<Parameter*> out;
  for (int i = 0; i < kLayers; ++i) {
    for (Parameter* p : fc_[static_cast<size_t>(i)].Parameters()) out.push_back(p);
    for (Parameter* p : bn_[static_cast<size_t>(i)].Parameters()) out.push_back(p);
  }
  return out;
}

std::vector<TdBatchNorm*> SamplerNet::Norms() {
  std::vector<TdBatchNorm*> out;
  for (auto& b : bn_) out.push_back(&b);
  return out;
}

Tensor RandomSelect(const Tensor& zeta, int64_t k, RngStream& rng,
                    std::vector<int32_t>* chosen) {
  if (zeta.rank() != 2 || k < 1 || zeta.dim(1) % k != 0) {
    throw ShapeError("random_select: " + ShapeString(zeta.shape()) +
                     " is not [N, k*C] for k=" + std::to_string(k));
  }
  const int64_t n = zeta.dim(0), c = zeta.dim(1) / k;
  Tensor z({n, c});
  if (chosen) chosen->resize(static_cast<size_t>(n * c));
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t j = 0; j < c; ++j) {
      const int64_t r = static_cast<int64_t>(rng.UniformInt(static_cast<uint64_t>(k)));
      z[i * c + j] = zeta[i * c * k + j * k + r];
      if (chosen) (*chosen)[static_cast<size_t>(i * c + j)] = static_cast<int32_t>(r);
    }
  }
  return z;
}

Tensor BlockMean(const Tensor& zeta, int64_t k) {
  if (zeta.rank() != 2 || k < 1 || zeta.dim(1) % k != 0) {
    throw ShapeError("block mean: " + ShapeString(zeta.shape()) +
                     " is not [N, k*C] for k=" + std::to_string(k));
  }
  const int64_t n = zeta.dim(0), c = zeta.dim(1) / k;
  Tensor pi({n, c});
  for (int64_t i = 0; i < n * c; ++i) {
    float s = 0.0f;
    for (int64_t j = 0; j < k; ++j) s += zeta[i * k + j];
    pi[i] = s / static_cast<float>(k);
  }
  return pi;
}

namespace {

LatentStep Sample(SamplerNet& net, const Tensor& input, RngStream& rng,
                  bool training, SamplerNet::StepTrace* trace) {
  LatentStep step;
  step.zeta = net.Step(input, training, trace);
  step.z = RandomSelect(step.zeta, net.latent().k, rng, &step.chosen);
  step.pi = BlockMean(step.zeta, net.latent().k);
  return step;
}

}  // namespace

void StoreStep(const LatentStep& step, int64_t t, LatentSampleRecord& rec) {
  const int64_t zn = step.z.size(), qn = step.zeta.size();
  for (int64_t i = 0; i < zn; ++i) {
    rec.z.Set(t * zn + i, step.z[i] != 0.0f);
    rec.pi.pi[t * zn + i] = step.pi[i];
    rec.chosen[static_cast<size_t>(t * zn + i)] = step.chosen[static_cast<size_t>(i)];
  }
  for (int64_t i = 0; i < qn; ++i) rec.zeta.Set(t * qn + i, step.zeta[i] != 0.0f);
}

LatentSampleRecord MakeRecord(int64_t t, int64_t n, const LatentConfig& cfg) {
  LatentSampleRecord rec;
  rec.z = BitTensor({t, n, cfg.channels});
  rec.zeta = BitTensor({t, n, cfg.k * cfg.channels});
  rec.pi.pi = Tensor({t, n, cfg.channels});
  rec.chosen.assign(static_cast<size_t>(t * n * cfg.channels), 0);
  return rec;
}

LatentStep PosteriorStep(SamplerNet& net, const Tensor& z_prev,
                         const Tensor& encoded, RngStream& rng, bool training,
                         SamplerNet::StepTrace* trace) {
  const int64_t c = net.latent().channels;
  if (z_prev.rank() != 2 || z_prev.dim(1) != c || encoded.shape() != z_prev.shape()) {
    throw ShapeError("posterior_step: z_prev " + ShapeString(z_prev.shape()) +
                     " and encoder output " + ShapeString(encoded.shape()) +
                     " must both be [N," + std::to_string(c) + "]");
  }
  return Sample(net, ConcatColumns(z_prev, encoded), rng, training, trace);
}

LatentStep PriorStep(SamplerNet& net, const Tensor& z_prev, RngStream& rng,
                     bool training, SamplerNet::StepTrace* trace) {
  return Sample(net, z_prev, rng, training, trace);
}

Tensor ScheduledMix(const Tensor& z_q, const Tensor& z_p, float p_mix,
                    RngStream& rng) {
  if (!(p_mix >= 0.0f && p_mix <= 1.0f)) {
    throw ConfigError("scheduled_mix: p_mix must lie in [0,1], got " +
                      std::to_string(p_mix));
  }
  if (z_q.shape() != z_p.shape() || z_q.rank() != 2) {
    throw ShapeError("scheduled_mix: " + ShapeString(z_q.shape()) + " vs " +
                     ShapeString(z_p.shape()));
  }
  const int64_t n = z_q.dim(0), c = z_q.dim(1);
  Tensor out = z_q;
  for (int64_t i = 0; i < n; ++i) {
    if (rng.UniformFloat() < p_mix) {
      std::copy_n(z_p.data() + i * c, c, out.data() + i * c);
    }
  }
  return out;
}

LatentSampleRecord SamplePosterior(SamplerNet& net, const Tensor& encoded,
                                   int64_t batch, RngStream& rng, bool training,
                                   std::vector<SamplerNet::StepTrace>* traces) {
  const LatentConfig& cfg = net.latent();
  const int64_t c = cfg.channels;
  if (batch < 1 || encoded.rank() != 2 || encoded.dim(1) != c ||
      encoded.dim(0) % batch != 0) {
    throw ShapeError("sample_posterior: encoder output " +
                     ShapeString(encoded.shape()) + " is not [T*" +
                     std::to_string(batch) + "," + std::to_string(c) + "]");
  }
  const int64_t steps = encoded.dim(0) / batch;
  net.Reset(batch);
  if (traces) traces->assign(static_cast<size_t>(steps), {});
  LatentSampleRecord rec = MakeRecord(steps, batch, cfg);
  Tensor z_prev({batch, c});
  Tensor frame({batch, c});
  for (int64_t t = 0; t < steps; ++t) {
    std::copy_n(encoded.data() + t * batch * c, batch * c, frame.data());
    LatentStep step = PosteriorStep(net, z_prev, frame, rng, training,
                                    traces ? &(*traces)[static_cast<size_t>(t)] : nullptr);
    StoreStep(step, t, rec);
    z_prev = std::move(step.z);
  }
  return rec;
}

LatentSampleRecord SamplePrior(SamplerNet& net, int64_t timesteps,
                               int64_t batch, RngStream& rng, bool training) {
  if (timesteps < 1 || batch < 1) {
    throw ConfigError("sample_prior: timesteps and batch must be >= 1");
  }
  const LatentConfig& cfg = net.latent();
  net.Reset(batch);
  LatentSampleRecord rec = MakeRecord(timesteps, batch, cfg);
  Tensor z_prev({batch, cfg.channels});
  for (int64_t t = 0; t < timesteps; ++t) {
    LatentStep step = PriorStep(net, z_prev, rng, training, nullptr);
    StoreStep(step, t, rec);
    z_prev = std::move(step.z);
  }
  return rec;
}

Tensor ConcatColumns(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(0) != b.dim(0)) {
    throw ShapeError("concat: " + ShapeString(a.shape()) + " vs " +
                     ShapeString(b.shape()));
  }
  const int64_t n = a.dim(0), ca = a.dim(1), cb = b.dim(1);
  Tensor out({n, ca + cb});
  for (int64_t i = 0; i < n; ++i) {
    std::copy_n(a.data() + i * ca, ca, out.data() + i * (ca + cb));
    std::copy_n(b.data() + i * cb, cb, out.data() + i * (ca + cb) + ca);
  }
  return out;
}

}  // namespace fsvae
