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

#include "fsvae/snn.h"

#include <algorithm>
#include <cmath>

#include "fsvae/errors.h"

namespace fsvae {

void LifConfig::Validate() const {
  if (!(tau_decay > 0.0f && tau_decay < 1.0f)) {
    throw ConfigError("tau_decay must lie in (0,1), got " + std::to_string(tau_decay));
  }
  if (!(v_th > 0.0f)) throw ConfigError("v_th must be > 0, got " + std::to_string(v_th));
  if (!(surrogate_width > 0.0f)) {
    throw ConfigError("surrogate_width must be > 0, got " +
                      std::to_string(surrogate_width));
  }
}

BitTensor LifStep(NeuronState& state, const Tensor& x, const LifConfig& cfg) {
  if (state.u.shape() != x.shape() || state.o_prev.shape() != x.shape()) {
    throw ShapeError("lif_step: state " + ShapeString(state.u.shape()) +
                     " vs input " + ShapeString(x.shape()));
  }
  x.CheckFinite("lif_step input");
  BitTensor out(x.shape());
  for (int64_t i = 0; i < x.size(); ++i) {
    out.Set(i, LifUpdate(state.u[i], state.o_prev.Get(i), x[i], cfg));
  }
  state.o_prev = out;
  return out;
}

void LifForwardSequence(const Tensor& x, int64_t timesteps,
                        const LifConfig& cfg, Tensor& u, Tensor& spikes) {
  if (timesteps < 1 || x.size() % timesteps != 0) {
    throw ShapeError("lif: " + ShapeString(x.shape()) + " is not " +
                     std::to_string(timesteps) + " stacked frames");
  }
  x.CheckFinite("lif input");
  const int64_t frame = x.size() / timesteps;
  u = Tensor(x.shape());
  spikes = Tensor(x.shape());
  const float tau = cfg.tau_decay, vth = cfg.v_th;
  for (int64_t t = 0; t < timesteps; ++t) {
    const float* xt = x.data() + t * frame;
    float* ut = u.data() + t * frame;
    float* ot = spikes.data() + t * frame;
    if (t == 0) {
      for (int64_t i = 0; i < frame; ++i) {
        ut[i] = xt[i];
        ot[i] = ut[i] >= vth ? 1.0f : 0.0f;
      }
      continue;
    }
    const float* up = ut - frame;
    const float* op = ot - frame;
    // Same arithmetic as LifUpdate, written branch-free over the frame.
    for (int64_t i = 0; i < frame; ++i) {
      ut[i] = (op[i] != 0.0f ? 0.0f : tau * up[i]) + xt[i];
      ot[i] = ut[i] >= vth ? 1.0f : 0.0f;
    }
  }
}

Tensor LifBackwardSequence(const Tensor& grad_spikes, const Tensor& u,
                           const Tensor& spikes, int64_t timesteps,
                           const LifConfig& cfg) {
  if (grad_spikes.shape() != u.shape() || spikes.shape() != u.shape()) {
    throw ShapeError("lif backward: upstream grad " +
                     ShapeString(grad_spikes.shape()) + " vs state " +
                     ShapeString(u.shape()));
  }
  const int64_t frame = u.size() / timesteps;
  Tensor gx(u.shape());
  std::vector<float> carry(static_cast<size_t>(frame), 0.0f);
  for (int64_t t = timesteps - 1; t >= 0; --t) {
    const int64_t off = t * frame;
    for (int64_t i = 0; i < frame; ++i) {
      float& c = carry[static_cast<size_t>(i)];
      // u_{t+1} depends on u_t through tau * (1 - o_t).
      const float gu = grad_spikes[off + i] * SurrogateGrad(u[off + i], cfg) +
                       (spikes[off + i] != 0.0f ? 0.0f : c);
      gx[off + i] = gu;
      c = gu * cfg.tau_decay;
    }
  }
  return gx;
}

PspState PspUpdate(const PspState& state, const BitTensor& z) {
  if (state.psp.shape() != z.shape()) {
    throw ShapeError("psp_update: state " + ShapeString(state.psp.shape()) +
                     " vs spikes " + ShapeString(z.shape()));
  }
  PspState next{Tensor(state.psp.shape()), state.tau_syn};
  const float inv = 1.0f / state.tau_syn;
  for (int64_t i = 0; i < z.size(); ++i) {
    next.psp[i] = (1.0f - inv) * state.psp[i] + inv * (z.Get(i) ? 1.0f : 0.0f);
  }
  return next;
}

Tensor PspFilter(const Tensor& seq, float tau_syn) {
  if (seq.rank() < 1) throw ShapeError("psp: sequence needs a time axis");
  if (!(tau_syn >= 1.0f)) {
    throw ConfigError("tau_syn must be >= 1, got " + std::to_string(tau_syn));
  }
  const int64_t steps = seq.dim(0);
  const int64_t frame = steps == 0 ? 0 : seq.size() / steps;
  const float inv = 1.0f / tau_syn;
  Tensor out(seq.shape());
  for (int64_t t = 0; t < steps; ++t) {
    for (int64_t i = 0; i < frame; ++i) {
      const float prev = t > 0 ? out[(t - 1) * frame + i] : 0.0f;
      out[t * frame + i] = (1.0f - inv) * prev + inv * seq[t * frame + i];
    }
  }
  return out;
}

Tensor PspFilterBackward(const Tensor& grad_filtered, float tau_syn) {
  const int64_t steps = grad_filtered.dim(0);
  const int64_t frame = steps == 0 ? 0 : grad_filtered.size() / steps;
  const float inv = 1.0f / tau_syn;
  Tensor g(grad_filtered.shape());
  std::vector<float> acc(static_cast<size_t>(frame), 0.0f);
  for (int64_t t = steps - 1; t >= 0; --t) {
    for (int64_t i = 0; i < frame; ++i) {
      float& a = acc[static_cast<size_t>(i)];
      a = grad_filtered[t * frame + i] + (1.0f - inv) * a;
      g[t * frame + i] = inv * a;
    }
  }
  return g;
}

Tensor RepeatFrames(const Tensor& frame, int64_t timesteps) {
  Shape s = frame.shape();
  s[0] *= timesteps;
  Tensor out(s);
  for (int64_t t = 0; t < timesteps; ++t) {
    std::copy_n(frame.data(), frame.size(), out.data() + t * frame.size());
  }
  return out;
}

Tensor SumFrames(const Tensor& stack, int64_t timesteps) {
  Shape s = stack.shape();
  if (s.empty() || s[0] % timesteps != 0) {
    throw ShapeError("SumFrames: " + ShapeString(s) + " is not " +
                     std::to_string(timesteps) + " stacked frames");
  }
  s[0] /= timesteps;
  Tensor out(s);
  const int64_t frame = out.size();
  for (int64_t t = 0; t < timesteps; ++t)
    for (int64_t i = 0; i < frame; ++i) out[i] += stack[t * frame + i];
  return out;
}

SpikingLayer::SpikingLayer(std::string name, std::unique_ptr<Layer> synapse,
                           int64_t channels, const LifConfig& lif)
    : name_(name),
      synapse_(std::move(synapse)),
      bn_(name + ".bn", channels, lif.v_th),
      lif_(lif) {
  lif_.Validate();
}

Tensor SpikingLayer::Forward(const Tensor& input, int64_t timesteps,
                             bool time_invariant, bool training, Trace* trace) {
  LayerCache* syn_cache = trace ? &trace->synapse : nullptr;
  Tensor pre = synapse_->Forward(input, syn_cache);
  if (time_invariant) pre = RepeatFrames(pre, timesteps);
  Tensor y = bn_.Forward(pre, training, trace ? &trace->bn : nullptr);
  Tensor u, spikes;
  LifForwardSequence(y, timesteps, lif_, u, spikes);
  if (trace) {
    trace->u = std::move(u);
    trace->spikes = spikes;
    trace->timesteps = timesteps;
    trace->time_invariant = time_invariant;
    trace->valid = true;
  }
  return spikes;
}

Tensor SpikingLayer::Backward(const Tensor& grad_spikes, const Trace& trace,
                              bool need_input_grad) {
  if (!trace.valid) throw Error(name_ + ": backward without saved forward state");
  Tensor gy = LifBackwardSequence(grad_spikes, trace.u, trace.spikes,
                                  trace.timesteps, lif_);
  Tensor gpre = bn_.Backward(gy, trace.bn);
  if (trace.time_invariant) gpre = SumFrames(gpre, trace.timesteps);
  return synapse_->Backward(gpre, trace.synapse, need_input_grad);
}

std::vector<Parameter*> SpikingLayer::Parameters() {
  std::vector<Parameter*> out = synapse_->Parameters();
  for (Parameter* p : bn_.Parameters()) out.push_back(p);
  return out;
}

}  // namespace fsvae
