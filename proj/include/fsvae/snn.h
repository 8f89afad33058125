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

#ifndef FSVAE_SNN_H_
#define FSVAE_SNN_H_

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "fsvae/layers.h"
#include "fsvae/tensor.h"

namespace fsvae {

struct LifConfig {
  float tau_decay = 0.25f;
  float v_th = 0.5f;
  float surrogate_width = 1.0f;  // a

  void Validate() const;
};

// Membrane potentials and last output spikes of one layer.
struct NeuronState {
  Tensor u;
  BitTensor o_prev;

  static NeuronState Zeros(const Shape& shape) {
    return {Tensor(shape), BitTensor(shape)};
  }
};

// One neuron, one step:
//   u <- tau_decay * u * (1 - o_prev) + x;  returns u >= v_th.
inline bool LifUpdate(float& u, bool o_prev, float x, const LifConfig& cfg) {
  u = (o_prev ? 0.0f : cfg.tau_decay * u) + x;
  return u >= cfg.v_th;
}

// d o / d u: 1/a inside |u - v_th| < a/2, zero outside.
inline float SurrogateGrad(float u, const LifConfig& cfg) {
  const float a = cfg.surrogate_width;
  return (u - cfg.v_th < a * 0.5f && cfg.v_th - u < a * 0.5f) ? 1.0f / a : 0.0f;
}

// Advances `state` by one timestep on input current `x` and returns the
// emitted spikes. Throws NumericError for non-finite x.
BitTensor LifStep(NeuronState& state, const Tensor& x, const LifConfig& cfg);

// Runs LIF over a [T*N, ...] stack of input currents (time-major) from rest.
// Writes membrane potentials and 0/1 spikes, both shaped like `x`.
void LifForwardSequence(const Tensor& x, int64_t timesteps,
                        const LifConfig& cfg, Tensor& u, Tensor& spikes);

// BPTT through LifForwardSequence. The reset gate (1 - o_{t-1}) is treated
// as a constant, so dL/du_t = dL/do_t * s'(u_t) + dL/du_{t+1} * tau (1-o_t).
// Returns dL/dx with the shape of `u`.
Tensor LifBackwardSequence(const Tensor& grad_spikes, const Tensor& u,
                           const Tensor& spikes, int64_t timesteps,
                           const LifConfig& cfg);

// First-order synaptic filter.
struct PspState {
  Tensor psp;
  float tau_syn = 2.0f;
};

// psp <- (1 - 1/tau) psp + (1/tau) z.
PspState PspUpdate(const PspState& state, const BitTensor& z);

// Filters a real-valued [T, ...] sequence (psp_0 = 0) and returns the
// filtered [T, ...] sequence. tau_syn == 1 is the identity.
Tensor PspFilter(const Tensor& seq, float tau_syn);
// Adjoint of PspFilter.
Tensor PspFilterBackward(const Tensor& grad_filtered, float tau_syn);

// Linear map -> tdBN -> LIF, unrolled over T timesteps. Activations are
// time-major: [T*N, ...]. Batch-norm statistics cover the whole T window.
class SpikingLayer {
 public:
  struct Trace {
    LayerCache synapse;
    LayerCache bn;
    Tensor u;
    Tensor spikes;
    int64_t timesteps = 0;
    bool time_invariant = false;
    bool valid = false;
  };

  SpikingLayer(std::string name, std::unique_ptr<Layer> synapse,
               int64_t channels, const LifConfig& lif);

  // `input` is [T*N, ...]; or, with `time_invariant`, a single [N, ...]
  // frame presented unchanged at every timestep (direct input encoding).
  Tensor Forward(const Tensor& input, int64_t timesteps, bool time_invariant,
                 bool training, Trace* trace);
  // Gradient w.r.t. the output spikes -> gradient w.r.t. the input
  // (empty when `need_input_grad` is false).
  Tensor Backward(const Tensor& grad_spikes, const Trace& trace,
                  bool need_input_grad);

  std::vector<Parameter*> Parameters();
  Layer& synapse() { return *synapse_; }
  const Layer& synapse() const { return *synapse_; }
  TdBatchNorm& bn() { return bn_; }
  const TdBatchNorm& bn() const { return bn_; }
  const LifConfig& lif() const { return lif_; }
  const std::string& name() const { return name_; }

 private:
  std::string name_;
  std::unique_ptr<Layer> synapse_;
  TdBatchNorm bn_;
  LifConfig lif_;
};

// Repeats an [N, ...] frame T times into [T*N, ...].
Tensor RepeatFrames(const Tensor& frame, int64_t timesteps);
// Sums a [T*N, ...] stack over T into [N, ...].
Tensor SumFrames(const Tensor& stack, int64_t timesteps);

}  // namespace fsvae

#endif  // FSVAE_SNN_H_
