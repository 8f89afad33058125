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

#ifndef FSVAE_LATENT_H_
#define FSVAE_LATENT_H_

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "fsvae/layers.h"
#include "fsvae/rng.h"
#include "fsvae/snn.h"
#include "fsvae/tensor.h"

namespace fsvae {

struct LatentConfig {
  int64_t channels = 128;  // C
  int64_t k = 20;          // choices per channel
  int64_t timesteps = 16;  // T

  void Validate() const;
};

// Firing probabilities of the latent channels, [T, N, C]. Values produced
// from sampler output lie on the 1/k grid.
struct BernoulliParams {
  Tensor pi;
};

// Output of one autoregressive sampling step for a batch of N sequences.
// `z` and `zeta` hold 0/1 values; `chosen[n*C + c]` is the index inside
// block c that was copied into z.
struct LatentStep {
  Tensor z;     // [N, C]
  Tensor zeta;  // [N, kC]
  Tensor pi;    // [N, C]
  std::vector<int32_t> chosen;
};

// A full T-step chain.
struct LatentSampleRecord {
  BitTensor z;         // [T, N, C]
  BitTensor zeta;      // [T, N, kC]
  BernoulliParams pi;  // [T, N, C]
  std::vector<int32_t> chosen;  // [T, N, C]
};

// Three spiking FC layers (Linear -> tdBN -> LIF) whose membrane state
// persists across Step() calls. Batch-norm statistics are taken over the
// batch at each step because the chain is generated one timestep at a time.
class SamplerNet {
 public:
  static constexpr int kLayers = 3;

  struct StepTrace {
    std::array<LayerCache, kLayers> fc;
    std::array<LayerCache, kLayers> bn;
    std::array<Tensor, kLayers> u;
    std::array<Tensor, kLayers> spikes;
    bool valid = false;
  };
  // Membrane-gradient carry between consecutive backward steps.
  struct Carry {
    std::array<Tensor, kLayers> grad_u;
  };

  SamplerNet(std::string name, int64_t input_width, int64_t hidden_width,
             const LatentConfig& latent, const LifConfig& lif, RngStream& init);

  // Clears every NeuronState for a fresh batch of `batch` sequences.
  void Reset(int64_t batch);
  // input [N, input_width] (0/1) -> zeta [N, kC] (0/1).
  Tensor Step(const Tensor& input, bool training, StepTrace* trace);
  // One reverse-time step of BPTT. Call with traces from t = T-1 down to 0
  // sharing one Carry. Returns dL/d input (empty unless requested).
  Tensor BackwardStep(const Tensor& grad_zeta, const StepTrace& trace,
                      Carry& carry, bool need_input_grad);

  std::vector<Parameter*> Parameters();
  std::vector<TdBatchNorm*> Norms();
  const std::vector<NeuronState>& states() const { return states_; }
  const std::string& name() const { return name_; }
  std::string LayerName(int i) const { return name_ + ".fc" + std::to_string(i); }
  int64_t input_width() const { return input_width_; }
  int64_t hidden_width() const { return hidden_width_; }
  const LatentConfig& latent() const { return latent_; }
  const LifConfig& lif() const { return lif_; }
  // Spike count and neuron-steps of each layer since the last Reset().
  const std::array<double, kLayers>& spike_totals() const { return spike_totals_; }
  const std::array<double, kLayers>& step_totals() const { return step_totals_; }

 private:
  std::string name_;
  int64_t input_width_, hidden_width_;
  LatentConfig latent_;
  LifConfig lif_;
  std::vector<Linear> fc_;
  std::vector<TdBatchNorm> bn_;
  std::vector<NeuronState> states_;
  std::array<double, kLayers> spike_totals_{};
  std::array<double, kLayers> step_totals_{};
};

// z[n,c] = zeta[n, c*k + r] with r uniform in [0,k), one draw per (n,c).
Tensor RandomSelect(const Tensor& zeta, int64_t k, RngStream& rng,
                    std::vector<int32_t>* chosen);
// pi[n,c] = mean(zeta[n, c*k : (c+1)*k]).
Tensor BlockMean(const Tensor& zeta, int64_t k);

LatentStep PosteriorStep(SamplerNet& net, const Tensor& z_prev,
                         const Tensor& encoded, RngStream& rng, bool training,
                         SamplerNet::StepTrace* trace);
LatentStep PriorStep(SamplerNet& net, const Tensor& z_prev, RngStream& rng,
                     bool training, SamplerNet::StepTrace* trace);

// Per batch element: z_p with probability p_mix, otherwise z_q.
Tensor ScheduledMix(const Tensor& z_q, const Tensor& z_p, float p_mix,
                    RngStream& rng);

// Runs the posterior chain from z_0 = 0 over encoder output [T*N, C].
LatentSampleRecord SamplePosterior(SamplerNet& net, const Tensor& encoded,
                                   int64_t batch, RngStream& rng, bool training,
                                   std::vector<SamplerNet::StepTrace>* traces);
// Runs the prior chain from z_0 = 0 for `timesteps` steps.
LatentSampleRecord SamplePrior(SamplerNet& net, int64_t timesteps,
                               int64_t batch, RngStream& rng, bool training);

// Allocates a zeroed record for `timesteps` steps of `batch` sequences.
LatentSampleRecord MakeRecord(int64_t timesteps, int64_t batch,
                              const LatentConfig& cfg);
// Writes `step` into slot t of `rec`.
void StoreStep(const LatentStep& step, int64_t t, LatentSampleRecord& rec);

// [N, a] ++ [N, b] -> [N, a+b]
Tensor ConcatColumns(const Tensor& a, const Tensor& b);

}  // namespace fsvae

#endif  // FSVAE_LATENT_H_
